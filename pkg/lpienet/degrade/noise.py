#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Seeded random streams and the heteroscedastic Gaussian noise model."""

import numpy as np


def make_rng(seed, *stream):
    """Return a PCG64 generator for (seed, *stream).

    The stream keys (epoch, sample index, ...) are mixed by SeedSequence,
    so every sub-stream is independent and reproducible on its own.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *(int(s) for s in stream)])))


def noise_variance(x, beta1, beta2):
    """Per-pixel variance beta1 * x + beta2."""
    return beta1 * np.asarray(x, dtype=np.float64) + beta2


def add_noise(x, beta1, beta2, rng):
    """Return x + n with n ~ Normal(0, beta1 * x + beta2), independent per pixel.

    beta2 is a variance (intensity squared), not a standard deviation.
    """
    if beta1 < 0 or beta2 < 0:
        raise ValueError(f'add_noise: beta1 and beta2 must be >= 0, got {beta1}, {beta2}')
    x = np.asarray(x)
    if beta1 == 0 and beta2 == 0:
        return x.copy()
    variance = noise_variance(x, beta1, beta2)
    if (variance < 0).any():
        raise ValueError('add_noise: negative variance (x < 0 with beta1 > 0)')
    noise = rng.standard_normal(x.shape) * np.sqrt(variance)
    return (x + noise).astype(x.dtype, copy=False)
