#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Synthetic point spread functions and PSF convolution."""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from scipy import ndimage

from lpienet.globals import ShapeError

PSF_KINDS = ('dirac', 'gaussian', 'disk')


@dataclass(frozen=True, eq=False)
class PSF:
    """A normalized blur kernel.

    kernel is (k, k) when shared by every channel, (c, k, k) when per channel.
    kind and params describe how it was generated, for serialization.
    """

    kernel: np.ndarray
    kind: str = 'custom'
    params: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=np.float64)
        if kernel.ndim not in (2, 3):
            raise ShapeError('psf ndim', '2 or 3', kernel.ndim, where='psf')
        k, kw = kernel.shape[-2:]
        if k != kw:
            raise ShapeError('psf width', k, kw, where='psf')
        if k % 2 == 0:
            raise ShapeError('psf size', 'odd', k, where='psf')
        if (kernel < 0).any():
            raise ValueError('psf: entries must be nonnegative')
        sums = kernel.reshape(-1, k * k).sum(axis=1)
        if np.abs(sums - 1.0).max() > 1e-9:
            raise ValueError(f'psf: kernel must sum to 1, got {sums.tolist()}')
        object.__setattr__(self, 'kernel', kernel)

    @property
    def size(self):
        return self.kernel.shape[-1]

    @property
    def per_channel(self):
        return self.kernel.ndim == 3

    @property
    def is_dirac(self):
        center = self.size // 2
        dirac = np.zeros((self.size, self.size))
        dirac[center, center] = 1.0
        planes = self.kernel if self.per_channel else self.kernel[None]
        return all(np.array_equal(p, dirac) for p in planes)

    def channel_kernel(self, c):
        return self.kernel[c] if self.per_channel else self.kernel


def _check_size(size):
    if size < 1 or size % 2 == 0:
        raise ShapeError('psf size', 'odd', size, where='psf')


def _grid(size):
    r = size // 2
    return np.mgrid[-r : r + 1, -r : r + 1]


def make_dirac_psf(size=1):
    _check_size(size)
    kernel = np.zeros((size, size))
    kernel[size // 2, size // 2] = 1.0
    return PSF(kernel, kind='dirac', params={'size': size})


def _gaussian_kernel(size, sigma):
    if sigma <= 0:
        raise ValueError(f'psf: sigma must be > 0, got {sigma}')
    yy, xx = _grid(size)
    kernel = np.exp(-(xx**2 + yy**2) / (2.0 * sigma**2))
    return kernel / kernel.sum()


def make_gaussian_psf(size, sigma):
    """Isotropic Gaussian; a list of sigmas gives one kernel per channel."""
    _check_size(size)
    if np.ndim(sigma):
        kernel = np.stack([_gaussian_kernel(size, s) for s in sigma])
    else:
        kernel = _gaussian_kernel(size, sigma)
    return PSF(kernel, kind='gaussian', params={'size': size, 'sigma': sigma})


def make_disk_psf(size, radius):
    """Uniform disk of the given radius (pixels centered inside the radius)."""
    _check_size(size)
    if radius <= 0:
        raise ValueError(f'psf: radius must be > 0, got {radius}')
    yy, xx = _grid(size)
    kernel = (xx**2 + yy**2 <= radius**2).astype(np.float64)
    return PSF(kernel / kernel.sum(), kind='disk', params={'size': size, 'radius': radius})


def psf_convolve(x, psf):
    """Convolve each channel of x (n, c, h, w) with the PSF, reflect boundaries.

    Reflect repeats the edge sample (d c b a | a b c d), so a normalized
    symmetric kernel preserves the image mean.
    """
    x = np.asarray(x)
    if x.ndim != 4:
        raise ShapeError('ndim', 4, x.ndim, where='psf_convolve')
    if psf.per_channel and psf.kernel.shape[0] != x.shape[1]:
        raise ShapeError('c', psf.kernel.shape[0], x.shape[1], where='psf_convolve')
    out = np.empty_like(x)
    for n in range(x.shape[0]):
        for c in range(x.shape[1]):
            out[n, c] = ndimage.convolve(x[n, c], psf.channel_kernel(c), mode='reflect')
    return out
