#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Training losses and image quality metrics.

The losses are built from tape operations, so they return Nodes and their
gradients come from the op backward rules. The metrics return floats.
"""

import math
from dataclasses import dataclass

import numpy as np

from lpienet.autodiff import ops
from lpienet.globals import ConfigError, ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

GRADIENT_OPERATORS = ('forward', 'sobel')

_SOBEL = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


@dataclass(frozen=True)
class LossWeights:
    """alpha weighs the SSIM loss, beta the gradient loss; L1 has weight 1."""

    alpha: float = 0.5
    beta: float = 0.1
    gradient_operator: str = 'forward'

    def __post_init__(self):
        for key in ('alpha', 'beta'):
            value = getattr(self, key)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(key, f'must be finite and >= 0, got {value}')
        if self.gradient_operator not in GRADIENT_OPERATORS:
            raise ConfigError('gradient_operator', f'must be one of {GRADIENT_OPERATORS}')


def _pair(pred, target, where):
    pred, target = ops.as_node(pred), ops.as_node(target)
    for dim, a, b in zip('nchw', pred.shape, target.shape):
        if a != b:
            raise ShapeError(dim, a, b, where=where)
    return pred, target


def l1_loss(pred, target):
    """Mean absolute difference."""
    pred, target = _pair(pred, target, 'l1_loss')
    return ops.mean_all(ops.absolute(ops.sub(pred, target)))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    r = size // 2
    g = np.exp(-(np.arange(-r, r + 1) ** 2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim_map(pred, target, peak=1.0):
    """Per-pixel SSIM over the valid region of an 11x11 Gaussian window (sigma 1.5)."""
    pred, target = _pair(pred, target, 'ssim')
    if peak <= 0:
        raise ValueError(f'ssim: peak must be > 0, got {peak}')
    n, c, h, w = pred.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ShapeError('h, w', f'>= {SSIM_WINDOW}', (h, w), where='ssim')
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    window = np.broadcast_to(gaussian_window(), (c, 1, SSIM_WINDOW, SSIM_WINDOW)).astype(pred.dtype)

    def blur(z):
        return ops.conv2d(z, window, padding=ops.VALID, groups=c)

    mu_x, mu_y = blur(pred), blur(target)
    mu_xx, mu_yy, mu_xy = ops.square(mu_x), ops.square(mu_y), ops.mul(mu_x, mu_y)
    var_x = ops.sub(blur(ops.square(pred)), mu_xx)
    var_y = ops.sub(blur(ops.square(target)), mu_yy)
    cov = ops.sub(blur(ops.mul(pred, target)), mu_xy)

    numerator = ops.mul(ops.add_scalar(ops.scalar_mul(mu_xy, 2.0), c1), ops.add_scalar(ops.scalar_mul(cov, 2.0), c2))
    denominator = ops.mul(ops.add_scalar(ops.add(mu_xx, mu_yy), c1), ops.add_scalar(ops.add(var_x, var_y), c2))
    return ops.div(numerator, denominator)


def ssim_node(pred, target, peak=1.0):
    return ops.mean_all(ssim_map(pred, target, peak))


def ssim(pred, target, peak=1.0):
    """Mean SSIM, averaged over channels and images."""
    return ssim_node(np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64), peak).item()


def ssim_loss(pred, target):
    """1 - SSIM with peak 1."""
    return ops.add_scalar(ops.scalar_mul(ssim_node(pred, target, 1.0), -1.0), 1.0)


def gradient_loss(pred, target, operator='forward'):
    """L1 distance between the image gradients of pred and target.

    forward: mean |dh(p - t)| + mean |dv(p - t)| with forward differences.
    sobel: the same with 3x3 Sobel responses over the valid region.
    """
    pred, target = _pair(pred, target, 'gradient_loss')
    diff = ops.sub(pred, target)
    if operator == 'forward':
        gh = ops.finite_diff(diff, 'w')
        gv = ops.finite_diff(diff, 'h')
    elif operator == 'sobel':
        c = diff.shape[1]
        kh = np.broadcast_to(_SOBEL, (c, 1, 3, 3)).astype(diff.dtype)
        kv = np.broadcast_to(_SOBEL.T, (c, 1, 3, 3)).astype(diff.dtype)
        gh = ops.conv2d(diff, kh, padding=ops.VALID, groups=c)
        gv = ops.conv2d(diff, kv, padding=ops.VALID, groups=c)
    else:
        raise ValueError(f'gradient_loss: unknown operator {operator!r}')
    return ops.add(ops.mean_all(ops.absolute(gh)), ops.mean_all(ops.absolute(gv)))


def combined_loss(pred, target, weights=None):
    """alpha * ssim_loss + l1_loss + beta * gradient_loss."""
    weights = weights or LossWeights()
    pred, target = _pair(pred, target, 'combined_loss')
    total = ops.add(ops.scalar_mul(ssim_loss(pred, target), weights.alpha), l1_loss(pred, target))
    return ops.add(total, ops.scalar_mul(gradient_loss(pred, target, weights.gradient_operator), weights.beta))


def loss_terms(pred, target, weights=None):
    """The three loss terms as floats, for logging."""
    weights = weights or LossWeights()
    return {
        'ssim_loss': ssim_loss(pred, target).item(),
        'l1': l1_loss(pred, target).item(),
        'grad': gradient_loss(pred, target, weights.gradient_operator).item(),
    }


def mse(pred, target):
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError('shape', pred.shape, target.shape, where='mse')
    return float(np.mean((pred - target) ** 2))


def psnr(pred, target, peak=1.0):
    """10 log10(peak^2 / MSE) in dB; math.inf when the images are identical.

    Batches are scored per image and averaged.
    """
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError('shape', pred.shape, target.shape, where='psnr')
    if pred.ndim == 4 and pred.shape[0] > 1:
        return float(np.mean([psnr(p[None], t[None], peak) for p, t in zip(pred, target)]))
    error = mse(pred, target)
    if error == 0:
        return math.inf
    return 10.0 * math.log10(peak**2 / error)
