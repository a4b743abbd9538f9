#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Gradient checks of every differentiable op, the losses, an IRA block and the tiny model.

Each case is (name, fn, inputs, names). Inputs are float64 in [0.1, 0.9];
op outputs are reduced to a scalar through a fixed random projection.
"""

from collections import OrderedDict

import numpy as np

from lpienet import objectives
from lpienet.autodiff import ops
from lpienet.autodiff.gradcheck import gradcheck
from lpienet.degrade.noise import make_rng
from lpienet.model.config import preset
from lpienet.model.layers import Scope, ira_block, ira_plan
from lpienet.model.network import LPIENet, init_weights

DEFAULT_THRESHOLD = 1e-4

# Parameter tensors sampled per model check
MODEL_TENSORS = 8
MODEL_SAMPLES = 4


class _Projection:
    """sum(out * r) / size with r fixed per output shape."""

    def __init__(self, rng):
        self.rng = rng
        self.weights = {}

    def __call__(self, out):
        if out.shape not in self.weights:
            self.weights[out.shape] = self.rng.uniform(-1.0, 1.0, size=out.shape)
        return ops.mean_all(ops.mul(out, self.weights[out.shape]))


def _uniform(rng, *shape):
    return rng.uniform(0.1, 0.9, size=shape)


def op_cases(seed):
    rng = make_rng(seed)
    p = _Projection(make_rng(seed, 1))
    u = _uniform
    return [
        (
            'conv2d',
            lambda x, w, b: p(ops.conv2d(x, w, b)),
            [u(rng, 1, 2, 5, 5), u(rng, 4, 2, 3, 3), u(rng, 1, 4, 1, 1)],
        ),
        (
            'conv2d.depthwise',
            lambda x, w, b: p(ops.conv2d(x, w, b, groups=3)),
            [u(rng, 1, 3, 6, 6), u(rng, 3, 1, 3, 3), u(rng, 1, 3, 1, 1)],
        ),
        ('conv2d.grouped', lambda x, w: p(ops.conv2d(x, w, groups=2)), [u(rng, 2, 4, 5, 5), u(rng, 6, 2, 3, 3)]),
        (
            'conv2d.stride2.valid',
            lambda x, w: p(ops.conv2d(x, w, stride=2, padding=ops.VALID)),
            [u(rng, 1, 2, 7, 7), u(rng, 3, 2, 3, 3)],
        ),
        ('maxpool2x2', lambda x: p(ops.maxpool2x2(x)), [u(rng, 1, 2, 6, 6)]),
        ('bilinear_upsample2x', lambda x: p(ops.bilinear_upsample2x(x)), [u(rng, 1, 2, 3, 4)]),
        ('concat_channels', lambda a, b: p(ops.concat_channels(a, b)), [u(rng, 1, 2, 4, 4), u(rng, 1, 3, 4, 4)]),
        ('slice_channels', lambda x: p(ops.slice_channels(x, 1, 4)), [u(rng, 1, 5, 3, 3)]),
        ('channel_mean', lambda x: p(ops.channel_mean(x)), [u(rng, 1, 4, 3, 3)]),
        ('channel_max', lambda x: p(ops.channel_max(x)), [u(rng, 1, 4, 3, 3)]),
        ('global_avg_pool', lambda x: p(ops.global_avg_pool(x)), [u(rng, 2, 3, 4, 4)]),
        ('global_max_pool', lambda x: p(ops.global_max_pool(x)), [u(rng, 2, 3, 4, 4)]),
        ('add.broadcast', lambda a, b: p(ops.add(a, b)), [u(rng, 1, 3, 4, 4), u(rng, 1, 3, 1, 1)]),
        ('sub', lambda a, b: p(ops.sub(a, b)), [u(rng, 1, 2, 3, 3), u(rng, 1, 2, 3, 3)]),
        ('mul.broadcast', lambda a, b: p(ops.mul(a, b)), [u(rng, 1, 3, 4, 4), u(rng, 1, 3, 1, 1)]),
        ('div', lambda a, b: p(ops.div(a, b)), [u(rng, 1, 2, 3, 3), u(rng, 1, 2, 3, 3)]),
        ('scalar_ops', lambda x: p(ops.add_scalar(ops.scalar_mul(x, -1.5), 0.25)), [u(rng, 1, 2, 3, 3)]),
        ('square', lambda x: p(ops.square(x)), [u(rng, 1, 2, 3, 3)]),
        ('relu', lambda x: p(ops.relu(ops.add_scalar(x, -0.5))), [u(rng, 1, 2, 4, 4)]),
        ('sigmoid', lambda x: p(ops.sigmoid(ops.scalar_mul(x, 4.0))), [u(rng, 1, 2, 4, 4)]),
        ('abs', lambda x: p(ops.absolute(ops.add_scalar(x, -0.5))), [u(rng, 1, 2, 4, 4)]),
        ('clip', lambda x: p(ops.clip(x, 0.3, 0.7)), [u(rng, 1, 2, 4, 4)]),
        ('finite_diff.h', lambda x: p(ops.finite_diff(x, 'h')), [u(rng, 1, 2, 4, 5)]),
        ('finite_diff.w', lambda x: p(ops.finite_diff(x, 'w')), [u(rng, 1, 2, 4, 5)]),
        ('reflect_pad', lambda x: p(ops.reflect_pad(x, 3, 2)), [u(rng, 1, 2, 5, 6)]),
        ('crop', lambda x: p(ops.crop(x, 3, 2)), [u(rng, 1, 2, 5, 6)]),
        ('sum_all', lambda x: ops.scalar_mul(ops.sum_all(ops.square(x)), 0.1), [u(rng, 1, 2, 3, 3)]),
    ]


def loss_cases(seed):
    rng = make_rng(seed, 2)
    u = _uniform
    weights = objectives.LossWeights()
    sobel = objectives.LossWeights(gradient_operator='sobel')
    return [
        ('l1_loss', objectives.l1_loss, [u(rng, 1, 3, 6, 6), u(rng, 1, 3, 6, 6)]),
        ('ssim_loss', objectives.ssim_loss, [u(rng, 1, 2, 13, 12), u(rng, 1, 2, 13, 12)]),
        ('gradient_loss.forward', objectives.gradient_loss, [u(rng, 1, 3, 6, 6), u(rng, 1, 3, 6, 6)]),
        (
            'gradient_loss.sobel',
            lambda a, b: objectives.gradient_loss(a, b, 'sobel'),
            [u(rng, 1, 3, 6, 6), u(rng, 1, 3, 6, 6)],
        ),
        (
            'combined_loss',
            lambda a, b: objectives.combined_loss(a, b, weights),
            [u(rng, 1, 3, 12, 12), u(rng, 1, 3, 12, 12)],
        ),
        (
            'combined_loss.sobel',
            lambda a, b: objectives.combined_loss(a, b, sobel),
            [u(rng, 1, 3, 12, 12), u(rng, 1, 3, 12, 12)],
        ),
    ]


def ira_case(seed, channels=4, size=8):
    """One IRA block of the tiny preset, with every parameter checked."""
    config = preset('tiny')
    plan = ira_plan('block', channels, channels, config, level=0)
    rng = make_rng(seed, 3)
    params = OrderedDict()
    for spec in plan:
        bound = np.sqrt(6.0 / spec.fan_in)
        params[f'{spec.path}.weight'] = rng.uniform(-bound, bound, size=spec.weight_shape)
        params[f'{spec.path}.bias'] = rng.uniform(-0.1, 0.1, size=spec.bias_shape)
    names = ['x', *params]
    p = _Projection(make_rng(seed, 4))

    def fn(x, *values):
        scope = Scope(dict(zip(names[1:], values)), 'block')
        return p(ira_block(x, scope, config.channel_attention_reduction, config.use_attention))

    return 'ira_block', fn, [_uniform(rng, 1, channels, size, size), *params.values()], names


def model_case(seed, size=16):
    """The tiny network: the input plus a random subset of its parameters."""
    config = preset('tiny')
    weights = init_weights(config, rng=seed, dtype=np.float64)
    model = LPIENet(config, weights)
    rng = make_rng(seed, 5)
    checked = sorted(rng.choice(len(weights), size=MODEL_TENSORS, replace=False).tolist())
    checked_names = [list(weights)[i] for i in checked]
    p = _Projection(make_rng(seed, 6))

    def fn(x, *values):
        params = dict(weights)
        params.update(zip(checked_names, values))
        return p(model.apply(params, x))

    inputs = [_uniform(rng, 1, 3, size, size), *(weights[name] for name in checked_names)]
    return 'model.tiny', fn, inputs, ['x', *checked_names]


def run_suite(seed, threshold=DEFAULT_THRESHOLD, model=True):
    """Run every case for one seed; yield (name, GradcheckReport, passed)."""
    cases = [(name, fn, inputs, None) for name, fn, inputs in op_cases(seed) + loss_cases(seed)]
    cases.append(ira_case(seed))
    if model:
        cases.append(model_case(seed))
    for name, fn, inputs, names in cases:
        samples = MODEL_SAMPLES if name.startswith('model.') else 16
        report = gradcheck(fn, inputs, samples=samples, seed=seed, names=names)
        yield name, report, report.passed(threshold)
