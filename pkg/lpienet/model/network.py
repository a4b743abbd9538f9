#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""The encoder/decoder network.

stem 3x3 -> E1 -> pool -> E2 -> pool -> E3 -> up -> [.., E2] -> D1 -> up -> [.., E1] -> D2 -> head 3x3
then the network input is added back and the result is clipped to [0, 1 - p].
"""

from collections import OrderedDict

import numpy as np

from lpienet.autodiff import ops
from lpienet.autodiff.tape import constant
from lpienet.globals import ShapeError
from lpienet.logger import logger
from lpienet.model.config import LPIENetConfig
from lpienet.model.layers import ConvSpec, Scope, conv, ira_block, ira_plan

IMAGE_CHANNELS = 3

# Spatial size must be a multiple of this (two 2x2 poolings)
SIZE_MULTIPLE = 4


def layer_plan(config):
    """Ordered list of every convolution of the network."""
    c = config.channels
    plan = [ConvSpec('stem', IMAGE_CHANNELS, c[0], kernel=3)]
    plan += ira_plan('enc1', c[0], c[0], config, level=0)
    plan += ira_plan('enc2', c[0], c[1], config, level=1)
    plan += ira_plan('enc3', c[1], c[2], config, level=2)
    plan += ira_plan('dec1', c[2] + c[1], c[3], config, level=1)
    plan += ira_plan('dec2', c[3] + c[0], c[4], config, level=0)
    plan.append(ConvSpec('head', c[4], IMAGE_CHANNELS, kernel=3))
    return plan


def parameter_shapes(config):
    """Ordered mapping from parameter path to shape."""
    shapes = OrderedDict()
    for spec in layer_plan(config):
        shapes[f'{spec.path}.weight'] = spec.weight_shape
        shapes[f'{spec.path}.bias'] = spec.bias_shape
    return shapes


def param_count(config):
    return sum(spec.params for spec in layer_plan(config))


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.PCG64(rng))


def init_weights(config, rng=0, dtype=np.float32):
    """Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) weights, zero biases."""
    rng = _as_rng(rng)
    weights = OrderedDict()
    for spec in layer_plan(config):
        bound = np.sqrt(6.0 / spec.fan_in)
        weights[f'{spec.path}.weight'] = rng.uniform(-bound, bound, size=spec.weight_shape).astype(dtype)
        weights[f'{spec.path}.bias'] = np.zeros(spec.bias_shape, dtype=dtype)
    return weights


#####################
# DIHEDRAL TRANSFORMS
#####################

# Index t: rotate by 90 * (t % 4) degrees, after a horizontal flip when t >= 4
DIHEDRAL_TRANSFORMS = 8


def dihedral(x, t):
    if t >= 4:
        x = x[..., ::-1]
    return np.ascontiguousarray(np.rot90(x, t % 4, axes=(-2, -1)))


def dihedral_inverse(x, t):
    x = np.rot90(x, -(t % 4), axes=(-2, -1))
    if t >= 4:
        x = x[..., ::-1]
    return np.ascontiguousarray(x)


class LPIENet:
    """A built network: configuration plus its weights.

    Weights are treated as immutable by forward(); concurrent inference
    calls on one instance are safe.
    """

    def __init__(self, config, weights):
        self.config = config
        self.weights = OrderedDict(weights)
        self.check_weights()
        self._constants = None

    @classmethod
    def build(cls, config=None, rng=0, dtype=np.float32):
        config = config or LPIENetConfig()
        model = cls(config, init_weights(config, rng, dtype))
        logger.debug(f'Built model with {model.param_count()} parameters')
        return model

    def check_weights(self):
        expected = parameter_shapes(self.config)
        missing = [name for name in expected if name not in self.weights]
        if missing:
            raise ShapeError('weights', 'present', f'missing {missing[0]}', where='model')
        for name, value in self.weights.items():
            if name not in expected:
                raise ShapeError('weights', 'known path', name, where='model')
            if tuple(value.shape) != tuple(expected[name]):
                raise ShapeError(name, expected[name], tuple(value.shape), where='model')

    @property
    def plan(self):
        return layer_plan(self.config)

    def param_count(self):
        return int(sum(w.size for w in self.weights.values()))

    @property
    def dtype(self):
        return next(iter(self.weights.values())).dtype

    def astype(self, dtype):
        return LPIENet(self.config, OrderedDict((k, v.astype(dtype)) for k, v in self.weights.items()))

    def with_weights(self, weights):
        return LPIENet(self.config, weights)

    def apply(self, params, x):
        """Run the graph on x (Node or array) with params (mapping of Nodes or arrays)."""
        cfg = self.config
        x = ops.as_node(x)
        if x.shape[1] != IMAGE_CHANNELS:
            raise ShapeError('c', IMAGE_CHANNELS, x.shape[1], where='forward')
        for dim, size in (('h', x.shape[2]), ('w', x.shape[3])):
            if size % SIZE_MULTIPLE:
                raise ShapeError(dim, f'multiple of {SIZE_MULTIPLE}', size, where='forward')

        def block(h, name):
            return ira_block(h, Scope(params, name), cfg.channel_attention_reduction, cfg.use_attention)

        h = conv(x, params, 'stem')
        s1 = block(h, 'enc1')
        s2 = block(ops.maxpool2x2(s1), 'enc2')
        h = block(ops.maxpool2x2(s2), 'enc3')
        h = ops.concat_channels(ops.bilinear_upsample2x(ops.relu(h)), s2)
        h = block(h, 'dec1')
        h = ops.concat_channels(ops.bilinear_upsample2x(ops.relu(h)), s1)
        h = block(h, 'dec2')
        h = conv(h, params, 'head')
        if cfg.global_residual:
            h = ops.add(h, x)
        return ops.clip(h, 0.0, 1.0 - cfg.clip_epsilon)

    def constants(self):
        if self._constants is None:
            self._constants = {name: constant(value, name=name) for name, value in self.weights.items()}
        return self._constants

    def forward(self, image):
        """Inference on an (n, 3, h, w) array; any h, w >= 1.

        Sizes that are not multiples of 4 are reflect-padded and the output
        is cropped back.
        """
        image = np.asarray(image)
        if image.ndim != 4:
            raise ShapeError('ndim', 4, image.ndim, where='forward')
        if image.shape[1] != IMAGE_CHANNELS:
            raise ShapeError('c', IMAGE_CHANNELS, image.shape[1], where='forward')
        h, w = image.shape[2:]
        pad_h, pad_w = (-h) % SIZE_MULTIPLE, (-w) % SIZE_MULTIPLE
        x = image.astype(self.dtype, copy=False)
        if pad_h or pad_w:
            x = np.pad(x, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)), mode='reflect')
        out = self.apply(self.constants(), x).value
        return np.ascontiguousarray(out[:, :, :h, :w])

    def __call__(self, image):
        return self.forward(image)

    def self_ensemble(self, image):
        """Average of the forward passes over the 8 dihedral transforms, re-clipped."""
        image = np.asarray(image)
        total = None
        for t in range(DIHEDRAL_TRANSFORMS):
            out = dihedral_inverse(self.forward(dihedral(image, t)), t)
            total = out.astype(np.float64) if total is None else total + out
        mean = total / DIHEDRAL_TRANSFORMS
        return np.clip(mean, 0.0, 1.0 - self.config.clip_epsilon).astype(self.dtype)


def build(config=None, rng=0):
    return LPIENet.build(config, rng)


def forward(model, image):
    return model.forward(image)


def self_ensemble(model, image):
    return model.self_ensemble(image)
