#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Building blocks of the network: inverted residuals, attention, IRA blocks."""

from dataclasses import dataclass

from lpienet.autodiff import ops
from lpienet.globals import ShapeError


@dataclass(frozen=True)
class ConvSpec:
    """One convolution of the layer plan.

    level is the pyramid level the layer runs at (spatial size divided by
    2**level). pooled layers run on 1x1 pooled statistics, calls times per
    forward pass.
    """

    path: str
    c_in: int
    c_out: int
    kernel: int = 1
    groups: int = 1
    level: int = 0
    pooled: bool = False
    calls: int = 1

    @property
    def weight_shape(self):
        return (self.c_out, self.c_in // self.groups, self.kernel, self.kernel)

    @property
    def bias_shape(self):
        return (1, self.c_out, 1, 1)

    @property
    def fan_in(self):
        return (self.c_in // self.groups) * self.kernel * self.kernel

    @property
    def params(self):
        return self.c_out * self.fan_in + self.c_out

    def macs(self, h, w):
        """Multiply-accumulates for an h x w network input (multiples of 4).

        Layers on pooled 1x1 statistics count 0, so totals scale exactly with h * w.
        """
        if self.pooled:
            return 0
        pixels = (h >> self.level) * (w >> self.level)
        return self.calls * pixels * self.c_out * self.fan_in


class Scope:
    """Read-only view of a parameter mapping under a path prefix."""

    def __init__(self, params, prefix):
        self.params = params
        self.prefix = prefix

    def __getitem__(self, key):
        return self.params[f'{self.prefix}.{key}']

    def __contains__(self, key):
        return f'{self.prefix}.{key}' in self.params

    def scope(self, name):
        return Scope(self.params, f'{self.prefix}.{name}')


def conv(x, params, name, **kwargs):
    return ops.conv2d(x, params[f'{name}.weight'], params[f'{name}.bias'], **kwargs)


def inverted_residual(x, params, expansion_ratio=None, kernel_size=None):
    """Expand (1x1), depthwise (kxk), linear projection (1x1), plus x when widths match.

    params holds expand, depthwise and project weights and biases; the
    optional expansion_ratio (hidden width over output width) and kernel_size
    are checked against them.
    """
    x = ops.as_node(x)
    c_in = x.shape[1]
    expand = params['expand.weight']
    hidden = expand.shape[0]
    if expand.shape[1] != c_in:
        raise ShapeError('c', expand.shape[1], c_in, where='inverted_residual')
    c_out = params['project.weight'].shape[0]
    if expansion_ratio is not None and hidden != max(1, int(round(c_out * expansion_ratio))):
        raise ShapeError('hidden', max(1, int(round(c_out * expansion_ratio))), hidden, where='inverted_residual')
    k = params['depthwise.weight'].shape[2]
    if kernel_size is not None and k != kernel_size:
        raise ShapeError('kernel size', kernel_size, k, where='inverted_residual')

    h = ops.relu(conv(x, params, 'expand'))
    h = ops.relu(conv(h, params, 'depthwise', groups=hidden))
    h = conv(h, params, 'project')
    if h.shape[1] == c_in:
        h = ops.add(h, x)
    return h


def channel_attention(x, params, reduction):
    """Gate channels with sigmoid(MLP(avg pool) + MLP(max pool)); the MLP is shared."""
    x = ops.as_node(x)
    c = x.shape[1]
    if c % reduction:
        raise ShapeError('c', f'multiple of reduction={reduction}', c, where='channel_attention')

    def mlp(p):
        return conv(ops.relu(conv(p, params, 'fc1')), params, 'fc2')

    gate = ops.sigmoid(ops.add(mlp(ops.global_avg_pool(x)), mlp(ops.global_max_pool(x))))
    return ops.mul(x, gate)


def spatial_attention(x, params, kernel=None):
    """Gate pixels with sigmoid(conv([mean_c(x), max_c(x)]))."""
    x = ops.as_node(x)
    weight = params['conv.weight']
    if kernel is not None and weight.shape[2] != kernel:
        raise ShapeError('kernel size', kernel, weight.shape[2], where='spatial_attention')
    stats = ops.concat_channels(ops.channel_mean(x), ops.channel_max(x))
    gate = ops.sigmoid(conv(stats, params, 'conv'))
    return ops.mul(x, gate)


def ira_block(x, params, reduction=4, use_attention=True):
    """Inverted residual, inverted residual, channel attention, spatial attention."""
    h = inverted_residual(x, params.scope('ir1'))
    h = inverted_residual(h, params.scope('ir2'))
    if use_attention:
        h = channel_attention(h, params.scope('ca'), reduction)
        h = spatial_attention(h, params.scope('sa'))
    return h


def ira_plan(prefix, c_in, c_out, config, level):
    """ConvSpecs of one IRA block, in parameter order."""
    k = config.kernel_size
    hidden = config.expanded_width(c_out, level)
    plan = []
    for name, width in (('ir1', c_in), ('ir2', c_out)):
        plan.append(ConvSpec(f'{prefix}.{name}.expand', width, hidden, level=level))
        plan.append(ConvSpec(f'{prefix}.{name}.depthwise', hidden, hidden, kernel=k, groups=hidden, level=level))
        plan.append(ConvSpec(f'{prefix}.{name}.project', hidden, c_out, level=level))
    if config.use_attention:
        squeezed = c_out // config.channel_attention_reduction
        plan.append(ConvSpec(f'{prefix}.ca.fc1', c_out, squeezed, level=level, pooled=True, calls=2))
        plan.append(ConvSpec(f'{prefix}.ca.fc2', squeezed, c_out, level=level, pooled=True, calls=2))
        plan.append(ConvSpec(f'{prefix}.sa.conv', 2, 1, kernel=config.spatial_attention_kernel, level=level))
    return plan
