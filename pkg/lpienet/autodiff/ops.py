#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Differentiable tensor operations.

Every op takes Node (or array) arguments and returns a Node. The forward
value is computed eagerly with numpy; when at least one argument is
watched by a tape, the output is recorded together with a closure that
maps the output gradient to one gradient per parent.

Arrays are (n, c, h, w), row-major. Reduction order inside an op is fixed,
so a given input always yields the same bits.
"""

import numpy as np
from scipy.special import expit

from lpienet.autodiff.tape import Node, constant
from lpienet.globals import ShapeError

ZERO_SAME = 'zero-same'
VALID = 'valid'
PADDING_MODES = (ZERO_SAME, VALID)

_DIMS = ('n', 'c', 'h', 'w')


def as_node(x):
    if isinstance(x, Node):
        return x
    return constant(np.asarray(x))


def _make(value, parents, backward_fn, name):
    tape = None
    for parent in parents:
        if parent.requires_grad:
            if tape is None:
                tape = parent.tape
            elif parent.tape is not tape:
                raise ValueError(f'{name}: inputs belong to two different tapes')
    if tape is None:
        return Node(value, name=name)
    return tape.record(value, parents, backward_fn, name)


def _unbroadcast(grad, shape):
    """Sum grad over the axes that were broadcast from size 1."""
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a, b, where):
    out = []
    for dim, sa, sb in zip(_DIMS, a.shape, b.shape):
        if sa == sb or sb == 1:
            out.append(sa)
        elif sa == 1:
            out.append(sb)
        else:
            raise ShapeError(dim, sa, sb, where=where)
    return tuple(out)


#############
# CONVOLUTION
#############


def _tap_forward(patch, w2, groups):
    """Contribution of one kernel tap: patch (n, c_in, ho, wo), w2 (c_out, c_in/groups)."""
    c_out, cg = w2.shape
    if groups == 1:
        return np.tensordot(patch, w2, axes=([1], [1])).transpose(0, 3, 1, 2)
    if cg == 1 and c_out == groups:
        return patch * w2[:, 0].reshape(1, -1, 1, 1)
    og = c_out // groups
    parts = [
        np.tensordot(patch[:, g * cg : (g + 1) * cg], w2[g * og : (g + 1) * og], axes=([1], [1])) for g in range(groups)
    ]
    return np.concatenate(parts, axis=3).transpose(0, 3, 1, 2)


def _tap_backward(grad, patch, w2, groups):
    """Return (grad of w2, grad of patch) for one kernel tap."""
    c_out, cg = w2.shape
    if groups == 1:
        gw = np.tensordot(grad, patch, axes=([0, 2, 3], [0, 2, 3]))
        gp = np.tensordot(grad, w2, axes=([1], [0])).transpose(0, 3, 1, 2)
        return gw, gp
    if cg == 1 and c_out == groups:
        gw = (grad * patch).sum(axis=(0, 2, 3)).reshape(-1, 1)
        gp = grad * w2[:, 0].reshape(1, -1, 1, 1)
        return gw, gp
    og = c_out // groups
    gws, gps = [], []
    for g in range(groups):
        gg = grad[:, g * og : (g + 1) * og]
        pg = patch[:, g * cg : (g + 1) * cg]
        wg = w2[g * og : (g + 1) * og]
        gws.append(np.tensordot(gg, pg, axes=([0, 2, 3], [0, 2, 3])))
        gps.append(np.tensordot(gg, wg, axes=([1], [0])))
    return np.concatenate(gws, axis=0), np.concatenate(gps, axis=3).transpose(0, 3, 1, 2)


def conv_output_size(size, kernel, stride=1, padding=ZERO_SAME):
    pad = (kernel - 1) // 2 if padding == ZERO_SAME else 0
    return (size + 2 * pad - kernel) // stride + 1


def conv2d(x, weight, bias=None, stride=1, padding=ZERO_SAME, groups=1):
    """2-D cross-correlation of x (n, c_in, h, w) with weight (c_out, c_in/groups, k, k).

    groups = c_in = c_out is a depthwise convolution, k = 1 and groups = 1
    a pointwise one. bias has c_out elements or is None.
    """
    x, weight = as_node(x), as_node(weight)
    n, c_in, h, w = x.shape
    c_out, cg, k, kw = weight.shape

    if groups < 1:
        raise ShapeError('groups', '>= 1', groups, where='conv2d')
    if c_in % groups:
        raise ShapeError('c_in', f'multiple of groups={groups}', c_in, where='conv2d')
    if c_out % groups:
        raise ShapeError('c_out', f'multiple of groups={groups}', c_out, where='conv2d')
    if cg != c_in // groups:
        raise ShapeError('weight c_in/groups', c_in // groups, cg, where='conv2d')
    if kw != k:
        raise ShapeError('kernel width', k, kw, where='conv2d')
    if k % 2 == 0:
        raise ShapeError('kernel size', 'odd', k, where='conv2d')
    if stride not in (1, 2):
        raise ValueError(f'conv2d: stride must be 1 or 2, got {stride}')
    if padding not in PADDING_MODES:
        raise ValueError(f'conv2d: padding must be one of {PADDING_MODES}, got {padding!r}')

    pad = (k - 1) // 2 if padding == ZERO_SAME else 0
    h_out = conv_output_size(h, k, stride, padding)
    w_out = conv_output_size(w, k, stride, padding)
    if h_out < 1 or w_out < 1:
        raise ShapeError('spatial output', '>= 1', (h_out, w_out), where='conv2d')

    parents = [x, weight]
    if bias is not None:
        if not isinstance(bias, Node):
            bias = np.asarray(bias)
            if bias.ndim != 4:
                bias = bias.reshape(1, -1, 1, 1)
            bias = constant(bias)
        if bias.value.size != c_out:
            raise ShapeError('bias', c_out, bias.value.size, where='conv2d')
        parents.append(bias)

    xv, wv = x.value, weight.value
    xp = np.pad(xv, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else xv
    rows = stride * (h_out - 1) + 1
    cols = stride * (w_out - 1) + 1

    out = np.zeros((n, c_out, h_out, w_out), dtype=np.result_type(xv, wv))
    for i in range(k):
        for j in range(k):
            patch = xp[:, :, i : i + rows : stride, j : j + cols : stride]
            out += _tap_forward(patch, wv[:, :, i, j], groups)
    if bias is not None:
        out += bias.value.reshape(1, c_out, 1, 1)

    def backward_fn(grad):
        gw = np.zeros_like(wv) if weight.requires_grad else None
        gxp = np.zeros_like(xp) if x.requires_grad else None
        for i in range(k):
            for j in range(k):
                patch = xp[:, :, i : i + rows : stride, j : j + cols : stride]
                gw_tap, gp = _tap_backward(grad, patch, wv[:, :, i, j], groups)
                if gw is not None:
                    gw[:, :, i, j] = gw_tap
                if gxp is not None:
                    gxp[:, :, i : i + rows : stride, j : j + cols : stride] += gp
        gx = None
        if gxp is not None:
            gx = gxp[:, :, pad : pad + h, pad : pad + w] if pad else gxp
        grads = [gx, gw]
        if bias is not None:
            grads.append(grad.sum(axis=(0, 2, 3)).reshape(bias.value.shape))
        return grads

    return _make(out, parents, backward_fn, 'conv2d')


##################
# SAMPLING CHANGES
##################


def maxpool2x2(x):
    """Max over non-overlapping 2x2 windows. Ties go to the first position in row-major scan."""
    x = as_node(x)
    n, c, h, w = x.shape
    if h % 2:
        raise ShapeError('h', 'even', h, where='maxpool2x2')
    if w % 2:
        raise ShapeError('w', 'even', w, where='maxpool2x2')

    windows = x.value.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    arg = windows.argmax(axis=-1)[..., None]
    out = np.take_along_axis(windows, arg, axis=-1)[..., 0]

    def backward_fn(grad):
        gw = np.zeros_like(windows)
        np.put_along_axis(gw, arg, grad[..., None], axis=-1)
        return [gw.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)]

    return _make(out, [x], backward_fn, 'maxpool2x2')


def _neighbours(size):
    index = np.arange(size)
    return np.maximum(index - 1, 0), np.minimum(index + 1, size - 1)


def _upsample_axis(v, axis):
    size = v.shape[axis]
    prev, nxt = _neighbours(size)
    even = 0.75 * v + 0.25 * np.take(v, prev, axis=axis)
    odd = 0.75 * v + 0.25 * np.take(v, nxt, axis=axis)
    shape = list(v.shape)
    shape[axis] = 2 * size
    return np.stack([even, odd], axis=axis + 1).reshape(shape)


def _upsample_axis_adjoint(g, axis, size):
    shape = list(g.shape)
    shape[axis : axis + 1] = [size, 2]
    g2 = g.reshape(shape)
    g_even = np.take(g2, 0, axis=axis + 1)
    g_odd = np.take(g2, 1, axis=axis + 1)
    prev, nxt = _neighbours(size)
    gx = 0.75 * (g_even + g_odd)
    view = np.moveaxis(gx, axis, 0)
    np.add.at(view, prev, 0.25 * np.moveaxis(g_even, axis, 0))
    np.add.at(view, nxt, 0.25 * np.moveaxis(g_odd, axis, 0))
    return gx


def bilinear_upsample2x(x):
    """Bilinear 2x upsampling, align-corners false, edge clamped.

    Output pixel d samples the input at (d + 0.5) / 2 - 0.5.
    """
    x = as_node(x)
    n, c, h, w = x.shape
    if h < 1 or w < 1:
        raise ShapeError('h, w', '>= 1', (h, w), where='bilinear_upsample2x')
    out = _upsample_axis(_upsample_axis(x.value, 2), 3)

    def backward_fn(grad):
        return [_upsample_axis_adjoint(_upsample_axis_adjoint(grad, 3, w), 2, h)]

    return _make(out, [x], backward_fn, 'bilinear_upsample2x')


def reflect_pad(x, pad_h, pad_w):
    """Reflect-pad the bottom and right borders."""
    x = as_node(x)
    n, c, h, w = x.shape
    if pad_h == 0 and pad_w == 0:
        return x
    rows = np.pad(np.arange(h), (0, pad_h), mode='reflect')
    cols = np.pad(np.arange(w), (0, pad_w), mode='reflect')
    out = x.value[:, :, rows][:, :, :, cols]

    def backward_fn(grad):
        gr = np.zeros((n, c, h, w + pad_w), dtype=grad.dtype)
        np.add.at(np.moveaxis(gr, 2, 0), rows, np.moveaxis(grad, 2, 0))
        gx = np.zeros((n, c, h, w), dtype=grad.dtype)
        np.add.at(np.moveaxis(gx, 3, 0), cols, np.moveaxis(gr, 3, 0))
        return [gx]

    return _make(out, [x], backward_fn, 'reflect_pad')


def crop(x, h, w):
    """Keep the top-left h x w window."""
    x = as_node(x)
    n, c, hx, wx = x.shape
    if h > hx:
        raise ShapeError('h', f'<= {hx}', h, where='crop')
    if w > wx:
        raise ShapeError('w', f'<= {wx}', w, where='crop')
    if (h, w) == (hx, wx):
        return x
    out = x.value[:, :, :h, :w]

    def backward_fn(grad):
        gx = np.zeros_like(x.value)
        gx[:, :, :h, :w] = grad
        return [gx]

    return _make(out, [x], backward_fn, 'crop')


##########
# CHANNELS
##########


def concat_channels(a, b):
    """Stack a's channels then b's channels."""
    a, b = as_node(a), as_node(b)
    for dim in (0, 2, 3):
        if a.shape[dim] != b.shape[dim]:
            raise ShapeError(_DIMS[dim], a.shape[dim], b.shape[dim], where='concat_channels')
    ca = a.shape[1]
    out = np.concatenate([a.value, b.value], axis=1)

    def backward_fn(grad):
        return [grad[:, :ca], grad[:, ca:]]

    return _make(out, [a, b], backward_fn, 'concat_channels')


def slice_channels(x, start, stop):
    x = as_node(x)
    c = x.shape[1]
    if not 0 <= start < stop <= c:
        raise ShapeError('c', f'0 <= start < stop <= {c}', (start, stop), where='slice_channels')
    out = x.value[:, start:stop]

    def backward_fn(grad):
        gx = np.zeros_like(x.value)
        gx[:, start:stop] = grad
        return [gx]

    return _make(out, [x], backward_fn, 'slice_channels')


def channel_mean(x):
    """Mean over channels, (n, 1, h, w)."""
    x = as_node(x)
    c = x.shape[1]
    out = x.value.mean(axis=1, keepdims=True)

    def backward_fn(grad):
        return [np.broadcast_to(grad / c, x.shape).copy()]

    return _make(out, [x], backward_fn, 'channel_mean')


def channel_max(x):
    """Max over channels, (n, 1, h, w). Gradient goes to the first maximum."""
    x = as_node(x)
    arg = x.value.argmax(axis=1)[:, None]
    out = np.take_along_axis(x.value, arg, axis=1)

    def backward_fn(grad):
        gx = np.zeros_like(x.value)
        np.put_along_axis(gx, arg, grad, axis=1)
        return [gx]

    return _make(out, [x], backward_fn, 'channel_max')


def global_avg_pool(x):
    """Mean over h, w, (n, c, 1, 1)."""
    x = as_node(x)
    n, c, h, w = x.shape
    out = x.value.mean(axis=(2, 3), keepdims=True)

    def backward_fn(grad):
        return [np.broadcast_to(grad / (h * w), x.shape).copy()]

    return _make(out, [x], backward_fn, 'global_avg_pool')


def global_max_pool(x):
    """Max over h, w, (n, c, 1, 1). Gradient goes to the first maximum in row-major order."""
    x = as_node(x)
    n, c, h, w = x.shape
    flat = x.value.reshape(n, c, h * w)
    arg = flat.argmax(axis=-1)[..., None]
    out = np.take_along_axis(flat, arg, axis=-1).reshape(n, c, 1, 1)

    def backward_fn(grad):
        gx = np.zeros_like(flat)
        np.put_along_axis(gx, arg, grad.reshape(n, c, 1), axis=-1)
        return [gx.reshape(n, c, h, w)]

    return _make(out, [x], backward_fn, 'global_max_pool')


#############
# ELEMENTWISE
#############


def add(a, b):
    a, b = as_node(a), as_node(b)
    _broadcast_shape(a, b, 'add')
    out = a.value + b.value

    def backward_fn(grad):
        return [_unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)]

    return _make(out, [a, b], backward_fn, 'add')


def sub(a, b):
    a, b = as_node(a), as_node(b)
    _broadcast_shape(a, b, 'sub')
    out = a.value - b.value

    def backward_fn(grad):
        return [_unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)]

    return _make(out, [a, b], backward_fn, 'sub')


def mul(a, b):
    a, b = as_node(a), as_node(b)
    _broadcast_shape(a, b, 'mul')
    out = a.value * b.value

    def backward_fn(grad):
        return [_unbroadcast(grad * b.value, a.shape), _unbroadcast(grad * a.value, b.shape)]

    return _make(out, [a, b], backward_fn, 'mul')


def div(a, b):
    a, b = as_node(a), as_node(b)
    _broadcast_shape(a, b, 'div')
    out = a.value / b.value

    def backward_fn(grad):
        ga = grad / b.value
        return [_unbroadcast(ga, a.shape), _unbroadcast(-ga * out, b.shape)]

    return _make(out, [a, b], backward_fn, 'div')


def scalar_mul(x, s):
    x = as_node(x)
    out = x.value * s

    def backward_fn(grad):
        return [grad * s]

    return _make(out, [x], backward_fn, 'scalar_mul')


def add_scalar(x, s):
    x = as_node(x)
    out = x.value + s

    def backward_fn(grad):
        return [grad]

    return _make(out, [x], backward_fn, 'add_scalar')


def square(x):
    x = as_node(x)
    out = x.value * x.value

    def backward_fn(grad):
        return [2 * grad * x.value]

    return _make(out, [x], backward_fn, 'square')


def relu(x):
    x = as_node(x)
    mask = x.value > 0
    out = np.where(mask, x.value, 0).astype(x.dtype, copy=False)

    def backward_fn(grad):
        return [grad * mask]

    return _make(out, [x], backward_fn, 'relu')


def sigmoid(x):
    x = as_node(x)
    out = expit(x.value)

    def backward_fn(grad):
        return [grad * out * (1 - out)]

    return _make(out, [x], backward_fn, 'sigmoid')


def absolute(x):
    x = as_node(x)
    sign = np.sign(x.value)
    out = np.abs(x.value)

    def backward_fn(grad):
        return [grad * sign]

    return _make(out, [x], backward_fn, 'abs')


def clip(x, low, high):
    """Clamp to [low, high]; the gradient passes where the input is inside the range."""
    x = as_node(x)
    inside = (x.value >= low) & (x.value <= high)
    out = np.clip(x.value, low, high)

    def backward_fn(grad):
        return [grad * inside]

    return _make(out, [x], backward_fn, 'clip')


def finite_diff(x, axis):
    """Forward difference along 'w' (horizontal) or 'h' (vertical)."""
    x = as_node(x)
    dim = {'h': 2, 'w': 3}[axis]
    if x.shape[dim] < 2:
        raise ShapeError(axis, '>= 2', x.shape[dim], where='finite_diff')
    head = [slice(None)] * 4
    tail = [slice(None)] * 4
    head[dim] = slice(1, None)
    tail[dim] = slice(None, -1)
    head, tail = tuple(head), tuple(tail)
    out = x.value[head] - x.value[tail]

    def backward_fn(grad):
        gx = np.zeros_like(x.value)
        gx[head] += grad
        gx[tail] -= grad
        return [gx]

    return _make(out, [x], backward_fn, f'finite_diff_{axis}')


############
# REDUCTIONS
############


def sum_all(x):
    """Sum of every element, (1, 1, 1, 1)."""
    x = as_node(x)
    out = x.value.sum().reshape(1, 1, 1, 1)

    def backward_fn(grad):
        return [np.full_like(x.value, grad.reshape(-1)[0])]

    return _make(out, [x], backward_fn, 'sum_all')


def mean_all(x):
    """Mean of every element, (1, 1, 1, 1)."""
    x = as_node(x)
    size = x.value.size
    out = x.value.mean().reshape(1, 1, 1, 1)

    def backward_fn(grad):
        return [np.full_like(x.value, grad.reshape(-1)[0] / size)]

    return _make(out, [x], backward_fn, 'mean_all')
