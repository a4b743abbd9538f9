#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""LPCK checkpoint files.

Layout, all integers little-endian:

    b'LPCK' | u32 version | u32 config length | config text (UTF-8 key=value)
    | u32 tensor count | per tensor: u16 name length, name, 4 x u32 dims, float32 data

Weights come first in layer-plan order, then the optional Adam moments
named adam.m.<path> and adam.v.<path>.
"""

import io
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from lpienet.config import Config, dumps
from lpienet.globals import ConfigError, FormatError, ShapeError, atomic_write
from lpienet.logger import logger
from lpienet.model.config import LPIENetConfig, model_schema
from lpienet.model.network import LPIENet, parameter_shapes

MAGIC = b'LPCK'
VERSION = 1

MOMENT_PREFIXES = ('adam.m.', 'adam.v.')

_MAX_DIM = 1 << 30


@dataclass
class Checkpoint:
    """Everything a checkpoint file holds."""

    model: LPIENet
    optimizer: Optional[Dict] = None
    step: int = 0
    state: Dict[str, str] = field(default_factory=dict)


def _write_tensor(f, name, array):
    encoded = name.encode('utf-8')
    array = np.asarray(array)
    if array.ndim != 4:
        raise ShapeError('ndim', 4, array.ndim, where=name)
    f.write(struct.pack('<H', len(encoded)))
    f.write(encoded)
    f.write(struct.pack('<4I', *array.shape))
    f.write(np.ascontiguousarray(array, dtype='<f4').tobytes())


def encode_checkpoint(model, optimizer=None, step=0, state=None):
    """Return the LPCK bytes of a model and optional training state."""
    header = OrderedDict(model.config.to_dict())
    header['train.step'] = int(step)
    if optimizer is not None:
        header['optimizer.t'] = int(optimizer['t'])
    for key, value in (state or {}).items():
        header[key] = value
    text = dumps(header).encode('utf-8')

    tensors = list(model.weights.items())
    if optimizer is not None:
        for prefix, moments in zip(MOMENT_PREFIXES, (optimizer['m'], optimizer['v'])):
            tensors.extend((prefix + name, moments[name]) for name in model.weights)

    buffer = io.BytesIO()
    buffer.write(MAGIC)
    buffer.write(struct.pack('<II', VERSION, len(text)))
    buffer.write(text)
    buffer.write(struct.pack('<I', len(tensors)))
    for name, array in tensors:
        _write_tensor(buffer, name, array)
    return buffer.getvalue()


def save_checkpoint(model, path, optimizer=None, step=0, state=None):
    """Write a checkpoint atomically (a partial file is never left at path)."""
    data = encode_checkpoint(model, optimizer, step, state)
    atomic_write(path, data)
    logger.debug(f'Checkpoint saved to {path} ({len(data)} bytes)')


class _Reader:
    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, size, what):
        end = self.offset + size
        if end > len(self.data):
            raise FormatError(self.path, f'truncated file while reading {what}')
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(data, path='<bytes>'):
    """Parse LPCK bytes. Raises FormatError; never returns a partial model."""
    reader = _Reader(data, path)
    if reader.take(4, 'magic') != MAGIC:
        raise FormatError(path, 'bad magic (not an LPCK checkpoint)')
    version, text_length = reader.unpack('<II', 'header')
    if version != VERSION:
        raise FormatError(path, f'unsupported checkpoint version {version} (expected {VERSION})')
    try:
        text = reader.take(text_length, 'config').decode('utf-8')
    except UnicodeDecodeError:
        raise FormatError(path, 'config text is not UTF-8')
    try:
        header = Config.from_string(text, schema=model_schema(extra=True), source=path)
        config = LPIENetConfig.from_config(header)
    except ConfigError as err:
        raise FormatError(path, f'bad config header: {err}')

    (count,) = reader.unpack('<I', 'tensor count')
    tensors = OrderedDict()
    for _ in range(count):
        (name_length,) = reader.unpack('<H', 'tensor name length')
        name = reader.take(name_length, 'tensor name').decode('utf-8', errors='replace')
        dims = reader.unpack('<4I', f'dims of {name}')
        if any(d > _MAX_DIM for d in dims):
            raise FormatError(path, f'dimension overflow in {name}: {dims}')
        size = int(np.prod(dims, dtype=np.int64))
        if size * 4 > len(data) - reader.offset:
            raise FormatError(path, f'truncated file while reading data of {name}')
        if name in tensors:
            raise FormatError(path, f'duplicate tensor {name}')
        tensors[name] = np.frombuffer(reader.take(size * 4, f'data of {name}'), dtype='<f4').reshape(dims).copy()
    if reader.offset != len(data):
        raise FormatError(path, f'{len(data) - reader.offset} trailing bytes')

    shapes = parameter_shapes(config)
    weights = OrderedDict()
    for name, shape in shapes.items():
        if name not in tensors:
            raise FormatError(path, f'missing tensor {name}')
        if tensors[name].shape != tuple(shape):
            raise FormatError(path, f'tensor {name} has shape {tensors[name].shape}, expected {tuple(shape)}')
        weights[name] = tensors[name].astype(np.float32)

    optimizer = None
    if header.has_option('optimizer.t'):
        moments = []
        for prefix in MOMENT_PREFIXES:
            try:
                moments.append(OrderedDict((name, tensors[prefix + name]) for name in shapes))
            except KeyError as err:
                raise FormatError(path, f'missing optimizer tensor {err}')
        optimizer = {'t': header.get_int_value('optimizer.t'), 'm': moments[0], 'v': moments[1]}

    known = set(shapes) | {p + n for p in MOMENT_PREFIXES for n in shapes}
    unknown = [name for name in tensors if name not in known]
    if unknown:
        raise FormatError(path, f'unknown tensor {unknown[0]}')

    state = {key: header.get_value(key) for key in header.keys() if key.startswith('train.')}
    return Checkpoint(
        model=LPIENet(config, weights),
        optimizer=optimizer,
        step=header.get_int_value('train.step', 0),
        state=state,
    )


def read_checkpoint(path):
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as err:
        raise FormatError(path, f'can not read checkpoint: {err.strerror or err}')
    return decode_checkpoint(data, path)


def load_checkpoint(path):
    """Return the model stored in a checkpoint."""
    return read_checkpoint(path).model


def declared_scalar_count(path):
    """Sum of the weight tensor sizes declared in a checkpoint."""
    return read_checkpoint(path).model.param_count()
