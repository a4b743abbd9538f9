#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Image and raw tensor files.

PNG (8-bit RGB) decodes to float32 values k / 255. LPT1 is the exact raw
tensor format:

    b'LPT1' | 4 x u32 dims (n, c, h, w) | n*c*h*w float32, all little-endian
"""

import io
import os
import struct

import numpy as np
from PIL import Image, UnidentifiedImageError

from lpienet.globals import FormatError, ShapeError, atomic_write
from lpienet.logger import logger

LPT1_MAGIC = b'LPT1'
LPT1_EXTENSIONS = ('.lpt', '.lpt1')
PNG_EXTENSIONS = ('.png',)

_HEADER = struct.Struct('<4s4I')


def encode_lpt1(array):
    array = np.asarray(array)
    if array.ndim != 4:
        raise ShapeError('ndim', 4, array.ndim, where='lpt1')
    return _HEADER.pack(LPT1_MAGIC, *array.shape) + np.ascontiguousarray(array, dtype='<f4').tobytes()


def decode_lpt1(data, path='<bytes>'):
    if len(data) < _HEADER.size:
        raise FormatError(path, 'truncated LPT1 header')
    magic, *dims = _HEADER.unpack_from(data)
    if magic != LPT1_MAGIC:
        raise FormatError(path, 'bad magic (not an LPT1 tensor)')
    size = int(np.prod(dims, dtype=np.int64))
    payload = len(data) - _HEADER.size
    if size * 4 > payload:
        raise FormatError(path, f'truncated data: dims {tuple(dims)} need {size * 4} bytes, found {payload}')
    if size * 4 < payload:
        raise FormatError(path, f'{payload - size * 4} trailing bytes')
    return np.frombuffer(data, dtype='<f4', offset=_HEADER.size).reshape(dims).astype(np.float32)


def read_lpt1(path):
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as err:
        raise FormatError(path, f'can not read tensor file: {err.strerror or err}')
    return decode_lpt1(data, path)


def write_lpt1(path, array):
    atomic_write(path, encode_lpt1(array))


def read_png(path):
    """Return a (1, 3, h, w) float32 array in [0, 1]."""
    try:
        with Image.open(path) as image:
            if image.mode != 'RGB':
                logger.debug(f'Convert {path} from {image.mode} to RGB')
                image = image.convert('RGB')
            pixels = np.asarray(image, dtype=np.uint8)
    except FileNotFoundError as err:
        raise FormatError(path, f'can not read image: {err.strerror or err}')
    except (OSError, UnidentifiedImageError) as err:
        raise FormatError(path, f'not a readable PNG image: {err}')
    return (pixels.transpose(2, 0, 1)[None].astype(np.float32)) / np.float32(255.0)


def to_uint8(array):
    """Quantize a (3, h, w) or (1, 3, h, w) [0, 1] array to an (h, w, 3) uint8 image."""
    array = np.asarray(array)
    if array.ndim == 4:
        if array.shape[0] != 1:
            raise ShapeError('n', 1, array.shape[0], where='png')
        array = array[0]
    if array.ndim != 3 or array.shape[0] != 3:
        raise ShapeError('c', 3, array.shape[0] if array.ndim == 3 else array.shape, where='png')
    pixels = np.round(np.clip(array.astype(np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    return np.ascontiguousarray(pixels.transpose(1, 2, 0))


def write_png(path, array):
    buffer = io.BytesIO()
    Image.fromarray(to_uint8(array)).save(buffer, format='PNG')
    atomic_write(path, buffer.getvalue())


def image_format(path):
    extension = os.path.splitext(path)[1].lower()
    if extension in PNG_EXTENSIONS:
        return 'png'
    if extension in LPT1_EXTENSIONS:
        return 'lpt1'
    raise FormatError(path, f'unsupported file extension {extension!r} (use .png or .lpt)')


def read_image(path):
    """Read a PNG or LPT1 file as an (n, c, h, w) float32 array."""
    if image_format(path) == 'png':
        return read_png(path)
    return read_lpt1(path)


def write_image(path, array):
    if image_format(path) == 'png':
        write_png(path, array)
    else:
        write_lpt1(path, array)
