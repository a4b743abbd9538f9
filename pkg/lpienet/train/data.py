#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Training samples: datasets, patches, augmentation and the patch schedule.

Images are (3, h, w) float32 arrays. Every random draw for a sample comes
from make_rng(seed, stream, epoch, index), so the result of a sample does
not depend on the order in which samples are prepared.
"""

import glob
import os
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from lpienet.degrade import make_pair, make_rng
from lpienet.globals import ConfigError, ShapeError
from lpienet.imageio import read_png
from lpienet.logger import logger
from lpienet.model.network import DIHEDRAL_TRANSFORMS, SIZE_MULTIPLE, dihedral, dihedral_inverse
from lpienet.objectives import SSIM_WINDOW

GRID = 'grid-nonoverlap'
RANDOM = 'random'
PATCH_MODES = (GRID, RANDOM)

# Sub-stream keys of make_rng(seed, stream, ...)
SHUFFLE_STREAM = 1
SAMPLE_STREAM = 2
VALIDATION_STREAM = 3
SPLIT_STREAM = 4

# Smallest patch side: the SSIM window rounded up to a multiple of SIZE_MULTIPLE
MIN_PATCH = -(-SSIM_WINDOW // SIZE_MULTIPLE) * SIZE_MULTIPLE


@dataclass
class Sample:
    """A clean image and, for paired datasets, its degraded counterpart."""

    clean: np.ndarray
    degraded: Optional[np.ndarray] = None
    name: str = ''

    def __post_init__(self):
        self.clean = _as_image(self.clean, self.name or 'clean')
        if self.degraded is not None:
            self.degraded = _as_image(self.degraded, self.name or 'degraded')
            if self.degraded.shape != self.clean.shape:
                raise ShapeError('shape', self.clean.shape, self.degraded.shape, where=self.name or 'sample')

    @property
    def paired(self):
        return self.degraded is not None

    @property
    def size(self):
        return self.clean.shape[1:]


def _as_image(array, where):
    array = np.asarray(array, dtype=np.float32)
    if array.ndim == 4 and array.shape[0] == 1:
        array = array[0]
    if array.ndim != 3 or array.shape[0] != 3:
        raise ShapeError('shape', '(3, h, w)', array.shape, where=where)
    return array


def make_dataset(items):
    """Build samples from (degraded, clean) pairs, clean arrays or Samples."""
    samples = []
    for i, item in enumerate(items):
        if isinstance(item, Sample):
            samples.append(item)
        elif isinstance(item, (tuple, list)):
            degraded, clean = item
            samples.append(Sample(clean=clean, degraded=degraded, name=f'sample{i}'))
        else:
            samples.append(Sample(clean=item, name=f'sample{i}'))
    if not samples:
        raise ConfigError('data', 'empty dataset')
    return samples


def load_folder(path):
    """Load <path>/clean/*.png, paired with <path>/degraded/<same name> when that folder exists."""
    clean_dir = os.path.join(path, 'clean')
    degraded_dir = os.path.join(path, 'degraded')
    files = sorted(glob.glob(os.path.join(clean_dir, '*.png')))
    if not files:
        raise ConfigError('data', f'no PNG images found in {clean_dir}')
    paired = os.path.isdir(degraded_dir)
    samples = []
    for file in files:
        name = os.path.basename(file)
        degraded = None
        if paired:
            degraded_file = os.path.join(degraded_dir, name)
            if not os.path.isfile(degraded_file):
                raise ConfigError('data', f'missing degraded image {degraded_file}')
            degraded = read_png(degraded_file)
        samples.append(Sample(clean=read_png(file), degraded=degraded, name=name))
    logger.info(f'Loaded {len(samples)} {"paired" if paired else "clean"} images from {path}')
    return samples


def split_validation(samples, fraction=0.1, seed=0):
    """Seeded hold-out split; returns (train, validation).

    At least one sample is held out when fraction > 0. fraction = 0 keeps
    every sample for training and validates on the training set.
    """
    if not 0 <= fraction < 1:
        raise ConfigError('val_fraction', f'must be in [0, 1), got {fraction}')
    if fraction == 0:
        logger.warning('No validation split, the training set is used for validation')
        return list(samples), list(samples)
    if len(samples) < 2:
        raise ConfigError('val_fraction', 'a validation split needs at least 2 samples')
    count = min(len(samples) - 1, max(1, int(round(fraction * len(samples)))))
    order = make_rng(seed, SPLIT_STREAM).permutation(len(samples))
    held = set(order[:count].tolist())
    train = [s for i, s in enumerate(samples) if i not in held]
    validation = [s for i, s in enumerate(samples) if i in held]
    return train, validation


def check_image_sizes(samples, key='data'):
    """Every image side must reach MIN_PATCH for the SSIM window to fit."""
    for sample in samples:
        h, w = sample.size
        if h < MIN_PATCH or w < MIN_PATCH:
            raise ConfigError(key, f'{sample.name or "image"} is {w}x{h} (WxH), sides must be >= {MIN_PATCH}')
    return samples


#########
# PATCHES
#########


def parse_size(text):
    """'64' -> (64, 64); '96x64' -> (96, 64) as (h, w)."""
    text = str(text).strip().lower()
    try:
        if 'x' in text:
            h, w = text.split('x', 1)
            return int(h), int(w)
        return int(text), int(text)
    except ValueError:
        raise ConfigError('patch_size', f'not a size: {text!r} (expected N or HxW)')


def format_size(size):
    h, w = size
    return str(h) if h == w else f'{h}x{w}'


def check_patch_size(size, key):
    """Patch sides must be multiples of SIZE_MULTIPLE and at least MIN_PATCH."""
    for value in size:
        if value < MIN_PATCH or value % SIZE_MULTIPLE:
            raise ConfigError(
                key,
                f'patch sides must be multiples of {SIZE_MULTIPLE} and >= {MIN_PATCH}, got {format_size(size)}',
            )
    return tuple(size)


def parse_patch_schedule(text):
    """'0:64,200:128,400:256' -> [(0, (64, 64)), (200, (128, 128)), (400, (256, 256))]."""
    schedule = []
    for item in str(text).split(','):
        item = item.strip()
        if not item:
            continue
        try:
            epoch, size = item.split(':', 1)
            epoch = int(epoch)
        except ValueError:
            raise ConfigError('patch_schedule', f'expected epoch:size, got {item!r}')
        size = parse_size(size)
        check_patch_size(size, 'patch_schedule')
        schedule.append((epoch, size))
    return check_patch_schedule(schedule)


def check_patch_schedule(schedule):
    if not schedule:
        raise ConfigError('patch_schedule', 'empty schedule')
    if schedule[0][0] != 0:
        raise ConfigError('patch_schedule', 'the first entry must start at epoch 0')
    epochs = [epoch for epoch, _ in schedule]
    if epochs != sorted(set(epochs)):
        raise ConfigError('patch_schedule', f'epochs must strictly increase, got {epochs}')
    return list(schedule)


def format_patch_schedule(schedule):
    return ','.join(f'{epoch}:{format_size(size)}' for epoch, size in schedule)


def default_patch_schedule(epochs, patch_size=(256, 256)):
    """64 until 40% of the epochs, 128 until 80%, then the full patch size.

    Stages never exceed patch_size and are merged when they coincide.
    """
    schedule = []
    for start, size in ((0, (64, 64)), (round(0.4 * epochs), (128, 128)), (round(0.8 * epochs), tuple(patch_size))):
        size = (min(size[0], patch_size[0]), min(size[1], patch_size[1]))
        if schedule and (schedule[-1][1] == size or schedule[-1][0] == start):
            schedule[-1] = (schedule[-1][0], size)
            continue
        schedule.append((start, size))
    return schedule


def patch_size_at(schedule, epoch):
    size = schedule[0][1]
    for start, value in schedule:
        if epoch >= start:
            size = value
    return size


def fit_patch(size, image_size):
    """Shrink a patch to fit the image, keeping multiples of 4 and at least MIN_PATCH."""
    h = min(size[0], image_size[0] - image_size[0] % SIZE_MULTIPLE)
    w = min(size[1], image_size[1] - image_size[1] % SIZE_MULTIPLE)
    if h < MIN_PATCH or w < MIN_PATCH:
        raise ShapeError('h, w', f'>= {MIN_PATCH}', tuple(image_size), where='fit_patch')
    return h, w


def _patch_dims(size):
    if np.ndim(size) == 0:
        return int(size), int(size)
    return int(size[0]), int(size[1])


def extract_patches(image, size, mode=GRID, rng=None, count=1):
    """Cut patches from an (..., h, w) array.

    grid-nonoverlap tiles floor(h / ph) x floor(w / pw) patches anchored at
    the top-left corner, row by row. random draws count uniform anchors.
    """
    image = np.asarray(image)
    ph, pw = _patch_dims(size)
    h, w = image.shape[-2:]
    if ph < 1 or pw < 1 or ph > h or pw > w:
        raise ShapeError('patch', f'<= {h}x{w}', f'{ph}x{pw}', where='extract_patches')
    if mode == GRID:
        return [image[..., i : i + ph, j : j + pw] for i in range(0, h - ph + 1, ph) for j in range(0, w - pw + 1, pw)]
    if mode == RANDOM:
        rng = rng if rng is not None else make_rng(0)
        patches = []
        for _ in range(count):
            i, j = random_anchor(rng, (h, w), (ph, pw))
            patches.append(image[..., i : i + ph, j : j + pw])
        return patches
    raise ValueError(f'extract_patches: unknown mode {mode!r} (known: {", ".join(PATCH_MODES)})')


def random_anchor(rng, image_size, patch):
    i = int(rng.integers(0, image_size[0] - patch[0] + 1))
    j = int(rng.integers(0, image_size[1] - patch[1] + 1))
    return i, j


##############
# AUGMENTATION
##############


def sample_transform(rng):
    """Draw one of the 8 dihedral transforms uniformly."""
    return int(rng.integers(0, DIHEDRAL_TRANSFORMS))


def apply_transform(pair, t):
    return tuple(dihedral(image, t) for image in pair)


def invert_transform(pair, t):
    return tuple(dihedral_inverse(image, t) for image in pair)


def augment(pair, rng):
    """Apply one random flip/rotation identically to (degraded, clean)."""
    return apply_transform(pair, sample_transform(rng))


##################
# SAMPLE PREPARING
##################


def prepare_sample(sample, patch, degradation, seed, epoch, index):
    """Crop, degrade (unpaired samples) and augment one training sample.

    Returns (degraded, clean) patches of the given (h, w) size.
    """
    rng = make_rng(seed, SAMPLE_STREAM, epoch, index)
    i, j = random_anchor(rng, sample.size, patch)
    window = (slice(None), slice(i, i + patch[0]), slice(j, j + patch[1]))
    clean = sample.clean[window]
    if sample.paired:
        degraded = sample.degraded[window]
    else:
        if degradation is None:
            raise ConfigError('degradation', f'{sample.name}: unpaired sample and no degradation configured')
        degraded, clean = (a[0] for a in make_pair(clean[None], degradation, rng))
    return augment((degraded, clean), rng)


def validation_pairs(samples, degradation, seed):
    """Full-size (degraded, target) pairs, degraded once with fixed streams."""
    pairs: List[Tuple[np.ndarray, np.ndarray]] = []
    for index, sample in enumerate(samples):
        if sample.paired:
            pairs.append((sample.degraded, sample.clean))
            continue
        if degradation is None:
            raise ConfigError('degradation', f'{sample.name}: unpaired sample and no degradation configured')
        degraded, target = make_pair(sample.clean[None], degradation, make_rng(seed, VALIDATION_STREAM, index))
        pairs.append((degraded[0], target[0]))
    return pairs
