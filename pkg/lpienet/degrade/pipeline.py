#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Image formation model: y = tone_map(clip(x * k + n)).

Each stage can be switched off, which yields the denoising (y = x + n),
deblurring (y = x * k) and HDR reconstruction special cases.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from lpienet.config import Config
from lpienet.degrade.noise import add_noise, make_rng
from lpienet.degrade.psf import PSF_KINDS, PSF, make_dirac_psf, make_disk_psf, make_gaussian_psf, psf_convolve
from lpienet.globals import ConfigError

TASKS = ('denoise', 'deblur', 'hdr', 'udc')

# Tone-map knee: f(0.25) = 0.5
TONE_MAP_KNEE = 0.25


def tone_map(x):
    """f(x) = x / (x + 0.25), maps [0, inf) onto [0, 1)."""
    x = np.asarray(x)
    if (x < 0).any():
        raise ValueError('tone_map: input must be >= 0')
    return x / (x + TONE_MAP_KNEE)


def inverse_tone_map(y):
    """g(y) = 0.25 y / (1 - y), defined on [0, 1)."""
    y = np.asarray(y)
    if (y >= 1).any():
        raise ValueError('inverse_tone_map: input must be < 1')
    if (y < 0).any():
        raise ValueError('inverse_tone_map: input must be >= 0')
    return TONE_MAP_KNEE * y / (1 - y)


def clip_range(x, x_max):
    """Clamp to [0, x_max]; the lower bound removes post-noise negatives."""
    if not x_max > 0:
        raise ValueError(f'clip_range: x_max must be > 0, got {x_max}')
    return np.clip(x, 0, x_max)


def synthesize_hdr(x, exposure=4.0, ceiling=0.99):
    """Lift an ordinary [0, 1] image to a high dynamic range one.

    The image is read as tone-mapped, mapped back to linear radiance and
    scaled by the exposure factor. ceiling keeps the inverse finite at 1.
    """
    if exposure <= 0:
        raise ValueError(f'synthesize_hdr: exposure must be > 0, got {exposure}')
    return exposure * inverse_tone_map(np.clip(x, 0, ceiling))


@dataclass(frozen=True)
class DegradationConfig:
    """Parameters of one instance of the formation model."""

    psf: PSF = field(default_factory=make_dirac_psf)
    beta1: float = 0.0
    beta2: float = 0.0
    x_max: float = 1.0
    clip: bool = True
    tone_map: bool = False
    seed: int = 0
    hdr_exposure: float = 0.0
    task: str = 'custom'

    def __post_init__(self):
        if self.beta1 < 0:
            raise ConfigError('beta1', f'must be >= 0, got {self.beta1}')
        if self.beta2 < 0:
            raise ConfigError('beta2', f'must be >= 0, got {self.beta2}')
        if not self.beta1 + self.beta2 < 1:
            raise ConfigError('beta1', f'beta1 + beta2 must be < 1, got {self.beta1 + self.beta2}')
        if not self.x_max > 0:
            raise ConfigError('x_max', f'must be > 0, got {self.x_max}')
        if self.hdr_exposure < 0:
            raise ConfigError('hdr_exposure', f'must be >= 0, got {self.hdr_exposure}')

    def to_dict(self):
        values = {'task': self.task, 'psf': self.psf.kind}
        values.update({f'psf_{k}': v for k, v in self.psf.params.items()})
        values.update(
            {
                'beta1': float(self.beta1),
                'beta2': float(self.beta2),
                'x_max': float(self.x_max),
                'clip': self.clip,
                'tone_map': self.tone_map,
                'seed': int(self.seed),
                'hdr_exposure': float(self.hdr_exposure),
            }
        )
        return values

    def dumps(self):
        return Config.from_dict(self.to_dict()).dumps()

    @classmethod
    def from_config(cls, config, prefix='', base=None):
        """Read the degradation keys of a Config.

        The task key selects a preset; the other keys override it.
        """
        task = config.get_value(f'{prefix}task')
        if base is None:
            base = preset(task) if task not in (None, 'custom') else cls()
        kind = config.get_value(f'{prefix}psf', base.psf.kind)
        if kind not in PSF_KINDS:
            raise ConfigError(f'{prefix}psf', f'unknown psf {kind!r} (known: {", ".join(PSF_KINDS)})')
        size = config.get_int_value(f'{prefix}psf_size', base.psf.params.get('size', 1 if kind == 'dirac' else 9))
        if kind == 'dirac':
            psf = make_dirac_psf(size)
        elif kind == 'gaussian':
            sigma = config.get_float_list_value(f'{prefix}psf_sigma') or _as_list(base.psf.params.get('sigma', 1.5))
            psf = make_gaussian_psf(size, sigma[0] if len(sigma) == 1 else sigma)
        else:
            radius = config.get_float_value(f'{prefix}psf_radius', base.psf.params.get('radius', size / 4))
            psf = make_disk_psf(size, radius)
        return cls(
            psf=psf,
            beta1=config.get_float_value(f'{prefix}beta1', base.beta1),
            beta2=config.get_float_value(f'{prefix}beta2', base.beta2),
            x_max=config.get_float_value(f'{prefix}x_max', base.x_max),
            clip=config.get_bool_value(f'{prefix}clip', base.clip),
            tone_map=config.get_bool_value(f'{prefix}tone_map', base.tone_map),
            seed=config.get_int_value(f'{prefix}seed', base.seed),
            hdr_exposure=config.get_float_value(f'{prefix}hdr_exposure', base.hdr_exposure),
            task=task or base.task,
        )


def _as_list(value):
    return list(value) if np.ndim(value) else [value]


DEGRADATION_KEYS = (
    'task',
    'psf',
    'psf_size',
    'psf_sigma',
    'psf_radius',
    'beta1',
    'beta2',
    'x_max',
    'clip',
    'tone_map',
    'seed',
    'hdr_exposure',
)


def degradation_schema(prefix=''):
    return dict.fromkeys(f'{prefix}{key}' for key in DEGRADATION_KEYS)


def preset(task, **overrides):
    """Return the DegradationConfig of a named task.

    - denoise: y = x + n (Dirac PSF, Gaussian noise sigma 25/255, no clip, no tone map)
    - deblur: y = x * k (Gaussian PSF, no noise, no clip, no tone map)
    - hdr: y = f(min(x, 1)) on exposure-lifted inputs (no blur, no noise)
    - udc: every stage on
    """
    if task == 'denoise':
        config = DegradationConfig(beta2=(25 / 255) ** 2, clip=False, x_max=math.inf, task=task)
    elif task == 'deblur':
        config = DegradationConfig(psf=make_gaussian_psf(9, 1.5), clip=False, x_max=math.inf, task=task)
    elif task == 'hdr':
        config = DegradationConfig(x_max=1.0, clip=True, tone_map=True, hdr_exposure=4.0, task=task)
    elif task == 'udc':
        config = DegradationConfig(
            psf=make_disk_psf(9, 3.0), beta1=0.01, beta2=1e-4, x_max=1.0, clip=True, tone_map=True, task=task
        )
    else:
        raise ConfigError('task', f'unknown task {task!r} (known: {", ".join(TASKS)})')
    return replace(config, **overrides) if overrides else config


def apply(x, cfg, rng=None):
    """Degrade x (n, c, h, w) with cfg; rng defaults to the stream of cfg.seed."""
    if rng is None:
        rng = make_rng(cfg.seed)
    x = np.asarray(x)
    y = x if cfg.psf.is_dirac else psf_convolve(x, cfg.psf)
    y = add_noise(y, cfg.beta1, cfg.beta2, rng)
    if cfg.clip:
        y = clip_range(y, cfg.x_max)
    if cfg.tone_map:
        y = tone_map(y)
    return y.astype(x.dtype, copy=False)


def make_pair(clean, cfg, rng=None):
    """Return (degraded, target) for a clean [0, 1] image.

    With hdr_exposure > 0 the clean image is first lifted to HDR. With tone
    mapping on the target is tone-mapped too, so both share one domain.
    """
    clean = np.asarray(clean)
    scene = synthesize_hdr(clean, cfg.hdr_exposure).astype(clean.dtype) if cfg.hdr_exposure > 0 else clean
    degraded = apply(scene, cfg, rng)
    target = tone_map(scene).astype(clean.dtype) if cfg.tone_map else clean
    return degraded, target
