#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Architecture hyper-parameters."""

from dataclasses import asdict, dataclass, field, replace
from typing import List

from lpienet.config import Config
from lpienet.globals import ConfigError


@dataclass(frozen=True)
class LPIENetConfig:
    """Channel widths, kernel sizes and switches of the network.

    The hidden width of an inverted residual is
    round(c_out * expansion_ratio * expansion_growth ** level), level being
    the pyramid level of its block (0 for full resolution). With
    expansion_growth=1 every block uses the same ratio.
    """

    channels: List[int] = field(default_factory=lambda: [16, 32, 64, 32, 16])
    kernel_size: int = 3
    expansion_ratio: float = 1.5
    expansion_growth: float = 2.0
    spatial_attention_kernel: int = 7
    channel_attention_reduction: int = 4
    clip_epsilon: float = 1e-5
    use_attention: bool = True
    global_residual: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'channels', [int(c) for c in self.channels])
        self.validate()

    def validate(self):
        c = self.channels
        if len(c) != 5:
            raise ConfigError('channels', f'expected 5 widths, got {len(c)}')
        if any(v < 1 for v in c):
            raise ConfigError('channels', f'widths must be positive, got {c}')
        if not (c[0] < c[1] < c[2] and c[2] > c[3] > c[4]):
            raise ConfigError('channels', f'encoder widths must increase and decoder widths decrease, got {c}')
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError('kernel_size', f'must be odd, got {self.kernel_size}')
        if self.spatial_attention_kernel < 1 or self.spatial_attention_kernel % 2 == 0:
            raise ConfigError('spatial_attention_kernel', f'must be odd, got {self.spatial_attention_kernel}')
        if self.expansion_ratio <= 0:
            raise ConfigError('expansion_ratio', f'must be > 0, got {self.expansion_ratio}')
        if self.expansion_growth <= 0:
            raise ConfigError('expansion_growth', f'must be > 0, got {self.expansion_growth}')
        if self.channel_attention_reduction < 1:
            raise ConfigError('channel_attention_reduction', 'must be >= 1')
        if self.use_attention:
            for width in c:
                if width % self.channel_attention_reduction:
                    raise ConfigError(
                        'channel_attention_reduction',
                        f'width {width} is not divisible by {self.channel_attention_reduction}',
                    )
        if not 0 < self.clip_epsilon < 1:
            raise ConfigError('clip_epsilon', f'must be in (0, 1), got {self.clip_epsilon}')

    def expanded_width(self, c_out, level):
        return max(1, int(round(c_out * self.expansion_ratio * self.expansion_growth**level)))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_config(cls, config, prefix=''):
        """Read the model keys of a Config (optionally namespaced, e.g. 'model.')."""
        default = cls()
        preset_name = config.get_value(f'{prefix}preset')
        base = preset(preset_name) if preset_name else default
        values = {
            'channels': config.get_int_list_value(f'{prefix}channels', base.channels),
            'kernel_size': config.get_int_value(f'{prefix}kernel_size', base.kernel_size),
            'expansion_ratio': config.get_float_value(f'{prefix}expansion_ratio', base.expansion_ratio),
            'expansion_growth': config.get_float_value(f'{prefix}expansion_growth', base.expansion_growth),
            'spatial_attention_kernel': config.get_int_value(
                f'{prefix}spatial_attention_kernel', base.spatial_attention_kernel
            ),
            'channel_attention_reduction': config.get_int_value(
                f'{prefix}channel_attention_reduction', base.channel_attention_reduction
            ),
            'clip_epsilon': config.get_float_value(f'{prefix}clip_epsilon', base.clip_epsilon),
            'use_attention': config.get_bool_value(f'{prefix}use_attention', base.use_attention),
            'global_residual': config.get_bool_value(f'{prefix}global_residual', base.global_residual),
        }
        return cls(**values)

    @classmethod
    def from_string(cls, text):
        return cls.from_config(Config.from_string(text, schema=model_schema(extra=True)))


def model_schema(prefix='', extra=False):
    """Allowed model keys. Values are None so no default is injected."""
    keys = [f'{prefix}{name}' for name in LPIENetConfig.__dataclass_fields__]
    keys.append(f'{prefix}preset')
    schema = dict.fromkeys(keys)
    if extra:
        # Checkpoint headers carry training state next to the architecture
        schema.update(dict.fromkeys(CHECKPOINT_STATE_KEYS))
    return schema


CHECKPOINT_STATE_KEYS = (
    'train.epoch',
    'train.step',
    'train.lr',
    'train.val_history',
    'train.best_val_loss',
    'optimizer.t',
)


PRESETS = {
    'lpienet': {},
    'lpienet-l': {'channels': [32, 64, 128, 64, 32]},
    'lpienet-k5': {'kernel_size': 5},
    'lpienet-noatt': {'use_attention': False},
    'tiny': {'channels': [4, 8, 16, 8, 4]},
}


def preset(name):
    """Return a named configuration."""
    try:
        overrides = PRESETS[name]
    except KeyError:
        raise ConfigError('preset', f'unknown model preset {name!r} (known: {", ".join(PRESETS)})')
    return replace(LPIENetConfig(), **overrides)
