#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Parameter, MAC and FLOP accounting, and the wall-clock benchmark.

Only convolutions (1x1 attention MLPs included) count MACs; elementwise
ops, pooling and interpolation count zero. FLOPs = 2 x MACs and
GMACs = MACs / 1e9.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import psutil

from lpienet import globals as lpienet_globals
from lpienet.degrade.noise import make_rng
from lpienet.globals import ConfigError, OutOfMemoryError
from lpienet.logger import logger
from lpienet.model.config import LPIENetConfig
from lpienet.model.network import SIZE_MULTIPLE, LPIENet, layer_plan
from lpienet.timer import Counter

# Named resolutions, width x height
NAMED_RESOLUTIONS = {
    'fhd': (1920, 1080),
    '2k': (2560, 1440),
    '4k': (3840, 2160),
}

DEFAULT_RESOLUTIONS = '256,800,fhd,2k,4k'

MIN_ITERATIONS = 5
MIN_WARMUP = 2

# Working set of a forward pass relative to the sum of the conv outputs
ACTIVATION_OVERHEAD = 2


@dataclass(frozen=True)
class Resolution:
    width: int
    height: int
    name: str = ''

    @property
    def label(self):
        return self.name or f'{self.width}x{self.height}'

    @property
    def padded(self):
        """(h, w) rounded up to the forward pass size multiple."""
        return _round_up(self.height), _round_up(self.width)


def _round_up(size):
    return -(-size // SIZE_MULTIPLE) * SIZE_MULTIPLE


def parse_resolution(text):
    """'256' -> 256x256, '1920x1080' -> width 1920 height 1080, or a named resolution."""
    text = str(text).strip().lower()
    if text in NAMED_RESOLUTIONS:
        return Resolution(*NAMED_RESOLUTIONS[text], name=text)
    try:
        if 'x' in text:
            w, h = text.split('x', 1)
            resolution = Resolution(int(w), int(h))
        else:
            resolution = Resolution(int(text), int(text))
    except ValueError:
        raise ConfigError('resolutions', f'not a resolution: {text!r} (N, WxH, {", ".join(NAMED_RESOLUTIONS)})')
    if resolution.width < 1 or resolution.height < 1:
        raise ConfigError('resolutions', f'resolution must be positive, got {text!r}')
    return resolution


def parse_resolutions(text):
    return [parse_resolution(item) for item in str(text).split(',') if item.strip()]


def _plan(model):
    if isinstance(model, LPIENet):
        return model.plan
    if isinstance(model, LPIENetConfig):
        return layer_plan(model)
    return list(model)


def count_params(model):
    """Exact number of weights and biases.

    model is an LPIENet, an LPIENetConfig or a list of ConvSpec.
    """
    if isinstance(model, LPIENet):
        return model.param_count()
    return int(sum(spec.params for spec in _plan(model)))


def count_macs(model, h, w):
    """Per-layer MACs for an h x w input (padded to multiples of 4), and their total."""
    h, w = _round_up(h), _round_up(w)
    rows = OrderedDict((spec.path, spec.macs(h, w)) for spec in _plan(model))
    return rows, int(sum(rows.values()))


def gmacs(macs):
    """MACs in G, 3 significant digits."""
    return float(f'{macs / 1e9:.3g}')


@dataclass
class LayerRow:
    path: str
    params: int
    macs: int


@dataclass
class ComplexityReport:
    """Per-layer params and MACs at one input resolution."""

    height: int
    width: int
    rows: List[LayerRow] = field(default_factory=list)

    @property
    def total_params(self):
        return sum(row.params for row in self.rows)

    @property
    def total_macs(self):
        return sum(row.macs for row in self.rows)

    @property
    def flops(self):
        return 2 * self.total_macs

    @property
    def gmacs(self):
        return gmacs(self.total_macs)

    @property
    def gflops(self):
        return self.flops / 1e9

    def to_dict(self):
        return {
            'height': self.height,
            'width': self.width,
            'params': self.total_params,
            'macs': self.total_macs,
            'gmacs': self.gmacs,
            'gflops': self.gflops,
        }


def complexity_report(model, h, w):
    plan = _plan(model)
    layer_macs, _ = count_macs(plan, h, w)
    rows = [LayerRow(spec.path, spec.params, layer_macs[spec.path]) for spec in plan]
    return ComplexityReport(height=_round_up(h), width=_round_up(w), rows=rows)


def flops_table(model, resolutions):
    """[(Resolution, GFLOPs)] with FLOPs = 2 x MACs at the padded size."""
    table = []
    for resolution in resolutions:
        if not isinstance(resolution, Resolution):
            resolution = parse_resolution(resolution)
        h, w = resolution.padded
        table.append((resolution, 2 * count_macs(model, h, w)[1] / 1e9))
    return table


def activation_bytes(model, h, w):
    """Estimated peak working set of one forward pass."""
    h, w = _round_up(h), _round_up(w)
    itemsize = np.dtype(model.dtype).itemsize if isinstance(model, LPIENet) else 4
    total = 0
    for spec in _plan(model):
        pixels = 1 if spec.pooled else (h >> spec.level) * (w >> spec.level)
        total += spec.c_out * pixels
    return ACTIVATION_OVERHEAD * total * itemsize


@dataclass
class BenchResult:
    """Timed forward passes at one resolution; warmups are not in times."""

    resolution: Resolution
    times: List[float] = field(default_factory=list)
    warmup: int = MIN_WARMUP
    gflops: float = 0.0
    threads: Optional[int] = None
    cpu_count: Optional[int] = None
    activation_bytes: int = 0
    error: Optional[str] = None

    @property
    def iterations(self):
        return len(self.times)

    @property
    def failed(self):
        return self.error is not None

    @property
    def mean(self):
        return float(np.mean(self.times)) if self.times else float('nan')

    @property
    def min(self):
        return float(np.min(self.times)) if self.times else float('nan')

    def to_dict(self):
        values = {
            'resolution': self.resolution.label,
            'width': self.resolution.width,
            'height': self.resolution.height,
            'gflops': self.gflops,
            'iterations': self.iterations,
            'warmup': self.warmup,
            'threads': self.threads if self.threads is not None else 'default',
            'cpu_count': self.cpu_count,
            'activation_mb': self.activation_bytes / 1e6,
        }
        if self.failed:
            values['status'] = 'failed'
            values['error'] = self.error
        else:
            values['status'] = 'ok'
            values['mean_s'] = self.mean
            values['min_s'] = self.min
        return values


def check_memory(model, resolution):
    """Raise OutOfMemoryError when the activations would not fit in available memory."""
    h, w = resolution.padded
    required = activation_bytes(model, h, w)
    available = psutil.virtual_memory().available
    if required > available:
        raise OutOfMemoryError(required, available, what=resolution.label)
    return required


def benchmark(model, resolution, iters=MIN_ITERATIONS, warmup=MIN_WARMUP):
    """Time model.forward at one resolution on a deterministic input."""
    if iters < MIN_ITERATIONS:
        raise ConfigError('iters', f'at least {MIN_ITERATIONS} iterations are needed, got {iters}')
    if warmup < MIN_WARMUP:
        raise ConfigError('warmup', f'at least {MIN_WARMUP} warmup passes are needed, got {warmup}')
    if not isinstance(resolution, Resolution):
        resolution = parse_resolution(resolution)
    required = check_memory(model, resolution)
    image = make_rng(0).random((1, 3, resolution.height, resolution.width), dtype=np.float32)
    result = BenchResult(
        resolution=resolution,
        warmup=warmup,
        gflops=flops_table(model, [resolution])[0][1],
        threads=lpienet_globals.thread_limit,
        cpu_count=psutil.cpu_count(logical=True),
        activation_bytes=required,
    )
    try:
        for _ in range(warmup):
            model.forward(image)
        for _ in range(iters):
            counter = Counter()
            model.forward(image)
            result.times.append(counter.get())
    except MemoryError:
        raise OutOfMemoryError(required, psutil.virtual_memory().available, what=resolution.label)
    logger.debug(f'Bench {resolution.label}: mean {result.mean:.4f}s min {result.min:.4f}s')
    return result


def run_benchmarks(model, resolutions, iters=MIN_ITERATIONS, warmup=MIN_WARMUP):
    """Benchmark each resolution; out-of-memory ones become failed results."""
    results = []
    for resolution in resolutions:
        if not isinstance(resolution, Resolution):
            resolution = parse_resolution(resolution)
        try:
            results.append(benchmark(model, resolution, iters, warmup))
        except OutOfMemoryError as err:
            logger.warning(f'Bench {resolution.label} failed: {err}')
            h, w = resolution.padded
            results.append(
                BenchResult(
                    resolution=resolution,
                    warmup=warmup,
                    gflops=2 * count_macs(model, h, w)[1] / 1e9,
                    threads=lpienet_globals.thread_limit,
                    cpu_count=psutil.cpu_count(logical=True),
                    activation_bytes=err.required,
                    error='out-of-memory',
                )
            )
    return results
