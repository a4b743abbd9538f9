#!/usr/bin/env python
#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Unitary tests of the complexity counters and the benchmark harness."""

import unittest
from collections import namedtuple
from unittest import mock

import numpy as np

from lpienet import __version__
from lpienet.autodiff import ops
from lpienet.globals import ConfigError, OutOfMemoryError
from lpienet.model import LPIENet, LPIENetConfig, preset
from lpienet.model.layers import ConvSpec
from lpienet.outputs.lpienet_table import bench_table, flops_table_text, layer_table
from lpienet.profiler import (
    MIN_ITERATIONS,
    BenchResult,
    Resolution,
    benchmark,
    check_memory,
    complexity_report,
    count_macs,
    count_params,
    flops_table,
    gmacs,
    parse_resolution,
    parse_resolutions,
    run_benchmarks,
)

print(f'Unitary tests of the profiler for lpienet {__version__}')

VirtualMemory = namedtuple('VirtualMemory', ['available'])


class TestProfiler(unittest.TestCase):
    """Test the parameter, MAC and FLOP counters."""

    def setUp(self):
        """The function is called *every time* before test_*."""
        print('\n' + '=' * 78)

    def test_000_resolutions(self):
        """N, WxH and named resolutions."""
        print('INFO: [TEST_000] parse_resolution')
        self.assertEqual(parse_resolution('256'), Resolution(256, 256))
        fhd = parse_resolution('fhd')
        self.assertEqual((fhd.width, fhd.height, fhd.label), (1920, 1080, 'fhd'))
        self.assertEqual(parse_resolution('4K').label, '4k')
        wide = parse_resolution('1920x1080')
        self.assertEqual((wide.width, wide.height, wide.label), (1920, 1080, '1920x1080'))
        self.assertEqual(parse_resolution('250x99').padded, (100, 252))
        self.assertEqual([r.label for r in parse_resolutions('256, 800,2k')], ['256x256', '800x800', '2k'])
        for bad in ('huge', '0', '12x'):
            with self.assertRaises(ConfigError):
                parse_resolution(bad)

    def test_001_count_params(self):
        """Hand-counted layers and the default budget."""
        print('INFO: [TEST_001] count_params')
        self.assertEqual(count_params([ConvSpec('conv', 3, 16, kernel=3)]), 448)
        self.assertEqual(count_params([]), 0)
        count = count_params(LPIENetConfig())
        print(f'INFO: default model has {count} parameters')
        self.assertGreaterEqual(count, 0.10e6)
        self.assertLessEqual(count, 0.16e6)
        self.assertEqual(count_params(LPIENet.build(LPIENetConfig())), count)

    def test_002_count_macs(self):
        """Pointwise arithmetic and the budgets at 256x256."""
        print('INFO: [TEST_002] count_macs')
        rows, total = count_macs([ConvSpec('pw', 16, 32)], 256, 256)
        self.assertEqual(rows['pw'], 33554432)
        self.assertEqual(total, 33554432)

        _, default = count_macs(LPIENetConfig(), 256, 256)
        _, k5 = count_macs(preset('lpienet-k5'), 256, 256)
        print(f'INFO: {gmacs(default)} GMACs (k=3), {gmacs(k5)} GMACs (k=5)')
        self.assertGreaterEqual(gmacs(default), 1.1)
        self.assertLessEqual(gmacs(default), 1.5)
        self.assertGreaterEqual(gmacs(k5), 1.25)
        self.assertLessEqual(gmacs(k5), 1.6)
        self.assertGreater(k5, default)
        self.assertEqual(gmacs(1234567890), 1.23)

    def test_003_mac_scaling(self):
        """Totals scale exactly with the pixel count; pooled MLPs count zero."""
        print('INFO: [TEST_003] MACs scaling')
        config = LPIENetConfig()
        small, total_small = count_macs(config, 64, 96)
        large, total_large = count_macs(config, 128, 192)
        pooled = {spec.path for spec in LPIENet.build(config).plan if spec.pooled}
        self.assertTrue(pooled)
        self.assertTrue(all(path.endswith(('.fc1', '.fc2')) for path in pooled))
        for path in small:
            if path in pooled:
                self.assertEqual((small[path], large[path]), (0, 0))
            else:
                self.assertEqual(large[path], 4 * small[path])
        self.assertEqual(total_large, 4 * total_small)
        self.assertEqual(count_params(config), complexity_report(config, 64, 96).total_params)
        # Input sizes are padded to multiples of 4
        self.assertEqual(count_macs(config, 250, 250)[1], count_macs(config, 252, 252)[1])

    def test_004_plan_matches_executed_graph(self):
        """The layer plan lists every convolution a forward pass runs, at the planned output size."""
        print('INFO: [TEST_004] layer plan against the executed convolutions')
        model = LPIENet.build(preset('tiny'), rng=0)
        executed = []
        conv2d = ops.conv2d

        def recording_conv2d(x, weight, bias=None, **kwargs):
            out = conv2d(x, weight, bias, **kwargs)
            executed.append((tuple(np.shape(weight)), out.shape[2:]))
            return out

        x = np.random.default_rng(0).random((1, 3, 16, 16)).astype(np.float32)
        with mock.patch('lpienet.autodiff.ops.conv2d', recording_conv2d):
            model.apply(model.weights, x)
        planned = []
        for spec in model.plan:
            size = (1, 1) if spec.pooled else (16 >> spec.level, 16 >> spec.level)
            planned.extend([(spec.weight_shape, size)] * spec.calls)
        self.assertEqual(sorted(executed), sorted(planned))

    def test_005_flops_table(self):
        """FLOPs are twice the MACs and scale with the pixel count."""
        print('INFO: [TEST_005] flops_table')
        config = LPIENetConfig()
        table = dict((r.label, g) for r, g in flops_table(config, parse_resolutions('256,800,fhd,4k')))
        self.assertEqual(table['256x256'], 2 * count_macs(config, 256, 256)[1] / 1e9)
        self.assertAlmostEqual(table['800x800'] / table['256x256'], 9.77, delta=9.77 * 0.03)
        self.assertAlmostEqual(table['4k'] / table['fhd'], 4.0, delta=4.0 * 0.03)
        report = complexity_report(config, 256, 256)
        self.assertEqual(report.flops, 2 * report.total_macs)
        self.assertEqual(report.total_macs, sum(row.macs for row in report.rows))
        text = flops_table_text(flops_table(config, ['256', 'fhd']))
        self.assertIn('FLOPs (G)', text)
        self.assertIn('fhd', text)
        self.assertIn('total', layer_table(report))

    def test_006_benchmark(self):
        """Timed passes exclude warmups; larger inputs take longer."""
        print('INFO: [TEST_006] benchmark')
        model = LPIENet.build(preset('tiny'), rng=0)
        small = benchmark(model, Resolution(32, 32), iters=5, warmup=2)
        self.assertEqual(small.iterations, 5)
        self.assertEqual(small.warmup, 2)
        self.assertGreaterEqual(small.mean, small.min)
        self.assertFalse(small.failed)
        large = benchmark(model, '256', iters=5, warmup=2)
        self.assertGreater(large.mean, small.mean)
        with self.assertRaises(ConfigError):
            benchmark(model, Resolution(32, 32), iters=MIN_ITERATIONS - 1)
        with self.assertRaises(ConfigError):
            benchmark(model, Resolution(32, 32), warmup=1)
        line = small.to_dict()
        self.assertEqual(line['status'], 'ok')
        self.assertEqual(line['iterations'], 5)
        self.assertIn('FLOPs (G)', bench_table([small, large]))

    def test_007_out_of_memory(self):
        """Resolutions that do not fit are reported as failed runs."""
        print('INFO: [TEST_007] out-of-memory report')
        model = LPIENet.build(preset('tiny'), rng=0)
        with mock.patch('lpienet.profiler.psutil.virtual_memory', return_value=VirtualMemory(available=1000)):
            with self.assertRaises(OutOfMemoryError):
                check_memory(model, Resolution(64, 64))
            results = run_benchmarks(model, ['64', '4k'])
        self.assertEqual(len(results), 2)
        self.assertTrue(all(result.failed for result in results))
        self.assertEqual(results[1].to_dict()['status'], 'failed')
        self.assertEqual(results[1].to_dict()['error'], 'out-of-memory')
        table = bench_table(results)
        self.assertIn('failed', table)
        self.assertIn('4k', table)

    def test_008_bench_result(self):
        """A result without timings has NaN statistics."""
        print('INFO: [TEST_008] BenchResult')
        result = BenchResult(resolution=Resolution(8, 8), times=[0.2, 0.1, 0.3, 0.1, 0.2])
        self.assertAlmostEqual(result.mean, 0.18)
        self.assertEqual(result.min, 0.1)
        self.assertTrue(np.isnan(BenchResult(resolution=Resolution(8, 8)).mean))

    def test_009_loop_counted_macs(self):
        """A grouped 3x3 convolution written as plain loops performs exactly ConvSpec.macs products."""
        print('INFO: [TEST_009] MACs of a loop-written convolution')
        spec = ConvSpec('grouped', 4, 4, kernel=3, groups=2)
        rng = np.random.default_rng(1)
        x = rng.random((1, 4, 4, 8))
        weight = rng.random(spec.weight_shape)
        padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        per_group = spec.c_in // spec.groups
        out = np.zeros((1, 4, 4, 8))
        products = 0
        for co in range(spec.c_out):
            first = (co // (spec.c_out // spec.groups)) * per_group
            for i in range(4):
                for j in range(8):
                    for ci in range(per_group):
                        for ki in range(3):
                            for kj in range(3):
                                out[0, co, i, j] += weight[co, ci, ki, kj] * padded[0, first + ci, i + ki, j + kj]
                                products += 1
        np.testing.assert_allclose(out, ops.conv2d(x, weight, groups=2).value, rtol=1e-10)
        self.assertEqual(products, spec.macs(4, 8))
        self.assertEqual(products, 2304)
        self.assertEqual(ConvSpec('fc', 16, 4, pooled=True, calls=2).macs(256, 256), 0)


if __name__ == '__main__':
    unittest.main()
