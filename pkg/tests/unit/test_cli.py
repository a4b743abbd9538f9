#!/usr/bin/env python
#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Unitary tests of the configuration files, image files and sub-commands."""

import csv
import io
import os
import shutil
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

import numpy as np

import lpienet
from lpienet import __version__
from lpienet.commands import run
from lpienet.config import Config, dumps
from lpienet.degrade.noise import make_rng
from lpienet.globals import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, ConfigError, FormatError, format_value
from lpienet.imageio import (
    decode_lpt1,
    encode_lpt1,
    image_format,
    read_image,
    read_png,
    to_uint8,
    write_image,
    write_lpt1,
    write_png,
)
from lpienet.main import LpienetMain
from lpienet.model import load_checkpoint, preset

FIXTURES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'fixtures')

print(f'Unitary tests of the command line for lpienet {__version__}')


def parse_lines(text):
    """key=value lines to a list of dicts."""
    return [dict(token.split('=', 1) for token in line.split()) for line in text.splitlines() if '=' in line]


class TestConfig(unittest.TestCase):
    """Test the key=value configuration files."""

    def setUp(self):
        """The function is called *every time* before test_*."""
        print('\n' + '=' * 78)

    def test_000_parse(self):
        """Comments, typed getters and unknown keys."""
        print('INFO: [TEST_000] key=value parsing')
        text = '# comment\nepochs = 12\nlr0=0.002\nuse_attention=no\nchannels=4,8,16\n\nname=toy run\n'
        config = Config.from_string(text)
        self.assertEqual(config.get_int_value('epochs'), 12)
        self.assertEqual(config.get_float_value('lr0'), 0.002)
        self.assertFalse(config.get_bool_value('use_attention'))
        self.assertEqual(config.get_int_list_value('channels'), [4, 8, 16])
        self.assertEqual(config.get_value('name'), 'toy run')
        self.assertEqual(config.get_int_value('missing', 7), 7)
        self.assertIsNone(config.get_value('missing'))
        with self.assertRaises(ConfigError):
            config.get_int_value('lr0')
        with self.assertRaises(ConfigError):
            config.get_bool_value('name')
        with self.assertRaises(ConfigError) as ctx:
            Config.from_string('epochs=1\nbatch=2\n', schema={'epochs': None})
        self.assertEqual(ctx.exception.key, 'batch')
        with self.assertRaises(ConfigError):
            Config.from_string('epochs=1\nepochs=2\n')
        with self.assertRaises(ConfigError):
            Config.from_string('just a line\n')

    def test_001_defaults_and_dumps(self):
        """Schema defaults fill missing keys; dumps reads back."""
        print('INFO: [TEST_001] defaults and dumps')
        config = Config.from_string('a=1\n', schema={'a': None, 'b': 2.5, 'c': [1, 2]})
        self.assertEqual(config.get_float_value('b'), 2.5)
        self.assertEqual(config.get_value('c'), '1,2')
        text = dumps({'x': 0.1, 'flag': True, 'sizes': [1, 2], 'name': 'denoise'})
        self.assertEqual(text, 'x=0.1\nflag=true\nsizes=1,2\nname=denoise\n')
        back = Config.from_string(text)
        self.assertEqual(back.get_float_value('x'), 0.1)
        self.assertTrue(back.get_bool_value('flag'))
        self.assertEqual(format_value(1.0), '1.0')
        self.assertEqual(format_value(float('inf')), 'inf')
        self.assertEqual(format_value(0.123456789), '0.123457')

    def test_002_files(self):
        """Explicit files are read; missing ones are configuration errors."""
        print('INFO: [TEST_002] configuration files')
        tmp = tempfile.mkdtemp(prefix='lpienet-conf-')
        try:
            path = os.path.join(tmp, 'lpienet.conf')
            with open(path, 'w', encoding='utf-8') as f:
                f.write('seed=4\n')
            config = Config(path, schema={'seed': None})
            self.assertEqual(config.loaded_config_file, path)
            self.assertEqual(config.get_int_value('seed'), 4)
            with self.assertRaises(ConfigError):
                Config(os.path.join(tmp, 'missing.conf'))
        finally:
            shutil.rmtree(tmp, ignore_errors=True)


class TestImageIO(unittest.TestCase):
    """Test the PNG and LPT1 files."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp(prefix='lpienet-io-')

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    def setUp(self):
        """The function is called *every time* before test_*."""
        print('\n' + '=' * 78)

    def test_000_lpt1(self):
        """Exact round trip and decoding errors."""
        print('INFO: [TEST_000] LPT1 tensors')
        array = make_rng(0).random((2, 3, 5, 4), dtype=np.float32)
        data = encode_lpt1(array)
        self.assertEqual(data[:4], b'LPT1')
        self.assertEqual(len(data), 4 + 16 + array.size * 4)
        np.testing.assert_array_equal(decode_lpt1(data), array)
        with self.assertRaises(FormatError):
            decode_lpt1(b'LPT2' + data[4:])
        with self.assertRaises(FormatError):
            decode_lpt1(data[:-1])
        with self.assertRaises(FormatError):
            decode_lpt1(data + b'\0\0\0\0')
        with self.assertRaises(FormatError):
            decode_lpt1(data[:10])
        path = os.path.join(self.tmp, 'tensor.lpt')
        write_image(path, array)
        np.testing.assert_array_equal(read_image(path), array)

    def test_001_png(self):
        """8-bit values come back as k / 255."""
        print('INFO: [TEST_001] PNG images')
        levels = np.arange(256, dtype=np.float32).reshape(1, 1, 16, 16) / np.float32(255)
        image = np.concatenate([levels, levels[..., ::-1], levels.transpose(0, 1, 3, 2)], axis=1)
        path = os.path.join(self.tmp, 'levels.png')
        write_png(path, image)
        back = read_png(path)
        self.assertEqual(back.shape, (1, 3, 16, 16))
        self.assertEqual(back.dtype, np.float32)
        np.testing.assert_array_equal(back, image)
        self.assertEqual(to_uint8(np.full((3, 2, 2), 2.0)).max(), 255)
        self.assertEqual(to_uint8(np.full((3, 2, 2), -1.0)).min(), 0)

    def test_002_formats(self):
        """Only .png and .lpt files are accepted."""
        print('INFO: [TEST_002] file formats')
        self.assertEqual(image_format('a/b.PNG'), 'png')
        self.assertEqual(image_format('x.lpt1'), 'lpt1')
        with self.assertRaises(FormatError):
            image_format('photo.jpg')
        with self.assertRaises(FormatError):
            read_png(os.path.join(self.tmp, 'missing.png'))
        garbage = os.path.join(self.tmp, 'garbage.png')
        with open(garbage, 'wb') as f:
            f.write(b'not a png')
        with self.assertRaises(FormatError):
            read_png(garbage)


class TestCommands(unittest.TestCase):
    """Test the lpienet sub-commands end to end."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp(prefix='lpienet-cli-')
        cls.conf = cls.path('lpienet.conf')
        with open(cls.conf, 'w', encoding='utf-8') as f:
            f.write('# test configuration\n')
        rng = make_rng(1)
        os.makedirs(cls.path('data', 'clean'))
        for i in range(3):
            write_png(cls.path('data', 'clean', f'img{i}.png'), rng.random((1, 3, 16, 16)))
        cls.image = cls.path('input.lpt')
        write_lpt1(cls.image, rng.random((1, 3, 16, 16), dtype=np.float32))

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    @classmethod
    def path(cls, *names):
        return os.path.join(cls.tmp, *names)

    def setUp(self):
        """The function is called *every time* before test_*."""
        print('\n' + '=' * 78)

    def lpienet(self, *argv, conf=None):
        """Run one command line; return (exit code, stdout)."""
        stdout = io.StringIO()
        with redirect_stdout(stdout), redirect_stderr(io.StringIO()):
            core = LpienetMain(['-C', conf or self.conf, *argv])
            code = run(core.get_args(), core.get_config())
        return code, stdout.getvalue()

    def test_000_arguments(self):
        """Seed precedence and global configuration keys."""
        print('INFO: [TEST_000] command line arguments')
        args = LpienetMain(['-C', self.conf, '--seed', '3', 'eval', 'a.png', 'b.png']).get_args()
        self.assertEqual((args.command, args.seed, args.seed_given), ('eval', 3, True))
        conf = self.path('seeded.conf')
        with open(conf, 'w', encoding='utf-8') as f:
            f.write('seed=5\npreset=tiny\nresolutions=64\n')
        args = LpienetMain(['-C', conf, 'profile']).get_args()
        self.assertEqual((args.seed, args.seed_given), (5, False))
        self.assertEqual((args.preset, args.resolutions), ('tiny', '64'))
        args = LpienetMain(['-C', self.conf, 'bench']).get_args()
        self.assertEqual((args.preset, args.resolutions, args.iters, args.warmup), ('lpienet', '256,512', 5, 2))
        self.assertEqual(LpienetMain(['-C', self.conf, 'profile']).get_args().resolutions, '256,800,fhd,2k,4k')

    def test_001_usage_errors(self):
        """Bad flags and configuration files exit with 2."""
        print('INFO: [TEST_001] usage errors')
        bad = self.path('bad.conf')
        with open(bad, 'w', encoding='utf-8') as f:
            f.write('colour=blue\n')
        for argv in (
            ['-C', self.conf],
            ['-C', self.conf, 'explode'],
            ['-C', self.conf, '--seed', '-1', 'gradcheck'],
            ['-C', self.conf, '--threads', '0', 'gradcheck'],
            ['-C', bad, 'gradcheck'],
            ['-C', self.path('missing.conf'), 'gradcheck'],
        ):
            with redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as ctx:
                LpienetMain(argv)
            self.assertEqual(ctx.exception.code, EXIT_USAGE, argv)

    def test_002_main_entry(self):
        """The console entry point exits with the command status."""
        print('INFO: [TEST_002] main entry point')
        with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as ctx:
            lpienet.main(['-C', self.conf, 'eval', self.image, self.path('missing.lpt')])
        self.assertEqual(ctx.exception.code, EXIT_USAGE)

    def test_003_eval(self):
        """An image against itself: psnr_db=inf ssim=1.0."""
        print('INFO: [TEST_003] eval')
        code, out = self.lpienet('eval', self.image, self.image)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(parse_lines(out), [{'psnr_db': 'inf', 'ssim': '1.0'}])

    def test_004_degrade(self):
        """Deterministic per seed; the effective parameters are written beside the image."""
        print('INFO: [TEST_004] degrade')
        first, second, third = (self.path(f'udc{i}.lpt') for i in range(3))
        code, out = self.lpienet('--seed', '3', 'degrade', '--input', self.image, '--task', 'udc', '--output', first)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(parse_lines(out)[0]['seed'], '3')
        self.lpienet('--seed', '3', 'degrade', '--input', self.image, '--task', 'udc', '--output', second)
        self.lpienet('--seed', '4', 'degrade', '--input', self.image, '--task', 'udc', '--output', third)
        np.testing.assert_array_equal(read_image(first), read_image(second))
        self.assertFalse(np.array_equal(read_image(first), read_image(third)))

        sidecar = Config(f'{first}.conf')
        self.assertEqual(sidecar.get_value('task'), 'udc')
        self.assertEqual(sidecar.get_int_value('seed'), 3)
        self.assertEqual(sidecar.get_value('psf'), 'disk')

    def test_005_degrade_overrides(self):
        """A Dirac PSF override turns the deblur preset into the identity."""
        print('INFO: [TEST_005] degrade overrides')
        overrides = self.path('dirac.conf')
        with open(overrides, 'w', encoding='utf-8') as f:
            f.write('psf=dirac\n')
        output = self.path('deblur.lpt')
        code, _ = self.lpienet(
            'degrade', '--input', self.image, '--task', 'deblur', '--config', overrides, '--output', output
        )
        self.assertEqual(code, EXIT_OK)
        np.testing.assert_array_equal(read_image(output), read_image(self.image))

        with open(overrides, 'w', encoding='utf-8') as f:
            f.write('blur=9\n')
        code, _ = self.lpienet(
            'degrade', '--input', self.image, '--task', 'deblur', '--config', overrides, '--output', output
        )
        self.assertEqual(code, EXIT_USAGE)
        code, _ = self.lpienet('degrade', '--input', self.image, '--task', 'hdr', '--output', self.path('out.jpg'))
        self.assertEqual(code, EXIT_USAGE)
        code, _ = self.lpienet('degrade', '--input', self.path('nope.png'), '--task', 'hdr', '--output', output)
        self.assertEqual(code, EXIT_USAGE)

    def test_006_train_and_enhance(self):
        """Zero epochs save the initial weights; the checkpoint then enhances an image."""
        print('INFO: [TEST_006] train and enhance')
        recipe = self.path('train.conf')
        with open(recipe, 'w', encoding='utf-8') as f:
            f.write('epochs=0\nmodel.preset=tiny\n')
        model = self.path('zero.lpck')
        code, out = self.lpienet('train', '--data', self.path('data'), '--config', recipe, '--out', model)
        self.assertEqual(code, EXIT_OK)
        line = parse_lines(out)[0]
        self.assertEqual(line['epochs_run'], '0')
        self.assertEqual(load_checkpoint(model).config, preset('tiny'))
        self.assertTrue(os.path.isfile(f'{model}.log'))

        output = self.path('enhanced.png')
        missing = self.path('none.png')
        code, _ = self.lpienet(
            'enhance', '--model', model, '--input', self.image, '--output', output, '--ensemble', '--reference', missing
        )
        self.assertEqual(code, EXIT_USAGE)
        code, out = self.lpienet(
            'enhance', '--model', model, '--input', self.image, '--output', output, '--reference', self.image
        )
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(read_image(output).shape, (1, 3, 16, 16))
        self.assertIn('psnr_db', parse_lines(out)[0])

        code, _ = self.lpienet('train', '--data', self.path('nowhere'), '--out', model)
        self.assertEqual(code, EXIT_USAGE)
        code, _ = self.lpienet('enhance', '--model', self.path('none.lpck'), '--input', self.image, '--output', output)
        self.assertEqual(code, EXIT_USAGE)
        with open(self.path('broken.lpck'), 'wb') as f:
            f.write(b'LPCKjunk')
        code, _ = self.lpienet(
            'enhance', '--model', self.path('broken.lpck'), '--input', self.image, '--output', output
        )
        self.assertEqual(code, EXIT_FAILURE)

    def test_007_train_one_epoch(self):
        """One epoch writes the key=value log and the CSV export; 8 px patches are usage errors."""
        print('INFO: [TEST_007] train one epoch')
        recipe = self.path('epoch.conf')
        with open(recipe, 'w', encoding='utf-8') as f:
            f.write('epochs=1\nbatch_size=2\npatch_size=12\nmodel.preset=tiny\ndegrade.task=denoise\n')
        model = self.path('one.lpck')
        table = self.path('one.csv')
        code, out = self.lpienet(
            '--seed', '2', 'train', '--data', self.path('data'), '--config', recipe, '--out', model,
            '--export-csv', table,
        )  # fmt: skip
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(parse_lines(out)[0]['epochs_run'], '1')
        self.assertTrue(os.path.isfile(model))
        self.assertTrue(os.path.isfile(f'{model}.last'))
        with open(f'{model}.log', encoding='utf-8') as f:
            lines = f.read().splitlines()
        self.assertIn('# seed=2', lines)
        rows = parse_lines('\n'.join(line for line in lines if not line.startswith('#')))
        self.assertEqual([row['epoch'] for row in rows], ['0'])
        with open(table, newline='') as f:
            header, *values = list(csv.reader(f))
        self.assertEqual(header[:3], ['epoch', 'lr', 'train_loss'])
        self.assertEqual(len(values), 1)

        with open(recipe, 'w', encoding='utf-8') as f:
            f.write('epochs=1\npatch_size=8\nmodel.preset=tiny\ndegrade.task=denoise\n')
        code, _ = self.lpienet('train', '--data', self.path('data'), '--config', recipe, '--out', model)
        self.assertEqual(code, EXIT_USAGE)

    def test_008_profile(self):
        """One key=value line per resolution; 1.3 GMACs at 256x256."""
        print('INFO: [TEST_008] profile')
        code, out = self.lpienet('profile', '--preset', 'lpienet', '--resolutions', '256,fhd', '--layers')
        self.assertEqual(code, EXIT_OK)
        lines = parse_lines(out)
        self.assertEqual([line['resolution'] for line in lines], ['256x256', 'fhd'])
        self.assertEqual(lines[0]['gmacs'], '1.3')
        self.assertAlmostEqual(float(lines[0]['gflops']), 2 * int(lines[0]['macs']) / 1e9, delta=1e-4)
        self.assertIn('enc3.ir2.expand', out)
        code, _ = self.lpienet('profile', '--preset', 'huge')
        self.assertEqual(code, EXIT_USAGE)
        code, _ = self.lpienet('profile', '--resolutions', 'wide')
        self.assertEqual(code, EXIT_USAGE)

    def test_009_bench(self):
        """Iteration floor and key=value result lines."""
        print('INFO: [TEST_009] bench')
        code, _ = self.lpienet('bench', '--preset', 'tiny', '--resolutions', '32', '--iters', '3')
        self.assertEqual(code, EXIT_USAGE)
        code, _ = self.lpienet('bench', '--preset', 'tiny', '--resolutions', '32', '--warmup', '1')
        self.assertEqual(code, EXIT_USAGE)
        code, out = self.lpienet('--threads', '1', 'bench', '--preset', 'tiny', '--resolutions', '32,48x32')
        self.assertEqual(code, EXIT_OK)
        lines = [line for line in parse_lines(out) if 'status' in line]
        self.assertEqual([line['resolution'] for line in lines], ['32x32', '48x32'])
        self.assertEqual({line['status'] for line in lines}, {'ok'})
        self.assertEqual({line['threads'] for line in lines}, {'1'})

    def test_010_gradcheck(self):
        """Every op, loss and block passes for one seed."""
        print('INFO: [TEST_010] gradcheck')
        code, out = self.lpienet('gradcheck', '--seeds', '1', '--no-model')
        self.assertEqual(code, EXIT_OK)
        lines = parse_lines(out)
        names = [line['check'] for line in lines]
        self.assertIn('conv2d', names)
        self.assertIn('ssim_loss', names)
        self.assertIn('ira_block', names)
        self.assertNotIn('model.tiny', names)
        self.assertEqual({line['status'] for line in lines}, {'ok'})
        code, _ = self.lpienet('gradcheck', '--seeds', '0')
        self.assertEqual(code, EXIT_USAGE)
        code, out = self.lpienet('gradcheck', '--seeds', '1', '--no-model', '--threshold', '1e-30')
        self.assertEqual(code, EXIT_FAILURE)

    def test_011_enhance_golden(self):
        """enhance on the committed fixture writes the committed output byte for byte."""
        print('INFO: [TEST_011] enhance the golden fixture')
        output = self.path('golden_enhanced.lpt')
        code, _ = self.lpienet(
            'enhance', '--model', os.path.join(FIXTURES, 'golden.lpck'), '--input',
            os.path.join(FIXTURES, 'golden_input.lpt'), '--output', output,
        )  # fmt: skip
        self.assertEqual(code, EXIT_OK)
        with open(output, 'rb') as f, open(os.path.join(FIXTURES, 'golden_output.lpt'), 'rb') as g:
            self.assertEqual(f.read(), g.read())


if __name__ == '__main__':
    unittest.main()
