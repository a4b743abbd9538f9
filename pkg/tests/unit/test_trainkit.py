#!/usr/bin/env python
#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Unitary tests of the training recipe."""

import os
import shutil
import tempfile
import unittest
from collections import Counter, OrderedDict

import numpy as np

from lpienet import __version__
from lpienet.degrade import make_rng, preset
from lpienet.globals import ConfigError, ShapeError, TrainingError
from lpienet.model import LPIENet, load_checkpoint
from lpienet.model import preset as model_preset
from lpienet.train import (
    GRID,
    RANDOM,
    AdamState,
    Sample,
    TrainConfig,
    adam_step,
    augment,
    default_patch_schedule,
    extract_patches,
    parse_patch_schedule,
    plateau_schedule,
    read_train_config,
    split_validation,
    train_loop,
)
from lpienet.train.data import apply_transform, fit_patch, invert_transform, patch_size_at, sample_transform
from lpienet.train.loop import with_epochs

print(f'Unitary tests of the training recipe for lpienet {__version__}')


def toy_pairs(count=4, size=16, seed=0):
    """Noisy/clean pairs of smooth random images."""
    rng = make_rng(seed)
    cfg = preset('denoise', seed=seed)
    pairs = []
    for _ in range(count):
        clean = np.clip(rng.random((3, size // 4, size // 4)).repeat(4, axis=1).repeat(4, axis=2), 0, 1)
        noisy = np.clip(clean + rng.normal(0, np.sqrt(cfg.beta2), size=clean.shape), 0, 1)
        pairs.append((noisy.astype(np.float32), clean.astype(np.float32)))
    return pairs


class Recorder:
    """Exporter keeping the rows it receives."""

    def __init__(self):
        self.rows = []

    def update(self, row):
        self.rows.append(dict(row))


class TestTrainkit(unittest.TestCase):
    """Test the optimizer, the data pipeline and the loop."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp(prefix='lpienet-train-')

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    def setUp(self):
        """The function is called *every time* before test_*."""
        print('\n' + '=' * 78)
        self.rng = make_rng(3)

    def small_cfg(self, epochs=2, **kwargs):
        values = {'epochs': epochs, 'batch_size': 2, 'patch_size': (12, 12), 'patch_schedule': [(0, (12, 12))]}
        values.update(kwargs)
        return TrainConfig(**values)

    def test_000_adam_zero_grads(self):
        """Zero gradients leave the weights unchanged and count the step."""
        print('INFO: [TEST_000] adam_step zero gradients')
        weights = OrderedDict(w=self.rng.normal(size=(2, 3, 1, 1)))
        new, state = adam_step(weights, {'w': np.zeros((2, 3, 1, 1))}, None, lr=0.1)
        np.testing.assert_array_equal(new['w'], weights['w'])
        self.assertEqual(state.t, 1)
        new, state = adam_step(new, {'w': np.zeros((2, 3, 1, 1))}, state, lr=0.1)
        self.assertEqual(state.t, 2)
        with self.assertRaises(ShapeError):
            adam_step(weights, {'w': np.zeros((1, 1, 1, 1))}, None, lr=0.1)

    def test_001_adam_first_step(self):
        """Bias correction makes the first step lr-sized."""
        print('INFO: [TEST_001] adam_step first step')
        weights = OrderedDict(w=np.zeros((1, 1, 1, 1)))
        new, _ = adam_step(weights, {'w': np.ones((1, 1, 1, 1))}, None, lr=0.1)
        self.assertAlmostEqual(float(new['w'][0, 0, 0, 0]), -0.1, delta=1e-6)
        self.assertEqual(float(weights['w'][0, 0, 0, 0]), 0.0)

    def test_002_adam_quadratic(self):
        """100 steps on (w - 3)^2 from 0 land near 3."""
        print('INFO: [TEST_002] adam_step convergence')
        weights = OrderedDict(w=np.zeros((1, 1, 1, 1)))
        state = None
        for _ in range(100):
            grad = 2 * (weights['w'] - 3.0)
            weights, state = adam_step(weights, {'w': grad}, state, lr=0.3)
        self.assertLess(abs(float(weights['w'][0, 0, 0, 0]) - 3.0), 0.1)
        self.assertEqual(state.t, 100)

    def test_003_plateau(self):
        """Improving histories keep the rate; flat ones halve it down to lr_min."""
        print('INFO: [TEST_003] plateau_schedule')
        improving = [1.0 / (i + 1) for i in range(30)]
        self.assertEqual(plateau_schedule(improving, 2e-3), 2e-3)
        self.assertEqual(plateau_schedule([1.0] * 10, 2e-3), 2e-3)
        self.assertEqual(plateau_schedule([1.0] * 11, 2e-3), 1e-3)

        lr, history, rates = 2e-3, [], []
        for _ in range(400):
            history.append(1.0)
            lr = plateau_schedule(history, lr)
            rates.append(lr)
        self.assertTrue(all(b <= a for a, b in zip(rates, rates[1:])))
        distinct = sorted(set(rates), reverse=True)
        self.assertEqual(distinct[:3], [2e-3, 1e-3, 5e-4])
        self.assertEqual(min(rates), 1e-6)
        self.assertEqual(rates[-1], 1e-6)

    def test_004_augment(self):
        """Transforms are uniform, invertible and shared by both images."""
        print('INFO: [TEST_004] augment')
        counts = Counter(sample_transform(self.rng) for _ in range(8000))
        self.assertEqual(sorted(counts), list(range(8)))
        for t, count in counts.items():
            self.assertGreaterEqual(count, 900, f'transform {t}')
            self.assertLessEqual(count, 1100, f'transform {t}')

        coords = np.indices((5, 7)).astype(np.float32)
        degraded = np.concatenate([coords, coords[:1]])
        clean = degraded + 100.0
        for t in range(8):
            pair = apply_transform((degraded, clean), t)
            np.testing.assert_array_equal(pair[1] - pair[0], 100.0)
            back = invert_transform(pair, t)
            np.testing.assert_array_equal(back[0], degraded)
            np.testing.assert_array_equal(back[1], clean)
        np.testing.assert_array_equal(apply_transform((degraded, clean), 0)[0], degraded)
        a, b = augment((degraded, clean), self.rng)
        np.testing.assert_array_equal(b - a, 100.0)

    def test_005_extract_patches(self):
        """Non-overlapping tiling counts and random anchors."""
        print('INFO: [TEST_005] extract_patches')
        self.assertEqual(len(extract_patches(np.zeros((2000, 3000), dtype=np.uint8), 1000)), 6)
        image = self.rng.random((3, 800, 800))
        patches = extract_patches(image, 400, GRID)
        self.assertEqual(len(patches), 4)
        np.testing.assert_array_equal(patches[1], image[:, :400, 400:])
        whole = extract_patches(image, 800)
        self.assertEqual(len(whole), 1)
        np.testing.assert_array_equal(whole[0], image)
        random = extract_patches(image, (64, 32), RANDOM, rng=self.rng, count=5)
        self.assertEqual([p.shape for p in random], [(3, 64, 32)] * 5)
        with self.assertRaises(ShapeError):
            extract_patches(image, 801)
        with self.assertRaises(ValueError):
            extract_patches(image, 400, 'overlap')

    def test_006_patch_schedule(self):
        """Default stages, parsing and fitting to small images."""
        print('INFO: [TEST_006] patch schedule')
        self.assertEqual(
            default_patch_schedule(500, (256, 256)), [(0, (64, 64)), (200, (128, 128)), (400, (256, 256))]
        )
        self.assertEqual(default_patch_schedule(10, (64, 64)), [(0, (64, 64))])
        schedule = parse_patch_schedule('0:64,200:128x96')
        self.assertEqual(schedule, [(0, (64, 64)), (200, (128, 96))])
        self.assertEqual(patch_size_at(schedule, 199), (64, 64))
        self.assertEqual(patch_size_at(schedule, 200), (128, 96))
        for bad in ('10:64', '0:63', '0:8', '0:64,0:128', 'x'):
            with self.assertRaises(ConfigError):
                parse_patch_schedule(bad)
        self.assertEqual(fit_patch((256, 256), (100, 130)), (100, 128))
        self.assertEqual(fit_patch((64, 64), (15, 100)), (12, 64))
        for small in ((3, 100), (11, 100)):
            with self.assertRaises(ShapeError):
                fit_patch((64, 64), small)

    def test_007_split(self):
        """Seeded hold-out of 10%, at least one sample."""
        print('INFO: [TEST_007] validation split')
        samples = [Sample(clean=np.full((3, 4, 4), i / 10)) for i in range(10)]
        train, validation = split_validation(samples, 0.1, seed=5)
        self.assertEqual((len(train), len(validation)), (9, 1))
        again, _ = split_validation(samples, 0.1, seed=5)
        self.assertEqual([id(s) for s in train], [id(s) for s in again])
        train, validation = split_validation(samples[:3], 0.01, seed=5)
        self.assertEqual(len(validation), 1)
        train, validation = split_validation(samples, 0.0)
        self.assertEqual(len(train), len(validation))
        with self.assertRaises(ConfigError):
            split_validation(samples, 1.0)

    def test_008_train_config(self):
        """TrainConfig invariants and the key=value file."""
        print('INFO: [TEST_008] TrainConfig')
        cfg = TrainConfig()
        self.assertEqual((cfg.lr0, cfg.lr_min, cfg.plateau_factor), (2e-3, 1e-6, 0.5))
        self.assertEqual((cfg.plateau_patience, cfg.batch_size, cfg.epochs), (10, 4, 500))
        bad_values = (
            {'lr_min': 1.0},
            {'plateau_factor': 1.0},
            {'batch_size': 0},
            {'patch_size': (30, 30)},
            {'patch_size': (8, 8)},
        )
        for bad in bad_values:
            with self.assertRaises(ConfigError):
                TrainConfig(**bad)

        cfg, config, degradation = read_train_config(
            text='# toy run\nepochs=3\npatch_size=16\nalpha=0.25\nmodel.preset=tiny\ndegrade.task=denoise\n'
        )
        self.assertEqual(cfg.epochs, 3)
        self.assertEqual(cfg.loss.alpha, 0.25)
        self.assertEqual(cfg.patch_size, (16, 16))
        self.assertEqual(config.get_value('model.preset'), 'tiny')
        self.assertEqual(degradation.task, 'denoise')
        _, _, degradation = read_train_config(text='epochs=1\n')
        self.assertIsNone(degradation)
        with self.assertRaises(ConfigError):
            read_train_config(text='learning_rate=0.1\n')

    def test_009_zero_epochs(self):
        """epochs=0 leaves the model untouched and logs nothing."""
        print('INFO: [TEST_009] zero epochs')
        model = LPIENet.build(model_preset('tiny'), rng=0)
        result = train_loop(model, toy_pairs(), self.small_cfg(epochs=0))
        self.assertEqual(result.log, [])
        self.assertEqual(result.epochs_run, 0)
        for name, value in model.weights.items():
            np.testing.assert_array_equal(result.model.weights[name], value)

    def test_010_reproducible(self):
        """Same configuration and seed give the same weights bit for bit."""
        print('INFO: [TEST_010] reproducibility')
        cfg = self.small_cfg(epochs=2)
        recorder = Recorder()
        a = train_loop(LPIENet.build(model_preset('tiny'), rng=0), toy_pairs(), cfg, exporters=[recorder])
        b = train_loop(LPIENet.build(model_preset('tiny'), rng=0), toy_pairs(), cfg)
        for name in a.model.weights:
            np.testing.assert_array_equal(a.model.weights[name], b.model.weights[name])
        self.assertEqual(len(a.log), 2)
        self.assertEqual(recorder.rows, a.log)
        self.assertEqual(
            list(a.log[0]), ['epoch', 'lr', 'train_loss', 'val_loss', 'val_psnr', 'val_ssim', 'patch', 'seconds']
        )
        self.assertEqual(a.log[0]['patch'], '12')
        self.assertEqual(a.optimizer.t, 4)
        initial = LPIENet.build(model_preset('tiny'), rng=0)
        self.assertFalse(np.array_equal(a.model.weights['stem.weight'], initial.weights['stem.weight']))

    def test_011_resume(self):
        """Stopping after one epoch and resuming matches the uninterrupted run."""
        print('INFO: [TEST_011] checkpoint resume')
        cfg = self.small_cfg(epochs=2)
        full = train_loop(LPIENet.build(model_preset('tiny'), rng=0), toy_pairs(), cfg)

        last = os.path.join(self.tmp, 'resume.lpck.last')
        best = os.path.join(self.tmp, 'resume.lpck')
        train_loop(
            LPIENet.build(model_preset('tiny'), rng=0),
            toy_pairs(),
            with_epochs(cfg, 1),
            checkpoint_path=best,
            last_checkpoint_path=last,
        )
        self.assertTrue(os.path.isfile(best))
        resumed = train_loop(LPIENet.build(model_preset('tiny'), rng=0), toy_pairs(), cfg, resume=last)
        self.assertEqual(resumed.epochs_run, 1)
        self.assertEqual(resumed.log[0]['epoch'], 1)
        for name in full.model.weights:
            np.testing.assert_array_equal(resumed.model.weights[name], full.model.weights[name])
        self.assertEqual(resumed.optimizer.t, full.optimizer.t)
        self.assertEqual(load_checkpoint(last).config, model_preset('tiny'))

        with self.assertRaises(ConfigError):
            train_loop(LPIENet.build(model_preset('lpienet-noatt'), rng=0), toy_pairs(), cfg, resume=last)

    def test_012_clean_only(self):
        """Clean images are degraded on the fly; without a degradation they are rejected."""
        print('INFO: [TEST_012] on-the-fly degradation')
        clean = [pair[1] for pair in toy_pairs()]
        result = train_loop(
            LPIENet.build(model_preset('tiny'), rng=0), clean, self.small_cfg(epochs=1), degradation=preset('denoise')
        )
        self.assertEqual(result.epochs_run, 1)
        with self.assertRaises(ConfigError):
            train_loop(LPIENet.build(model_preset('tiny'), rng=0), clean, self.small_cfg(epochs=1))

    def test_013_nan_loss(self):
        """A non-finite loss aborts and names the first non-finite tensor."""
        print('INFO: [TEST_013] non-finite loss')
        model = LPIENet.build(model_preset('tiny'), rng=0)
        weights = OrderedDict(model.weights)
        weights['stem.weight'] = np.full_like(weights['stem.weight'], np.nan)
        with self.assertRaises(TrainingError) as ctx:
            train_loop(model.with_weights(weights), toy_pairs(), self.small_cfg(epochs=1))
        self.assertEqual(ctx.exception.tensor, 'stem.weight')

    def test_014_adam_state_checkpoint(self):
        """AdamState survives the checkpoint dictionary form."""
        print('INFO: [TEST_014] AdamState')
        weights = LPIENet.build(model_preset('tiny'), rng=0).weights
        state = AdamState.zeros_like(weights)
        self.assertEqual(state.t, 0)
        self.assertEqual(list(state.m), list(weights))
        back = AdamState.from_checkpoint(state.to_checkpoint(), weights)
        self.assertEqual(back.t, 0)
        self.assertEqual(back.v['head.bias'].dtype, weights['head.bias'].dtype)

    def test_015_smaller_than_ssim_window(self):
        """Patches and images below 12 px are configuration errors naming the key."""
        print('INFO: [TEST_015] patch and image floor')
        with self.assertRaises(ConfigError) as ctx:
            self.small_cfg(patch_size=(8, 8), patch_schedule=[(0, (8, 8))])
        self.assertEqual(ctx.exception.key, 'patch_size')
        with self.assertRaises(ConfigError) as ctx:
            self.small_cfg(patch_schedule=[(0, (12, 12)), (1, (8, 8))])
        self.assertEqual(ctx.exception.key, 'patch_schedule')

        model = LPIENet.build(model_preset('tiny'), rng=0)
        with self.assertRaises(ConfigError) as ctx:
            train_loop(model, toy_pairs(size=8), self.small_cfg(epochs=1))
        self.assertEqual(ctx.exception.key, 'data')
        with self.assertRaises(ConfigError) as ctx:
            train_loop(model, toy_pairs(), self.small_cfg(epochs=1), validation=toy_pairs(count=1, size=8))
        self.assertEqual(ctx.exception.key, 'validation')


if __name__ == '__main__':
    unittest.main()
