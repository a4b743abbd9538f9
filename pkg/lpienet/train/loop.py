#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Training recipe and loop.

Per epoch: shuffle, crop, degrade (unpaired data), augment, forward,
combined loss, backward, Adam; then validation, plateau schedule and a
checkpoint when the validation loss improves.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from lpienet.autodiff.tape import Tape
from lpienet.config import Config
from lpienet.degrade.noise import make_rng
from lpienet.degrade.pipeline import DegradationConfig, degradation_schema
from lpienet.globals import ConfigError, TrainingError, key_value_line
from lpienet.logger import logger
from lpienet.model.checkpoint import read_checkpoint, save_checkpoint
from lpienet.model.config import model_schema
from lpienet.objectives import LossWeights, combined_loss, psnr, ssim
from lpienet.timer import Counter
from lpienet.train.data import (
    SHUFFLE_STREAM,
    check_image_sizes,
    check_patch_schedule,
    check_patch_size,
    default_patch_schedule,
    fit_patch,
    format_patch_schedule,
    format_size,
    make_dataset,
    parse_patch_schedule,
    parse_size,
    patch_size_at,
    prepare_sample,
    split_validation,
    validation_pairs,
)
from lpienet.train.optim import AdamState, adam_step, plateau_schedule

LOG_COLUMNS = ('epoch', 'lr', 'train_loss', 'val_loss', 'val_psnr', 'val_ssim', 'patch', 'seconds')


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of a training run."""

    lr0: float = 2e-3
    lr_min: float = 1e-6
    plateau_factor: float = 0.5
    plateau_patience: int = 10
    plateau_threshold: float = 1e-4
    batch_size: int = 4
    epochs: int = 500
    patch_size: Tuple[int, int] = (256, 256)
    patch_schedule: Optional[List[Tuple[int, Tuple[int, int]]]] = None
    loss: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, 'patch_size', tuple(int(v) for v in self.patch_size))
        if self.patch_schedule is None:
            object.__setattr__(self, 'patch_schedule', default_patch_schedule(self.epochs, self.patch_size))
        self.validate()

    def validate(self):
        if not 0 < self.lr_min <= self.lr0:
            raise ConfigError('lr_min', f'need 0 < lr_min <= lr0, got lr_min={self.lr_min} lr0={self.lr0}')
        if not 0 < self.plateau_factor < 1:
            raise ConfigError('plateau_factor', f'must be in (0, 1), got {self.plateau_factor}')
        if self.plateau_patience < 1:
            raise ConfigError('plateau_patience', f'must be >= 1, got {self.plateau_patience}')
        if self.batch_size < 1:
            raise ConfigError('batch_size', f'must be >= 1, got {self.batch_size}')
        if self.epochs < 0:
            raise ConfigError('epochs', f'must be >= 0, got {self.epochs}')
        check_patch_size(self.patch_size, 'patch_size')
        check_patch_schedule(self.patch_schedule)
        for _, size in self.patch_schedule:
            check_patch_size(size, 'patch_schedule')

    def to_dict(self):
        return {
            'lr0': self.lr0,
            'lr_min': self.lr_min,
            'plateau_factor': self.plateau_factor,
            'plateau_patience': self.plateau_patience,
            'plateau_threshold': self.plateau_threshold,
            'batch_size': self.batch_size,
            'epochs': self.epochs,
            'patch_size': format_size(self.patch_size),
            'patch_schedule': format_patch_schedule(self.patch_schedule),
            'alpha': self.loss.alpha,
            'beta': self.loss.beta,
            'gradient_operator': self.loss.gradient_operator,
            'seed': self.seed,
            'val_fraction': self.val_fraction,
        }

    @classmethod
    def from_config(cls, config, seed=None):
        """Read the plain (unprefixed) training keys of a Config."""
        default = cls(epochs=0)
        epochs = config.get_int_value('epochs', cls.epochs)
        patch_size = parse_size(config.get_value('patch_size', format_size(default.patch_size)))
        schedule = config.get_value('patch_schedule')
        values = {
            'lr0': config.get_float_value('lr0', default.lr0),
            'lr_min': config.get_float_value('lr_min', default.lr_min),
            'plateau_factor': config.get_float_value('plateau_factor', default.plateau_factor),
            'plateau_patience': config.get_int_value('plateau_patience', default.plateau_patience),
            'plateau_threshold': config.get_float_value('plateau_threshold', default.plateau_threshold),
            'batch_size': config.get_int_value('batch_size', default.batch_size),
            'epochs': epochs,
            'patch_size': patch_size,
            'patch_schedule': parse_patch_schedule(schedule) if schedule else None,
            'loss': LossWeights(
                alpha=config.get_float_value('alpha', default.loss.alpha),
                beta=config.get_float_value('beta', default.loss.beta),
                gradient_operator=config.get_value('gradient_operator', default.loss.gradient_operator),
            ),
            'seed': seed if seed is not None else config.get_int_value('seed', default.seed),
            'val_fraction': config.get_float_value('val_fraction', default.val_fraction),
        }
        return cls(**values)


TRAIN_KEYS = tuple(TrainConfig(epochs=0).to_dict())


def train_schema():
    """Every key a training configuration file may hold."""
    schema = dict.fromkeys(TRAIN_KEYS)
    schema.update(model_schema('model.'))
    schema.update(degradation_schema('degrade.'))
    return schema


def read_train_config(path=None, text=None):
    """Parse a training file into (TrainConfig, model Config view, DegradationConfig or None)."""
    if text is not None:
        config = Config.from_string(text, schema=train_schema())
    else:
        config = Config(path, schema=train_schema())
    train = TrainConfig.from_config(config)
    degradation = None
    if any(key.startswith('degrade.') for key in config.keys()):
        degradation = DegradationConfig.from_config(config, prefix='degrade.')
    return train, config, degradation


@dataclass
class TrainResult:
    model: object
    log: List[Dict[str, object]]
    optimizer: AdamState
    best_val_loss: float
    epochs_run: int


@dataclass
class TrainState:
    """What a checkpoint must hold to continue a run."""

    epoch: int = 0
    step: int = 0
    lr: float = 0.0
    val_history: List[float] = field(default_factory=list)
    best_val_loss: float = math.inf
    optimizer: Optional[AdamState] = None

    def to_header(self):
        return {
            'train.epoch': self.epoch,
            'train.lr': float(self.lr),
            'train.val_history': [float(v) for v in self.val_history],
            'train.best_val_loss': float(self.best_val_loss),
        }

    @classmethod
    def from_checkpoint(cls, checkpoint):
        state = checkpoint.state
        try:
            history = [float(v) for v in state.get('train.val_history', '').split(',') if v.strip()]
            return cls(
                epoch=int(state.get('train.epoch', 0)),
                step=checkpoint.step,
                lr=float(state['train.lr']),
                val_history=history,
                best_val_loss=float(state.get('train.best_val_loss', 'inf')),
                optimizer=AdamState.from_checkpoint(checkpoint.optimizer, checkpoint.model.weights)
                if checkpoint.optimizer is not None
                else None,
            )
        except (KeyError, ValueError) as err:
            raise ConfigError('resume', f'checkpoint has no usable training state ({err})')


def first_non_finite(tape):
    """Name of the first recorded tensor holding NaN or Inf, or None."""
    for node in tape.nodes:
        if not np.isfinite(node.value).all():
            return node.name or f'node{node.index}'
    return None


def loss_and_gradients(model, degraded, target, weights):
    """Forward, combined loss and backward on one batch."""
    tape = Tape()
    params = tape.watch_all(model.weights)
    pred = model.apply(params, degraded)
    loss = combined_loss(pred, target, weights)
    value = loss.item()
    if not math.isfinite(value):
        raise TrainingError(first_non_finite(tape) or 'loss', f'non-finite training loss {value}')
    tape.backward(loss)
    grads = tape.gradients()
    for name, grad in grads.items():
        if not np.isfinite(grad).all():
            raise TrainingError(f'grad.{name}', 'non-finite gradient')
    return value, grads


def evaluate(model, pairs, weights):
    """Mean validation loss, PSNR and SSIM over full-size (degraded, target) pairs."""
    losses, psnrs, ssims = [], [], []
    for degraded, target in pairs:
        pred = model.forward(degraded[None])
        target = target[None].astype(pred.dtype)
        losses.append(combined_loss(pred, target, weights).item())
        psnrs.append(psnr(pred, target))
        ssims.append(ssim(pred, target))
    return float(np.mean(losses)), float(np.mean(psnrs)), float(np.mean(ssims))


def train_loop(
    model,
    dataset,
    cfg,
    degradation=None,
    validation=None,
    checkpoint_path=None,
    last_checkpoint_path=None,
    resume=None,
    exporters=(),
):
    """Train model on dataset with the cfg recipe.

    :param dataset: (degraded, clean) pairs, clean images or Samples
    :param degradation: DegradationConfig used to synthesize pairs for clean-only samples
    :param validation: optional held-out samples; a seeded split of dataset otherwise
    :param checkpoint_path: written each time the validation loss improves
    :param last_checkpoint_path: written after every epoch
    :param resume: checkpoint path to continue from
    :param exporters: objects with an update(row) method, fed one row per epoch
    :return: TrainResult
    """
    samples = make_dataset(dataset)
    if validation is None:
        train_samples, val_samples = split_validation(samples, cfg.val_fraction, cfg.seed)
    else:
        train_samples, val_samples = samples, make_dataset(validation)
    check_image_sizes(train_samples)
    check_image_sizes(val_samples, 'validation')
    val_pairs = validation_pairs(val_samples, degradation, cfg.seed)

    state = TrainState(lr=cfg.lr0)
    if resume is not None:
        checkpoint = read_checkpoint(resume)
        if checkpoint.model.config != model.config:
            raise ConfigError('resume', 'checkpoint architecture differs from the configured model')
        model = checkpoint.model
        state = TrainState.from_checkpoint(checkpoint)
        logger.info(f'Resume from {resume} at epoch {state.epoch} (step {state.step}, lr {state.lr:.3g})')
    adam = state.optimizer or AdamState.zeros_like(model.weights)

    log = []
    if cfg.epochs == 0 or state.epoch >= cfg.epochs:
        return TrainResult(model, log, adam, state.best_val_loss, 0)

    logger.info(
        f'Training {model.param_count()} parameters on {len(train_samples)} samples '
        f'({len(val_pairs)} held out) for {cfg.epochs} epochs'
    )
    logger.info(key_value_line(cfg.to_dict()))
    start_epoch = state.epoch
    for epoch in range(start_epoch, cfg.epochs):
        counter = Counter()
        lr = state.lr
        target_patch = patch_size_at(cfg.patch_schedule, epoch)
        patch = fit_patch(target_patch, tuple(min(s.size[d] for s in train_samples) for d in (0, 1)))
        if patch != target_patch:
            logger.debug(f'Patch {format_size(target_patch)} shrunk to {format_size(patch)} to fit the images')

        order = make_rng(cfg.seed, SHUFFLE_STREAM, epoch).permutation(len(train_samples))
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [
                prepare_sample(train_samples[i], patch, degradation, cfg.seed, epoch, int(i))
                for i in order[start : start + cfg.batch_size]
            ]
            degraded = np.stack([b[0] for b in batch]).astype(model.dtype)
            clean = np.stack([b[1] for b in batch]).astype(model.dtype)
            try:
                loss, grads = loss_and_gradients(model, degraded, clean, cfg.loss)
            except TrainingError as err:
                logger.critical(f'Epoch {epoch} step {state.step}: {err}')
                raise
            weights, adam = adam_step(model.weights, grads, adam, lr)
            model = model.with_weights(weights)
            state.step += 1
            batch_losses.append(loss)

        val_loss, val_psnr, val_ssim = evaluate(model, val_pairs, cfg.loss)
        state.val_history.append(val_loss)
        state.lr = plateau_schedule(
            state.val_history,
            lr,
            factor=cfg.plateau_factor,
            patience=cfg.plateau_patience,
            lr_min=cfg.lr_min,
            threshold=cfg.plateau_threshold,
        )
        state.epoch = epoch + 1
        improved = val_loss < state.best_val_loss
        if improved:
            state.best_val_loss = val_loss
        state.optimizer = adam

        row = {
            'epoch': epoch,
            'lr': lr,
            'train_loss': float(np.mean(batch_losses)),
            'val_loss': val_loss,
            'val_psnr': val_psnr,
            'val_ssim': val_ssim,
            'patch': format_size(patch),
            'seconds': counter.get(),
        }
        log.append(row)
        logger.info(key_value_line(row))
        for exporter in exporters:
            exporter.update(row)

        if improved and checkpoint_path is not None:
            save_checkpoint(model, checkpoint_path, adam.to_checkpoint(), state.step, state.to_header())
        if last_checkpoint_path is not None:
            save_checkpoint(model, last_checkpoint_path, adam.to_checkpoint(), state.step, state.to_header())

    return TrainResult(model, log, adam, state.best_val_loss, cfg.epochs - start_epoch)


def with_epochs(cfg, epochs):
    """Copy of cfg running for a different number of epochs, keeping its patch schedule."""
    return replace(cfg, epochs=epochs)
