#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Adam and the reduce-on-plateau learning rate schedule."""

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from lpienet.globals import ShapeError
from lpienet.logger import logger

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass
class AdamState:
    """First/second moments per parameter path and the step counter."""

    m: Dict[str, np.ndarray] = field(default_factory=OrderedDict)
    v: Dict[str, np.ndarray] = field(default_factory=OrderedDict)
    t: int = 0

    @classmethod
    def zeros_like(cls, weights):
        return cls(
            m=OrderedDict((k, np.zeros_like(w)) for k, w in weights.items()),
            v=OrderedDict((k, np.zeros_like(w)) for k, w in weights.items()),
            t=0,
        )

    def to_checkpoint(self):
        return {'t': self.t, 'm': self.m, 'v': self.v}

    @classmethod
    def from_checkpoint(cls, optimizer, weights):
        """Rebuild from checkpoint moments, cast to the weight dtypes."""
        return cls(
            m=OrderedDict((k, optimizer['m'][k].astype(w.dtype)) for k, w in weights.items()),
            v=OrderedDict((k, optimizer['v'][k].astype(w.dtype)) for k, w in weights.items()),
            t=int(optimizer['t']),
        )


def adam_step(weights, grads, state, lr, beta1=ADAM_BETA1, beta2=ADAM_BETA2, epsilon=ADAM_EPSILON):
    """One bias-corrected Adam update.

    Returns (new weights, new state); the inputs are left untouched.
    """
    if state is None:
        state = AdamState.zeros_like(weights)
    t = state.t + 1
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    new_weights, new_m, new_v = OrderedDict(), OrderedDict(), OrderedDict()
    for name, w in weights.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ShapeError(name, w.shape, g.shape, where='adam_step')
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * (g * g)
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + epsilon)
        new_weights[name] = (w - update).astype(w.dtype, copy=False)
        new_m[name] = m.astype(w.dtype, copy=False)
        new_v[name] = v.astype(w.dtype, copy=False)
    return new_weights, AdamState(m=new_m, v=new_v, t=t)


class PlateauScheduler:
    """Cut the learning rate when the monitored loss stops improving.

    An epoch improves when loss < best * (1 - threshold). After patience
    epochs without improvement the rate becomes max(lr * factor, lr_min),
    then cooldown epochs pass before bad epochs count again.
    """

    def __init__(self, lr, factor=0.5, patience=10, lr_min=1e-6, threshold=1e-4, cooldown=None):
        if not 0 < factor < 1:
            raise ValueError(f'plateau factor must be in (0, 1), got {factor}')
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.lr_min = lr_min
        self.threshold = threshold
        self.cooldown = patience if cooldown is None else cooldown
        self.best = np.inf
        self.bad_epochs = 0
        self.cooldown_counter = 0

    def is_better(self, loss):
        return loss < self.best * (1.0 - self.threshold) if np.isfinite(self.best) else loss < self.best

    def step(self, loss):
        """Record one epoch; return True when the rate was cut."""
        if self.is_better(loss):
            self.best = loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
        if self.cooldown_counter > 0:
            self.cooldown_counter -= 1
            self.bad_epochs = 0
        if self.bad_epochs >= self.patience:
            self.lr = max(self.lr * self.factor, self.lr_min)
            self.cooldown_counter = self.cooldown
            self.bad_epochs = 0
            return True
        return False


def plateau_schedule(val_history, current_lr, factor=0.5, patience=10, lr_min=1e-6, threshold=1e-4, cooldown=None):
    """Return the learning rate for the next epoch.

    The scheduler is replayed over the whole validation history, so the
    result only depends on the history and the current rate.
    """
    scheduler = PlateauScheduler(current_lr, factor, patience, lr_min, threshold, cooldown)
    cut = False
    for loss in val_history:
        cut = scheduler.step(loss)
    if cut:
        new_lr = max(current_lr * factor, lr_min)
        if new_lr != current_lr:
            logger.info(f'Validation loss plateau, learning rate {current_lr:.3g} -> {new_lr:.3g}')
        return new_lr
    return current_lr
