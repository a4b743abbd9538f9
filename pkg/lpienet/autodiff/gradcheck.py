#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Finite-difference gradient checker."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from lpienet.autodiff.tape import Tape, constant
from lpienet.logger import logger


@dataclass
class GradcheckReport:
    """Outcome of a gradient check."""

    max_relative_error: float
    checked: int
    skipped: int
    worst: Optional[Tuple[str, int]] = None

    def passed(self, threshold):
        return self.checked > 0 and self.max_relative_error < threshold


def relative_error(analytic, numeric, floor=1e-8):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _is_kink(d2_full, d2_half, slope, scale, dtype):
    """Second differences of a smooth function shrink 4x when the step halves.

    A kink inside the stencil breaks that scaling. Curvature below the
    rounding level carries no information and never counts as a kink.
    """
    noise = 64 * np.finfo(dtype).eps * scale
    if abs(d2_full) <= max(noise, 1e-6 * abs(slope)):
        return False
    if d2_half == 0:
        return True
    ratio = d2_full / d2_half
    return not 3.0 <= ratio <= 5.0


def default_eps(dtype):
    """Central-difference step for a working precision: 1e-5 at 64-bit, 1e-2 below."""
    return 1e-5 if np.dtype(dtype).itemsize >= 8 else 1e-2


def gradcheck(fn, inputs, eps=None, samples=16, seed=0, names=None):
    """Compare the tape gradients of fn against central differences.

    :param fn: callable taking one Node per input and returning a 1x1x1x1 Node
    :param inputs: list of arrays; their dtype sets the working precision
    :param eps: finite-difference step, default_eps of the widest input dtype if None
    :param samples: coordinates sampled per input (all of them if fewer)
    :return: GradcheckReport
    """
    arrays = [np.array(a, copy=True) for a in inputs]
    if eps is None:
        eps = default_eps(np.result_type(*arrays))
    if eps <= 0:
        raise ValueError(f'gradcheck: eps must be > 0, got {eps}')
    if names is None:
        names = [f'input{i}' for i in range(len(arrays))]

    tape = Tape()
    nodes = [tape.watch(a.copy(), name=name) for a, name in zip(arrays, names)]
    tape.backward(fn(*nodes))
    analytic = [node.grad if node.grad is not None else np.zeros_like(node.value) for node in nodes]

    def evaluate(k, index, delta):
        perturbed = list(arrays)
        perturbed[k] = arrays[k].copy()
        perturbed[k].flat[index] += delta
        return fn(*[constant(a) for a in perturbed]).item()

    rng = np.random.default_rng(seed)
    worst_error, worst = 0.0, None
    checked = skipped = 0
    for k, array in enumerate(arrays):
        count = min(samples, array.size)
        for index in rng.choice(array.size, size=count, replace=False):
            index = int(index)
            f0 = evaluate(k, index, 0.0)
            fp, fm = evaluate(k, index, eps), evaluate(k, index, -eps)
            hp, hm = evaluate(k, index, eps / 2), evaluate(k, index, -eps / 2)
            scale = max(abs(f0), abs(fp), abs(fm), 1.0)
            if _is_kink(fp - 2 * f0 + fm, hp - 2 * f0 + hm, fp - fm, scale, array.dtype):
                skipped += 1
                continue
            numeric = (fp - fm) / (2 * eps)
            a = float(analytic[k].flat[index])
            error = relative_error(a, numeric)
            checked += 1
            if error > worst_error or worst is None:
                worst_error = max(error, worst_error)
                worst = (names[k], index)

    if skipped:
        logger.debug(f'gradcheck skipped {skipped} coordinates crossing a kink')
    return GradcheckReport(max_relative_error=worst_error, checked=checked, skipped=skipped, worst=worst)
