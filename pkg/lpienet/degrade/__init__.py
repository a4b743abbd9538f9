#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Synthesis of degraded/clean training pairs."""

from lpienet.degrade.noise import add_noise, make_rng  # noqa: F401
from lpienet.degrade.pipeline import (  # noqa: F401
    TASKS,
    DegradationConfig,
    apply,
    clip_range,
    degradation_schema,
    inverse_tone_map,
    make_pair,
    preset,
    synthesize_hdr,
    tone_map,
)
from lpienet.degrade.psf import PSF, make_dirac_psf, make_disk_psf, make_gaussian_psf, psf_convolve  # noqa: F401
