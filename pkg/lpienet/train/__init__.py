#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Training recipe: optimizer, data pipeline and loop."""

from lpienet.train.data import (  # noqa: F401
    GRID,
    RANDOM,
    Sample,
    augment,
    default_patch_schedule,
    extract_patches,
    load_folder,
    parse_patch_schedule,
    split_validation,
)
from lpienet.train.loop import TrainConfig, TrainResult, read_train_config, train_loop, train_schema  # noqa: F401
from lpienet.train.optim import AdamState, PlateauScheduler, adam_step, plateau_schedule  # noqa: F401
