#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""The lightweight encoder/decoder restoration network."""

from lpienet.model.checkpoint import Checkpoint, load_checkpoint, read_checkpoint, save_checkpoint  # noqa: F401
from lpienet.model.config import PRESETS, LPIENetConfig, preset  # noqa: F401
from lpienet.model.layers import channel_attention, inverted_residual, ira_block, spatial_attention  # noqa: F401
from lpienet.model.network import (  # noqa: F401
    LPIENet,
    build,
    dihedral,
    dihedral_inverse,
    forward,
    layer_plan,
    param_count,
    self_ensemble,
)
