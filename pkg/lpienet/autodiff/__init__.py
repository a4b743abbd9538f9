#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""4-D tensors with reverse-mode differentiation."""

from lpienet.autodiff.gradcheck import GradcheckReport, gradcheck, relative_error  # noqa: F401
from lpienet.autodiff.tape import Node, Tape, backward, constant  # noqa: F401
