#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""The timer manager."""

from time import perf_counter


class Counter:
    """The counter class. Elapsed wall-clock seconds on a monotonic clock."""

    def __init__(self):
        self.start()

    def start(self):
        self.target = perf_counter()

    def reset(self):
        self.start()

    def get(self):
        return perf_counter() - self.target
