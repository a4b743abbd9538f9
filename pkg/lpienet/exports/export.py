#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""
Base class of the per-epoch training log exporters.

The training loop calls update(row) once per epoch with an ordered dict
of scalars; the exporter turns it into names and values and writes them.
"""

from lpienet.globals import format_value
from lpienet.logger import logger
from lpienet.timer import Counter


class LpienetExport:
    """Main class for lpienet export IF."""

    def __init__(self, args=None):
        """Init the export class."""
        # Export name
        self.export_name = self.__class__.__module__
        logger.debug(f"Init export module {self.export_name}")

        self.args = args

        # By default export is disabled
        # Needs to be set to True in the __init__ class of child
        self.export_enable = False

        self.exported_rows = 0

    def _log_result_decorator(fct):
        """Log (DEBUG) the result of the function fct."""

        def wrapper(*args, **kw):
            counter = Counter()
            ret = fct(*args, **kw)
            duration = counter.get()
            class_name = args[0].__class__.__name__
            logger.debug(f"{class_name} {fct.__name__} return {ret} in {duration:.6f} seconds")
            return ret

        return wrapper

    def exit(self):
        """Close the export module."""
        logger.debug(f"Finalise export interface {self.export_name}")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.exit()

    @_log_result_decorator
    def update(self, row):
        """Export one log row. Return False when the export is disabled."""
        if not self.export_enable:
            return False
        names, values = self.build_export(row)
        self.export(names, values)
        self.exported_rows += 1
        return True

    def build_export(self, row):
        """Build the export lists (names in row order, values as text)."""
        names = []
        values = []
        for key, value in row.items():
            names.append(str(key).lower())
            values.append(format_value(value))
        return names, values

    def export(self, names, values):
        # This method should be implemented by each exporter
        pass
