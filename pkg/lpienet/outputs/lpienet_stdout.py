#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Stdout interface class: machine-parsable key=value lines."""

from lpienet.globals import key_value_line, printandflush


class LpienetStdout:
    """This class manages the key=value stdout display.

    One line per update, tokens separated by spaces, so the output can be
    parsed with a plain split on whitespace then on the first '='.
    """

    def __init__(self, config=None, args=None, fields=None):
        self.config = config
        self.args = args
        # Restrict (and order) the printed keys
        self.fields = fields

    def end(self):
        pass

    def build_line(self, items):
        if self.fields is not None:
            items = {k: items[k] for k in self.fields if k in items}
        return key_value_line(items)

    def update(self, items):
        """Print one key=value line."""
        printandflush(self.build_line(items))
