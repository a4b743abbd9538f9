#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""CSV interface class."""

import csv
import os.path

from lpienet.exports.export import LpienetExport
from lpienet.globals import ConfigError
from lpienet.logger import logger


class Export(LpienetExport):
    """This class manages the CSV export module.

    An existing file is appended to when its header matches the log
    columns; otherwise nothing is written and an error is logged.
    """

    def __init__(self, filename, overwrite=False, args=None):
        """Init the CSV export IF."""
        super().__init__(args=args)

        self.csv_filename = filename

        if not os.path.isfile(self.csv_filename) or overwrite:
            # File did not exist, create it
            file_mode = 'w'
            self.old_header = None
        else:
            # A CSV file already exist, append new data
            # Header will be checked on the first row
            file_mode = 'a'
            try:
                with open_csv_file(self.csv_filename, 'r') as f:
                    self.old_header = next(csv.reader(f), None)
            except OSError as e:
                raise ConfigError('export_csv', f"Cannot open existing CSV file: {e}")

        try:
            self.csv_file = open_csv_file(self.csv_filename, file_mode)
            self.writer = csv.writer(self.csv_file)
        except OSError as e:
            raise ConfigError('export_csv', f"Cannot create the CSV file: {e}")

        logger.info(f"Training log exported to CSV file: {self.csv_filename}")

        self.export_enable = True

        self.first_line = True

    def exit(self):
        """Close the CSV file."""
        logger.debug(f"Finalise export interface {self.export_name}")
        self.csv_file.close()

    def export(self, names, values):
        """Write one row; the header goes first on a new file."""
        if self.first_line:
            if self.old_header is None:
                self.writer.writerow(names)
            elif self.old_header != names:
                # Header are different, log an error and do not write data
                logger.error("Cannot append data to existing CSV file. Headers are different.")
                logger.debug(f"Old header: {self.old_header}")
                logger.debug(f"New header: {names}")
                self.export_enable = False
                self.first_line = False
                return
            self.first_line = False
        self.writer.writerow(values)
        self.csv_file.flush()


def open_csv_file(file_name, file_mode):
    return open(file_name, file_mode, newline='')
