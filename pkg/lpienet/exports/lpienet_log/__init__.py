#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Key=value training log: one line per epoch."""

from lpienet.exports.export import LpienetExport
from lpienet.globals import ConfigError
from lpienet.logger import logger


class Export(LpienetExport):
    """This class manages the key=value log file export."""

    def __init__(self, filename, header=None, append=False, args=None):
        super().__init__(args=args)

        self.log_filename = filename
        try:
            self.log_file = open(self.log_filename, 'a' if append else 'w', encoding='utf-8')
        except OSError as e:
            raise ConfigError('log', f"Cannot create the log file: {e}")
        if header:
            for line in header.splitlines():
                self.log_file.write(f'# {line}\n')

        logger.info(f"Training log written to {self.log_filename}")

        self.export_enable = True

    def exit(self):
        logger.debug(f"Finalise export interface {self.export_name}")
        self.log_file.close()

    def export(self, names, values):
        self.log_file.write(' '.join(f'{n}={v}' for n, v in zip(names, values)) + '\n')
        self.log_file.flush()
