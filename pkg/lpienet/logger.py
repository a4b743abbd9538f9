#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Logger of the lpienet package.

Records go to a rotating file. Only critical messages reach the console:
results are printed on stdout as key=value lines, never through logging.
"""

import getpass
import json
import logging
import logging.config
import os
import tempfile

from lpienet.globals import safe_makedirs


def _writable_dir(path):
    return bool(path) and os.path.isdir(path) and os.access(path, os.W_OK)


def log_filename():
    """$XDG_CACHE_HOME/lpienet, then ~/.local/share/lpienet, then a per-user temp file."""
    home = os.environ.get('HOME')
    candidates = [os.environ.get('XDG_CACHE_HOME'), os.path.join(home, '.local', 'share') if home else None]
    for base in candidates:
        if _writable_dir(base):
            safe_makedirs(os.path.join(base, 'lpienet'))
            return os.path.join(base, 'lpienet', 'lpienet.log')
    return os.path.join(tempfile.gettempdir(), f'lpienet-{getpass.getuser()}.log')


LOG_FILENAME = log_filename()

LOGGING_CFG = {
    "version": 1,
    "disable_existing_loggers": False,
    "root": {"level": "INFO", "handlers": ["file", "console"]},
    "formatters": {
        "standard": {"format": "%(asctime)s -- %(levelname)s -- %(message)s"},
        "long": {"format": "%(asctime)s -- %(levelname)s -- %(message)s (%(funcName)s in %(module)s)"},
        "free": {"format": "lpienet: %(message)s"},
    },
    "handlers": {
        "file": {
            "level": "DEBUG",
            "class": "logging.handlers.RotatingFileHandler",
            "maxBytes": 1000000,
            "backupCount": 3,
            "formatter": "standard",
            "filename": LOG_FILENAME,
        },
        "console": {"level": "CRITICAL", "class": "logging.StreamHandler", "formatter": "free"},
    },
    # Pillow logs every PNG chunk at DEBUG
    "loggers": {"PIL": {"level": "WARNING"}},
}


def lpienet_logger(env_key='LOG_CFG'):
    """Configure logging and return the root logger.

    A JSON dictConfig file named by the env_key variable replaces LOGGING_CFG.
    """
    config = LOGGING_CFG
    user_file = os.getenv(env_key)
    if user_file and os.path.exists(user_file):
        with open(user_file, encoding='utf-8') as f:
            config = json.load(f)
    logging.config.dictConfig(config)
    return logging.getLogger()


logger = lpienet_logger()
