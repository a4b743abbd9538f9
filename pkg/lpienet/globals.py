#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Common objects shared by all lpienet modules."""

################
# GLOBAL IMPORTS
################

import errno
import os
import sys
import tempfile
from configparser import ConfigParser, NoOptionError, NoSectionError  # noqa: F401

##############
# GLOBALS VARS
##############

# OS constants (config and cache locations are OS-dependent)
BSD = sys.platform.find('bsd') != -1
LINUX = sys.platform.startswith('linux')
MACOS = sys.platform.startswith('darwin')
SUNOS = sys.platform.startswith('sunos')
WINDOWS = sys.platform.startswith('win')

work_path = os.path.realpath(os.path.dirname(__file__))

# Environment variable used when --threads is not given
THREADS_ENV = 'LPIE_THREADS'

# Native thread pools read these once, when the library is first loaded
_THREAD_ENV_VARS = ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS', 'VECLIB_MAXIMUM_THREADS')

# Effective worker thread cap (None = library default)
thread_limit = None

# Exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


########
# ERRORS
########


class LpienetError(Exception):
    """Base class of every error raised by lpienet."""


class ShapeError(LpienetError, ValueError):
    """A tensor does not have the expected size along one dimension."""

    def __init__(self, dimension, expected, got, where=''):
        self.dimension = dimension
        self.expected = expected
        self.got = got
        self.where = where
        prefix = f'{where}: ' if where else ''
        super().__init__(f'{prefix}dimension {dimension} expected {expected}, got {got}')


class ConfigError(LpienetError, ValueError):
    """Bad configuration key or value."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f'{key}: {message}')


class FormatError(LpienetError, ValueError):
    """A tensor, image or checkpoint file cannot be decoded."""

    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        super().__init__(f'{path}: {reason}')


class TrainingError(LpienetError, RuntimeError):
    """Training diverged."""

    def __init__(self, tensor, message):
        self.tensor = tensor
        super().__init__(f'{message} (first non-finite tensor: {tensor})')


class OutOfMemoryError(LpienetError, MemoryError):
    """The requested run does not fit in the available memory."""

    def __init__(self, required, available, what=''):
        self.required = required
        self.available = available
        super().__init__(
            f'{what} needs ~{required / 1e6:.1f} MB of activations, only {available / 1e6:.1f} MB available'.strip()
        )


###################
# GLOBALS FUNCTIONS
###################


def printandflush(string):
    """Print and flush (used by the stdout outputs modules)"""
    print(string, flush=True)


def safe_makedirs(path):
    """A safe function for creating a directory tree."""
    try:
        os.makedirs(path)
    except OSError as err:
        if err.errno == errno.EEXIST:
            if not os.path.isdir(path):
                raise
        else:
            raise


def file_exists(filename):
    """Return True if the file exists and is readable."""
    return os.path.isfile(filename) and os.access(filename, os.R_OK)


def resolve_threads(value=None):
    """Return the thread cap from the command line value or LPIE_THREADS.

    Return None when neither is set.
    """
    if value is None:
        value = os.environ.get(THREADS_ENV)
        if value in (None, ''):
            return None
    try:
        threads = int(value)
    except (TypeError, ValueError):
        raise ConfigError('threads', f'not an integer: {value!r}')
    if threads < 1:
        raise ConfigError('threads', f'must be >= 1, got {threads}')
    return threads


def set_thread_limit(threads):
    """Cap the native worker threads used by the numerical libraries.

    Must run before numpy is first imported to be effective.
    """
    global thread_limit
    thread_limit = threads
    if threads is None:
        return
    for var in _THREAD_ENV_VARS:
        os.environ[var] = str(threads)


def key_value_line(items):
    """Render a dict as space-separated key=value tokens."""
    return ' '.join(f'{k}={format_value(v)}' for k, v in items.items())


def format_value(value):
    """Format a scalar for key=value lines."""
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        if value != value:
            return 'nan'
        if value in (float('inf'), float('-inf')):
            return 'inf' if value > 0 else '-inf'
        text = f'{value:.6g}'
        # Keep floats recognizable: 1.0 stays 1.0
        return text if any(c in text for c in '.en') else f'{text}.0'
    if isinstance(value, (list, tuple)):
        return ','.join(format_value(v) for v in value)
    return str(value)


def atomic_write(path, data):
    """Write bytes to path through a temporary file, so path is never left partial."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(prefix='.lpienet-', dir=directory)
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
