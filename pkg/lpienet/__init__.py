#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Init the lpienet software."""

# Import system libs
import platform
import sys
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as package_version

from packaging.version import Version

# Global name
# Version should start and end with a numerical char
# See https://packaging.python.org/specifications/core-metadata/#version
__version__ = '1.0.0'
__author__ = 'The lpienet developers'
__license__ = 'LGPLv3'

# Check numpy version (read from the package metadata: numpy itself must
# not be imported before the thread cap is set)
numpy_min_version = Version('1.22')
try:
    numpy_version = package_version('numpy')
except PackageNotFoundError:
    print('numpy library not found. lpienet cannot start.')
    sys.exit(1)
if Version(numpy_version) < numpy_min_version:
    print(f'numpy {numpy_min_version} or higher is needed. lpienet cannot start.')
    sys.exit(1)

# Import lpienet libs
# Note: the numerical modules are imported by the commands, after the command line is parsed
from lpienet.logger import logger  # noqa: E402
from lpienet.main import LpienetMain  # noqa: E402


def main(argv=None):
    """Main entry point for lpienet.

    Parse the command line, then run the selected sub-command.
    """
    # Log lpienet and Python version
    logger.info(f'Start lpienet {__version__}')
    logger.info(f'{platform.python_implementation()} {platform.python_version()} ({sys.executable}) detected')

    core = LpienetMain(argv)

    # Imported after the thread cap is exported
    from lpienet.commands import run

    sys.exit(run(core.get_args(), core.get_config()))
