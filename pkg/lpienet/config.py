#
# This file is part of lpienet.
#
# SPDX-FileCopyrightText: 2024 The lpienet developers
#
# SPDX-License-Identifier: LGPL-3.0-only
#

"""Manage the configuration files.

Every lpienet configuration (training recipe, degradation model, model
architecture, checkpoint header) is a UTF-8 text of ``key=value`` lines.
Lines starting with ``#`` are comments. There are no sections.
"""

import builtins
import os

from lpienet.globals import BSD, LINUX, MACOS, SUNOS, WINDOWS, ConfigError, ConfigParser, NoOptionError
from lpienet.logger import logger

# Implicit section injected in front of the sectionless files
SECTION = 'lpienet'

_TRUE = ('1', 'yes', 'true', 'on')
_FALSE = ('0', 'no', 'false', 'off')


def user_config_dir():
    r"""Return a list of per-user config dir (full path).

    - Linux, *BSD, SunOS: ~/.config/lpienet
    - macOS: ~/.config/lpienet, ~/Library/Application Support/lpienet
    - Windows: %APPDATA%\lpienet
    """
    paths = []
    if WINDOWS:
        paths.append(os.environ.get('APPDATA'))
    elif MACOS:
        paths.append(os.environ.get('XDG_CONFIG_HOME') or os.path.expanduser('~/.config'))
        paths.append(os.path.expanduser('~/Library/Application Support'))
    else:
        paths.append(os.environ.get('XDG_CONFIG_HOME') or os.path.expanduser('~/.config'))

    return [os.path.join(path, 'lpienet') if path is not None else '' for path in paths]


def system_config_dir():
    r"""Return a list of system-wide config dir (full path).

    - Linux, SunOS: /etc/lpienet
    - *BSD, macOS: /usr/local/etc/lpienet
    - Windows: %APPDATA%\lpienet
    """
    if LINUX or SUNOS:
        path = '/etc'
    elif BSD or MACOS:
        path = '/usr/local/etc'
    else:
        path = os.environ.get('APPDATA')
    if path is None:
        path = ''
    else:
        path = os.path.join(path, 'lpienet')

    return [path]


def dumps(mapping, header=None):
    """Serialize a mapping to key=value text (one key per line, insertion order)."""
    lines = []
    if header:
        lines.extend(f'# {h}' for h in header.splitlines())
    for key, value in mapping.items():
        if isinstance(value, bool):
            value = 'true' if value else 'false'
        elif isinstance(value, float):
            value = repr(value)
        elif isinstance(value, (list, tuple)):
            value = ','.join(repr(v) if isinstance(v, float) else str(v) for v in value)
        lines.append(f'{key}={value}')
    return '\n'.join(lines) + '\n'


class Config:
    """This class is used to access/read a key=value config file.

    :param config_file: explicit file to read (-C flag). If None, the
                        per-user then system-wide locations are searched.
    :param schema: dict of allowed keys and their default values. Keys
                   found in the file but not in the schema are rejected.
    :param search: search the default locations when config_file is None
    """

    config_filename = 'lpienet.conf'

    def __init__(self, config_file=None, schema=None, search=False):
        self.config_file = config_file
        self.schema = schema
        self._loaded_config_file = None

        self.parser = ConfigParser(interpolation=None, delimiters=('=',), comment_prefixes=('#',))
        # Keys are case sensitive
        self.parser.optionxform = str
        self.parser.add_section(SECTION)

        if config_file is not None:
            self.read_file(config_file)
        elif search:
            self.read()

        if schema is not None:
            self.validate(schema)
            self.set_defaults(schema)

    @classmethod
    def from_string(cls, text, schema=None, source='<string>'):
        """Build a Config from key=value text."""
        config = cls()
        config.read_string(text, source)
        config.schema = schema
        if schema is not None:
            config.validate(schema)
            config.set_defaults(schema)
        return config

    @classmethod
    def from_dict(cls, mapping, schema=None):
        """Build a Config from a dict (values are converted to text)."""
        return cls.from_string(dumps(mapping), schema=schema, source='<dict>')

    def config_file_paths(self):
        r"""Get a list of config file paths.

        The config file will be searched in the following order of priority:
            * /path/to/file (via -C flag)
            * user's home directory (per-user settings)
            * system-wide directory (system-wide settings)
        """
        paths = []

        if self.config_file:
            paths.append(self.config_file)

        paths.extend([os.path.join(path, self.config_filename) for path in user_config_dir()])
        paths.extend([os.path.join(path, self.config_filename) for path in system_config_dir()])

        return paths

    def read(self):
        """Read the first config file found, if any. Using defaults otherwise."""
        for config_file in self.config_file_paths():
            logger.debug(f'Search {self.config_filename} file in {config_file}')
            if os.path.exists(config_file):
                self.read_file(config_file)
                break

    def read_file(self, config_file):
        """Read an explicit config file. Missing or undecodable files raise ConfigError."""
        try:
            with builtins.open(config_file, encoding='utf-8') as f:
                text = f.read()
        except (OSError, UnicodeDecodeError) as err:
            raise ConfigError('config', f"can not read configuration file '{config_file}': {err}")
        self.read_string(text, config_file)
        logger.info(f"Read configuration file '{config_file}'")
        self._loaded_config_file = config_file

    def read_string(self, text, source='<string>'):
        for number, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith('#'):
                continue
            if '=' not in stripped:
                raise ConfigError(stripped, f'{source}:{number}: expected key=value')
            key, value = stripped.split('=', 1)
            key = key.strip()
            if not key:
                raise ConfigError(stripped, f'{source}:{number}: empty key')
            if self.parser.has_option(SECTION, key):
                raise ConfigError(key, f'{source}:{number}: duplicate key')
            self.parser.set(SECTION, key, value.strip())

    def validate(self, schema):
        """Reject the keys not declared in the schema."""
        for key in self.parser.options(SECTION):
            if key not in schema:
                raise ConfigError(key, 'unknown configuration key')

    def set_defaults(self, schema):
        for key, default in schema.items():
            if default is not None:
                self.set_default(key, dumps({key: default}).split('=', 1)[1].rstrip('\n'))

    @property
    def loaded_config_file(self):
        """Return the loaded configuration file."""
        return self._loaded_config_file

    def as_dict(self):
        """Return the configuration as a dict of strings"""
        return {option: self.parser.get(SECTION, option) for option in self.parser.options(SECTION)}

    def dumps(self, header=None):
        return dumps(self.as_dict(), header=header)

    def keys(self):
        return self.parser.options(SECTION)

    def has_option(self, option):
        return self.parser.has_option(SECTION, option)

    def set_default(self, option, default):
        """If the option did not exist, create a default value."""
        if not self.parser.has_option(SECTION, option):
            self.parser.set(SECTION, option, default)

    def set_value(self, option, value):
        self.parser.set(SECTION, option, dumps({option: value}).split('=', 1)[1].rstrip('\n'))

    def get_value(self, option, default=None):
        """Get the value of an option, if it exists.

        If it did not exist, then return the default value.
        """
        try:
            return self.parser.get(SECTION, option)
        except NoOptionError:
            return default

    def get_list_value(self, option, default=None, separator=','):
        """Get the list value of an option, if it exists."""
        try:
            value = self.parser.get(SECTION, option)
        except NoOptionError:
            return default
        return [v.strip() for v in value.split(separator) if v.strip()]

    def get_int_value(self, option, default=0):
        """Get the int value of an option, if it exists."""
        try:
            return int(self.parser.get(SECTION, option))
        except NoOptionError:
            return int(default)
        except ValueError:
            raise ConfigError(option, f'not an integer: {self.parser.get(SECTION, option)!r}')

    def get_float_value(self, option, default=0.0):
        """Get the float value of an option, if it exists."""
        try:
            return float(self.parser.get(SECTION, option))
        except NoOptionError:
            return float(default)
        except ValueError:
            raise ConfigError(option, f'not a number: {self.parser.get(SECTION, option)!r}')

    def get_bool_value(self, option, default=True):
        """Get the bool value of an option, if it exists."""
        try:
            value = self.parser.get(SECTION, option).lower()
        except NoOptionError:
            return bool(default)
        if value in _TRUE:
            return True
        if value in _FALSE:
            return False
        raise ConfigError(option, f'not a boolean: {value!r}')

    def get_int_list_value(self, option, default=None):
        values = self.get_list_value(option)
        if values is None:
            return default
        try:
            return [int(v) for v in values]
        except ValueError:
            raise ConfigError(option, f'not a list of integers: {self.get_value(option)!r}')

    def get_float_list_value(self, option, default=None):
        values = self.get_list_value(option)
        if values is None:
            return default
        try:
            return [float(v) for v in values]
        except ValueError:
            raise ConfigError(option, f'not a list of numbers: {self.get_value(option)!r}')
