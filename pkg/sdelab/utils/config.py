import json
import os

import yaml
from easydict import EasyDict as edict

from .errors import ConfigError

SCHEMA_VERSION = 1


def update_config(config_file):
    """Load a YAML (or JSON) scenario file into an EasyDict."""
    if not os.path.isfile(config_file):
        raise ConfigError(config_file, 'config file not found')
    with open(config_file) as f:
        try:
            raw = yaml.load(f, Loader=yaml.FullLoader)
        except yaml.YAMLError as exc:
            raise ConfigError(config_file, 'unparsable document ({})'.format(exc))
    return load_config_dict(raw, source=config_file)


def load_config_dict(raw, source='<config>'):
    if not isinstance(raw, dict):
        raise ConfigError(source, 'top level must be a mapping')
    config = edict(raw)
    if 'SCHEMA_VERSION' not in config:
        config.SCHEMA_VERSION = SCHEMA_VERSION
    if config.SCHEMA_VERSION != SCHEMA_VERSION:
        raise ConfigError('SCHEMA_VERSION', 'unsupported schema version {}'.format(
            config.SCHEMA_VERSION))
    return config


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def dump_config(config):
    """Canonical JSON text of a config: sorted keys, fixed separators."""
    return json.dumps(_plain(config), sort_keys=True, indent=2, separators=(',', ': '))


def require(config, key, path):
    """Fetch ``config[key]`` or raise a ConfigError naming the dotted field path."""
    full = '{}.{}'.format(path, key) if path else key
    if config is None or key not in config or config[key] is None:
        raise ConfigError(full, 'missing required field')
    return config[key]


def get_float(config, key, path, default=None, positive=False):
    full = '{}.{}'.format(path, key) if path else key
    value = config.get(key, default) if config is not None else default
    if value is None:
        if default is None:
            raise ConfigError(full, 'missing required field')
        value = default
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(full, 'expected a number, got {!r}'.format(value))
    if positive and not value > 0:
        raise ConfigError(full, 'must be positive, got {}'.format(value))
    return value


def get_int(config, key, path, default=None, minimum=None):
    full = '{}.{}'.format(path, key) if path else key
    value = config.get(key, default) if config is not None else default
    if value is None:
        raise ConfigError(full, 'missing required field')
    try:
        integral = not isinstance(value, bool) and float(value).is_integer()
    except (TypeError, ValueError):
        integral = False
    if not integral:
        raise ConfigError(full, 'expected an integer, got {!r}'.format(value))
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigError(full, 'must be >= {}, got {}'.format(minimum, value))
    return value


def get_list(config, key, path, default=None):
    full = '{}.{}'.format(path, key) if path else key
    value = config.get(key, default) if config is not None else default
    if value is None:
        raise ConfigError(full, 'missing required field')
    if not isinstance(value, (list, tuple)):
        raise ConfigError(full, 'expected a list, got {!r}'.format(value))
    return list(value)
