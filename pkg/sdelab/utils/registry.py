"""Name -> class tables for everything a config block selects with ``TYPE``."""
import inspect


class Registry(object):
    """Classes keyed by their ``ID`` (or class name), filled by ``@REG.register_module``."""

    def __init__(self, name):
        self.name = name
        self._classes = {}

    def __repr__(self):
        return 'Registry({}: {})'.format(self.name, ', '.join(self.keys()))

    def __contains__(self, key):
        return key in self._classes

    def __len__(self):
        return len(self._classes)

    def __iter__(self):
        return iter(self.keys())

    def get(self, key):
        return self._classes.get(key)

    def keys(self):
        return sorted(self._classes)

    def register_module(self, cls):
        if not inspect.isclass(cls):
            raise TypeError('{} registry takes classes, got {!r}'.format(self.name, cls))
        key = getattr(cls, 'ID', None) or cls.__name__
        if key in self._classes:
            raise KeyError('{!r} is registered twice in the {} registry'.format(key, self.name))
        self._classes[key] = cls
        return cls

    def lookup(self, kind):
        if inspect.isclass(kind):
            return kind
        cls = self._classes.get(kind)
        if cls is None:
            raise KeyError('{!r} is not in the {} registry; known: {}'.format(
                kind, self.name, ', '.join(self.keys())))
        return cls


def build_from_cfg(cfg, registry, default_args=None):
    """Instantiate ``cfg['TYPE']`` with the remaining keys as keyword arguments.

    ``default_args`` fill keys the block leaves out, e.g. the dimension.
    """
    if not isinstance(cfg, dict) or 'TYPE' not in cfg:
        raise TypeError('expected a mapping with a TYPE key, got {!r}'.format(cfg))
    kwargs = {k: v for k, v in cfg.items() if k != 'TYPE'}
    for key, value in (default_args or {}).items():
        kwargs.setdefault(key, value)
    return registry.lookup(cfg['TYPE'])(**kwargs)
