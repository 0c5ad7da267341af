"""mixcast: tensor time-series forecasting with Gaussian mixture representations.

Submodules are loaded lazily so that the command-line entry point can pin
thread-count environment variables before numpy is first imported.
"""

__version__ = "0.1.0"

_SUBMODULES = ("runtime", "data", "model", "train", "config", "cli")


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
