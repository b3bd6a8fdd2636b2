"""Hot propagation loops with a compiled backend and a numpy fallback.

The compiled extension is used when it was built at install time; otherwise
the pure-Python implementations are selected. :func:`use_backend` switches
explicitly, e.g. for benchmarks and cross-checks.
"""

from . import _python

try:
    from . import _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _python}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

_active = "compiled" if _compiled is not None else "python"


def available_backends():
    return tuple(BACKENDS)


def active_backend():
    return _active


def use_backend(name):
    """Select the kernel backend (``'compiled'`` or ``'python'``)."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _active = name


def split_step(*args, **kwargs):
    return BACKENDS[_active].split_step(*args, **kwargs)


def lindblad_rk4(*args, **kwargs):
    return BACKENDS[_active].lindblad_rk4(*args, **kwargs)
