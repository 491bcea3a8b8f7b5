"""Statevector kernel dispatch: compiled backend when built, numpy otherwise.

The active backend is chosen at import time.  Set ``CSBC_KERNEL=python`` or
``CSBC_KERNEL=cython`` to force one (the benchmark suite does this through
:func:`use_backend` instead).
"""

import os

from . import py_backend

_BACKENDS = {"python": py_backend}

try:
    from . import _cy_backend

    _BACKENDS["cython"] = _cy_backend
except ImportError:  # extension not built; pure fallback
    _cy_backend = None

_forced = os.environ.get("CSBC_KERNEL", "").strip().lower()
if _forced and _forced not in _BACKENDS:
    raise ImportError(
        f"CSBC_KERNEL={_forced!r} is not available; "
        f"built backends: {sorted(_BACKENDS)}"
    )
_active = _BACKENDS[_forced] if _forced else _BACKENDS.get("cython", py_backend)


def backend_name() -> str:
    return _active.NAME


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def use_backend(name: str) -> None:
    """Switch the active kernel backend (benchmarks and tests only)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; built: {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]


def apply_matrix(amps, mat, targets, n_qubits):
    return _active.apply_matrix(amps, mat, targets, n_qubits)
