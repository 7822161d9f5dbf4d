"""Backend selection for the hot gate-loop kernels.

``SDAPD_BACKEND`` chooses the implementation:

* ``auto`` (default) - numba-compiled kernel when numba imports, else numpy
* ``numba``          - require the compiled kernel, fail loudly otherwise
* ``numpy``          - force the pure-numpy fallback

Both backends are bit-identical for a given seed; the flag only trades speed.
"""

from __future__ import annotations

import os

_CHOICES = ("auto", "numba", "numpy")


def _env_choice() -> str:
    value = os.environ.get("SDAPD_BACKEND", "auto").strip().lower()
    if value not in _CHOICES:
        raise ValueError(f"SDAPD_BACKEND must be one of {_CHOICES}, got {value!r}")
    return value


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except Exception:
        return False
    return True


def use_numba() -> bool:
    choice = _env_choice()
    if choice == "numpy":
        return False
    if choice == "numba":
        if not numba_available():
            raise RuntimeError("SDAPD_BACKEND=numba but numba is not importable")
        return True
    return numba_available()


def active_backend() -> str:
    return "numba" if use_numba() else "numpy"
