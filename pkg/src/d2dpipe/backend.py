"""Kernel backend selection.

Two modules carry accelerated inner loops (the best-path search used by the
experiment harness and the blockage-survival counter): each exists as a
numba-jitted loop and as a vectorized pure-numpy implementation.  The
environment variable ``D2DPIPE_BACKEND`` picks which one runs:

* ``auto``  (default) — numba when it imports cleanly, else numpy
* ``numba`` — require numba; raise RuntimeError if it is unavailable
* ``numpy`` — force the pure-numpy implementations

Both implementations consume identical random streams and perform the
floating-point work in the same order, so results agree bit-for-bit for a
fixed seed (asserted in the test suite).
"""

from __future__ import annotations

import os

__all__ = ["HAVE_NUMBA", "VALID_BACKENDS", "active_backend", "resolve_engine"]

VALID_BACKENDS = ("auto", "numba", "numpy")

try:  # pragma: no cover - exercised implicitly on import
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def active_backend() -> str:
    """Resolve ``D2DPIPE_BACKEND`` to a concrete backend name.

    Returns ``"numba"`` or ``"numpy"``; raises ValueError on an unknown
    setting and RuntimeError when numba is demanded but not importable.
    """
    choice = os.environ.get("D2DPIPE_BACKEND", "auto").strip().lower()
    if choice not in VALID_BACKENDS:
        raise ValueError(
            f"D2DPIPE_BACKEND must be one of {VALID_BACKENDS}, got {choice!r}"
        )
    if choice == "auto":
        return "numba" if HAVE_NUMBA else "numpy"
    if choice == "numba" and not HAVE_NUMBA:
        raise RuntimeError("D2DPIPE_BACKEND=numba, but numba is not importable")
    return choice


def resolve_engine(engine: str) -> str:
    """Resolve an ``engine=`` argument (``auto``/``numba``/``numpy``) the same
    way as :func:`active_backend`, but taking the explicit argument first."""
    if engine == "auto":
        return active_backend()
    if engine not in ("numba", "numpy"):
        raise ValueError(f"engine must be 'auto', 'numba' or 'numpy', got {engine!r}")
    if engine == "numba" and not HAVE_NUMBA:
        raise RuntimeError("engine='numba', but numba is not importable")
    return engine
