"""Backend selection for the hot one-period amplitude integrator.

The compiled extension is preferred when present; ``backend="python"`` forces
the scipy fallback (used by the benchmark and the equivalence tests).
"""

from __future__ import annotations

from . import _kernels_py

try:
    from . import _core

    _HAVE_CORE = True
except ImportError:  # extension not built
    _core = None
    _HAVE_CORE = False

__all__ = [
    "KIND_CONSTANT",
    "KIND_MODULATED",
    "DEFAULT_BACKEND",
    "available_backends",
    "monodromy_2x2",
]

KIND_CONSTANT = 0
KIND_MODULATED = 1

DEFAULT_BACKEND = "cython" if _HAVE_CORE else "python"


def available_backends():
    return ("cython", "python") if _HAVE_CORE else ("python",)


def monodromy_2x2(
    kappa,
    period,
    kind,
    p0,
    p1=0.0,
    p2=0.0,
    rtol=1e-10,
    atol=1e-12,
    backend=None,
):
    backend = backend or DEFAULT_BACKEND
    if backend == "cython":
        if not _HAVE_CORE:
            raise RuntimeError("compiled kernel is not available in this install")
        return _core.monodromy_2x2(kappa, period, kind, p0, p1, p2, rtol, atol)
    if backend == "python":
        return _kernels_py.monodromy_2x2(kappa, period, kind, p0, p1, p2, rtol, atol)
    raise ValueError(f"unknown backend {backend!r}")
