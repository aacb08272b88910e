"""Kernel backend selection.

The compiled kernel (_ckernel, built from _ckernel.pyx) and the pure-Python
reference (pycore) implement the same SimCore contract; tests assert their
outputs are identical. The compiled one is preferred when importable. Set
VODSIM_CORE=pure|compiled to force a backend.
"""
from __future__ import annotations

import os

from .pycore import (  # noqa: F401
    K_CHANNEL,
    K_DISK,
    K_IC,
    K_PENDING,
    K_PREFETCH,
    RoundResult,
)
from .pycore import SimCore as PySimCore

try:
    from ._ckernel import SimCore as CSimCore
except ImportError:
    CSimCore = None


def get_core_class(backend: str = "auto"):
    if backend == "pure":
        return PySimCore
    if backend == "compiled":
        if CSimCore is None:
            raise RuntimeError("compiled kernel is not available")
        return CSimCore
    if backend != "auto":
        raise ValueError(f"unknown backend {backend!r}")
    env = os.environ.get("VODSIM_CORE", "").strip().lower()
    if env in ("pure", "compiled"):
        return get_core_class(env)
    return CSimCore if CSimCore is not None else PySimCore


SimCore = get_core_class()
