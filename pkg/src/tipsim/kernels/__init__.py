"""Hot-kernel dispatch: numba-jitted loops with a pure-numpy fallback.

The backend is picked once per process from the TIP_KERNELS environment
variable: "numba" (error if numba is missing), "numpy", or "auto"
(default: numba when importable, else numpy).  `get_impl` returns a
specific backend regardless of the environment, which is what the tests
and the benchmark use to compare the two.
"""
from __future__ import annotations

import logging
import os

from .encode import (
    PRED_IDS,
    EncodedSystem,
    code_to_config,
    config_to_code,
    encode_system,
    pred_mask,
)

log = logging.getLogger(__name__)

_IMPLS: dict[str, object] = {}


def get_impl(name: str):
    """Load a backend module by name: "numba" or "numpy"."""
    if name in _IMPLS:
        return _IMPLS[name]
    if name == "numpy":
        from . import numpy_impl as impl
    elif name == "numba":
        from . import numba_impl as impl
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    _IMPLS[name] = impl
    return impl


def _select() -> str:
    choice = os.environ.get("TIP_KERNELS", "auto").lower()
    if choice in ("numba", "numpy"):
        return choice
    if choice != "auto":
        log.warning("TIP_KERNELS=%r not recognized, using auto", choice)
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


BACKEND = _select()
_impl = get_impl(BACKEND)

expand = _impl.expand
expand_probs = _impl.expand_probs
simulate_batch = _impl.simulate_batch
jacobi_hitting = _impl.jacobi_hitting

__all__ = [
    "BACKEND",
    "EncodedSystem",
    "PRED_IDS",
    "code_to_config",
    "config_to_code",
    "encode_system",
    "expand",
    "expand_probs",
    "get_impl",
    "jacobi_hitting",
    "pred_mask",
    "simulate_batch",
]
