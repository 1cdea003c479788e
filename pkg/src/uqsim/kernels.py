"""Statevector gate kernels with a compiled core and a numpy fallback.

The compiled extension (``uqsim._kernels``, Cython) is picked at import time
when present; otherwise the numpy implementations below are used. Both mutate
the amplitude array in place and agree to ~1e-15 per amplitude. Force a
backend with the ``UQSIM_KERNELS`` environment variable (``compiled`` or
``python``) or :func:`use_backend`.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None


def _apply_single_qubit_numpy(amps: np.ndarray, q: int, u: np.ndarray) -> None:
    view = amps.reshape(amps.size >> (q + 1), 2, 1 << q)
    lo = view[:, 0, :].copy()
    hi = view[:, 1, :]
    view[:, 0, :] = u[0, 0] * lo + u[0, 1] * hi
    view[:, 1, :] = u[1, 0] * lo + u[1, 1] * hi


def _apply_zz_phase_numpy(amps: np.ndarray, a: int, b: int, theta: float) -> None:
    k = np.arange(amps.size)
    differ = (((k >> a) ^ (k >> b)) & 1).astype(bool)
    amps[differ] *= complex(np.cos(theta), np.sin(theta))
    amps[~differ] *= complex(np.cos(theta), -np.sin(theta))


def _apply_z_phase_numpy(amps: np.ndarray, q: int, theta: float) -> None:
    k = np.arange(amps.size)
    one = ((k >> q) & 1).astype(bool)
    amps[one] *= complex(np.cos(theta), np.sin(theta))
    amps[~one] *= complex(np.cos(theta), -np.sin(theta))


_BACKENDS = {
    "python": {
        "apply_single_qubit": _apply_single_qubit_numpy,
        "apply_zz_phase": _apply_zz_phase_numpy,
        "apply_z_phase": _apply_z_phase_numpy,
    }
}
if _compiled is not None:
    _BACKENDS["compiled"] = {
        "apply_single_qubit": _compiled.apply_single_qubit,
        "apply_zz_phase": _compiled.apply_zz_phase,
        "apply_z_phase": _compiled.apply_z_phase,
    }


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def _initial_backend() -> str:
    forced = os.environ.get("UQSIM_KERNELS", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(
                f"UQSIM_KERNELS={forced!r} requested but only {available_backends()} available"
            )
        return forced
    return "compiled" if "compiled" in _BACKENDS else "python"


_active = _initial_backend()


def active_backend() -> str:
    return _active


def use_backend(name: str) -> None:
    """Select a kernel backend by name; mainly for tests and benchmarks."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active = name


def apply_single_qubit(amps: np.ndarray, q: int, u: np.ndarray) -> None:
    _BACKENDS[_active]["apply_single_qubit"](amps, q, np.ascontiguousarray(u))


def apply_zz_phase(amps: np.ndarray, a: int, b: int, theta: float) -> None:
    _BACKENDS[_active]["apply_zz_phase"](amps, a, b, theta)


def apply_z_phase(amps: np.ndarray, q: int, theta: float) -> None:
    _BACKENDS[_active]["apply_z_phase"](amps, q, theta)
