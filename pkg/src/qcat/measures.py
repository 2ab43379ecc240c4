"""Fidelity, spin variances and normalized relative quantum Fisher information.

Every function accepts a pure state (shape ``(d,)``), a density matrix
(``(d, d)``), or a stack of either (``(n, d)`` / ``(n, d, d)``) and returns a
scalar or an array of length ``n`` accordingly.
"""

from __future__ import annotations

import numpy as np

from qcat._validation import DomainError, twice_i_of_dim
from qcat.spin import build_operators

AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
BOUND_RQFI_AXIS = {"polar": "z", "equator": "y", "x_axis": "x"}


def _kind(state, d):
    a = np.asarray(state, dtype=complex)
    if a.shape == (d,):
        return a, "pure", False
    if a.shape == (d, d):
        return a, "mixed", False
    if a.ndim == 2 and a.shape[1] == d:
        return a, "pure", True
    if a.ndim == 3 and a.shape[1:] == (d, d):
        return a, "mixed", True
    raise DomainError(f"state of shape {a.shape} does not match dimension {d}")


def _expect(op, state, d):
    a, kind, stacked = _kind(state, d)
    if kind == "pure":
        return np.einsum("...i,ij,...j->...", a.conj(), op, a)
    return np.einsum("ij,...ji->...", op, a)


def fidelity(target, state):
    """``|<target|psi>|`` for pure states, ``sqrt(<target|rho|target>)`` for mixed."""
    target = np.asarray(target, dtype=complex)
    if target.ndim != 1:
        raise DomainError("target must be a pure state vector")
    d = target.shape[0]
    a, kind, _ = _kind(state, d)
    if kind == "pure":
        f = np.abs(a @ target.conj())
    else:
        val = np.einsum("i,...ij,j->...", target.conj(), a, target).real
        f = np.sqrt(np.clip(val, 0.0, None))
    return np.clip(f, 0.0, 1.0)


def _direction(direction):
    if isinstance(direction, str):
        try:
            return np.array(AXES[direction])
        except KeyError:
            raise DomainError(f"unknown axis {direction!r}") from None
    u = np.asarray(direction, dtype=float)
    if u.shape != (3,) or abs(np.linalg.norm(u) - 1) > 1e-12:
        raise DomainError("direction must be a unit 3-vector")
    return u


def spin_variance(state, direction):
    """``<Iu^2> - <Iu>^2`` for ``Iu = u . I``."""
    a = np.asarray(state)
    d = a.shape[-1]
    ops = build_operators(twice_i_of_dim(d))
    iu = ops.along(_direction(direction))
    first = _expect(iu, a, d).real
    second = _expect(iu @ iu, a, d).real
    return second - first**2


def normalized_rqfi(state, direction="auto"):
    """Variance of ``Iu`` divided by ``I^2``.

    ``direction="auto"`` takes the largest value over the x, y and z axes.
    """
    a = np.asarray(state)
    spin = (a.shape[-1] - 1) / 2
    if isinstance(direction, str) and direction == "auto":
        vals = np.stack([spin_variance(a, ax) for ax in "xyz"])
        return vals.max(axis=0) / spin**2
    return spin_variance(a, direction) / spin**2
