"""Angular-momentum algebra and the states built from it.

All vectors live in the Dicke basis ordered m = I, I-1, ..., -I, so index
``k`` holds the amplitude of ``|I, I-k>``.  Spin magnitudes are passed as
``twice_i = 2I`` to keep half-integers exact.

Rotation convention
-------------------
``rotation_operator(twice_i, n, a)`` is ``exp(-i a n.I)``, a right-handed
rotation by ``a`` about ``n``.  The coherent state
``exp[i theta (sin(phi) Ix - cos(phi) Iy)] |I, I>`` is therefore the rotation
by ``theta`` about ``(-sin(phi), cos(phi), 0)``, and it points along
``(sin(theta) cos(phi), sin(theta) sin(phi), cos(theta))``.

The six cardinal coherent states are

=====  =============================  ===============================
label  coherent_spin_state(theta, phi) equivalent rotation of |I, I>
=====  =============================  ===============================
+Z     (0, 0)                          identity
-Z     (pi, 0)                         R(y, pi)     (equals +|I, -I>)
+X     (pi/2, 0)                       R(y, pi/2)
-X     (pi/2, pi)                      R(y, -pi/2)
+Y     (pi/2, pi/2)                    R(x, -pi/2)
-Y     (pi/2, 3 pi/2)                  R(x, pi/2)
=====  =============================  ===============================
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from qcat._validation import DomainError, check_twice_i, check_unit_vector

CARDINAL_ANGLES = {
    "+Z": (0.0, 0.0),
    "-Z": (np.pi, 0.0),
    "+X": (np.pi / 2, 0.0),
    "-X": (np.pi / 2, np.pi),
    "+Y": (np.pi / 2, np.pi / 2),
    "-Y": (np.pi / 2, 3 * np.pi / 2),
}

# Bound name -> cardinal axis carrying the cat legs.
BOUND_AXES = {"polar": "Z", "equator": "Y", "x_axis": "X"}


@dataclass(frozen=True)
class SpinOperators:
    """Matrices of Ix, Iy, Iz and the Casimir I^2 for spin ``twice_i / 2``."""

    twice_i: int
    Ix: np.ndarray
    Iy: np.ndarray
    Iz: np.ndarray
    casimir: np.ndarray

    @property
    def spin(self):
        return self.twice_i / 2

    @property
    def dim(self):
        return self.twice_i + 1

    def along(self, direction):
        """Return ``u . I`` for a 3-vector ``u``."""
        u = np.asarray(direction, dtype=float)
        return u[0] * self.Ix + u[1] * self.Iy + u[2] * self.Iz


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=None)
def _build(twice_i):
    s = twice_i / 2
    m = s - np.arange(twice_i + 1)
    # <m+1| I+ |m> sits one row above the diagonal in descending-m order.
    raising = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), 1)
    ix = (raising + raising.T) / 2
    iy = (raising - raising.T) / 2j
    iz = np.diag(m)
    cas = ix @ ix + iy @ iy + iz @ iz
    return SpinOperators(
        twice_i, _frozen(ix), _frozen(iy), _frozen(iz), _frozen(cas)
    )


def build_operators(twice_i) -> SpinOperators:
    """Spin matrices for ``I = twice_i / 2``; results are cached and read-only."""
    return _build(check_twice_i(twice_i))


def dicke_state(twice_i, m) -> np.ndarray:
    """Basis vector ``|I, m>``; ``m`` may be a half-integer float or Fraction."""
    twice_i = check_twice_i(twice_i)
    twice_m = 2 * m
    if abs(twice_m - round(twice_m)) > 1e-12:
        raise DomainError(f"m={m} is not a multiple of 1/2")
    twice_m = int(round(twice_m))
    if abs(twice_m) > twice_i or (twice_i - twice_m) % 2:
        raise DomainError(f"m={m} invalid for I={twice_i}/2")
    psi = np.zeros(twice_i + 1, dtype=complex)
    psi[(twice_i - twice_m) // 2] = 1.0
    return psi


def rotation_operator(twice_i, axis, angle) -> np.ndarray:
    """Unitary ``exp(-i angle axis.I)``."""
    axis = check_unit_vector(axis)
    gen = build_operators(twice_i).along(axis)
    w, v = np.linalg.eigh(gen)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


def coherent_spin_state(twice_i, theta, phi) -> np.ndarray:
    """Coherent state centred on polar angle ``theta`` and azimuth ``phi``.

    No rephasing is applied: the vector is exactly the rotation of ``|I, I>``
    about ``(-sin phi, cos phi, 0)`` by ``theta``.
    """
    twice_i = check_twice_i(twice_i)
    top = np.zeros(twice_i + 1, dtype=complex)
    top[0] = 1.0
    if theta == 0:
        return top
    axis = (-np.sin(phi), np.cos(phi), 0.0)
    return rotation_operator(twice_i, axis, theta) @ top


def cardinal_state(twice_i, label) -> np.ndarray:
    """One of ``+X, -X, +Y, -Y, +Z, -Z`` (see module docstring)."""
    try:
        theta, phi = CARDINAL_ANGLES[label]
    except KeyError:
        raise DomainError(f"unknown cardinal label {label!r}") from None
    return coherent_spin_state(twice_i, theta, phi)


def cat_target(twice_i, bound, phase) -> np.ndarray:
    """Normalized ``|A> + exp(i phase) |-A>`` with A picked by ``bound``.

    ``bound`` is one of ``polar`` (A = Z), ``equator`` (A = Y) or ``x_axis``.
    The legs are antipodal coherent states, hence orthogonal, so the
    normalization is exactly ``1/sqrt(2)``.
    """
    try:
        ax = BOUND_AXES[bound]
    except KeyError:
        raise DomainError(f"unknown bound {bound!r}") from None
    plus = cardinal_state(twice_i, "+" + ax)
    minus = cardinal_state(twice_i, "-" + ax)
    return (plus + np.exp(1j * phase) * minus) / np.sqrt(2)


def n4_target(twice_i, rotor_phase) -> np.ndarray:
    """Four-legged cat ``(|Z> + |-Z>) + exp(i rotor_phase) (|Y> + i|-Y>)``, normalized.

    ``rotor_phase = pi`` gives the fixed template; ``rotor_phase = w2 t``
    gives the target whose equatorial pair rotates against the polar pair.
    """
    polar = cardinal_state(twice_i, "+Z") + cardinal_state(twice_i, "-Z")
    equat = cardinal_state(twice_i, "+Y") + 1j * cardinal_state(twice_i, "-Y")
    psi = polar + np.exp(1j * rotor_phase) * equat
    return psi / np.linalg.norm(psi)
