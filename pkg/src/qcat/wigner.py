"""Spin Wigner quasi-probability maps from multipole expansions.

The map is ``W(theta, phi) = c sum_{k,q} rho_kq Y_kq(theta, phi)`` with
``rho_kq = Tr(rho T_kq^dagger)``, ``T_kq`` the orthonormal spherical tensor
operators and ``c = sqrt((2I + 1) / 4 pi)`` so that every map integrates to
one over the sphere.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import sph_harm_y

from qcat._validation import DomainError, check_twice_i, twice_i_of_dim


def _fact(n):
    if n < 0:
        raise ValueError
    return factorial(n)


@lru_cache(maxsize=None)
def clebsch_gordan_squared(tj1, tm1, tj2, tm2, tj, tm):
    """Signed square ``sign(C) C^2`` of ``<j1 m1; j2 m2 | j m>`` as a Fraction.

    All arguments are doubled quantum numbers.  Racah's closed form is
    evaluated in exact rational arithmetic; the square root is only taken by
    :func:`clebsch_gordan`.
    """
    if tm1 + tm2 != tm:
        return Fraction(0)
    if not abs(tj1 - tj2) <= tj <= tj1 + tj2 or (tj1 + tj2 + tj) % 2:
        return Fraction(0)
    for tjx, tmx in ((tj1, tm1), (tj2, tm2), (tj, tm)):
        if abs(tmx) > tjx or (tjx - tmx) % 2:
            return Fraction(0)
    a = (tj1 + tj2 - tj) // 2
    b = (tj1 - tj2 + tj) // 2
    c = (-tj1 + tj2 + tj) // 2
    pref = Fraction(
        (tj + 1) * _fact(a) * _fact(b) * _fact(c), _fact((tj1 + tj2 + tj) // 2 + 1)
    )
    pref *= (
        _fact((tj1 + tm1) // 2) * _fact((tj1 - tm1) // 2)
        * _fact((tj2 + tm2) // 2) * _fact((tj2 - tm2) // 2)
        * _fact((tj + tm) // 2) * _fact((tj - tm) // 2)
    )
    total = Fraction(0)
    for k in range(0, a + 1):
        dens = (
            k,
            a - k,
            (tj1 - tm1) // 2 - k,
            (tj2 + tm2) // 2 - k,
            (tj - tj2 + tm1) // 2 + k,
            (tj - tj1 - tm2) // 2 + k,
        )
        if min(dens) < 0:
            continue
        den = 1
        for x in dens:
            den *= _fact(x)
        total += Fraction((-1) ** k, den)
    return pref * total * total * (1 if total >= 0 else -1)


def clebsch_gordan(j1, m1, j2, m2, j, m):
    """``<j1 m1; j2 m2 | j m>`` as a float (half-integers accepted)."""
    args = [2 * x for x in (j1, m1, j2, m2, j, m)]
    if any(abs(x - round(x)) > 1e-9 for x in args):
        raise DomainError("quantum numbers must be multiples of 1/2")
    s = clebsch_gordan_squared(*(int(round(x)) for x in args))
    return float(np.sign(s) * np.sqrt(abs(float(s))))


@lru_cache(maxsize=None)
def _tensor_operators(twice_i):
    """Dict ``(k, q) -> T_kq`` in the descending-m Dicke basis."""
    d = twice_i + 1
    tms = [twice_i - 2 * i for i in range(d)]
    ops = {}
    for k in range(twice_i + 1):
        for q in range(-k, k + 1):
            t = np.zeros((d, d))
            for a, tm in enumerate(tms):
                for b, tmp in enumerate(tms):
                    # (-1)^(I - m') <I m; I -m' | k q>
                    cg = clebsch_gordan_squared(twice_i, tm, twice_i, -tmp, 2 * k, 2 * q)
                    if cg == 0:
                        continue
                    sign = -1 if ((twice_i - tmp) // 2) % 2 else 1
                    t[a, b] = sign * np.sign(float(cg)) * np.sqrt(abs(float(cg)))
            t.flags.writeable = False
            ops[(k, q)] = t
    return ops


def tensor_operators(twice_i):
    return _tensor_operators(check_twice_i(twice_i))


@dataclass(frozen=True)
class WignerMap:
    theta_grid: np.ndarray
    phi_grid: np.ndarray
    values: np.ndarray

    def integral(self):
        """Surface integral by trapezoid in theta and periodic rectangle in phi."""
        integrand = self.values * np.sin(self.theta_grid)[:, None]
        dphi = 2 * np.pi / len(self.phi_grid)
        return float(np.trapezoid(integrand.sum(axis=1) * dphi, self.theta_grid))

    def rows(self):
        for i, th in enumerate(self.theta_grid):
            for j, ph in enumerate(self.phi_grid):
                yield float(th), float(ph), float(self.values[i, j])


def multipoles(rho):
    """``{(k, q): Tr(rho T_kq^dagger)}``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    twice_i = twice_i_of_dim(rho.shape[0])
    return {kq: np.trace(rho @ t.T) for kq, t in tensor_operators(twice_i).items()}


def wigner_function(rho, theta, phi):
    """Evaluate the map at arbitrary (broadcastable) angles."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    d = rho.shape[0]
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    w = np.zeros(theta.shape, dtype=complex)
    for (k, q), c in multipoles(rho).items():
        if abs(c) < 1e-15:
            continue
        w += c * sph_harm_y(k, q, theta, phi)
    if np.max(np.abs(w.imag), initial=0.0) > 1e-10:
        raise ArithmeticError("Wigner map acquired an imaginary part")
    return np.sqrt(d / (4 * np.pi)) * w.real


def wigner_map(rho, n_theta, n_phi) -> WignerMap:
    """Map on ``n_theta`` polar points spanning [0, pi] and ``n_phi`` azimuths in [0, 2 pi)."""
    if n_theta < 2 or n_phi < 2:
        raise DomainError("need at least 2 points per angle")
    theta = np.linspace(0.0, np.pi, int(n_theta))
    phi = np.arange(int(n_phi)) * (2 * np.pi / int(n_phi))
    vals = wigner_function(rho, theta[:, None], phi[None, :])
    return WignerMap(theta, phi, vals)
