"""Exponential-plus-offset fits ``F(t) = F0 exp(-(t - t_ref)/tau) + F_sat``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from sklearn.base import BaseEstimator, RegressorMixin

from qcat._validation import DomainError


@dataclass(frozen=True)
class DecayFit:
    f0: float
    tau: float
    f_sat: float
    residual: float
    at_boundary: bool
    t_ref: float = 0.0

    @property
    def ok(self):
        return not self.at_boundary and self.f0 > 0

    def predict(self, t):
        t = np.asarray(t, dtype=float)
        return self.f0 * np.exp(-(t - self.t_ref) / self.tau) + self.f_sat


def _linear_part(t, y, tau):
    basis = np.column_stack([np.exp(-t / tau), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    r = basis @ coef - y
    return coef, float(r @ r)


def fit_decay(times, fidelity, t_ref=0.0, n_grid=400, tau_range=None) -> DecayFit:
    """Variable-projection least squares.

    ``tau`` is scanned on a log grid with ``(F0, F_sat)`` solved linearly at
    each point, then refined by a bounded scalar search between the grid
    neighbours of the best point.  ``residual`` is the RMS misfit.  A best
    grid point on either end of the grid, or a series with no variation,
    sets ``at_boundary``.
    """
    t = np.asarray(times, dtype=float) - float(t_ref)
    y = np.asarray(fidelity, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise DomainError("times and fidelity must be 1-D arrays of equal length")
    if len(t) < 10:
        raise DomainError("need at least 10 samples")
    span = float(t.max() - t.min())
    if span <= 0:
        raise DomainError("times must span a positive interval")
    if tau_range is None:
        step = float(np.min(np.diff(np.sort(t)))) or span / len(t)
        tau_range = (step / 2, 100 * span)
    grid = np.geomspace(*tau_range, n_grid)

    if np.ptp(y) < 1e-12:
        return DecayFit(0.0, float(grid[-1]), float(y.mean()), 0.0, True, float(t_ref))

    sse = np.array([_linear_part(t, y, tau)[1] for tau in grid])
    k = int(np.argmin(sse))
    at_boundary = k in (0, n_grid - 1)
    lo = np.log(grid[max(k - 1, 0)])
    hi = np.log(grid[min(k + 1, n_grid - 1)])
    res = minimize_scalar(
        lambda s: _linear_part(t, y, np.exp(s))[1],
        bounds=(lo, hi), method="bounded", options={"xatol": 1e-12},
    )
    tau = float(np.exp(res.x)) if res.fun <= sse[k] else float(grid[k])
    (f0, f_sat), sse_best = _linear_part(t, y, tau)
    return DecayFit(
        float(f0), tau, float(f_sat), float(np.sqrt(sse_best / len(t))),
        bool(at_boundary), float(t_ref),
    )


class ExponentialDecayRegressor(BaseEstimator, RegressorMixin):
    """Estimator wrapper around :func:`fit_decay`; ``X`` holds the times."""

    def __init__(self, t_ref=0.0, n_grid=400):
        self.t_ref = t_ref
        self.n_grid = n_grid

    def fit(self, X, y):
        t = np.asarray(X, dtype=float).reshape(-1)
        self.fit_ = fit_decay(t, np.asarray(y, dtype=float), self.t_ref, self.n_grid)
        self.f0_ = self.fit_.f0
        self.tau_ = self.fit_.tau
        self.f_sat_ = self.fit_.f_sat
        self.at_boundary_ = self.fit_.at_boundary
        return self

    def predict(self, X):
        return self.fit_.predict(np.asarray(X, dtype=float).reshape(-1))
