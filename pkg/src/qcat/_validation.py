"""Input validation helpers shared by every module."""

from __future__ import annotations

import numpy as np

SUPPORTED_TWICE_I = tuple(range(2, 10))


class DomainError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


def check_twice_i(twice_i):
    """Return ``twice_i`` as an int, raising DomainError outside 2..9."""
    if isinstance(twice_i, bool) or int(twice_i) != twice_i:
        raise DomainError(f"twice_i must be an integer, got {twice_i!r}")
    twice_i = int(twice_i)
    if twice_i not in SUPPORTED_TWICE_I:
        raise DomainError(
            f"twice_i={twice_i} unsupported; accepted range is 2..9 (I = 1 .. 9/2)"
        )
    return twice_i


def check_eta(eta):
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta={eta} outside accepted range [0, 1]")
    return eta


def check_gamma(gamma):
    gamma = float(gamma)
    if not gamma >= 0.0:
        raise DomainError(f"gamma={gamma} must be >= 0")
    return gamma


def check_unit_vector(axis, atol=1e-12):
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,):
        raise DomainError(f"axis must be a 3-vector, got shape {axis.shape}")
    if abs(np.linalg.norm(axis) - 1.0) > atol:
        raise DomainError(f"axis {axis.tolist()} is not a unit vector")
    return axis


def check_time_grid(t_grid):
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t.ndim != 1:
        raise DomainError("time grid must be one-dimensional")
    if np.any(t < 0):
        raise DomainError("time grid must be nonnegative")
    if np.any(np.diff(t) < 0):
        raise DomainError("time grid must be sorted in ascending order")
    return t


def check_state(psi, dim=None, atol=1e-12):
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise DomainError("state vector must be one-dimensional")
    if dim is not None and psi.shape[0] != dim:
        raise DomainError(f"state has dimension {psi.shape[0]}, expected {dim}")
    if abs(np.linalg.norm(psi) - 1.0) > atol:
        raise DomainError("state vector is not normalized")
    return psi


def check_density_matrix(rho, dim=None, atol=1e-10):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError("density matrix must be square")
    if dim is not None and rho.shape[0] != dim:
        raise DomainError(f"density matrix has dimension {rho.shape[0]}, expected {dim}")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol:
        raise DomainError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -1e-8:
        raise DomainError("density matrix has negative eigenvalues")
    return rho


def check_hermitian(H, atol=1e-10):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DomainError("Hamiltonian must be a square matrix")
    if np.max(np.abs(H - H.conj().T)) > atol:
        raise DomainError("Hamiltonian is not Hermitian")
    return H


def dim_of(twice_i):
    return check_twice_i(twice_i) + 1


def twice_i_of_dim(dim):
    return check_twice_i(int(dim) - 1)
