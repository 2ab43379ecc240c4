"""Nuclear-spin cat states under the quadrupole interaction: simulation,
pulse optimization and analysis."""

from qcat._validation import ConvergenceError, DomainError
from qcat.classical import ClassicalState, fixed_points, integrate_flow, portrait_dataset
from qcat.decay import DecayFit, ExponentialDecayRegressor, fit_decay
from qcat.dynamics import (
    OMEGA_1,
    OMEGA_2,
    OMEGA_Q,
    PulseEvent,
    closed_form_u_5half,
    evolve_lindblad,
    evolve_pure,
    lindblad_operators,
    propagator,
    qi_hamiltonian,
)
from qcat.measures import fidelity, normalized_rqfi, spin_variance
from qcat.optimize import OptimizationResult, PulseOptimizer, eta_sweep, evaluate_candidate, optimize
from qcat.protocols import (
    decoherence_series,
    harmonic_ratio,
    run_n2,
    run_n4,
    sensitivity_scan,
    tau_scaling,
)
from qcat.spin import build_operators, cardinal_state, cat_target, coherent_spin_state, n4_target
from qcat.wigner import wigner_function, wigner_map

__version__ = "0.1.0"
