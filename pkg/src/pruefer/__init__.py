"""Modified Pruefer integration and sharp embedded-eigenvalue thresholds for
half-line Schroedinger operators -u'' + V u = k^2 u with |x V(x)| -> a."""
from ._version import __version__
from .analysis import (DecayFit, EigenvalueVerdict, fit_decay,
                       lower_envelope_check, max_eigenvalue_bound,
                       per_period_integral, verdict, weighted_sin_integral)
from .core import (IntegrationError, IntegratorConfig, NonMonotoneError,
                   PrueferState, Trajectory, backend, detect_crossings,
                   from_wavefunction, integrate, pruefer_rhs,
                   read_trajectory, to_wavefunction, write_trajectory)
from .oracle import (WaveTrajectory, cross_check, integrate_direct,
                     l2_norm_tail)
from .potential import (EnvelopeEstimate, PotentialError, PotentialSpec,
                        estimate_envelope, evaluate, export_table,
                        import_table)

__all__ = [
    "DecayFit", "EigenvalueVerdict", "EnvelopeEstimate", "IntegrationError",
    "IntegratorConfig", "NonMonotoneError", "PotentialError",
    "PotentialSpec", "PrueferState", "Trajectory", "WaveTrajectory",
    "__version__", "backend", "cross_check", "detect_crossings",
    "estimate_envelope", "evaluate", "export_table", "fit_decay",
    "from_wavefunction", "import_table", "integrate", "integrate_direct",
    "l2_norm_tail", "lower_envelope_check", "max_eigenvalue_bound",
    "per_period_integral", "pruefer_rhs", "read_trajectory",
    "to_wavefunction", "verdict", "weighted_sin_integral",
    "write_trajectory",
]
