"""Four-wave mixing with adiabatically prepared two-photon coherence."""

from .core import (AtomicParams, DressedState, FieldPoint, branch_eigenvalue, dressed_state,
                   eigenvalue_cubic, kr_preset)
from .errors import (BoundaryError, ConfigError, ConvergenceError, DegenerateStateError,
                     DomainError, ModelValidityWarning, RegimeMismatchError,
                     SingularConfigurationError)
from .experiments import (ExperimentConfig, GridResult, efficiency_curve, figure_preset,
                          grid_simulate)
from .phasematch import joint_compensation_check, phase_match_required_dk, windows
from .propagation import (PropagationCoefficients, PropagationProblem, canonical_ode_oracle,
                          classify, coefficients, implicit_integral_oracle, solve)
from .scrap import FULL_SCRAP, HALF_SCRAP, PulseConfig, adiabatic_trajectory, tdse_oracle
from .smallsignal import small_signal_profile, undepleted_pump_solution

__version__ = "0.1.0"
