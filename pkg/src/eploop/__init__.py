"""Dissipative two-mode dynamics around an exceptional point.

Exact flow propagation in the lab, adiabatic and interaction frames with
overflow-safe scaling, perturbative propagators from nested commutator
integrals, transfer-probability metrics, and synthesis of Fourier
control fields that accelerate the non-reciprocal energy transfer.
"""

from .config import ExperimentConfig, ExperimentKind, load_config
from .control import (LinearSystem, SolveResult, build_linear_system,
                      solve_coefficients, synthesize_corrected_loop,
                      v_bad_interaction, w_interaction)
from .dynamics import DynamicalMatrix, FrameKind, dynamical_matrix
from .errors import (ConsistencyError, DegenerateInputError, DomainError,
                     EploopError, IntegrationError, QuadratureError,
                     RankError, RefinementError, SchemaError,
                     SingularityError)
from .flows import (Flow, Trajectory, change_frame, identity_flow,
                    integrate_flow, interaction_flow, flow_multiply,
                    pack_flow, phi0, phi0_inverse)
from .magnus import (ChannelAmplitudesLog, GainMode, MagnusTerms,
                     TruncatedFlow, asymptotic_channel_amplitudes,
                     classify_gain_mode, efficiency_eta, magnus_coefficients,
                     phi_I_truncated, tabulate_magnus, truncated_trajectory)
from .metrics import (INITIAL_STATE_SET, ProbabilityTable, average_error,
                      column_probabilities, normalized_probabilities,
                      time_averaged_error)
from .spectral import (SpectralFrame, build_spectral_frame,
                       diagonalization_residual, lambda_principal,
                       theta_principal)
from .system import (FourierControl, LoopKind, LoopSpec, SystemParams,
                     TruncationRanges, circular_loop, corrected_loop,
                     eval_path, eval_path_rate)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
