"""Scalar quality measures of the transfer dynamics.

Probabilities are column-normalized squared amplitudes, computed from
log magnitudes so the common exponential amplification cancels without
ever forming an overflowing number. The time-averaged approximation
error compares normalized evolved states of the exact and truncated
flows; its fidelity deficits are evaluated in a cross-product form that
is exact for unit vectors and immune to the 1 - |<a,b>|^2 cancellation,
so deficits far below machine epsilon remain meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import FrameKind
from .errors import ConsistencyError, DegenerateInputError
from .flows import (DEFAULT_ABS_TOL, DEFAULT_REL_TOL, Flow, Trajectory,
                    flow_multiply, integrate_flow, phi0)
from .magnus import GainMode, classify_gain_mode, truncated_trajectory
from .spectral import DEFAULT_JUMP_TOL, DEFAULT_N_GRID, SpectralFrame, \
    build_spectral_frame
from .system import LoopSpec, SystemParams

_SQ2 = 1.0 / math.sqrt(2.0)

#: The six initial states: eigenvectors of the three Pauli matrices.
INITIAL_STATE_SET = (
    np.array([1.0, 0.0], dtype=complex),          # +z
    np.array([0.0, 1.0], dtype=complex),          # -z
    np.array([_SQ2, _SQ2], dtype=complex),        # +x
    np.array([_SQ2, -_SQ2], dtype=complex),       # -x
    np.array([_SQ2, 1j * _SQ2], dtype=complex),   # +y
    np.array([_SQ2, -1j * _SQ2], dtype=complex),  # -y
)


@dataclass(frozen=True)
class ProbabilityTable:
    """Column-stochastic 2x2 table of transfer probabilities at time t.

    Row/column order is (gain, lossy) when built through
    normalized_probabilities, or the raw tracked (+, -) order when built
    through column_probabilities.
    """

    p: np.ndarray
    t: float
    basis: str

    def column_sums(self) -> np.ndarray:
        return self.p.sum(axis=0)


def column_probabilities(flow: Flow) -> ProbabilityTable:
    """P[i, j] = |Phi_ij|^2 / sum_i |Phi_ij|^2 in the tracked (+,-) basis.

    Uses log magnitudes so the normalization never overflows.
    """
    logs = flow.log_abs_entries()
    p = np.empty((2, 2))
    for j in range(2):
        col = logs[:, j]
        m = col.max()
        if not np.isfinite(m):
            raise DegenerateInputError(f"flow column {j} is identically zero")
        w = np.exp(2.0 * (col - m))
        p[:, j] = w / w.sum()
    return ProbabilityTable(p=p, t=flow.t, basis="+-")


def normalized_probabilities(flow: Flow, classification: GainMode,
                             degenerate_gain: str = "plus") -> ProbabilityTable:
    """Transfer probabilities with rows and columns relabeled (G, L).

    For a degenerate classification the G/L labels fall back to the
    tracked +/- modes according to ``degenerate_gain``.
    """
    raw = column_probabilities(flow)
    if classification is GainMode.MINUS_IS_GAIN:
        order = [1, 0]
    elif classification is GainMode.PLUS_IS_GAIN:
        order = [0, 1]
    else:
        order = [0, 1] if degenerate_gain == "plus" else [1, 0]
    p = raw.p[np.ix_(order, order)]
    return ProbabilityTable(p=p, t=flow.t, basis="GL")


def _fidelity_deficit(a: np.ndarray, b: np.ndarray) -> float:
    """1 - |<a, b>|^2 for unit vectors via the exact cross-product form."""
    cross = a[0] * b[1] - a[1] * b[0]
    return float(abs(cross) ** 2)


def _evolved_state(matrix: np.ndarray, c: np.ndarray) -> np.ndarray:
    v = matrix @ c
    n = np.linalg.norm(v)
    if n == 0.0:
        raise DegenerateInputError("evolved state has vanishing norm")
    return v / n


def time_averaged_error(exact: Trajectory, approx, sf: SpectralFrame) -> float:
    """Time-averaged infidelity between exact and approximate evolutions.

    ``approx`` is either a truncation order n (the order-n propagator is
    assembled and composed with the diagonal flow) or a Trajectory on the
    same grid. The six initial states are the Pauli eigenvectors; the
    time integral uses the trapezoid rule on the spectral grid. Computed
    as the average fidelity deficit, which equals |1 - mean fidelity|
    without the cancellation of forming the mean first.
    """
    if exact.frame is not FrameKind.ADIABATIC:
        raise ConsistencyError("exact trajectory must be in the adiabatic frame")
    if isinstance(approx, Trajectory):
        approx_flows = approx.flows
    else:
        interaction = truncated_trajectory(sf, int(approx))
        approx_flows = tuple(
            flow_multiply(phi0(sf, f.t), f) for f in interaction.flows
        )
    if len(approx_flows) != len(exact.flows):
        raise ConsistencyError("exact and approximate grids differ")

    ts = np.array([f.t for f in exact.flows])
    n = len(ts)
    deficits = np.empty((len(INITIAL_STATE_SET), n))
    for j in range(n):
        me = exact.flows[j].matrix
        ma = approx_flows[j].matrix
        for i, c in enumerate(INITIAL_STATE_SET):
            deficits[i, j] = _fidelity_deficit(_evolved_state(ma, c),
                                               _evolved_state(me, c))
    t_f = ts[-1] - ts[0]
    avg = np.trapezoid(deficits, ts, axis=1) / t_f
    return float(avg.mean())


def average_error(loop: LoopSpec, sys: SystemParams,
                  n_grid: int = DEFAULT_N_GRID,
                  jump_tol: float = DEFAULT_JUMP_TOL,
                  rel_tol: float = DEFAULT_REL_TOL,
                  abs_tol: float = DEFAULT_ABS_TOL) -> float:
    """Orientation-averaged non-reciprocity error.

    Runs the exact propagation for both loop orientations and combines
    the final-state probabilities in the tracked eigenmode basis: zero
    means both orientations deliver all energy to their respective gain
    mode.
    """
    p_cw = _final_probabilities(loop.with_orientation(+1), sys, n_grid,
                                jump_tol, rel_tol, abs_tol)
    p_ccw = _final_probabilities(loop.with_orientation(-1), sys, n_grid,
                                 jump_tol, rel_tol, abs_tol)
    return 1.0 - 0.25 * (p_cw[0, 0] + p_cw[0, 1] + p_ccw[1, 0] + p_ccw[1, 1])


def _final_probabilities(loop: LoopSpec, sys: SystemParams, n_grid: int,
                         jump_tol: float, rel_tol: float,
                         abs_tol: float) -> np.ndarray:
    sf = build_spectral_frame(loop, sys, n_grid=n_grid, jump_tol=jump_tol)
    traj = integrate_flow(loop, sys, sf, FrameKind.ADIABATIC,
                          rel_tol=rel_tol, abs_tol=abs_tol)
    return column_probabilities(traj.final).p
