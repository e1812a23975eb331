"""Perturbative propagators from nested commutator integrals.

The interaction-frame generator couples the normal modes through
u(t) = theta_dot e^{+2i Lambda} (into the gain mode) and
v(t) = theta_dot e^{-2i Lambda} (out of it). The first four expansion
terms have a fixed Pauli structure: the odd ones are strictly
off-diagonal, the even ones strictly diagonal. All integrals are
evaluated by cumulative per-panel Gauss-Legendre quadrature over the
spectral grid, inner levels tabulated before outer ones.

Two assemblies of the truncated propagator are provided. The polynomial
form in the f coefficients mirrors the analytic expression term by term
but requires cancellations between exponentially large products, so it
loses all precision for long loops; the time-ordered form evaluates the
identical truncation without those cancellations and is the one used by
the error metrics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, QuadratureError, SingularityError
from .flows import Flow, Trajectory, pack_flow
from .dynamics import FrameKind
from .spectral import EP_GUARD_REL, CubicGridFunction, SpectralFrame

DEFAULT_QUAD_TOL = 1e-9

_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_SP = np.array([[0, 1], [0, 0]], dtype=complex)
_SM = np.array([[0, 0], [1, 0]], dtype=complex)


@dataclass(frozen=True)
class MagnusTerms:
    """Pauli-basis coefficients of the first four expansion terms at t."""

    f1_plus: complex
    f1_minus: complex
    f2_z: complex
    f3_plus: complex
    f3_minus: complex
    f4_z: complex
    t: float


@dataclass(frozen=True)
class TruncatedFlow:
    order: int
    flow: Flow


class GainMode(enum.Enum):
    PLUS_IS_GAIN = "plus"
    MINUS_IS_GAIN = "minus"
    DEGENERATE = "degenerate"


@dataclass(frozen=True, eq=False)
class MagnusTable:
    """Cumulative tabulation of the coefficient functions on the grid."""

    sf: SpectralFrame
    u: np.ndarray
    v: np.ndarray
    f1_plus: np.ndarray
    f1_minus: np.ndarray
    f2_z: np.ndarray
    f3_plus: np.ndarray
    f3_minus: np.ndarray
    f4_z: np.ndarray

    def at_index(self, j: int) -> MagnusTerms:
        return MagnusTerms(
            f1_plus=complex(self.f1_plus[j]),
            f1_minus=complex(self.f1_minus[j]),
            f2_z=complex(self.f2_z[j]),
            f3_plus=complex(self.f3_plus[j]),
            f3_minus=complex(self.f3_minus[j]),
            f4_z=complex(self.f4_z[j]),
            t=float(self.sf.grid[j]),
        )


def _cumulative(ts: np.ndarray, values: np.ndarray) -> np.ndarray:
    return CubicGridFunction(ts, values).integrate_prefix()


def _check_quadrature(ts: np.ndarray, values: np.ndarray, total: np.ndarray,
                      quad_tol: float, label: str) -> None:
    """Estimate the interpolation-driven panel error from 4th differences.

    The per-panel quadrature error of a cubic interpolant scales with the
    4th difference of the samples; relative to the accumulated magnitude
    this must stay below quad_tol.
    """
    if len(values) < 6:
        return
    span = float(ts[-1] - ts[0])
    d4 = np.abs(np.diff(values, 4))
    h = np.diff(ts).max()
    est_abs = float(d4.max()) * h / 384.0
    if est_abs <= 1e-12 * max(1.0, span):
        return  # at the absolute noise floor (e.g. vanishing coupling)
    scale = max(float(np.abs(total).max()), 1e-300)
    est = est_abs / scale
    if est > quad_tol:
        worst = int(np.argmax(d4))
        raise QuadratureError(
            f"{label}: estimated panel error {est:.3e} exceeds quad_tol "
            f"{quad_tol:.1e} near t={ts[worst]:.6g}"
        )


def tabulate_magnus(sf: SpectralFrame,
                    quad_tol: float = DEFAULT_QUAD_TOL) -> MagnusTable:
    """Tabulate f(1)+/-, f(2)z, f(3)+/-, f(4)z cumulatively on the grid."""
    if quad_tol < 1e-12:
        raise DomainError("quad_tol below 1e-12 is not attainable")
    ts = sf.grid
    u = sf.theta_dot * np.exp(2j * sf.Lam)
    v = sf.theta_dot * np.exp(-2j * sf.Lam)
    f1p = _cumulative(ts, u)
    f1m = _cumulative(ts, v)
    _check_quadrature(ts, u, f1p, quad_tol, "f1+ integrand")
    _check_quadrature(ts, v, f1m, quad_tol, "f1- integrand")

    w2 = v * f1p - u * f1m
    fz2 = _cumulative(ts, w2)
    _check_quadrature(ts, w2, fz2, quad_tol, "f2z integrand")

    cross = u * f1m - v * f1p
    w3p = -0.5 * fz2 * u - (1.0 / 6.0) * cross * f1p
    w3m = -0.5 * fz2 * v - (1.0 / 6.0) * cross * f1m
    f3p = _cumulative(ts, w3p)
    f3m = _cumulative(ts, w3m)
    _check_quadrature(ts, w3p, f3p, quad_tol, "f3+ integrand")
    _check_quadrature(ts, w3m, f3m, quad_tol, "f3- integrand")

    w4 = (u * f3m + v * f3p) + (1.0 / 6.0) * fz2 * (u * f1m + v * f1p)
    fz4 = _cumulative(ts, w4)
    _check_quadrature(ts, w4, fz4, quad_tol, "f4z integrand")

    return MagnusTable(sf=sf, u=u, v=v, f1_plus=f1p, f1_minus=f1m,
                       f2_z=fz2, f3_plus=f3p, f3_minus=f3m, f4_z=fz4)


def magnus_coefficients(sf: SpectralFrame, t: float,
                        quad_tol: float = DEFAULT_QUAD_TOL) -> MagnusTerms:
    """Coefficients of the first four expansion terms at grid node t."""
    j = sf.node_index(t)
    return tabulate_magnus(sf, quad_tol).at_index(j)


def phi_I_truncated(mt: MagnusTerms, order: int) -> TruncatedFlow:
    """Assemble the order-n truncated interaction propagator from the
    coefficient polynomial (term-by-term analytic form).

    Accurate only while the coefficient products remain well below
    1/machine-epsilon of the result; see truncated_trajectory for the
    cancellation-free evaluation of the same truncation.
    """
    if order not in (1, 2, 3, 4):
        raise DomainError(f"truncation order must be 1..4, got {order}")
    f1p, f1m = mt.f1_plus, mt.f1_minus
    fz2, f3p, f3m, fz4 = mt.f2_z, mt.f3_plus, mt.f3_minus, mt.f4_z
    ident = 1.0 + 0j
    cz = 0j
    cp = f1p
    cm = -f1m
    if order >= 2:
        ident = ident - 0.5 * f1p * f1m
        cz = 0.5 * fz2
    if order >= 3:
        cp = f1p + f3p - (1.0 / 6.0) * f1p ** 2 * f1m
        cm = -(f1m - f3m - (1.0 / 6.0) * f1m ** 2 * f1p)
    if order >= 4:
        ident = (1.0 + 0.5 * (f1p * f3m - f1p * f1m - f1m * f3p)
                 + (1.0 / 24.0) * (f1p * f1m) ** 2 + 0.125 * fz2 ** 2)
        cz = 0.5 * (fz2 + fz4 - (1.0 / 6.0) * f1m * f1p * fz2)
    m = ident * np.eye(2, dtype=complex) + cz * _SZ + cp * _SP + cm * _SM
    return TruncatedFlow(order=order, flow=pack_flow(m, 0.0, mt.t))


def truncated_trajectory(sf: SpectralFrame, order: int,
                         table: MagnusTable | None = None) -> Trajectory:
    """Order-n truncated interaction propagator at every grid node,
    evaluated as nested time-ordered integrals.

    Algebraically identical to the polynomial assembly (the expansion is
    a resummed time-ordered series), but free of the catastrophic
    cancellations between exponentially large coefficient products, so it
    stays accurate for long loops.
    """
    if order not in (1, 2, 3, 4):
        raise DomainError(f"truncation order must be 1..4, got {order}")
    if table is None:
        table = tabulate_magnus(sf)
    ts = sf.grid
    n = len(ts)
    u, v = table.u, table.v
    zeros = np.zeros(n, dtype=complex)
    total = [
        [np.ones(n, dtype=complex), zeros.copy()],
        [zeros.copy(), np.ones(n, dtype=complex)],
    ]
    prev = [[np.ones(n, dtype=complex), zeros],
            [zeros, np.ones(n, dtype=complex)]]
    for _ in range(order):
        nxt = [[None, None], [None, None]]
        for col in range(2):
            top = u * prev[1][col]
            bot = -v * prev[0][col]
            nxt[0][col] = _cumulative(ts, top)
            nxt[1][col] = _cumulative(ts, bot)
        for r in range(2):
            for c in range(2):
                total[r][c] = total[r][c] + nxt[r][c]
        prev = nxt
    flows = tuple(
        pack_flow(np.array([[total[0][0][j], total[0][1][j]],
                            [total[1][0][j], total[1][1][j]]]), 0.0, float(ts[j]))
        for j in range(n)
    )
    return Trajectory(frame=FrameKind.INTERACTION, flows=flows)


@dataclass(frozen=True)
class ChannelAmplitudesLog:
    """Natural logs of the four asymptotic squared channel amplitudes,
    indexed final,initial with G the gain and L the lossy mode."""

    gg: float
    lg: float
    gl: float
    ll: float


def asymptotic_channel_amplitudes(sf: SpectralFrame, t: float) -> ChannelAmplitudesLog:
    """Boundary-term asymptotics of the squared flow elements.

    All four channels share the common amplification e^{2|Im Lambda(t)|};
    the off-gain channels are suppressed by |theta_dot/(2 lambda)| at the
    relevant endpoint. Returned as logs so no scale ever overflows.
    """
    lam_t = sf.lam_at(t)
    lam_0 = sf.lam_at(0.0)
    guard = EP_GUARD_REL * sf.Gamma
    if abs(lam_t) < guard or abs(lam_0) < guard:
        raise SingularityError("eigenvalue below the EP-proximity guard")
    td_t = sf.theta_dot_at(t)
    td_0 = sf.theta_dot_at(0.0)
    common = 2.0 * abs(sf.Lam_at(t).imag)
    sup_t = 2.0 * math.log(abs(td_t / (2.0 * lam_t)))
    sup_0 = 2.0 * math.log(abs(td_0 / (2.0 * lam_0)))
    return ChannelAmplitudesLog(gg=common, lg=common + sup_t,
                                gl=common + sup_0, ll=common + sup_0 + sup_t)


def efficiency_eta(sf: SpectralFrame, t: float) -> float:
    """Asymptotic lossy-to-gain energy ratio |theta_dot|^2 / (4 |lambda|^2)."""
    lam = sf.lam_at(t)
    if abs(lam) < EP_GUARD_REL * sf.Gamma:
        raise SingularityError("eigenvalue below the EP-proximity guard")
    return 0.25 * abs(sf.theta_dot_at(t)) ** 2 / abs(lam) ** 2


def classify_gain_mode(sf: SpectralFrame, t_f: float | None = None,
                       tol: float | None = None) -> GainMode:
    """Which tracked mode the diagonal flow amplifies at t_f.

    The first component is amplified when Im Lambda(t_f) > 0. The default
    degeneracy tolerance scales with the loop duration because so does
    the quadrature noise floor of Lambda.
    """
    t_f = sf.t_f if t_f is None else t_f
    if tol is None:
        tol = 1e-6 * sf.Gamma * t_f
    im = sf.Lam_at(t_f).imag
    if im > tol:
        return GainMode.PLUS_IS_GAIN
    if im < -tol:
        return GainMode.MINUS_IS_GAIN
    return GainMode.DEGENERATE
