"""Synthesis of corrected control loops via a 12-row linear system.

The correcting fields must, for both traversal directions at once, cancel
the average of the spurious (out-of-gain) part of the interaction-frame
generator while preserving its useful part and the accumulated eigenvalue
integral. Each orientation contributes six real rows: real/imaginary
parts of the endpoint shift of Lambda, of the bad-channel integral and of
the good-channel integral. The columns are the responses of those twelve
functionals to a unit Fourier coefficient, linearized around the current
loop; because an order-h field perturbation shifts Lambda by order one
over the loop, the response of the exponentially weighted channel
integrals includes the Lambda-shift coupling term in addition to the
frame-conjugated control matrix itself.

Orders are solved sequentially: order one cancels the first expansion
term of the bad channel, order two re-solves with the second-order
diagonal content (the f_z^(2) element of the partially corrected loop)
added to the endpoint target. Within an order the same equation is
re-solved a few times with frames rebuilt from the partially corrected
loop, since the map from coefficients to channel integrals is strongly
nonlinear through Lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DegenerateInputError, DomainError, \
    RankError
from .magnus import GainMode, classify_gain_mode, tabulate_magnus
from .spectral import (DEFAULT_JUMP_TOL, DEFAULT_N_GRID, CubicGridFunction,
                       SpectralFrame, build_spectral_frame,
                       grid_first_derivative)
from .system import (FourierControl, LoopKind, LoopSpec, SystemParams,
                     TruncationRanges, circular_loop, corrected_loop,
                     eval_path)

DEFAULT_SVD_CUTOFF = 1e-12
DEFAULT_INNER_ITERATIONS = 3


@dataclass(frozen=True)
class LinearSystem:
    """M x = y for the free Fourier coefficients of one correction order.

    Rows: [Re dLam, Im dLam, Re bad, Im bad, Re good, Im good] for the
    clockwise block, then the same for the counterclockwise block. The
    three complex functionals span the same space as the Pauli-component
    integrals of the control operator (sigma_z and the two circular
    combinations of sigma_x, sigma_y).
    """

    M: np.ndarray
    y: np.ndarray
    truncation: TruncationRanges
    order: int
    t_f: float

    @property
    def n_coefficients(self) -> int:
        return self.M.shape[1]


def _bad_good_weights(sf: SpectralFrame):
    """Exponential channel weights and Lambda-coupling signs for the
    bad (out-of-gain) and good (into-gain) parts of the generator."""
    gain = classify_gain_mode(sf)
    if gain is GainMode.DEGENERATE:
        raise DegenerateInputError(
            "gain classification is degenerate; the bad channel is undefined"
        )
    plus = gain is GainMode.PLUS_IS_GAIN
    wb = np.exp(-2j * sf.Lam) if plus else np.exp(2j * sf.Lam)
    wg = np.exp(2j * sf.Lam) if plus else np.exp(-2j * sf.Lam)
    sb = -2j if plus else 2j
    return wb, wg, sb, -sb, plus


def v_bad_interaction(sf: SpectralFrame, orientation: int, t: float):
    """Pauli triple (z, x, y) of the spurious interaction-frame generator.

    The bad part is the component of the non-adiabatic coupling that
    transfers amplitude out of the gain mode: for a plus-gain loop it is
    -theta_dot e^{-2 i Lambda} times the lowering matrix, for a minus-gain
    loop +theta_dot e^{+2 i Lambda} times the raising matrix.
    """
    if orientation != sf.loop.s:
        raise ConsistencyError(
            "orientation does not match the loop this frame was built for"
        )
    _, _, _, _, plus = _bad_good_weights(sf)
    td = sf.theta_dot_at(t)
    Lam = sf.Lam_at(t)
    if plus:
        c = -td * np.exp(-2j * Lam)   # coefficient of sigma_-
        return 0.0 + 0j, c / 2.0, -1j * c / 2.0
    c = td * np.exp(2j * Lam)          # coefficient of sigma_+
    return 0.0 + 0j, c / 2.0, 1j * c / 2.0


def w_interaction(fc: FourierControl, loop: LoopSpec, sf: SpectralFrame,
                  t: float):
    """Pauli triple (z, x, y) of the control operator in the interaction
    picture of the diagonal flow.

    The fields add to the path, so the control enters the lab generator
    as -Delta_c sigma_z + g_c sigma_x; conjugating with the mixing-angle
    rotation and the diagonal flow gives
    z: (a Delta_c + g g_c)/lambda,
    x: +cos(2 Lambda) (g Delta_c - a g_c)/lambda,
    y: -sin(2 Lambda) (g Delta_c - a g_c)/lambda, with a = Delta + i Gamma/2.
    """
    if sf.loop is not loop:
        raise ConsistencyError("spectral frame was built for a different loop")
    dc, gc = fc.fields_at(t)
    delta, g = eval_path(loop, t)
    a = delta + 0.5j * sf.sys.Gamma
    lam = sf.lam_at(t)
    Lam = sf.Lam_at(t)
    wz = (a * dc + g * gc) / lam
    x = (g * dc - a * gc) / lam
    return complex(wz), complex(np.cos(2 * Lam) * x), complex(-np.sin(2 * Lam) * x)


def _basis_fields(tr: TruncationRanges, ts: np.ndarray, t_f: float):
    """Yield (Delta_c(t), g_c(t)) arrays for each unit coefficient, in the
    column order c_delta[k..], d_delta[l..], c_g[m..], d_g[n..]."""
    w = 2.0 * math.pi / t_f
    zero = np.zeros_like(ts)
    for k in tr.k_indices:
        yield (1.0 - np.cos(w * k * ts)), zero
    for l in tr.l_indices:
        yield np.sin(w * l * ts), zero
    for m in tr.m_indices:
        yield zero, (1.0 - np.cos(w * m * ts))
    for n in tr.n_indices:
        yield zero, np.sin(w * n * ts)


def _coefficients_to_control(x: np.ndarray, tr: TruncationRanges,
                             order: int, t_f: float) -> FourierControl:
    i = 0
    c_delta, d_delta, c_g, d_g = {}, {}, {}, {}
    for k in tr.k_indices:
        c_delta[k] = float(x[i]); i += 1
    for l in tr.l_indices:
        d_delta[l] = float(x[i]); i += 1
    for m in tr.m_indices:
        c_g[m] = float(x[i]); i += 1
    for n in tr.n_indices:
        d_g[n] = float(x[i]); i += 1
    return FourierControl(order=order, t_f=t_f, c_delta=c_delta,
                          d_delta=d_delta, c_g=c_g, d_g=d_g, truncation=tr)


def _merge_controls(a: FourierControl, b: FourierControl) -> FourierControl:
    def merged(da, db):
        out = dict(da)
        for key, val in db.items():
            out[key] = out.get(key, 0.0) + val
        return out

    return FourierControl(order=a.order, t_f=a.t_f,
                          c_delta=merged(a.c_delta, b.c_delta),
                          d_delta=merged(a.d_delta, b.d_delta),
                          c_g=merged(a.c_g, b.c_g),
                          d_g=merged(a.d_g, b.d_g),
                          truncation=a.truncation)


@dataclass(frozen=True, eq=False)
class _OrientationData:
    """Per-orientation frame and channel functionals of the current loop."""

    sf: SpectralFrame
    bad: complex
    good: complex
    Lam_f: complex
    fz2_f: complex
    table: object = None


def _orientation_data(loop: LoopSpec, sys: SystemParams, n_grid: int,
                      jump_tol: float, with_fz2: bool) -> _OrientationData:
    sf = build_spectral_frame(loop, sys, n_grid=n_grid, jump_tol=jump_tol)
    wb, wg, _, _, _ = _bad_good_weights(sf)
    bad_fn = CubicGridFunction(sf.grid, sf.theta_dot * wb)
    good_fn = CubicGridFunction(sf.grid, sf.theta_dot * wg)
    bad = complex(bad_fn.integrate_prefix()[-1])
    good = complex(good_fn.integrate_prefix()[-1])
    fz2 = 0j
    table = None
    if with_fz2:
        table = tabulate_magnus(sf)
        fz2 = complex(table.f2_z[-1])
    return _OrientationData(sf=sf, bad=bad, good=good,
                            Lam_f=complex(sf.Lam[-1]), fz2_f=fz2, table=table)


def _columns_for(data: _OrientationData, tr: TruncationRanges,
                 with_fz2: bool) -> np.ndarray:
    """Six real rows of M for one orientation: responses of the endpoint
    target (dLam plus, from order two on, the f_z^(2) shift), the bad
    integral and the good integral to each unit coefficient."""
    sf = data.sf
    ts = sf.grid
    d, g = eval_path(sf.loop, ts)
    a = np.asarray(d) + 0.5j * sf.sys.Gamma
    wb, wg, s_b, s_g, _ = _bad_good_weights(sf)
    ep = np.exp(2j * sf.Lam)
    em = np.exp(-2j * sf.Lam)
    cols = np.empty((6, tr.n_coefficients))
    for col, (dc, gc) in enumerate(_basis_fields(tr, ts, sf.t_f)):
        dlam = (a * dc + np.asarray(g) * gc) / sf.lam
        dLam = CubicGridFunction(ts, dlam).integrate_prefix()
        x_field = (np.asarray(g) * dc - a * gc) / sf.lam
        dtheta = x_field / (2.0 * sf.lam)
        dtheta_dot = grid_first_derivative(ts, dtheta)
        dbad_int = CubicGridFunction(
            ts, (dtheta_dot + s_b * sf.theta_dot * dLam) * wb).integrate_prefix()[-1]
        dgood_int = CubicGridFunction(
            ts, (dtheta_dot + s_g * sf.theta_dot * dLam) * wg).integrate_prefix()[-1]
        qz_col = dLam[-1]
        if with_fz2:
            du = (dtheta_dot + 2j * sf.theta_dot * dLam) * ep
            dv = (dtheta_dot - 2j * sf.theta_dot * dLam) * em
            dFu = CubicGridFunction(ts, du).integrate_prefix()
            dFv = CubicGridFunction(ts, dv).integrate_prefix()
            u, v = data.table.u, data.table.v
            Fu, Fv = data.table.f1_plus, data.table.f1_minus
            dfz2 = CubicGridFunction(
                ts, dv * Fu + v * dFu - du * Fv - u * dFv).integrate_prefix()[-1]
            qz_col = qz_col + 0.5j * dfz2
        cols[0, col] = qz_col.real
        cols[1, col] = qz_col.imag
        cols[2, col] = dbad_int.real
        cols[3, col] = dbad_int.imag
        cols[4, col] = dgood_int.real
        cols[5, col] = dgood_int.imag
    return cols


def _current_loop(base: LoopSpec, prior: list[FourierControl]) -> LoopSpec:
    if not prior:
        return base
    return corrected_loop(base, prior)


def build_linear_system(loop: LoopSpec, sys: SystemParams,
                        sf: SpectralFrame | None,
                        truncation: TruncationRanges, order: int,
                        prior: list[FourierControl] | None = None,
                        n_grid: int = DEFAULT_N_GRID,
                        jump_tol: float = DEFAULT_JUMP_TOL) -> LinearSystem:
    """Assemble the 12 x N system of one correction order.

    ``loop`` is the base circular loop; ``prior`` holds the already
    installed correction orders. The quadratures for both the matrix and
    the right-hand side run on spectral frames rebuilt from the partially
    corrected loop (both orientations). For order one the right-hand side
    reduces to the integrated bad channel; from order two on, the
    second-order diagonal element f_z^(2) of the partially corrected
    dynamics joins the endpoint-shift target.
    """
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    prior = list(prior or [])
    if order > 1 and len(prior) < order - 1:
        raise DomainError(
            f"order {order} requires {order - 1} prior correction orders"
        )
    if sf is not None and sf.loop is not loop:
        raise ConsistencyError("sf was not built for the base loop")
    if truncation.n_coefficients < 1:
        raise DomainError("truncation admits no free coefficients")

    current = _current_loop(loop, prior)
    with_fz2 = order >= 2
    M = np.empty((12, truncation.n_coefficients))
    y = np.empty(12)
    for block, s in enumerate((+1, -1)):
        cur = _orientation_data(current.with_orientation(s), sys, n_grid,
                                jump_tol, with_fz2)
        ref = (_orientation_data(loop.with_orientation(s), sys, n_grid,
                                 jump_tol, False)
               if prior else cur)
        M[6 * block:6 * block + 6, :] = _columns_for(cur, truncation, with_fz2)
        qz = cur.Lam_f - ref.Lam_f
        if with_fz2:
            qz = qz + 0.5j * cur.fz2_f
        dgood = cur.good - ref.good
        y[6 * block:6 * block + 6] = [
            -qz.real, -qz.imag,
            -cur.bad.real, -cur.bad.imag,
            -dgood.real, -dgood.imag,
        ]
    return LinearSystem(M=M, y=y, truncation=truncation, order=order,
                        t_f=loop.t_f)


@dataclass(frozen=True)
class SolveResult:
    control: FourierControl
    residual: float
    rank: int
    singular_values: np.ndarray = field(repr=False, default=None)


def solve_coefficients(ls: LinearSystem,
                       svd_cutoff: float = DEFAULT_SVD_CUTOFF) -> SolveResult:
    """Minimum-norm least-squares solution of M x = y via the SVD.

    Singular values below svd_cutoff times the largest are treated as
    zero; if none survive the system is reported rank-zero.
    """
    u, sv, vt = np.linalg.svd(ls.M, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        raise RankError("control system has no usable singular values")
    keep = sv > svd_cutoff * sv[0]
    rank = int(keep.sum())
    if rank == 0:
        raise RankError("all singular values below the cutoff")
    inv = np.zeros_like(sv)
    inv[keep] = 1.0 / sv[keep]
    x = vt.T @ (inv * (u.T @ ls.y))
    residual = float(np.linalg.norm(ls.M @ x - ls.y))
    fc = _coefficients_to_control(x, ls.truncation, ls.order, ls.t_f)
    return SolveResult(control=fc, residual=residual, rank=rank,
                       singular_values=sv)


def _residual_norm(base: LoopSpec, sys: SystemParams,
                   truncation: TruncationRanges, order: int,
                   prior: list[FourierControl], n_grid: int,
                   jump_tol: float) -> float:
    """Norm of the right-hand side of the order-n system at the current
    loop (cheap: no matrix columns)."""
    current = _current_loop(base, prior)
    with_fz2 = order >= 2
    y = np.empty(12)
    for block, s in enumerate((+1, -1)):
        cur = _orientation_data(current.with_orientation(s), sys, n_grid,
                                jump_tol, with_fz2)
        ref = (_orientation_data(base.with_orientation(s), sys, n_grid,
                                 jump_tol, False) if prior else cur)
        qz = cur.Lam_f - ref.Lam_f
        if with_fz2:
            qz = qz + 0.5j * cur.fz2_f
        dgood = cur.good - ref.good
        y[6 * block:6 * block + 6] = [qz.real, qz.imag, cur.bad.real,
                                      cur.bad.imag, dgood.real, dgood.imag]
    return float(np.linalg.norm(y))


def _damped_solve(ls: LinearSystem, mu: float) -> np.ndarray:
    """Levenberg-regularized minimum-norm solution."""
    u, sv, vt = np.linalg.svd(ls.M, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        raise RankError("control system has no usable singular values")
    gains = sv / (sv ** 2 + mu ** 2)
    return vt.T @ (gains * (u.T @ ls.y))


def synthesize_corrected_loop(base: LoopSpec, sys: SystemParams,
                              max_order: int = 2,
                              truncation: TruncationRanges | None = None,
                              n_grid: int = DEFAULT_N_GRID,
                              jump_tol: float = DEFAULT_JUMP_TOL,
                              svd_cutoff: float = DEFAULT_SVD_CUTOFF,
                              inner_iterations: int = DEFAULT_INNER_ITERATIONS
                              ) -> LoopSpec:
    """Build and solve the correction orders, returning the corrected loop.

    The same coefficient set serves both orientations (the stacked rows
    enforce simultaneous cancellation). The channel integrals respond
    nonlinearly to the fields through Lambda, so each order is iterated:
    frames are rebuilt from the partially corrected loop, the system is
    re-solved, and a step is accepted only if the recomputed residual
    shrinks, with Levenberg damping escalated otherwise. Some target
    components can be unreachable within a small truncation; damping then
    leaves them standing instead of destroying the loop.
    """
    if base.kind is not LoopKind.CIRCULAR:
        raise DomainError("synthesis starts from a circular base loop")
    if max_order not in (1, 2):
        raise DomainError(f"max_order must be 1 or 2, got {max_order}")
    truncation = truncation or TruncationRanges()
    installed: list[FourierControl] = []
    for order in range(1, max_order + 1):
        accumulated: FourierControl | None = None
        for _ in range(max(1, inner_iterations)):
            prior = installed + ([accumulated] if accumulated else [])
            ls = build_linear_system(base, sys, None, truncation, order,
                                     prior, n_grid=n_grid, jump_tol=jump_tol)
            r0 = float(np.linalg.norm(ls.y))
            if r0 < 1e-12:
                break
            sv_max = float(np.linalg.svd(ls.M, compute_uv=False)[0])
            accepted = False
            for mu in (0.0, 1e-6, 1e-4, 1e-2, 1e-1):
                x = _damped_solve(ls, mu * sv_max)
                step = _coefficients_to_control(x, truncation, order, base.t_f)
                trial = (step if accumulated is None
                         else _merge_controls(accumulated, step))
                try:
                    r1 = _residual_norm(base, sys, truncation, order,
                                        installed + [trial], n_grid, jump_tol)
                except Exception:
                    continue
                if r1 < r0:
                    accumulated = trial
                    accepted = True
                    break
            if not accepted:
                break
        if accumulated is None:
            accumulated = _coefficients_to_control(
                np.zeros(truncation.n_coefficients), truncation, order,
                base.t_f)
        installed.append(accumulated)
    return corrected_loop(base, installed)
