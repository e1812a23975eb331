"""Exact propagation of the 2x2 flows with overflow-safe scaling.

The physical flow is e^{log_scale} * matrix; packed flows keep the max
entry magnitude inside [1, e], while the integrator lets it drift within
[e^-1, e^2] before renormalizing. Because the flows here have singular
values e^{+s} and e^{-s} with s up to tens, the determinant of the stored
double-precision matrix is meaningless once e^{2s} exceeds 1/eps; the
determinant is therefore tracked alongside the integration as the
accumulated (complex) log of each step map's determinant, which is well
conditioned step by step. Traceless generators make the exact value 1,
so the tracked drift measures integrator quality directly.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import FrameKind
from .errors import ConsistencyError, DomainError, IntegrationError
from .spectral import SpectralFrame
from .system import LoopKind, LoopSpec, SystemParams

DEFAULT_REL_TOL = 1e-11
DEFAULT_ABS_TOL = 1e-13

_RENORM_HI = math.e ** 2
_RENORM_LO = math.e ** -1


def _det2(m) -> complex:
    return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


@dataclass(frozen=True)
class Flow:
    """A 2x2 flow with an extracted scalar log-magnitude factor.

    ``log_det`` is the complex logarithm of the physical flow's
    determinant, carried separately because it is not recoverable from
    the stored matrix once the flow is strongly non-normal.
    """

    matrix: np.ndarray
    log_scale: float
    t: float
    log_det: complex = 0.0

    @property
    def det_deviation(self) -> float:
        """|det(physical flow) - 1| from the tracked log determinant."""
        return abs(cmath.exp(self.log_det) - 1.0)

    def physical(self) -> np.ndarray:
        """e^{log_scale} * matrix; may overflow for extreme scales."""
        return math.exp(self.log_scale) * self.matrix

    def log_abs_entries(self) -> np.ndarray:
        """log|entries| of the physical flow, safe at any scale."""
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.matrix)) + self.log_scale


def pack_flow(matrix: np.ndarray, log_scale: float, t: float,
              log_det: complex | None = None) -> Flow:
    """Normalize so the max entry magnitude lies in [1, e].

    When ``log_det`` is not supplied it is evaluated from the entries,
    which is only meaningful while the matrix is well conditioned.
    """
    m = np.asarray(matrix, dtype=complex)
    peak = float(np.abs(m).max())
    if peak == 0.0:
        raise DomainError("cannot pack an all-zero flow matrix")
    k = math.log(peak)
    m = m * math.exp(-k)
    ls = log_scale + k
    if log_det is None:
        d = _det2(m)
        log_det = cmath.log(d) + 2.0 * ls if d != 0 else complex(-math.inf)
    return Flow(matrix=m, log_scale=ls, t=t, log_det=log_det)


def identity_flow(t: float = 0.0) -> Flow:
    return Flow(matrix=np.eye(2, dtype=complex), log_scale=0.0, t=t, log_det=0.0)


def flow_multiply(f1: Flow, f2: Flow) -> Flow:
    """Compose physical flows: (e^{l1} M1)(e^{l2} M2), rescaled."""
    return pack_flow(f1.matrix @ f2.matrix, f1.log_scale + f2.log_scale,
                     f2.t, log_det=f1.log_det + f2.log_det)


@dataclass(frozen=True, eq=False)
class Trajectory:
    frame: FrameKind
    flows: tuple[Flow, ...]

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.flows])

    def __len__(self) -> int:
        return len(self.flows)

    def __getitem__(self, i) -> Flow:
        return self.flows[i]

    @property
    def final(self) -> Flow:
        return self.flows[-1]


def _scalar_path(loop: LoopSpec):
    """Fast scalar (Delta, g) evaluator used in integrator hot loops."""
    w = 2.0 * math.pi * loop.s / loop.t_f
    alpha = loop.alpha
    r0 = loop.r0
    gc0 = loop.g_center
    ctrl = []
    if loop.kind is LoopKind.FOURIER_CORRECTED:
        for fc in loop.controls:
            wf = 2.0 * math.pi / fc.t_f
            ctrl.append((wf, list(fc.c_delta.items()), list(fc.d_delta.items()),
                         list(fc.c_g.items()), list(fc.d_g.items())))
    zero_g = loop.zero_coupling

    def path(t: float):
        phi = w * t + alpha
        d = r0 * math.sin(phi)
        g = gc0 + r0 * math.cos(phi)
        for wf, cd, dd, cg, dg in ctrl:
            for k, c in cd:
                d += c * (1.0 - math.cos(wf * k * t))
            for l, c in dd:
                d += c * math.sin(wf * l * t)
            for m, c in cg:
                g += c * (1.0 - math.cos(wf * m * t))
            for n, c in dg:
                g += c * math.sin(wf * n * t)
        if zero_g:
            g = 0.0
        return d, g

    return path


def _generator_fn(frame: FrameKind, loop: LoopSpec, sys: SystemParams,
                  sf: SpectralFrame | None):
    """Scalar-time generator A(t) as four complex numbers (row major)."""
    if frame is FrameKind.LAB:
        path = _scalar_path(loop)
        half_gamma = 0.5 * sys.Gamma

        def a_lab(t: float):
            d, g = path(t)
            p = 1j * complex(d, half_gamma)
            q = -1j * g
            return p, q, q, -p

        return a_lab
    if sf is None:
        raise ConsistencyError(f"{frame.value} frame requires a spectral frame")
    if sf.loop is not loop:
        raise ConsistencyError("spectral frame was built for a different loop")
    if frame is FrameKind.ADIABATIC:
        lam_at = sf.lam_at
        td_at = sf.theta_dot_at

        def a_ad(t: float):
            p = -1j * lam_at(t)
            q = td_at(t)
            return p, q, -q, -p

        return a_ad
    if frame is FrameKind.INTERACTION:
        td_at = sf.theta_dot_at
        Lam_at = sf.Lam_at

        def a_int(t: float):
            td = td_at(t)
            e = cmath.exp(2j * Lam_at(t))
            return 0.0, td * e, -td / e, 0.0

        return a_int
    raise DomainError(f"unknown frame {frame!r}")


# Dormand-Prince 5(4) tableau (FSAL).
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = tuple(b5 - b4 for b5, b4 in zip(
    _B5, (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
          187 / 2100, 1 / 40)))


def _apply(a, vec):
    p, q, r, s = a
    return (p * vec[0] + q * vec[2], p * vec[1] + q * vec[3],
            r * vec[0] + s * vec[2], r * vec[1] + s * vec[3])


def integrate_flow(loop: LoopSpec, sys: SystemParams, sf: SpectralFrame,
                   frame: FrameKind,
                   rel_tol: float = DEFAULT_REL_TOL,
                   abs_tol: float = DEFAULT_ABS_TOL,
                   t_start: float = 0.0, t_end: float | None = None,
                   initial: Flow | None = None,
                   max_step: float | None = None) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration of Phi' = A(t) Phi.

    Produces a Flow at every spectral-frame grid node inside
    [t_start, t_end]. Each accepted step also advances a companion copy
    of the step map applied to the identity, whose (well-conditioned)
    determinant accumulates into the flow's tracked log determinant.
    """
    if rel_tol < 1e-13:
        raise DomainError("rel_tol below 1e-13 is not resolvable in doubles")
    afn = _generator_fn(frame, loop, sys, sf)
    t_end = loop.t_f if t_end is None else t_end
    nodes = [t for t in sf.grid.tolist() if t_start < t < t_end]
    nodes.append(t_end)

    if initial is None:
        y = [1 + 0j, 0j, 0j, 1 + 0j]
        ls = 0.0
        logdet = 0j
    else:
        y = [complex(initial.matrix[0, 0]), complex(initial.matrix[0, 1]),
             complex(initial.matrix[1, 0]), complex(initial.matrix[1, 1])]
        ls = initial.log_scale
        logdet = complex(initial.log_det)

    t = t_start
    out = [Flow(np.array([[y[0], y[1]], [y[2], y[3]]]), ls, t, logdet)
           if initial is not None else identity_flow(t)]

    k = [None] * 7
    k[0] = _apply(afn(t), y)
    h = min((t_end - t_start) / 100.0, nodes[0] - t_start if nodes[0] > t_start
            else (t_end - t_start) / 100.0)
    if h <= 0:
        h = (t_end - t_start) / 100.0
    node_idx = 0
    min_h = 1e-14 * max(loop.t_f, 1.0)
    ident = (1 + 0j, 0j, 0j, 1 + 0j)

    while t < t_end - 1e-15 * t_end:
        if max_step is not None and h > max_step:
            h = max_step
        target = nodes[node_idx] if node_idx < len(nodes) else t_end
        if t + h >= target - 1e-15 * max(target, 1.0):
            h = target - t
            hit_node = True
        else:
            hit_node = False
        if h < min_h:
            raise IntegrationError(f"step size underflow at t={t}", t=t)

        # stages, advancing the flow and the identity companion together
        kI = [None] * 7
        kI[0] = _apply(afn(t), ident)
        for i in range(1, 7):
            acc = [0j, 0j, 0j, 0j]
            accI = [0j, 0j, 0j, 0j]
            for j, aij in enumerate(_A[i]):
                if aij == 0.0:
                    continue
                kj = k[j]
                kIj = kI[j]
                for c in range(4):
                    acc[c] += aij * kj[c]
                    accI[c] += aij * kIj[c]
            yi = tuple(y[c] + h * acc[c] for c in range(4))
            yIi = tuple(ident[c] + h * accI[c] for c in range(4))
            a_i = afn(t + _C[i] * h)
            k[i] = _apply(a_i, yi)
            kI[i] = _apply(a_i, yIi)

        ynew = list(y)
        mstep = list(ident)
        err = [0j, 0j, 0j, 0j]
        for j in range(7):
            bj = _B5[j]
            ej = _E[j]
            kj = k[j]
            kIj = kI[j]
            for c in range(4):
                if bj != 0.0:
                    ynew[c] += h * bj * kj[c]
                    mstep[c] += h * bj * kIj[c]
                if ej != 0.0:
                    err[c] += ej * kj[c]

        ymax = max(abs(ynew[0]), abs(ynew[1]), abs(ynew[2]), abs(ynew[3]))
        emax = h * max(abs(err[0]), abs(err[1]), abs(err[2]), abs(err[3]))
        tol = abs_tol + rel_tol * ymax
        ratio = emax / tol if tol > 0 else math.inf

        if ratio <= 1.0:
            y = ynew
            t = t + h
            logdet += cmath.log(mstep[0] * mstep[3] - mstep[1] * mstep[2])
            k[0] = k[6]  # FSAL
            if ymax > _RENORM_HI or ymax < _RENORM_LO:
                kk = math.log(ymax)
                f = math.exp(-kk)
                y = [y[0] * f, y[1] * f, y[2] * f, y[3] * f]
                k[0] = tuple(v * f for v in k[0])
                ls += kk
            if hit_node:
                out.append(pack_flow(np.array([[y[0], y[1]], [y[2], y[3]]]),
                                     ls, t, log_det=logdet))
                node_idx += 1
            h = h * min(5.0, max(0.2, 0.9 * ratio ** -0.2 if ratio > 0 else 5.0))
        else:
            h = h * max(0.2, 0.9 * ratio ** -0.2)

    return Trajectory(frame=frame, flows=tuple(out))


def phi0(sf: SpectralFrame, t: float) -> Flow:
    """Diagonal amplification flow exp(-i Lambda(t) sigma_z), log-scaled.

    The determinant is exactly 1, entered as log_det = 0."""
    Lam = sf.Lam_at(t)
    im = Lam.imag
    re = Lam.real
    ls = abs(im)
    m = np.array([
        [cmath.exp(complex(im - ls, -re)), 0.0],
        [0.0, cmath.exp(complex(-im - ls, re))],
    ])
    return Flow(matrix=m, log_scale=ls, t=t, log_det=0.0)


def phi0_inverse(sf: SpectralFrame, t: float) -> Flow:
    """Inverse of phi0 at time t, same log-scale discipline."""
    Lam = sf.Lam_at(t)
    im = Lam.imag
    re = Lam.real
    ls = abs(im)
    m = np.array([
        [cmath.exp(complex(-im - ls, re)), 0.0],
        [0.0, cmath.exp(complex(im - ls, -re))],
    ])
    return Flow(matrix=m, log_scale=ls, t=t, log_det=0.0)


def interaction_flow(phi: Trajectory, sf: SpectralFrame) -> Trajectory:
    """Factor out the diagonal amplification: Phi_I(t) = phi0(t)^-1 Phi(t)."""
    if phi.frame is not FrameKind.ADIABATIC:
        raise ConsistencyError("interaction_flow expects an adiabatic trajectory")
    flows = tuple(flow_multiply(phi0_inverse(sf, f.t), f) for f in phi.flows)
    return Trajectory(frame=FrameKind.INTERACTION, flows=flows)


def _change_matrix(theta: complex) -> np.ndarray:
    """S = exp(-i theta sigma_y) for complex theta."""
    c = cmath.cos(theta)
    s = cmath.sin(theta)
    return np.array([[c, -s], [s, c]])


def change_frame(phi: Trajectory, sf: SpectralFrame,
                 to: FrameKind = FrameKind.LAB) -> Trajectory:
    """Map between the lab and adiabatic frames with S(t) from the
    branch-tracked mixing angle: Phi_sym(t) = S(t) Phi(t) S(0)^-1."""
    th0 = sf.theta_at(0.0)
    if to is FrameKind.LAB:
        if phi.frame is not FrameKind.ADIABATIC:
            raise ConsistencyError("expected an adiabatic trajectory")
        s0inv = np.linalg.inv(_change_matrix(th0))
        ld0 = -cmath.log(_det2(_change_matrix(th0)))
        flows = []
        for f in phi.flows:
            st = _change_matrix(sf.theta_at(f.t))
            ld = cmath.log(_det2(st)) + f.log_det + ld0
            flows.append(pack_flow(st @ f.matrix @ s0inv, f.log_scale, f.t,
                                   log_det=ld))
        return Trajectory(frame=FrameKind.LAB, flows=tuple(flows))
    if to is FrameKind.ADIABATIC:
        if phi.frame is not FrameKind.LAB:
            raise ConsistencyError("expected a lab trajectory")
        s0 = _change_matrix(th0)
        ld0 = cmath.log(_det2(s0))
        flows = []
        for f in phi.flows:
            sti = np.linalg.inv(_change_matrix(sf.theta_at(f.t)))
            ld = -cmath.log(_det2(_change_matrix(sf.theta_at(f.t)))) + f.log_det + ld0
            flows.append(pack_flow(sti @ f.matrix @ s0, f.log_scale, f.t,
                                   log_det=ld))
        return Trajectory(frame=FrameKind.ADIABATIC, flows=tuple(flows))
    raise DomainError("change_frame maps between lab and adiabatic only")
