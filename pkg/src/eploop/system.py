"""System parameters, control-loop geometry, and Fourier control fields.

Conventions: the two-mode system is parametrized by the detuning Delta(t)
and the coupling g(t); the dissipation enters only through the half
difference Gamma of the two decay rates. Everything downstream treats
Gamma as the rate unit and 1/Gamma as the time unit, but the types here
store plain physical values so that rescaling checks are possible.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class SystemParams:
    """Decay rates of the two modes; mode 1 is the lossier one."""

    gamma1: float
    gamma2: float

    def __post_init__(self):
        if not (self.gamma1 > self.gamma2):
            raise DomainError(
                "gamma1 must exceed gamma2 (mode 1 is the lossy one); got "
                f"gamma1={self.gamma1}, gamma2={self.gamma2}"
            )

    @property
    def Gamma(self) -> float:
        """Half difference of the decay rates, (gamma1 - gamma2)/2 > 0."""
        return 0.5 * (self.gamma1 - self.gamma2)

    @classmethod
    def from_gamma(cls, Gamma: float) -> "SystemParams":
        """Convenience constructor fixing gamma2 = 0, gamma1 = 2 Gamma."""
        if Gamma <= 0:
            raise DomainError(f"Gamma must be positive, got {Gamma}")
        return cls(gamma1=2.0 * Gamma, gamma2=0.0)


class LoopKind(enum.Enum):
    CIRCULAR = "circular"
    FOURIER_CORRECTED = "fourier-corrected"


@dataclass(frozen=True)
class TruncationRanges:
    """Index ranges of the truncated Fourier series for the control fields.

    ``k`` indexes the (1 - cos) family of the detuning control, ``l`` its
    sine family, ``m`` the (1 - cos) family of the coupling control and
    ``n`` its sine family. Ranges are inclusive. Index 0 denotes the
    identically-zero basis function and contributes no free coefficient.
    """

    k: tuple[int, int] = (0, 0)
    l: tuple[int, int] = (1, 6)
    m: tuple[int, int] = (1, 6)
    n: tuple[int, int] = (0, 0)

    @staticmethod
    def _effective(rng: tuple[int, int]) -> tuple[int, ...]:
        lo, hi = rng
        return tuple(i for i in range(lo, hi + 1) if i >= 1)

    @property
    def k_indices(self) -> tuple[int, ...]:
        return self._effective(self.k)

    @property
    def l_indices(self) -> tuple[int, ...]:
        return self._effective(self.l)

    @property
    def m_indices(self) -> tuple[int, ...]:
        return self._effective(self.m)

    @property
    def n_indices(self) -> tuple[int, ...]:
        return self._effective(self.n)

    @property
    def n_coefficients(self) -> int:
        """Total number of free Fourier coefficients."""
        return (len(self.k_indices) + len(self.l_indices)
                + len(self.m_indices) + len(self.n_indices))


@dataclass(frozen=True)
class FourierControl:
    """Fourier coefficients of one correction order.

    The detuning control is sum_k c_delta[k] (1 - cos(2 pi k t/t_f)) +
    sum_l d_delta[l] sin(2 pi l t/t_f); the coupling control uses c_g and
    d_g the same way. Both vanish at t = 0 and t = t_f by construction.
    """

    order: int
    t_f: float
    c_delta: dict[int, float] = field(default_factory=dict)
    d_delta: dict[int, float] = field(default_factory=dict)
    c_g: dict[int, float] = field(default_factory=dict)
    d_g: dict[int, float] = field(default_factory=dict)
    truncation: TruncationRanges = field(default_factory=TruncationRanges)

    def fields_at(self, t):
        """Return (Delta_c, g_c) at time(s) t."""
        w = 2.0 * math.pi / self.t_f
        tt = np.asarray(t, dtype=float)
        dc = np.zeros_like(tt)
        gc = np.zeros_like(tt)
        for k, c in self.c_delta.items():
            dc = dc + c * (1.0 - np.cos(w * k * tt))
        for l, d in self.d_delta.items():
            dc = dc + d * np.sin(w * l * tt)
        for m, c in self.c_g.items():
            gc = gc + c * (1.0 - np.cos(w * m * tt))
        for n, d in self.d_g.items():
            gc = gc + d * np.sin(w * n * tt)
        return dc, gc

    def fields_rate_at(self, t):
        """Time derivative of (Delta_c, g_c) at time(s) t."""
        w = 2.0 * math.pi / self.t_f
        tt = np.asarray(t, dtype=float)
        dc = np.zeros_like(tt)
        gc = np.zeros_like(tt)
        for k, c in self.c_delta.items():
            dc = dc + c * w * k * np.sin(w * k * tt)
        for l, d in self.d_delta.items():
            dc = dc + d * w * l * np.cos(w * l * tt)
        for m, c in self.c_g.items():
            gc = gc + c * w * m * np.sin(w * m * tt)
        for n, d in self.d_g.items():
            gc = gc + d * w * n * np.cos(w * n * tt)
        return dc, gc


@dataclass(frozen=True)
class LoopSpec:
    """A closed control path (Delta(t), g(t)) of duration t_f.

    Circular loops follow (r0 sin(2 pi s t/t_f + alpha),
    g_center + r0 cos(2 pi s t/t_f + alpha)) with g_center = Gamma/2, so
    the exceptional point at (0, Gamma/2) is the circle's center.
    Fourier-corrected loops add endpoint-vanishing control fields on top
    of a circular base. ``zero_coupling`` forces g(t) = 0 (a diagnostic
    override; the path is then trivially free of non-adiabatic coupling).
    """

    kind: LoopKind
    r0: float
    alpha: float
    s: int
    t_f: float
    g_center: float
    base: "LoopSpec | None" = None
    controls: tuple[FourierControl, ...] = ()
    zero_coupling: bool = False

    def __post_init__(self):
        if self.s not in (+1, -1):
            raise DomainError(f"orientation s must be +1 or -1, got {self.s}")
        if self.t_f <= 0:
            raise DomainError(f"t_f must be positive, got {self.t_f}")
        if self.kind is LoopKind.FOURIER_CORRECTED:
            if self.base is None:
                raise DomainError("fourier-corrected loop requires a base loop")
            for fc in self.controls:
                if abs(fc.t_f - self.t_f) > 1e-12 * self.t_f:
                    raise DomainError("control t_f does not match loop t_f")

    def with_orientation(self, s: int) -> "LoopSpec":
        """Same geometry, traversed with orientation ``s``."""
        if s == self.s:
            return self
        if self.kind is LoopKind.CIRCULAR:
            return LoopSpec(self.kind, self.r0, self.alpha, s, self.t_f,
                            self.g_center, zero_coupling=self.zero_coupling)
        return LoopSpec(self.kind, self.r0, self.alpha, s, self.t_f,
                        self.g_center, base=self.base.with_orientation(s),
                        controls=self.controls,
                        zero_coupling=self.zero_coupling)


def circular_loop(sys: SystemParams, r0: float, alpha: float, s: int,
                  t_f: float, zero_coupling: bool = False) -> LoopSpec:
    """Circular loop of radius r0 centered on the exceptional point."""
    return LoopSpec(LoopKind.CIRCULAR, r0, alpha, s, t_f,
                    g_center=0.5 * sys.Gamma, zero_coupling=zero_coupling)


def corrected_loop(base: LoopSpec, controls) -> LoopSpec:
    """Base circular loop plus additive Fourier control fields."""
    return LoopSpec(LoopKind.FOURIER_CORRECTED, base.r0, base.alpha, base.s,
                    base.t_f, base.g_center, base=base, controls=tuple(controls),
                    zero_coupling=base.zero_coupling)


def _check_time(loop: LoopSpec, t) -> None:
    tt = np.asarray(t, dtype=float)
    slack = 1e-9 * loop.t_f
    if np.any(tt < -slack) or np.any(tt > loop.t_f + slack):
        raise DomainError(
            f"time outside [0, t_f={loop.t_f}]: {tt.min()}..{tt.max()}"
        )


def eval_path(loop: LoopSpec, t):
    """Evaluate (Delta(t), g(t)) along the loop.

    Accepts a scalar or array time; raises DomainError outside [0, t_f].
    """
    _check_time(loop, t)
    tt = np.asarray(t, dtype=float)
    phi = 2.0 * math.pi * loop.s * tt / loop.t_f + loop.alpha
    delta = loop.r0 * np.sin(phi)
    g = loop.g_center + loop.r0 * np.cos(phi)
    if loop.kind is LoopKind.FOURIER_CORRECTED:
        for fc in loop.controls:
            dc, gc = fc.fields_at(tt)
            delta = delta + dc
            g = g + gc
    if loop.zero_coupling:
        g = 0.0 * g
    if np.ndim(t) == 0:
        return float(delta), float(g)
    return delta, g


def eval_path_rate(loop: LoopSpec, t):
    """Time derivative (dDelta/dt, dg/dt) along the loop (closed form)."""
    _check_time(loop, t)
    tt = np.asarray(t, dtype=float)
    w = 2.0 * math.pi * loop.s / loop.t_f
    phi = w * tt + loop.alpha
    ddot = loop.r0 * w * np.cos(phi)
    gdot = -loop.r0 * w * np.sin(phi)
    if loop.kind is LoopKind.FOURIER_CORRECTED:
        for fc in loop.controls:
            dcd, gcd = fc.fields_rate_at(tt)
            ddot = ddot + dcd
            gdot = gdot + gcd
    if loop.zero_coupling:
        gdot = 0.0 * gdot
    if np.ndim(t) == 0:
        return float(ddot), float(gdot)
    return ddot, gdot
