"""Generators of the flow equation in the three frames.

All three generators A(t) (with Phi' = A Phi) are traceless 2x2 complex
matrices: the lab frame uses the raw path fields, the adiabatic frame the
branch-tracked eigenvalue and mixing-angle velocity, and the interaction
frame factors out the diagonal amplification so only the non-adiabatic
coupling remains, dressed by exp(+/- 2 i Lambda).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DomainError
from .spectral import SpectralFrame
from .system import LoopSpec, SystemParams, eval_path


class FrameKind(enum.Enum):
    LAB = "lab"
    ADIABATIC = "adiabatic"
    INTERACTION = "interaction"


@dataclass(frozen=True)
class DynamicalMatrix:
    frame: FrameKind
    t: float
    entries: np.ndarray  # 2x2 complex

    @property
    def trace(self) -> complex:
        return complex(self.entries[0, 0] + self.entries[1, 1])


def _check_frame_loop(sf: SpectralFrame | None, loop: LoopSpec) -> None:
    if sf is not None and sf.loop is not loop:
        raise ConsistencyError("spectral frame was built for a different loop")


def dynamical_matrix(frame: FrameKind, loop: LoopSpec, sys: SystemParams,
                     sf: SpectralFrame | None, t: float) -> DynamicalMatrix:
    """Generator A(t) of Phi' = A(t) Phi in the requested frame.

    The lab frame needs no spectral frame; the other two require one
    built for the same loop object.
    """
    if not (-1e-9 * loop.t_f <= t <= loop.t_f * (1 + 1e-9)):
        raise DomainError(f"t={t} outside [0, {loop.t_f}]")
    if frame is FrameKind.LAB:
        _check_frame_loop(sf, loop)
        delta, g = eval_path(loop, t)
        a = delta + 0.5j * sys.Gamma
        m = np.array([[1j * a, -1j * g], [-1j * g, -1j * a]], dtype=complex)
        return DynamicalMatrix(frame, t, m)
    if sf is None:
        raise ConsistencyError(f"{frame.value} frame requires a spectral frame")
    _check_frame_loop(sf, loop)
    if frame is FrameKind.ADIABATIC:
        lam = sf.lam_at(t)
        td = sf.theta_dot_at(t)
        m = np.array([[-1j * lam, td], [-td, 1j * lam]], dtype=complex)
        return DynamicalMatrix(frame, t, m)
    if frame is FrameKind.INTERACTION:
        td = sf.theta_dot_at(t)
        Lam = sf.Lam_at(t)
        m = np.array([[0.0, td * np.exp(2j * Lam)],
                      [-td * np.exp(-2j * Lam), 0.0]], dtype=complex)
        return DynamicalMatrix(frame, t, m)
    raise DomainError(f"unknown frame {frame!r}")
