"""Branch-tracked spectral quantities along a control loop.

The instantaneous eigenvalues of the two-mode dynamical matrix are
+/- lambda(t) with lambda = sqrt((Delta + i Gamma/2)^2 + g^2). A loop
enclosing the exceptional point swaps the two square-root sheets, so a
globally continuous lambda(t) requires tracking: start on the principal
branch and flip the sign whenever continuity demands it. The mixing
angle theta(t) is tied to lambda(t) through the joint diagonalization
requirement; here it is built from exp(2 i theta) = (-a + i g)/lambda
with an unwrapped complex logarithm, which enforces the pairing exactly.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RefinementError, SingularityError
from .system import LoopSpec, SystemParams, eval_path

DEFAULT_N_GRID = 4096
DEFAULT_JUMP_TOL = 0.25
EP_GUARD_REL = 1e-9
MAX_REFINE_DEPTH = 12

# 5-point Gauss-Legendre rule on [-1, 1]
_GL_X = np.array([-0.906179845938664, -0.538469310105683, 0.0,
                  0.538469310105683, 0.906179845938664])
_GL_W = np.array([0.236926885056189, 0.478628670499366, 0.568888888888889,
                  0.478628670499366, 0.236926885056189])


def lambda_principal(delta: float, g: float, Gamma: float) -> complex:
    """Principal-branch eigenvalue sqrt((Delta + i Gamma/2)^2 + g^2).

    numpy's sqrt returns the root with non-negative real part (and
    non-negative imaginary part on the branch cut), which is exactly the
    convention required here.
    """
    a = np.asarray(delta) + 0.5j * Gamma
    return complex(np.sqrt(a * a + np.asarray(g) ** 2))


def theta_principal(delta: float, g: float, Gamma: float) -> complex:
    """Principal-branch mixing angle arctan(-g/(Delta + i Gamma/2))/2.

    Diverges at the exceptional point, where the arctangent argument
    reaches its pole at +/- i; the returned value is then non-finite.
    """
    a = complex(delta, 0.5 * Gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        return complex(0.5 * np.arctan(np.complex128(-g / a)))


def _lambda_principal_array(delta, g, Gamma):
    a = delta + 0.5j * Gamma
    return np.sqrt(a * a + g * g)


def _track_lambda(lp: np.ndarray) -> np.ndarray:
    """Continuity-selected branch: flip the principal root's sign whenever
    that reduces the step |lambda_{i+1} - lambda_i|. The flip criterion is
    independent of the accumulated sign, so a cumulative product suffices.
    """
    flip = np.abs(lp[1:] - lp[:-1]) > np.abs(lp[1:] + lp[:-1])
    sgn = np.empty(len(lp))
    sgn[0] = 1.0
    np.cumprod(np.where(flip, -1.0, 1.0), out=sgn[1:])
    return sgn * lp


def _theta_tracked(a: np.ndarray, g: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Mixing angle paired with the tracked lambda.

    exp(2 i theta) = (-a + i g)/lambda holds exactly for the pairing that
    diagonalizes the dynamical matrix to diag(+lambda, -lambda); the
    imaginary part of the logarithm is unwrapped along the grid.
    """
    w = (-a + 1j * g) / lam
    return -0.5j * (np.log(np.abs(w)) + 1j * np.unwrap(np.angle(w)))


def _fornberg_first_derivative(ts: np.ndarray, fs: np.ndarray) -> np.ndarray:
    """First derivative on an arbitrary grid, degree-4 Lagrange stencils."""
    n = len(ts)
    out = np.empty(n, dtype=fs.dtype)
    for i in range(n):
        j0 = min(max(i - 2, 0), n - 5)
        x = ts[j0:j0 + 5]
        f = fs[j0:j0 + 5]
        x0 = ts[i]
        d = 0.0
        for k in range(5):
            # derivative of the k-th Lagrange basis at x0
            num = 0.0
            for m in range(5):
                if m == k:
                    continue
                p = 1.0
                for r in range(5):
                    if r == k or r == m:
                        continue
                    p *= (x0 - x[r])
                num += p
            den = 1.0
            for m in range(5):
                if m != k:
                    den *= (x[k] - x[m])
            d += f[k] * num / den
        out[i] = d
    return out


def _uniform_first_derivative(ts: np.ndarray, fs: np.ndarray) -> np.ndarray:
    """4th-order stencils on a uniform grid, one-sided at the edges."""
    h = ts[1] - ts[0]
    n = len(ts)
    out = np.empty(n, dtype=fs.dtype)
    out[2:-2] = (fs[:-4] - 8 * fs[1:-3] + 8 * fs[3:-1] - fs[4:]) / (12 * h)
    out[0] = (-25 * fs[0] + 48 * fs[1] - 36 * fs[2] + 16 * fs[3] - 3 * fs[4]) / (12 * h)
    out[1] = (-3 * fs[0] - 10 * fs[1] + 18 * fs[2] - 6 * fs[3] + fs[4]) / (12 * h)
    out[-2] = (3 * fs[-1] + 10 * fs[-2] - 18 * fs[-3] + 6 * fs[-4] - fs[-5]) / (12 * h)
    out[-1] = (25 * fs[-1] - 48 * fs[-2] + 36 * fs[-3] - 16 * fs[-4] + 3 * fs[-5]) / (12 * h)
    return out


def _is_uniform(ts: np.ndarray) -> bool:
    h = np.diff(ts)
    return float(h.max() - h.min()) <= 1e-9 * float(h.mean())


def grid_first_derivative(ts: np.ndarray, fs: np.ndarray) -> np.ndarray:
    """4th-order first derivative of samples on a grid (uniform fast path)."""
    if _is_uniform(ts):
        return _uniform_first_derivative(ts, fs)
    return _fornberg_first_derivative(ts, fs)


class CubicGridFunction:
    """Piecewise-cubic view of samples on a (possibly non-uniform) grid.

    The interpolant on panel [t_j, t_{j+1}] is the Lagrange cubic through
    the four nodes j-1..j+2 (clamped at the ends). Used both to evaluate
    branch-tracked samples between nodes and to integrate them with
    per-panel Gauss-Legendre quadrature.
    """

    def __init__(self, ts: np.ndarray, fs: np.ndarray):
        self.ts = np.asarray(ts, dtype=float)
        self.fs = np.asarray(fs)
        self._tlist = self.ts.tolist()
        self._n = len(self.ts)
        if self._n < 4:
            raise DomainError("cubic grid function needs at least 4 nodes")

    def _stencil(self, j: int) -> int:
        return min(max(j - 1, 0), self._n - 4)

    def at(self, t: float):
        """Scalar evaluation (fast path for integrator callbacks)."""
        j = bisect.bisect_right(self._tlist, t) - 1
        j = min(max(j, 0), self._n - 2)
        j0 = self._stencil(j)
        x = self._tlist
        f = self.fs
        r = 0.0
        for k in range(4):
            xk = x[j0 + k]
            p = 1.0
            for m in range(4):
                if m == k:
                    continue
                xm = x[j0 + m]
                p *= (t - xm) / (xk - xm)
            r = r + f[j0 + k] * p
        return r

    def at_array(self, t):
        tt = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.ts, tt, side="right") - 1, 0, self._n - 2)
        j0 = np.clip(idx - 1, 0, self._n - 4)
        out = np.zeros(tt.shape, dtype=self.fs.dtype)
        xs = np.stack([self.ts[j0 + k] for k in range(4)])
        vs = np.stack([self.fs[j0 + k] for k in range(4)])
        for k in range(4):
            p = np.ones_like(tt)
            for m in range(4):
                if m == k:
                    continue
                p = p * (tt - xs[m]) / (xs[k] - xs[m])
            out = out + vs[k] * p
        return out

    def panel_integrals(self) -> np.ndarray:
        """Gauss-Legendre integral of the interpolant over each panel."""
        t0 = self.ts[:-1]
        t1 = self.ts[1:]
        half = 0.5 * (t1 - t0)
        mid = 0.5 * (t1 + t0)
        acc = np.zeros(self._n - 1, dtype=self.fs.dtype)
        for x, w in zip(_GL_X, _GL_W):
            acc = acc + w * self.at_array(mid + half * x)
        return acc * half

    def integrate_prefix(self) -> np.ndarray:
        """Cumulative integral at the grid nodes, starting from zero."""
        out = np.zeros(self._n, dtype=self.fs.dtype)
        np.cumsum(self.panel_integrals(), out=out[1:])
        return out

    def integrate_partial(self, t0: float, t1: float):
        """Gauss-Legendre integral of the interpolant over [t0, t1]."""
        half = 0.5 * (t1 - t0)
        mid = 0.5 * (t1 + t0)
        acc = 0.0
        for x, w in zip(_GL_X, _GL_W):
            acc = acc + w * self.at(mid + half * x)
        return acc * half


@dataclass(frozen=True, eq=False)
class SpectralFrame:
    """Branch-continuous lambda, theta, theta-dot and cumulative Lambda."""

    loop: LoopSpec
    sys: SystemParams
    grid: np.ndarray
    lam: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    Lam: np.ndarray
    _lam_fn: CubicGridFunction = field(repr=False)
    _theta_fn: CubicGridFunction = field(repr=False)
    _theta_dot_fn: CubicGridFunction = field(repr=False)

    @property
    def t_f(self) -> float:
        return self.loop.t_f

    @property
    def Gamma(self) -> float:
        return self.sys.Gamma

    def lam_at(self, t: float) -> complex:
        return self._lam_fn.at(t)

    def theta_at(self, t: float) -> complex:
        return self._theta_fn.at(t)

    def theta_dot_at(self, t: float) -> complex:
        return self._theta_dot_fn.at(t)

    def Lam_at(self, t: float) -> complex:
        """Cumulative eigenvalue integral, node value plus a partial-panel
        Gauss-Legendre re-quadrature of the interpolated lambda."""
        ts = self._lam_fn._tlist
        j = bisect.bisect_right(ts, t) - 1
        j = min(max(j, 0), len(ts) - 2)
        base = self.Lam[j]
        if t == ts[j]:
            return complex(base)
        return complex(base + self._lam_fn.integrate_partial(ts[j], t))

    def node_index(self, t: float) -> int:
        """Index of the grid node equal to t (raises if t is not a node)."""
        idx = int(np.searchsorted(self.grid, t))
        for j in (idx - 1, idx, idx + 1):
            if 0 <= j < len(self.grid) and abs(self.grid[j] - t) <= 1e-9 * max(self.t_f, 1.0):
                return j
        raise DomainError(f"t={t} is not a grid node of this spectral frame")


def _trial_arrays(loop: LoopSpec, sys: SystemParams, ts: np.ndarray):
    delta, g = eval_path(loop, ts)
    a = np.asarray(delta) + 0.5j * sys.Gamma
    lp = _lambda_principal_array(np.asarray(delta), np.asarray(g), sys.Gamma)
    lam = _track_lambda(lp)
    return a, np.asarray(g), lam


def build_spectral_frame(loop: LoopSpec, sys: SystemParams,
                         n_grid: int = DEFAULT_N_GRID,
                         jump_tol: float = DEFAULT_JUMP_TOL) -> SpectralFrame:
    """Track lambda and theta along the loop and accumulate Lambda.

    Starts from the principal square root at t = 0, selects the branch by
    nearest continuation at every step, and bisects panels wherever the
    step |lambda_{i+1} - lambda_i| exceeds jump_tol * max(|lambda_i|,
    Gamma), up to a maximum refinement depth.
    """
    if n_grid < 64:
        raise DomainError(f"n_grid must be at least 64, got {n_grid}")
    ts = np.linspace(0.0, loop.t_f, n_grid + 1)
    for depth in range(MAX_REFINE_DEPTH + 1):
        a, g, lam = _trial_arrays(loop, sys, ts)
        jumps = np.abs(np.diff(lam))
        scale = jump_tol * np.maximum(np.abs(lam[:-1]), sys.Gamma)
        bad = jumps > scale
        if not bad.any():
            break
        if depth == MAX_REFINE_DEPTH:
            raise RefinementError(
                f"branch tracking unresolved after {MAX_REFINE_DEPTH} "
                f"bisection passes ({int(bad.sum())} offending panels)"
            )
        mids = 0.5 * (ts[:-1][bad] + ts[1:][bad])
        ts = np.sort(np.concatenate([ts, mids]))

    amin = float(np.abs(lam).min())
    if amin < EP_GUARD_REL * sys.Gamma:
        raise SingularityError(
            f"loop passes within {amin:.3e} of the exceptional point "
            f"(guard is {EP_GUARD_REL:.0e} * Gamma)"
        )

    theta = _theta_tracked(a, g, lam)
    if _is_uniform(ts):
        theta_dot = _uniform_first_derivative(ts, theta)
    else:
        theta_dot = _fornberg_first_derivative(ts, theta)

    lam_fn = CubicGridFunction(ts, lam)
    Lam = lam_fn.integrate_prefix()

    return SpectralFrame(
        loop=loop, sys=sys, grid=ts, lam=lam, theta=theta,
        theta_dot=theta_dot, Lam=Lam,
        _lam_fn=lam_fn,
        _theta_fn=CubicGridFunction(ts, theta),
        _theta_dot_fn=CubicGridFunction(ts, theta_dot),
    )


def diagonalization_residual(sf: SpectralFrame) -> float:
    """Max residual of S^-1 D_sym S = diag(lambda, -lambda) over the grid,
    relative to |lambda|. Verifies the branch pairing of (lambda, theta)."""
    delta, g = eval_path(sf.loop, sf.grid)
    a = np.asarray(delta) + 0.5j * sf.sys.Gamma
    g = np.asarray(g)
    c2 = np.cos(2 * sf.theta)
    s2 = np.sin(2 * sf.theta)
    diag = -a * c2 + g * s2
    off = a * s2 + g * c2
    return float(np.max((np.abs(diag - sf.lam) + np.abs(off)) / np.abs(sf.lam)))
