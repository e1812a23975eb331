import cmath
import math

import numpy as np
import pytest

from eploop.errors import DomainError, SingularityError
from eploop.spectral import (build_spectral_frame, diagonalization_residual,
                             lambda_principal, theta_principal)
from eploop.system import (FourierControl, circular_loop, corrected_loop,
                           eval_path, eval_path_rate, SystemParams)


class TestLambdaPrincipal:
    def test_vanishes_at_exceptional_point(self):
        assert lambda_principal(0.0, 0.5, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_pure_loss_point(self):
        # (0, 0): sqrt(-Gamma^2/4) on the principal branch
        assert lambda_principal(0.0, 0.0, 1.0) == pytest.approx(0.5j, abs=1e-15)

    def test_positive_real_part_square(self):
        assert lambda_principal(1.0, 0.0, 1.0) == pytest.approx(1.0 + 0.5j, abs=1e-14)

    def test_principal_branch_convention(self):
        lam = lambda_principal(-0.3, 0.2, 1.0)
        assert lam.real >= 0


class TestThetaPrincipal:
    def test_zero_coupling(self):
        assert theta_principal(0.7, 0.0, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_divergent_at_exceptional_point(self):
        th = theta_principal(0.0, 0.5, 1.0)
        assert not (math.isfinite(th.real) and math.isfinite(th.imag))

    def test_log_form_identity(self):
        # independent complex-arctan evaluation via the log form
        delta, g, Gamma = 0.5, 0.5, 1.0
        z = -g / complex(delta, 0.5 * Gamma)
        oracle = 0.5 * (0.5j) * cmath.log((1 - 1j * z) / (1 + 1j * z))
        assert theta_principal(delta, g, Gamma) == pytest.approx(oracle, abs=1e-14)


class TestBuildSpectralFrame:
    def test_lambda_starts_on_principal_branch(self, fig2_frame):
        d, g = eval_path(fig2_frame.loop, 0.0)
        assert fig2_frame.lam[0] == pytest.approx(
            lambda_principal(d, g, 1.0), abs=1e-14)

    def test_cumulative_integral_starts_at_zero(self, fig2_frame):
        assert fig2_frame.Lam[0] == 0.0

    def test_branch_continuity_criterion(self, fig2_frame):
        lam = fig2_frame.lam
        assert np.all(np.abs(np.diff(lam)) <= np.abs(lam[1:] + lam[:-1]))

    def test_joint_diagonalization(self, fig2_frame):
        assert diagonalization_residual(fig2_frame) < 1e-10

    def test_sheet_exchange_on_enclosing_loop(self, fig2_frame):
        assert fig2_frame.lam[-1] == pytest.approx(-fig2_frame.lam[0], abs=1e-12)

    def test_no_sheet_exchange_without_coupling(self, sysp):
        loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=10.0,
                             zero_coupling=True)
        sf = build_spectral_frame(loop, sysp, n_grid=1024)
        assert sf.lam[-1] == pytest.approx(sf.lam[0], abs=1e-12)

    def test_alpha_pi_has_real_final_integral(self, sysp):
        loop = circular_loop(sysp, r0=0.5, alpha=math.pi, s=+1, t_f=50.0)
        sf = build_spectral_frame(loop, sysp)
        assert abs(sf.Lam[-1].imag) < 1e-6 * 50.0

    def test_final_integral_against_dense_simpson_oracle(self, sysp, fig2_frame):
        # independent quadrature: composite Simpson on a 10x denser tracking
        loop = fig2_frame.loop
        n = 10 * (len(fig2_frame.grid) - 1)
        if n % 2:
            n += 1
        ts = np.linspace(0.0, loop.t_f, n + 1)
        d, g = eval_path(loop, ts)
        a = d + 0.5j
        lp = np.sqrt(a * a + g * g)
        flip = np.abs(np.diff(lp)) > np.abs(lp[1:] + lp[:-1])
        sgn = np.concatenate([[1.0], np.cumprod(np.where(flip, -1.0, 1.0))])
        lam = sgn * lp
        h = ts[1] - ts[0]
        simpson = (h / 3) * (lam[0] + lam[-1] + 4 * lam[1:-1:2].sum()
                             + 2 * lam[2:-1:2].sum())
        assert abs(fig2_frame.Lam[-1] - simpson) <= 1e-8 * abs(simpson)

    def test_cumulative_additivity(self, fig2_frame):
        # independent dense Simpson over [t1, t2], branch seeded at t1
        i, j = 1000, 3000
        t1 = float(fig2_frame.grid[i])
        t2 = float(fig2_frame.grid[j])
        n = 40000
        ts = np.linspace(t1, t2, n + 1)
        d, g = eval_path(fig2_frame.loop, ts)
        a = d + 0.5j
        lp = np.sqrt(a * a + g * g)
        flip = np.abs(np.diff(lp)) > np.abs(lp[1:] + lp[:-1])
        sgn = np.concatenate([[1.0], np.cumprod(np.where(flip, -1.0, 1.0))])
        lam = sgn * lp
        if abs(lam[0] - fig2_frame.lam[i]) > abs(lam[0] + fig2_frame.lam[i]):
            lam = -lam
        h = ts[1] - ts[0]
        part = (h / 3) * (lam[0] + lam[-1] + 4 * lam[1:-1:2].sum()
                          + 2 * lam[2:-1:2].sum())
        assert fig2_frame.Lam[j] == pytest.approx(
            fig2_frame.Lam[i] + part, abs=1e-10 * max(1.0, abs(fig2_frame.Lam[j])))

    def test_partial_panel_quadrature_consistent(self, fig2_frame):
        i = 2048
        t_mid = 0.5 * (fig2_frame.grid[i] + fig2_frame.grid[i + 1])
        left = fig2_frame.Lam_at(t_mid) - fig2_frame.Lam[i]
        right = fig2_frame.Lam[i + 1] - fig2_frame.Lam_at(t_mid)
        whole = fig2_frame.Lam[i + 1] - fig2_frame.Lam[i]
        assert left + right == pytest.approx(whole, abs=1e-13 * max(1, abs(whole)))

    def test_theta_dot_against_closed_form(self, fig2_frame):
        loop = fig2_frame.loop
        ts = fig2_frame.grid
        d, g = eval_path(loop, ts)
        dd, gd = eval_path_rate(loop, ts)
        a = d + 0.5j
        lam = fig2_frame.lam
        lamdot = (a * dd + g * gd) / lam
        oracle = (1 / 2j) * ((-dd + 1j * gd) / (-a + 1j * g) - lamdot / lam)
        scale = np.abs(oracle).max()
        assert np.abs(fig2_frame.theta_dot - oracle).max() < 1e-8 * scale

    def test_theta_is_half_arctan_up_to_quarter_turns(self, fig2_frame):
        # tan(2 theta) must equal -g/a at every node
        d, g = eval_path(fig2_frame.loop, fig2_frame.grid)
        a = d + 0.5j
        lhs = np.tan(2 * fig2_frame.theta)
        rhs = -g / a
        assert np.abs(lhs - rhs).max() < 1e-9 * np.abs(rhs).max()

    def test_grid_size_validated(self, sysp, fig2_loop):
        with pytest.raises(DomainError):
            build_spectral_frame(fig2_loop, sysp, n_grid=32)

    def test_exceptional_point_guard(self, sysp):
        # the degenerate zero-radius loop sits exactly on the EP
        loop = circular_loop(sysp, r0=0.0, alpha=0.0, s=+1, t_f=10.0)
        with pytest.raises(SingularityError):
            build_spectral_frame(loop, sysp, n_grid=1024)

    def test_refinement_keeps_jumps_bounded(self, sysp):
        # a near-EP passage at a coarse grid forces panel bisection
        base = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=10.0)
        fc = FourierControl(order=1, t_f=10.0, c_g={1: 0.2499})
        loop = corrected_loop(base, [fc])
        sf = build_spectral_frame(loop, sysp, n_grid=64, jump_tol=0.05)
        jumps = np.abs(np.diff(sf.lam))
        scale = 0.05 * np.maximum(np.abs(sf.lam[:-1]), 1.0)
        assert np.all(jumps <= scale)
        assert len(sf.grid) > 65


class TestScalingInvariance:
    def test_dimensionless_outputs_invariant_under_rescaling(self):
        c = 3.0
        s1 = SystemParams.from_gamma(1.0)
        s2 = SystemParams.from_gamma(c)
        l1 = circular_loop(s1, r0=0.5, alpha=0.7, s=+1, t_f=20.0)
        l2 = circular_loop(s2, r0=0.5 * c, alpha=0.7, s=+1, t_f=20.0 / c)
        f1 = build_spectral_frame(l1, s1, n_grid=1024)
        f2 = build_spectral_frame(l2, s2, n_grid=1024)
        assert np.abs(f1.theta - f2.theta).max() < 1e-12
        # Lambda is a rate times a time, hence dimensionless
        assert abs(f1.Lam[-1] - f2.Lam[-1]) < 1e-12 * max(1, abs(f1.Lam[-1]))
