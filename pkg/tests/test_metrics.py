import math

import numpy as np
import pytest

from eploop.dynamics import FrameKind
from eploop.errors import DegenerateInputError
from eploop.flows import Flow, Trajectory, identity_flow, integrate_flow
from eploop.magnus import GainMode, classify_gain_mode
from eploop.metrics import (INITIAL_STATE_SET, average_error,
                            column_probabilities, normalized_probabilities,
                            time_averaged_error)
from eploop.spectral import build_spectral_frame
from eploop.system import circular_loop


class TestInitialStateSet:
    def test_six_unit_vectors(self):
        assert len(INITIAL_STATE_SET) == 6
        for c in INITIAL_STATE_SET:
            assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-15)

    def test_plus_minus_pairs_orthogonal(self):
        for i in (0, 2, 4):
            inner = np.vdot(INITIAL_STATE_SET[i], INITIAL_STATE_SET[i + 1])
            assert abs(inner) < 1e-15


class TestProbabilityTables:
    def test_identity_flow_gives_identity_table(self):
        p = column_probabilities(identity_flow())
        assert np.abs(p.p - np.eye(2)).max() < 1e-15

    def test_columns_sum_to_one(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        p = column_probabilities(traj.final)
        assert p.column_sums() == pytest.approx([1.0, 1.0], abs=1e-12)
        assert np.all(p.p >= 0) and np.all(p.p <= 1)

    def test_zero_column_rejected(self):
        m = np.array([[1.0, 0.0], [0.5, 0.0]], dtype=complex)
        f = Flow(matrix=m, log_scale=0.0, t=1.0)
        with pytest.raises(DegenerateInputError):
            column_probabilities(f)

    def test_gain_relabeling(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        cls = classify_gain_mode(fig3_frame)
        raw = column_probabilities(traj.final)
        gl = normalized_probabilities(traj.final, cls)
        if cls is GainMode.PLUS_IS_GAIN:
            assert np.allclose(gl.p, raw.p)
        else:
            assert np.allclose(gl.p, raw.p[::-1, ::-1])
        # the gain row dominates both columns on this loop
        assert gl.p[0, 0] > 0.9 and gl.p[0, 1] > 0.9

    def test_orientation_swap_mirrors_table(self, sysp, fig2_loop, fig2_frame,
                                            fig2_loop_ccw, fig2_frame_ccw):
        p_cw = column_probabilities(
            integrate_flow(fig2_loop, sysp, fig2_frame,
                           FrameKind.ADIABATIC).final)
        p_ccw = column_probabilities(
            integrate_flow(fig2_loop_ccw, sysp, fig2_frame_ccw,
                           FrameKind.ADIABATIC).final)
        assert np.abs(p_cw.p - p_ccw.p[::-1, ::-1]).max() < 1e-6


class TestTimeAveragedError:
    def test_self_comparison_vanishes(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        assert time_averaged_error(traj, traj, fig3_frame) < 1e-12

    def test_invariant_under_global_scalar(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        scaled = Trajectory(frame=traj.frame, flows=tuple(
            Flow(matrix=f.matrix * np.exp(0.31j), log_scale=f.log_scale + 1.7,
                 t=f.t, log_det=f.log_det) for f in traj.flows))
        d = time_averaged_error(traj, scaled, fig3_frame)
        assert d < 1e-12

    def test_order_hierarchy(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        d1 = time_averaged_error(traj, 1, fig3_frame)
        d2 = time_averaged_error(traj, 2, fig3_frame)
        d4 = time_averaged_error(traj, 4, fig3_frame)
        assert d4 < d2 < d1

    def test_duration_improves_order_four(self, sysp):
        vals = {}
        for t_f in (10.0, 50.0):
            loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=t_f)
            sf = build_spectral_frame(loop, sysp)
            traj = integrate_flow(loop, sysp, sf, FrameKind.ADIABATIC)
            vals[t_f] = time_averaged_error(traj, 4, sf)
        assert vals[50.0] <= 0.1 * vals[10.0]


class TestAverageError:
    def test_within_unit_interval(self, fig3_loop, sysp):
        e = average_error(fig3_loop, sysp, n_grid=1024)
        assert 0.0 <= e <= 1.0

    def test_longer_loop_has_smaller_error(self, sysp):
        e10 = average_error(
            circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=10.0), sysp,
            n_grid=1024)
        e50 = average_error(
            circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=50.0), sysp,
            n_grid=2048)
        assert e50 < e10

    def test_alpha_pi_is_worst_on_coarse_sweep(self, sysp):
        errs = {}
        for k in range(8):
            alpha = 2 * math.pi * k / 8
            loop = circular_loop(sysp, r0=0.5, alpha=alpha, s=+1, t_f=50.0)
            errs[k] = average_error(loop, sysp, n_grid=1024)
        assert max(errs, key=errs.get) == 4  # alpha = pi
