import math

import numpy as np
import pytest

from eploop.dynamics import FrameKind, dynamical_matrix
from eploop.errors import ConsistencyError, DomainError
from eploop.flows import (change_frame, flow_multiply, identity_flow,
                          integrate_flow, interaction_flow, pack_flow, phi0,
                          phi0_inverse)
from eploop.spectral import build_spectral_frame
from eploop.system import circular_loop


def scaled_deviation(f1, f2):
    """Max entry deviation after aligning the two log scales."""
    ls = max(f1.log_scale, f2.log_scale)
    m1 = f1.matrix * math.exp(f1.log_scale - ls)
    m2 = f2.matrix * math.exp(f2.log_scale - ls)
    return float(np.abs(m1 - m2).max())


class TestDynamicalMatrix:
    def test_lab_at_origin_is_pure_loss(self, sysp, fig3_loop, fig3_frame):
        loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=10.0,
                             zero_coupling=True)
        sf = build_spectral_frame(loop, sysp, n_grid=1024)
        # At (Delta=0, g=0): A = -i(-i Gamma/2) sz = -(Gamma/2) sz
        m = dynamical_matrix(FrameKind.LAB, loop, sysp, sf, 0.0).entries
        assert m[0, 0] == pytest.approx(-0.5, abs=1e-14)
        assert m[1, 1] == pytest.approx(0.5, abs=1e-14)
        assert abs(m[0, 1]) < 1e-14

    @pytest.mark.parametrize("frame", list(FrameKind))
    def test_traceless(self, frame, fig3_loop, sysp, fig3_frame):
        for t in (0.0, 2.5, 7.31):
            dm = dynamical_matrix(frame, fig3_loop, sysp, fig3_frame, t)
            assert abs(dm.trace) < 1e-13

    def test_interaction_vanishes_with_coupling(self, sysp):
        loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=10.0,
                             zero_coupling=True)
        sf = build_spectral_frame(loop, sysp, n_grid=1024)
        m = dynamical_matrix(FrameKind.INTERACTION, loop, sysp, sf, 5.0).entries
        assert np.abs(m).max() < 1e-12

    def test_frame_loop_mismatch_rejected(self, sysp, fig3_loop, fig2_frame):
        with pytest.raises(ConsistencyError):
            dynamical_matrix(FrameKind.ADIABATIC, fig3_loop, sysp, fig2_frame, 1.0)


class TestIntegrateFlow:
    def test_initial_condition_is_identity(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        f0 = traj[0]
        assert f0.t == 0.0
        assert f0.log_scale == 0.0
        assert np.abs(f0.matrix - np.eye(2)).max() == 0.0

    @pytest.mark.parametrize("frame", list(FrameKind))
    def test_unimodular(self, frame, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, frame)
        assert max(f.det_deviation for f in traj.flows) < 1e-8

    def test_trajectory_times_strictly_increasing(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.LAB)
        assert np.all(np.diff(traj.times) > 0)
        assert traj.times[0] == 0.0
        assert traj.final.t == pytest.approx(10.0, abs=1e-12)

    def test_frame_equivalence_oracle(self, fig3_loop, sysp, fig3_frame):
        traj_ad = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        traj_lab = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.LAB)
        mapped = change_frame(traj_ad, fig3_frame, FrameKind.LAB)
        dev = max(scaled_deviation(a, b) for a, b in zip(traj_lab.flows, mapped.flows))
        assert dev < 1e-6

    def test_composition_restart(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        i_mid = len(traj) // 2
        mid = traj[i_mid]
        tail = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC,
                              t_start=mid.t, initial=mid)
        assert scaled_deviation(tail.final, traj.final) < 1e-8

    def test_order_of_accuracy(self, sysp):
        # halving the step cuts the deviation from a 10x tighter reference
        # by at least 8 (order five shows ~32; margin for coefficient noise)
        loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=5.0)
        sf = build_spectral_frame(loop, sysp, n_grid=64)
        ref = integrate_flow(loop, sysp, sf, FrameKind.ADIABATIC,
                             rel_tol=1e-13, abs_tol=1e-15)
        spacing = 5.0 / 64
        devs = []
        for step in (spacing, spacing / 2):
            traj = integrate_flow(loop, sysp, sf, FrameKind.ADIABATIC,
                                  rel_tol=1e-2, abs_tol=1e-2, max_step=step)
            devs.append(scaled_deviation(traj.final, ref.final))
        assert devs[0] / devs[1] > 8.0

    def test_rel_tol_floor_enforced(self, fig3_loop, sysp, fig3_frame):
        with pytest.raises(DomainError):
            integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.LAB,
                           rel_tol=1e-14)

    def test_overflow_safety_long_loop(self, sysp):
        loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=200.0)
        sf = build_spectral_frame(loop, sysp)
        traj = integrate_flow(loop, sysp, sf, FrameKind.ADIABATIC)
        for f in traj.flows:
            assert np.all(np.isfinite(f.matrix))
            assert np.abs(f.matrix).max() <= math.e ** 2 + 1e-12
        # the scale factor carries the growth ~ e^{Im Lambda} in this frame
        assert traj.final.log_scale == pytest.approx(sf.Lam[-1].imag, abs=2.0)
        assert max(f.det_deviation for f in traj.flows) < 1e-8


class TestPhi0:
    def test_identity_at_zero(self, fig2_frame):
        f = phi0(fig2_frame, 0.0)
        assert np.abs(f.matrix - np.eye(2)).max() < 1e-14
        assert f.log_scale == 0.0

    def test_unit_determinant_exactly(self, fig2_frame):
        f = phi0(fig2_frame, 37.5)
        assert f.det_deviation == 0.0

    def test_never_overflows(self, sysp):
        loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=200.0)
        sf = build_spectral_frame(loop, sysp)
        f = phi0(sf, 200.0)
        assert np.all(np.isfinite(f.matrix))
        assert np.abs(f.matrix).max() <= 1.0 + 1e-12

    def test_diagonal_ratio_tracks_amplification(self, fig2_frame):
        t = 50.0
        f = phi0(fig2_frame, t)
        logs = f.log_abs_entries()
        ratio = logs[0, 0] - logs[1, 1]
        assert ratio == pytest.approx(2 * fig2_frame.Lam[-1].imag, rel=1e-10)

    def test_phi0_inverse_is_inverse(self, fig2_frame):
        t = 21.7
        prod = flow_multiply(phi0(fig2_frame, t), phi0_inverse(fig2_frame, t))
        assert scaled_deviation(prod, identity_flow(t)) < 1e-12


class TestInteractionFlow:
    def test_identity_at_zero(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        fact = interaction_flow(traj, fig3_frame)
        assert scaled_deviation(fact[0], identity_flow(0.0)) < 1e-14

    def test_unimodular(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        fact = interaction_flow(traj, fig3_frame)
        assert max(f.det_deviation for f in fact.flows) < 1e-8

    def test_factorized_equals_direct_integration(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        fact = interaction_flow(traj, fig3_frame)
        direct = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.INTERACTION)
        dev = max(scaled_deviation(a, b) for a, b in zip(fact.flows, direct.flows))
        assert dev < 1e-6

    def test_wrong_frame_rejected(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.LAB)
        with pytest.raises(ConsistencyError):
            interaction_flow(traj, fig3_frame)


class TestChangeFrame:
    def test_round_trip(self, fig3_loop, sysp, fig3_frame):
        traj = integrate_flow(fig3_loop, sysp, fig3_frame, FrameKind.ADIABATIC)
        back = change_frame(change_frame(traj, fig3_frame, FrameKind.LAB),
                            fig3_frame, FrameKind.ADIABATIC)
        dev = max(scaled_deviation(a, b) for a, b in zip(traj.flows, back.flows))
        assert dev < 1e-10

    def test_zero_coupling_conjugation_is_time_independent(self, sysp):
        # with g == 0 the mixing angle freezes, so lab and adiabatic flows
        # differ by one constant similarity transformation
        loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=10.0,
                             zero_coupling=True)
        sf = build_spectral_frame(loop, sysp, n_grid=1024)
        assert np.abs(np.diff(sf.theta)).max() < 1e-12
        traj_ad = integrate_flow(loop, sysp, sf, FrameKind.ADIABATIC)
        traj_lab = integrate_flow(loop, sysp, sf, FrameKind.LAB)
        mapped = change_frame(traj_ad, sf, FrameKind.LAB)
        dev = max(scaled_deviation(a, b)
                  for a, b in zip(traj_lab.flows, mapped.flows))
        assert dev < 1e-8
