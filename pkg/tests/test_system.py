import math

import numpy as np
import pytest

from eploop.errors import DomainError
from eploop.system import (FourierControl, SystemParams, TruncationRanges,
                           circular_loop, corrected_loop, eval_path,
                           eval_path_rate)


def test_gamma_is_half_difference():
    p = SystemParams(gamma1=3.0, gamma2=1.0)
    assert p.Gamma == 1.0


def test_lossier_mode_convention_enforced():
    with pytest.raises(DomainError):
        SystemParams(gamma1=1.0, gamma2=2.0)


def test_path_start_at_alpha_zero(sysp):
    loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=50.0)
    d, g = eval_path(loop, 0.0)
    assert d == pytest.approx(0.0, abs=1e-15)
    assert g == pytest.approx(1.0, abs=1e-15)


def test_path_closed(sysp):
    loop = circular_loop(sysp, r0=0.37, alpha=1.234, s=-1, t_f=17.0)
    d0, g0 = eval_path(loop, 0.0)
    d1, g1 = eval_path(loop, loop.t_f)
    assert d1 == pytest.approx(d0, abs=1e-12)
    assert g1 == pytest.approx(g0, abs=1e-12)


def test_quarter_turn(sysp):
    loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=50.0)
    d, g = eval_path(loop, loop.t_f / 4)
    assert d == pytest.approx(0.5, abs=1e-14)
    assert g == pytest.approx(0.5, abs=1e-14)


def test_time_domain_checked(sysp):
    loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=50.0)
    with pytest.raises(DomainError):
        eval_path(loop, -1.0)
    with pytest.raises(DomainError):
        eval_path(loop, 51.0)


def test_orientation_validated(sysp):
    with pytest.raises(DomainError):
        circular_loop(sysp, r0=0.5, alpha=0.0, s=0, t_f=50.0)


def test_path_rate_matches_finite_difference(sysp):
    loop = circular_loop(sysp, r0=0.5, alpha=0.3, s=+1, t_f=20.0)
    t = 7.7
    h = 1e-6
    dd, gd = eval_path_rate(loop, t)
    d1, g1 = eval_path(loop, t + h)
    d0, g0 = eval_path(loop, t - h)
    assert dd == pytest.approx((d1 - d0) / (2 * h), rel=1e-8)
    assert gd == pytest.approx((g1 - g0) / (2 * h), rel=1e-8)


def test_fourier_control_vanishes_at_endpoints():
    fc = FourierControl(order=1, t_f=10.0,
                        c_delta={2: 0.3}, d_delta={1: -0.2, 5: 0.11},
                        c_g={3: 0.07}, d_g={4: 0.05})
    for t in (0.0, 10.0):
        dc, gc = fc.fields_at(t)
        assert abs(dc) < 1e-14
        assert abs(gc) < 1e-14


def test_corrected_loop_is_closed_and_endpoint_matched(sysp):
    base = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=10.0)
    fc = FourierControl(order=1, t_f=10.0, d_delta={1: 0.1, 3: -0.04},
                        c_g={1: 0.2, 6: 0.01})
    loop = corrected_loop(base, [fc])
    for t in (0.0, 10.0):
        db, gb = eval_path(base, t)
        dc, gc = eval_path(loop, t)
        assert dc == pytest.approx(db, abs=1e-13)
        assert gc == pytest.approx(gb, abs=1e-13)


def test_corrected_path_adds_fields(sysp):
    base = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=10.0)
    fc = FourierControl(order=1, t_f=10.0, d_delta={2: 0.25}, c_g={1: -0.1})
    loop = corrected_loop(base, [fc])
    t = 3.3
    db, gb = eval_path(base, t)
    dc, gc = eval_path(loop, t)
    w = 2 * math.pi / 10.0
    assert dc - db == pytest.approx(0.25 * math.sin(2 * w * t), abs=1e-14)
    assert gc - gb == pytest.approx(-0.1 * (1 - math.cos(w * t)), abs=1e-14)


def test_truncation_counts_skip_index_zero():
    tr = TruncationRanges(k=(0, 0), l=(1, 6), m=(1, 6), n=(0, 0))
    assert tr.k_indices == ()
    assert tr.n_indices == ()
    assert tr.l_indices == (1, 2, 3, 4, 5, 6)
    assert tr.n_coefficients == 12


def test_zero_coupling_override(sysp):
    loop = circular_loop(sysp, r0=0.5, alpha=0.0, s=+1, t_f=10.0,
                         zero_coupling=True)
    ts = np.linspace(0, 10, 33)
    _, g = eval_path(loop, ts)
    assert np.all(g == 0.0)
