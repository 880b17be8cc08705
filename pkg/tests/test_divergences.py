import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepstein.divergences import (
    ALL,
    CAP_BITS,
    PPT_MEAS,
    PURIFIED_BALL,
    SEP_MEAS,
    TRACE_BALL,
    MeasClass,
    SmoothBall,
    capped,
    check_anshu_chain,
    check_fuchs_van_de_graaf,
    check_tp_smoothing_same_radius,
    dh_eps,
    dh_eps_vs_set,
    dh_test,
    dmax,
    dmax_smoothed,
    umegaki,
)
from sepstein.errors import DomainError
from sepstein.linalg import random_state
from sepstein.states import isotropic, max_entangled, tau_matrix, twirl, werner_twirl

from conftest import ket


def _pair(seed, da=2, db=2):
    rng = np.random.default_rng(seed)
    return random_state(da, db, rng).matrix, random_state(da, db, rng).matrix


def test_umegaki_examples(rng):
    rho = random_state(2, 2, rng).matrix
    assert umegaki(rho, rho) == pytest.approx(0, abs=1e-9)
    assert umegaki(max_entangled(2), np.eye(4) / 4) == pytest.approx(2)
    assert umegaki(ket(2, 0, 0), ket(2, 1, 1)) == math.inf


def test_umegaki_commuting_oracle():
    p = np.array([0.5, 0.3, 0.2, 0.0])
    q = np.array([0.25, 0.25, 0.25, 0.25])
    expected = sum(a * math.log2(a / b) for a, b in zip(p, q) if a > 0)
    assert umegaki(np.diag(p), np.diag(q)) == pytest.approx(expected)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_dmax_examples(d, rng):
    rho = random_state(2, 2, rng).matrix
    assert dmax(rho, rho) == pytest.approx(0, abs=1e-8)
    assert dmax(max_entangled(d), isotropic(d, 1 / d).matrix) == pytest.approx(math.log2(d))
    assert dmax(np.zeros((4, 4)), rho) == -math.inf
    assert dmax(ket(2, 0, 0), ket(2, 1, 1)) == math.inf


def test_capped():
    assert capped(math.inf) == (CAP_BITS, True)
    assert capped(-math.inf) == (-CAP_BITS, True)
    assert capped(1.5) == (1.5, False)


def test_dh_examples(rng):
    rho = random_state(2, 2, rng).matrix
    assert dh_eps(rho, rho, 0.0) == pytest.approx(0, abs=1e-7)
    r = dh_test(ket(2, 0, 0), ket(2, 1, 1), 0.0)
    assert r.capped and r.value == CAP_BITS
    # tau_2 is supported on the complement of Phi_2, so E = Phi_2 has zero type-II error
    r = dh_test(max_entangled(2), tau_matrix(2), 0.0)
    assert r.capped


def test_dh_isotropic_oracle():
    # oracle: E = Phi restricted to the twirled family gives Tr[E iso(p)] = p
    p = 0.3
    assert dh_eps(max_entangled(2), isotropic(2, p).matrix, 0.0) == pytest.approx(-math.log2(p), abs=1e-6)


def test_dh_domain():
    with pytest.raises(DomainError):
        dh_eps(np.eye(4) / 4, np.eye(4) / 4, 1.0)
    with pytest.raises(DomainError):
        MeasClass("locc")


def test_dh_vs_set_examples():
    phi = max_entangled(2)
    v = dh_eps_vs_set(phi, 0.0, MeasClass(SEP_MEAS, "ppt"), "ppt")
    assert v == pytest.approx(math.log2(1.5), abs=1e-6)
    sep = 0.5 * (ket(2, 0, 0) + ket(2, 1, 1))
    assert dh_eps_vs_set(sep, 0.0, MeasClass(SEP_MEAS, "ppt"), "ppt") == pytest.approx(0, abs=1e-6)
    grid = [dh_eps_vs_set(phi, e, MeasClass(SEP_MEAS, "ppt"), "ppt") for e in (0, 0.2, 0.5)]
    assert all(a <= b + 1e-7 for a, b in zip(grid, grid[1:]))


def test_class_ordering(rng):
    for _ in range(3):
        rho, sigma = random_state(2, 2, rng).matrix, random_state(2, 2, rng).matrix
        for eps in (0.0, 0.2):
            a = dh_eps(rho, sigma, eps, ALL)
            p = dh_eps(rho, sigma, eps, PPT_MEAS)
            s = dh_eps(rho, sigma, eps, MeasClass(SEP_MEAS, "ppt"))
            assert a >= p - 1e-7 and p >= s - 1e-7


def test_dh_monotone_in_eps(rng):
    rho, sigma = random_state(2, 2, rng).matrix, random_state(2, 2, rng).matrix
    vals = [dh_eps(rho, sigma, e) for e in (0.0, 0.1, 0.3, 0.6)]
    assert all(a <= b + 1e-7 for a, b in zip(vals, vals[1:]))


def test_binary_measurement_below_umegaki_below_dmax(rng):
    from sepstein.measures import binary_kl

    for _ in range(10):
        rho, sigma = random_state(2, 2, rng, rank=4).matrix, random_state(2, 2, rng, rank=4).matrix
        e = dh_test(rho, sigma, 0.3).E
        p, q = np.trace(e @ rho).real, np.trace(e @ sigma).real
        meas = binary_kl(min(max(p, 0), 1), min(max(q, 0), 1))
        d = umegaki(rho, sigma)
        assert meas <= d + 1e-7
        assert d <= dmax(rho, sigma) + 1e-7


def test_dmax_data_processing_under_twirl(rng):
    for _ in range(5):
        rho, sigma = random_state(3, 3, rng).matrix, random_state(3, 3, rng, rank=9).matrix
        for f in (twirl, werner_twirl):
            assert dmax(f(rho), f(sigma)) <= dmax(rho, sigma) + 1e-7


def test_smoothing_ball_validation():
    with pytest.raises(DomainError):
        SmoothBall(TRACE_BALL, 1.0)
    with pytest.raises(DomainError):
        SmoothBall("box", 0.1)


def test_trace_smoothing_zero_and_monotone():
    rho, sigma = _pair(5)
    base = dmax(rho, sigma)
    vals = [dmax_smoothed(rho, sigma, SmoothBall(TRACE_BALL, e)) for e in (0.0, 1e-9, 0.1, 0.3)]
    assert vals[0] == pytest.approx(base)
    assert vals[1] == pytest.approx(base, abs=1e-6)
    assert all(a >= b - 1e-7 for a, b in zip(vals, vals[1:]))


def test_purified_smoothing_zero_and_monotone():
    # radii below ~1e-2 leave a fidelity slab of width eps^2 that the
    # interior-point backend cannot certify; see the ledger
    rho, sigma = _pair(5)
    base = dmax(rho, sigma)
    vals = [dmax_smoothed(rho, sigma, SmoothBall(PURIFIED_BALL, e)) for e in (0.0, 0.01, 0.1, 0.3)]
    assert vals[0] == pytest.approx(base)
    assert base - vals[1] < 0.05
    assert all(a >= b - 1e-7 for a, b in zip(vals, vals[1:]))


def test_smoothing_against_model_at_zero_is_robustness():
    phi = max_entangled(2)
    assert dmax_smoothed(phi, "ppt", SmoothBall(TRACE_BALL, 0.0)) == pytest.approx(1, abs=1e-6)
    assert dmax_smoothed(phi, "ppt", SmoothBall(TRACE_BALL, 0.2)) < 1


def test_fuchs_van_de_graaf(rng):
    for seed in range(20):
        r = check_fuchs_van_de_graaf(*_pair(seed))
        assert r.ok(1e-9)


def test_tp_smoothing_same_radius():
    for seed in range(3):
        assert check_tp_smoothing_same_radius(*_pair(seed), 0.1).ok()


def test_anshu_chain():
    for seed in range(3):
        assert check_anshu_chain(*_pair(100 + seed), 0.25, 0.3).ok()
    rho, _ = _pair(7)
    assert check_anshu_chain(rho, rho, 0.25, 0.3).ok()
    # boundary run completes
    check_anshu_chain(*_pair(8), 0.9, 0.1)
    with pytest.raises(DomainError):
        check_anshu_chain(rho, rho, 0.9, 0.5)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_umegaki_nonnegative(seed):
    rho, sigma = _pair(seed)
    assert umegaki(rho, sigma) >= 0
