import json
import math

import numpy as np
import pytest

from sepstein.antisym import power_measured_bound
from sepstein.divergences import MeasClass, SEP_MEAS, dmax, umegaki
from sepstein.errors import DomainError
from sepstein.linalg import partial_transpose, permute_subsystems, random_state
from sepstein.measures import (
    EXACT,
    INDETERMINATE,
    LOWER,
    MeasureResult,
    binary_kl,
    dh_ent,
    dmax_ent,
    e_kappa,
    e_kappa_tilde,
    gen_robustness,
    golden_min,
    measured_lower_bound,
    ree_lower_ppt,
)
from sepstein.states import antisym, diag_projector, isotropic, max_entangled, twirl, werner

from conftest import entangled_2x2, ket


def _sep_2x2():
    return 0.5 * (ket(2, 0, 0) + ket(2, 1, 1))


def _product(a, b, da, db):
    return permute_subsystems(np.kron(a, b), [da, db, da, db], [0, 2, 1, 3])


def test_binary_kl_conventions():
    assert binary_kl(1.0, 0.5) == pytest.approx(1.0)
    assert binary_kl(0.0, 0.25) == pytest.approx(math.log2(4 / 3))
    assert binary_kl(1.0, 0.0) == math.inf
    assert binary_kl(0.3, 0.3) == 0.0


def test_golden_min_on_parabola():
    val, x = golden_min(lambda t: (t - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-8) and val < 1e-15


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("p", [0.0, None, 0.5, 1.0])
def test_robustness_isotropic(d, p):
    p = 1.0 / d if p is None else p
    r = gen_robustness(isotropic(d, p), "ppt")
    assert r.value == pytest.approx(max(d * p - 1, 0), abs=1e-6)


def test_robustness_examples():
    assert gen_robustness(max_entangled(3), "ppt").value == pytest.approx(2, abs=1e-6)
    assert gen_robustness(_sep_2x2(), "ppt").value == pytest.approx(0, abs=1e-7)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_dmax_ent_max_entangled(d):
    r = dmax_ent(max_entangled(d), "ppt")
    assert r.value == pytest.approx(math.log2(d), abs=1e-6)
    # the optimizer re-verifies through the unconstrained D_max
    assert dmax(max_entangled(d), r.extras["sigma"]) == pytest.approx(r.value, abs=1e-6)


@pytest.mark.parametrize("d", [3, 4])
def test_dmax_ent_antisym(d):
    # oracle: after twirling, sigma = w alpha + (1-w) sigma_d is PPT iff w <= 1/2,
    # and alpha <= lambda sigma needs lambda w >= 1, so the minimum is lambda = 2
    v = dmax_ent(antisym(d), "ppt").value
    assert v == pytest.approx(1.0, abs=1e-6)
    assert e_kappa_tilde(antisym(d), "ppt")[0].value <= v + 1e-6


def test_direction_flags():
    assert gen_robustness(max_entangled(2), "ppt").direction == EXACT
    assert gen_robustness(max_entangled(3), "ppt").direction == LOWER
    assert gen_robustness(max_entangled(3), "isotropic").direction == EXACT
    assert dh_ent(max_entangled(3), 0.0).direction == INDETERMINATE


def test_e_kappa_examples(rng):
    assert e_kappa(_sep_2x2()).value == pytest.approx(0, abs=1e-7)
    assert e_kappa(max_entangled(2)).value == pytest.approx(1, abs=1e-6)
    for _ in range(5):
        st = random_state(2, 2, rng)
        assert e_kappa(st).value <= e_kappa_tilde(st, "ppt")[0].value + 1e-6


def test_e_kappa_tilde_witness(rng):
    st = random_state(2, 2, rng)
    r, w = e_kappa_tilde(st, "ppt")
    xg = partial_transpose(st.matrix, (2, 2))
    assert np.linalg.eigvalsh(w.S_pt - xg)[0] > -1e-8
    assert np.linalg.eigvalsh(w.S_pt + xg)[0] > -1e-8
    assert np.linalg.eigvalsh(w.S)[0] > -1e-8
    assert math.log2(np.trace(w.S).real) == pytest.approx(r.value, abs=1e-6)


@pytest.mark.parametrize("d", [3, 4, 5, 6])
def test_e_kappa_tilde_antisym(d):
    r, w = e_kappa_tilde(antisym(d), "werner")
    assert r.value == pytest.approx(math.log2(1 + 2 / d), abs=1e-6)
    assert r.direction == EXACT


def test_e_kappa_tilde_needs_invariance(rng):
    with pytest.raises(DomainError):
        e_kappa_tilde(random_state(3, 3, rng), "werner")


def test_e_kappa_tilde_faithful_and_nonnegative(rng):
    assert e_kappa_tilde(_sep_2x2(), "ppt")[0].value == pytest.approx(0, abs=1e-7)
    assert e_kappa_tilde(werner(3, 0.5), "werner")[0].value == pytest.approx(0, abs=1e-7)
    for _ in range(100):
        st = random_state(2, 2, rng)
        v = e_kappa_tilde(st, "ppt")[0].value
        assert v >= 0
        # zero exactly on PPT (= separable) inputs in 2x2
        ppt = np.linalg.eigvalsh(partial_transpose(st.matrix, (2, 2)))[0] >= -1e-9
        assert (v <= 1e-6) == ppt


def test_e_kappa_tilde_twirl_monotone(rng):
    for _ in range(5):
        st = random_state(2, 2, rng)
        before = e_kappa_tilde(st, "ppt")[0].value
        assert e_kappa_tilde(twirl(st.matrix), "ppt", dims=(2, 2))[0].value <= before + 1e-6


def test_e_kappa_tilde_subadditive(rng):
    for rho, om in zip(entangled_2x2(rng, 3), entangled_2x2(rng, 3)):
        joint = _product(rho, om, 2, 2)
        v = e_kappa_tilde(joint, "ppt", dims=(4, 4))[0].value
        parts = e_kappa_tilde(rho, "ppt")[0].value + e_kappa_tilde(om, "ppt")[0].value
        assert v <= parts + 1e-6


def test_dh_ent_examples():
    r = dh_ent(max_entangled(2), 0.0, MeasClass(SEP_MEAS, "ppt"), "ppt")
    assert r.value == pytest.approx(math.log2(1.5), abs=1e-6)
    assert r.direction == EXACT
    assert dh_ent(_sep_2x2(), 0.0).value == pytest.approx(0, abs=1e-6)
    assert dh_ent(max_entangled(2), 0.5).value >= r.value - 1e-7


@pytest.mark.parametrize("d", [3, 4, 5])
def test_dh_ent_below_e_kappa_tilde(d):
    # computable surrogate of D^SEP <= E_kappa-tilde
    a = dh_ent(antisym(d), 0.0, MeasClass(SEP_MEAS, "werner"), "werner").value
    assert a <= e_kappa_tilde(antisym(d), "werner")[0].value + 1e-5


@pytest.mark.parametrize("d", [3, 4, 5, 8])
def test_measured_lower_bound_antisym(d):
    r = measured_lower_bound(antisym(d), diag_projector(d), "werner")
    assert r.value == pytest.approx(math.log2(1 + 1 / d), abs=1e-6)
    assert r.extras["q_range"][0] == pytest.approx(1 / (d + 1), abs=1e-7)
    assert r.extras["evidence"] == "diagonal"


def test_measured_lower_bound_trivial_cases():
    assert measured_lower_bound(werner(3, 0.3), diag_projector(3), "werner").value == pytest.approx(0, abs=1e-8)
    # over PPT a state orthogonal to P_diag exists, so the bound collapses
    assert measured_lower_bound(antisym(3), diag_projector(3), "ppt").value == pytest.approx(0, abs=1e-7)


def test_measured_lower_bound_rejects(rng):
    with pytest.raises(DomainError):
        measured_lower_bound(random_state(3, 3, rng), diag_projector(3), "werner")
    with pytest.raises(DomainError):
        measured_lower_bound(max_entangled(2), max_entangled(2), "ppt")


@pytest.mark.parametrize("d", [2, 3])
def test_strong_superadditivity(d):
    one = power_measured_bound(d, 1)
    assert one == pytest.approx(measured_lower_bound(antisym(d), diag_projector(d), "werner").value, abs=1e-6)
    assert power_measured_bound(d, 2) >= 2 * one - 1e-5


def test_ree_examples():
    assert ree_lower_ppt(_sep_2x2()).value == pytest.approx(0, abs=1e-6)
    # oracle: twirling reduces to the isotropic line; grid minimum of D(Phi || iso(p))
    grid = np.linspace(0.01, 0.5, 491)
    oracle = min(umegaki(max_entangled(2), isotropic(2, p).matrix) for p in grid)
    r = ree_lower_ppt(max_entangled(2))
    assert r.value == pytest.approx(oracle, abs=1e-5)
    assert r.value == pytest.approx(1.0, abs=1e-5)


def test_ree_sandwich_antisym():
    rho = antisym(3)
    lo = measured_lower_bound(rho, diag_projector(3), "werner").value
    mid = ree_lower_ppt(rho).value
    hi = dmax_ent(rho, "ppt").value
    assert lo <= mid + 1e-5 and mid <= hi + 1e-5


def test_ree_generic_state_is_bracketed(rng):
    st = entangled_2x2(rng, 1)[0]
    r = ree_lower_ppt(st, max_iter=200)
    assert 0 <= r.value <= r.extras["upper_estimate"] + 1e-9
    assert r.value <= dmax_ent(st, "ppt").value + 1e-5


def test_measure_result_json_roundtrip():
    r = dmax_ent(max_entangled(2), "ppt")
    obj = json.loads(r.to_json())
    assert set(obj) >= {"measure", "value_bits", "model", "direction", "gap", "iterations"}
    back = MeasureResult.from_dict(obj)
    assert back.to_dict() == r.to_dict()
    inf = MeasureResult("dh", math.inf, "ppt", EXACT, 0.0, 0)
    assert inf.to_dict()["value_bits"] == 60.0 and inf.to_dict()["capped"]
