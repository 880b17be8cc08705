import numpy as np
import pytest

from sepstein.channels import (
    lambda_dne_check,
    lambda_ne_check,
    sep_measurement_check,
    theta_dne_check,
    theta_ne_check,
)
from sepstein.errors import DomainError
from sepstein.linalg import random_state
from sepstein.models import max_overlap
from sepstein.protocols import DNE, construct_dilution
from sepstein.states import (
    LAMBDA,
    THETA,
    TWIRL,
    WERNER_TWIRL,
    ChannelSpec,
    NamedState,
    adjoint_channel,
    antisym,
    antisym_matrix,
    apply_channel,
    diag_projector,
    isotropic,
    make_state,
    max_entangled,
    swap,
    tau_matrix,
    twirl,
    werner,
    werner_twirl,
)

from conftest import ket, random_herm


@pytest.mark.parametrize("d", [2, 3, 4])
def test_named_state_identities(d):
    a = antisym(d).matrix
    assert np.trace(diag_projector(d) @ a).real == pytest.approx(0, abs=1e-14)
    assert np.trace(max_entangled(d) @ max_entangled(d)).real == pytest.approx(1)
    assert np.trace(swap(d) @ a).real == pytest.approx(-1)


def test_named_state_validation():
    with pytest.raises(DomainError):
        NamedState("isotropic", 3, 1.5)
    with pytest.raises(DomainError):
        NamedState("antisym", 1)
    with pytest.raises(DomainError):
        NamedState("ghz", 2)


def test_family_conventions():
    assert np.allclose(isotropic(3, 0.25).matrix, 0.25 * max_entangled(3) + 0.75 * tau_matrix(3))
    assert np.allclose(werner(3, 1.0).matrix, antisym_matrix(3))


@pytest.mark.parametrize("d", [2, 3])
def test_twirl_of_product_basis_states(d):
    assert np.allclose(twirl(ket(d, 0, 0)), max_entangled(d) / d + (d - 1) / d * tau_matrix(d))
    assert np.allclose(twirl(ket(d, 0, 1)), tau_matrix(d))
    assert np.allclose(twirl(max_entangled(d)), max_entangled(d))


def test_werner_twirl_fixed_point_and_idempotence(rng):
    a = antisym_matrix(3)
    assert np.allclose(werner_twirl(a), a)
    once = werner_twirl(max_entangled(3))
    assert np.allclose(werner_twirl(once), once)


def test_twirls_idempotent_and_trace_preserving(rng):
    for _ in range(20):
        x = random_herm(rng, 9)
        for f in (twirl, werner_twirl):
            y = f(x)
            assert np.linalg.norm(f(y) - y) < 1e-10
            assert abs(np.trace(y) - np.trace(x)) < 1e-10


def test_twirl_matches_group_average(rng):
    # independent oracle: U (x) conj(U) averages over random unitaries
    from scipy.stats import unitary_group

    x = random_state(2, 2, rng).matrix
    acc = np.zeros((4, 4), dtype=complex)
    n = 4000
    for u in unitary_group.rvs(2, size=n, random_state=7):
        k = np.kron(u, u.conj())
        acc += k @ x @ k.conj().T
    assert np.linalg.norm(acc / n - twirl(x)) < 0.05


def test_channel_examples(rng):
    rho = random_state(2, 2, rng).matrix
    theta = ChannelSpec(THETA, 2, E=np.eye(4))
    assert np.allclose(apply_channel(theta, rho), max_entangled(2))
    rt, om = random_state(2, 2, rng).matrix, random_state(2, 2, rng).matrix
    lam = ChannelSpec(LAMBDA, 2, rho_t=rt, omega=om)
    assert np.allclose(apply_channel(lam, max_entangled(2)), rt)


def test_adjoint_identity(rng):
    e = random_state(2, 2, rng).matrix
    specs = [
        ChannelSpec(TWIRL, 2),
        ChannelSpec(WERNER_TWIRL, 2),
        ChannelSpec(THETA, 2, E=e / np.linalg.eigvalsh(e)[-1]),
        ChannelSpec(LAMBDA, 2, rho_t=random_state(2, 2, rng).matrix,
                    omega=random_state(2, 2, rng).matrix),
    ]
    for _ in range(50):
        for spec in specs:
            x = random_herm(rng, spec.input_dim)
            y = random_herm(rng, spec.output_dim)
            lhs = np.trace(y @ apply_channel(spec, x))
            rhs = np.trace(adjoint_channel(spec, y) @ x)
            assert abs(lhs - rhs) < 1e-10


def test_twirl_after_channel_has_theta_form(rng):
    # random Kraus channel from a 3-dim input onto 2x2
    for _ in range(5):
        g = rng.standard_normal((4 * 3, 3)) + 1j * rng.standard_normal((4 * 3, 3))
        q, _ = np.linalg.qr(g)
        kraus = [q[4 * k : 4 * (k + 1)] for k in range(3)]
        chan = lambda x: sum(k @ x @ k.conj().T for k in kraus)
        adj = lambda y: sum(k.conj().T @ y @ k for k in kraus)
        spec = ChannelSpec(THETA, 2, E=adj(max_entangled(2)))
        for _ in range(3):
            x = random_herm(rng, 3)
            assert np.linalg.norm(twirl(chan(x)) - apply_channel(spec, x)) < 1e-9


def test_theta_ne_examples():
    assert theta_ne_check(1, max_entangled(2), 0.0).status == "In"
    assert theta_ne_check(1, np.eye(4), 0.0).status == "Out"
    for m in (1, 3):
        assert theta_ne_check(m, np.zeros((4, 4)), 0.0).status == "In"


def test_theta_ne_threshold_flips():
    e = max_entangled(2) + 0.2 * (np.eye(4) - max_entangled(2))
    ov = max_overlap(e, "ppt", (2, 2)).value
    assert ov == pytest.approx(0.6, abs=1e-7)
    crit = 2 * ov - 1
    assert theta_ne_check(1, e, crit + 1e-4).status == "In"
    assert theta_ne_check(1, e, crit - 1e-4).status == "Out"


def test_theta_dne_examples():
    assert theta_dne_check(1, np.zeros((4, 4))).status == "In"
    phi = max_entangled(2)
    e = phi + (np.eye(4) - phi) / 3
    assert theta_dne_check(1, e).status == "In"
    # Phi_2 itself is not a separable effect
    assert sep_measurement_check(phi).status == "Out"


def test_lambda_examples():
    sep = 0.5 * ket(2, 0, 0) + 0.5 * ket(2, 1, 1)
    for d in (1, 2, 5):
        assert lambda_ne_check(d, sep, sep, 0.0).status == "In"
    assert lambda_ne_check(1, max_entangled(2), tau_matrix(2), 0.0).status == "Out"
    c = construct_dilution(max_entangled(2), 0.1, DNE)
    assert c.d == 9
    assert lambda_dne_check(9, c.rho_t, c.omega, 0.1).status == "In"


def test_ppt_witness_reverifies(rng):
    from sepstein.models import separability_test

    for _ in range(10):
        st = random_state(2, 2, rng)
        v = separability_test(st, "ppt")
        if v.status == "Out":
            w = v.certificate["witness"]
            assert np.trace(w @ st.matrix).real < -1e-8
            # a PPT-dual witness is nonnegative on every product state
            for _ in range(20):
                a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
                b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
                p = np.kron(a, b) / np.linalg.norm(a) / np.linalg.norm(b)
                assert (p.conj() @ w @ p).real >= -1e-8


def test_make_state_kinds():
    for kind in ("maxent", "tau", "antisym", "symwerner"):
        st = make_state(NamedState(kind, 3))
        assert np.trace(st.matrix).real == pytest.approx(1)
