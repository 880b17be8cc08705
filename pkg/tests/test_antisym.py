import json
import math

import numpy as np
import pytest

from sepstein.antisym import (
    CSW_BITS,
    WernerFixedPoint,
    antisym_row,
    antisym_table,
    factorwise_twirl_deviation,
    fixed_point_distance,
    fixed_point_state,
    lower_closed_form,
    stein_smoothing_check,
    table_from_json,
    table_to_csv,
    table_to_json,
    upper_closed_form,
)
from sepstein.errors import DomainError, SizeError
from sepstein.linalg import trace_norm
from sepstein.protocols import regroup_tensor_power
from sepstein.states import antisym, antisym_matrix, symwerner_matrix


def test_csw_constant():
    assert CSW_BITS == pytest.approx(0.2075, abs=5e-5)


def test_closed_form_rows():
    assert upper_closed_form(13) == pytest.approx(math.log2(15 / 13))
    assert upper_closed_form(13) < CSW_BITS
    assert upper_closed_form(12) == pytest.approx(0.22239, abs=1e-5)
    assert upper_closed_form(12) > CSW_BITS


@pytest.mark.parametrize("d", [2, 5, 9])
def test_row_matches_closed_forms(d):
    r = antisym_row(d)
    assert not r.analytic and r.closed_form_ok
    assert r.lower_bits == pytest.approx(lower_closed_form(d), abs=1e-6)
    assert r.upper_bits == pytest.approx(upper_closed_form(d), abs=1e-6)
    assert r.lower_bits <= r.upper_bits + 1e-6


def test_rows_beyond_cap_are_analytic():
    r = antisym_row(20)
    assert r.analytic and r.gap_certified
    assert antisym_row(5, max_dim=16).analytic


def test_table_shape_and_gap():
    rows = antisym_table(10, 20)
    assert [r.d for r in rows] == list(range(10, 21))
    assert [r.d for r in rows if r.gap_certified][0] == 13
    assert all(r.gap_certified == (r.d >= 13) for r in rows)
    ups = [r.upper_bits for r in rows]
    assert all(a > b for a, b in zip(ups, ups[1:]))


def test_table_parallel_matches_serial():
    a = antisym_table(3, 6)
    b = antisym_table(3, 6, jobs=2)
    assert [r.upper_bits for r in a] == pytest.approx([r.upper_bits for r in b], abs=1e-9)


def test_table_domain():
    with pytest.raises(DomainError):
        antisym_table(5, 4)
    with pytest.raises(DomainError):
        antisym_table(1, 4)
    with pytest.raises(SizeError):
        antisym_table(2, 21)


def test_table_serialization_roundtrip():
    rows = antisym_table(17, 20)
    assert table_from_json(table_to_json(rows)) == rows
    lines = table_to_csv(rows).splitlines()
    assert lines[0] == "d,lower_bits,upper_bits,csw_bits,gap_certified"
    first = lines[1].split(",")
    assert int(first[0]) == 17 and float(first[2]) == rows[0].upper_bits
    assert first[4] == "true"


def test_fixed_point_validation():
    with pytest.raises(DomainError):
        WernerFixedPoint(2, [0.5, 0.5])
    with pytest.raises(DomainError):
        WernerFixedPoint(1, [0.7, 0.7])
    with pytest.raises(DomainError):
        WernerFixedPoint(1, [1.5, -0.5])


@pytest.mark.parametrize("d", [2, 3])
def test_fixed_point_extremes(d):
    full = fixed_point_state(d, WernerFixedPoint(2, [0, 0, 0, 1]))
    assert np.allclose(full.matrix, regroup_tensor_power(antisym(d), 2).matrix)
    s = symwerner_matrix(d)
    empty = fixed_point_state(d, WernerFixedPoint(2, [1, 0, 0, 0]))
    from sepstein.states import BipartiteState

    assert np.allclose(empty.matrix, regroup_tensor_power(BipartiteState(s, d, d), 2).matrix)
    one = fixed_point_state(d, WernerFixedPoint(1, [0, 1]))
    assert np.allclose(one.matrix, antisym_matrix(d))


def test_fixed_points_are_twirl_invariant(rng):
    for d in (2, 3):
        w = rng.dirichlet(np.ones(4))
        st = fixed_point_state(d, WernerFixedPoint(2, w))
        assert factorwise_twirl_deviation(st, d, 2) <= 1e-9
        # a generic regrouped state is not
    generic = regroup_tensor_power(np.kron(np.eye(2), np.diag([1.0, 0.0])) / 2, 2)
    assert factorwise_twirl_deviation(generic, 2, 2) > 1e-3


def test_fixed_point_distance_bookkeeping(rng):
    for n in (1, 2):
        for _ in range(5):
            fp = WernerFixedPoint(n, rng.dirichlet(np.ones(2**n)))
            assert fixed_point_distance(2, fp) == pytest.approx(1 - fp.p_full, abs=1e-9)
    fp = WernerFixedPoint(1, [0.4, 0.6])
    direct = 0.5 * trace_norm(antisym_matrix(3) - fixed_point_state(3, fp).matrix)
    assert direct == pytest.approx(0.4)


@pytest.mark.parametrize("d, n", [(2, 1), (3, 1)])
def test_stein_check_small(d, n):
    rep = stein_smoothing_check(d, n)
    assert rep.ok()
    assert rep.rows[0][1] == pytest.approx(rep.dmax, abs=1e-6)
    # D_max(alpha^{(x)n} || PPT_n) = n bits, by the Werner robustness oracle
    assert rep.dmax == pytest.approx(n, abs=1e-6)
    obj = json.loads(json.dumps(rep.to_dict()))
    assert "PPT_n" in obj["note"]


def test_stein_check_domain():
    with pytest.raises(DomainError):
        stein_smoothing_check(2, 3)
    with pytest.raises(SizeError):
        stein_smoothing_check(5, 2)
