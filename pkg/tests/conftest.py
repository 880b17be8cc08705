import numpy as np
import pytest

from sepstein.linalg import random_state
from sepstein.models import separability_test


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def random_herm(rng, n):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (g + g.conj().T) / 2


def entangled_2x2(rng, count):
    out = []
    while len(out) < count:
        st = random_state(2, 2, rng)
        if separability_test(st, "ppt").status == "Out":
            out.append(st)
    return out


def ket(d, *idx):
    v = np.zeros(d ** len(idx), dtype=complex)
    k = 0
    for i in idx:
        k = k * d + i
    v[k] = 1
    return np.outer(v, v.conj())
