import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import gf_mul_slow, rank_slow
from packetwash import gf

elements = st.integers(0, 255)
nonzero = st.integers(1, 255)


def test_oracle_spot_values():
    assert gf_mul_slow(0x80, 0x02) == 0x1D
    assert gf_mul_slow(0x02, 0x02) == 0x04


def test_known_product():
    assert gf.gf_mul(0x80, 0x02) == 0x1D


def test_identity_and_annihilator():
    for x in range(256):
        assert gf.gf_mul(x, 0) == 0
        assert gf.gf_mul(0, x) == 0
        assert gf.gf_mul(x, 1) == x


def test_inverse_edge_cases():
    assert gf.gf_inv(1) == 1
    with pytest.raises(ZeroDivisionError):
        gf.gf_inv(0)


def test_tables_agree():
    for a in range(256):
        row = gf.MUL_ROWS[a]
        for b in range(0, 256, 17):
            assert row[b] == gf.MUL[a, b] == gf.gf_mul(a, b)


@given(elements, elements, elements)
def test_field_axioms(a, b, c):
    mul = gf.gf_mul
    assert mul(a, b) == mul(b, a)
    assert mul(mul(a, b), c) == mul(a, mul(b, c))
    assert mul(a, b ^ c) == mul(a, b) ^ mul(a, c)


@given(elements, nonzero)
def test_division_undoes_multiplication(a, b):
    assert gf.gf_div(gf.gf_mul(a, b), b) == a


def test_scale_vector():
    import numpy as np

    v = np.arange(256, dtype=np.uint8)
    assert list(gf.scale(v, 7)) == [gf_mul_slow(7, int(x)) for x in v]


def _random_matrix(rng, rows, cols):
    return [[rng.randrange(256) for _ in range(cols)] for _ in range(rows)]


def test_rank_and_inverse_against_oracle():
    rng = random.Random(5)
    for _ in range(200):
        n = rng.randint(1, 6)
        m = _random_matrix(rng, n, n)
        if rng.random() < 0.3 and n > 1:
            m[-1] = [a ^ b for a, b in zip(m[0], m[1 % n])]  # force a dependency sometimes
        r = rank_slow(m)
        assert gf.matrix_rank(m) == r
        assert (gf.determinant(m) != 0) == (r == n)
        if r == n:
            inv = gf.matrix_inverse(m)
            for i in range(n):
                row = gf.vec_mat(m[i], inv)
                assert row == [1 if j == i else 0 for j in range(n)]
        else:
            with pytest.raises(ValueError):
                gf.matrix_inverse(m)


def test_reduce_against_clears_pivot_columns():
    pivots = {0: [1, 5, 0], 2: [0, 9, 1]}
    out = gf.reduce_against([3, 4, 7], pivots)
    assert out[0] == 0 and out[2] == 0
