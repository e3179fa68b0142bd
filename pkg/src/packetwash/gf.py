"""GF(2^8) arithmetic over the reduction polynomial x^8+x^4+x^3+x^2+1 (0x11D)."""

from __future__ import annotations

import numpy as np

POLY = 0x11D

EXP = [0] * 512
LOG = [0] * 256

_x = 1
for _i in range(255):
    EXP[_i] = _x
    LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= POLY
for _i in range(255, 512):
    EXP[_i] = EXP[_i - 255]
del _x, _i

# MUL[a, b] == a*b; row lookups scale whole byte vectors at once.
MUL = np.zeros((256, 256), dtype=np.uint8)
for _a in range(1, 256):
    for _b in range(1, 256):
        MUL[_a, _b] = EXP[LOG[_a] + LOG[_b]]
del _a, _b

INV = [0] + [EXP[255 - LOG[a]] for a in range(1, 256)]

# Plain-list copy of MUL for scalar work on short coefficient vectors.
MUL_ROWS = MUL.tolist()


def gf_add(a: int, b: int) -> int:
    return a ^ b


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return INV[a]


def gf_div(a: int, b: int) -> int:
    return gf_mul(a, gf_inv(b))


def scale(vec: np.ndarray, c: int) -> np.ndarray:
    """Multiply every byte of ``vec`` by the field element ``c``."""
    return MUL[c][vec]


def reduce_against(row: list[int], pivots: dict[int, list[int]]) -> list[int]:
    """Eliminate the pivot columns of a reduced echelon basis from ``row``."""
    for col, prow in pivots.items():
        c = row[col]
        if c:
            m = MUL_ROWS[c]
            row = [a ^ m[b] for a, b in zip(row, prow)]
    return row


def matrix_rank(rows: list[list[int]]) -> int:
    """Rank of a small matrix over GF(256), by Gaussian elimination."""
    m = [list(r) for r in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(m)) if m[r][col]), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        mi = MUL_ROWS[INV[m[rank][col]]]
        m[rank] = [mi[v] for v in m[rank]]
        for r in range(len(m)):
            if r != rank and m[r][col]:
                mf = MUL_ROWS[m[r][col]]
                m[r] = [v ^ mf[p] for v, p in zip(m[r], m[rank])]
        rank += 1
    return rank


def matrix_inverse(rows: list[list[int]]) -> list[list[int]]:
    """Inverse of a square matrix over GF(256); raises ValueError if singular."""
    n = len(rows)
    m = [list(r) + [1 if i == j else 0 for j in range(n)] for i, r in enumerate(rows)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col]), None)
        if pivot is None:
            raise ValueError("matrix is singular")
        m[col], m[pivot] = m[pivot], m[col]
        mi = MUL_ROWS[INV[m[col][col]]]
        m[col] = [mi[v] for v in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                mf = MUL_ROWS[m[r][col]]
                m[r] = [v ^ mf[p] for v, p in zip(m[r], m[col])]
    return [row[n:] for row in m]


def vec_mat(vec: list[int], mat: list[list[int]]) -> list[int]:
    """Row vector times matrix."""
    out = [0] * len(mat[0])
    for c, row in zip(vec, mat):
        if c:
            mc = MUL_ROWS[c]
            out = [o ^ mc[v] for o, v in zip(out, row)]
    return out


def determinant(rows: list[list[int]]) -> int:
    n = len(rows)
    m = [list(r) for r in rows]
    det = 1
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col]), None)
        if pivot is None:
            return 0
        m[col], m[pivot] = m[pivot], m[col]
        det = gf_mul(det, m[col][col])
        inv = INV[m[col][col]]
        for r in range(col + 1, n):
            if m[r][col]:
                mf = MUL_ROWS[gf_mul(m[r][col], inv)]
                m[r] = [v ^ mf[p] for v, p in zip(m[r], m[col])]
    return det
