"""In-packet random linear network coding over GF(256).

A group of ``k`` equal-length source chunks is turned into ``k' >= k`` coded
chunks, each the linear combination ``sum(coeffs[j] * source[j])``. The
receiver accumulates coded chunks until it has ``k`` degrees of freedom.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from . import gf
from .wire import QFunction, QualitativePacket, WashDirective, make_coded_packet

# Cap on determinant evaluations per candidate row when enforcing that every
# k-subset of the emitted rows is independent. Beyond it only plain rank
# growth is enforced.
MDS_CHECK_BUDGET = 256
MAX_REDRAWS = 10_000


class BadParam(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class InsufficientRank(Exception):
    def __init__(self, rank: int, k: int):
        super().__init__(f"rank {rank} < k={k}: {k - rank} more degrees of freedom needed")
        self.rank = rank
        self.k = k


@dataclass(frozen=True)
class RlncGroup:
    group_id: int
    k: int
    chunk_len: int
    source_chunks: tuple[bytes, ...]

    @classmethod
    def from_chunks(cls, group_id: int, chunks: Sequence[bytes]) -> "RlncGroup":
        """Zero-pad ``chunks`` to a common length."""
        if not chunks:
            raise BadParam("a group needs at least one chunk")
        chunk_len = max(len(c) for c in chunks)
        if chunk_len == 0:
            raise BadParam("chunks must not all be empty")
        padded = tuple(bytes(c) + bytes(chunk_len - len(c)) for c in chunks)
        return cls(group_id=group_id, k=len(padded), chunk_len=chunk_len, source_chunks=padded)

    def __post_init__(self):
        if self.k < 1 or len(self.source_chunks) != self.k:
            raise BadParam("group must hold exactly k >= 1 chunks")
        if any(len(c) != self.chunk_len for c in self.source_chunks):
            raise BadParam("source chunks must all be chunk_len bytes")


@dataclass(frozen=True)
class CodedChunk:
    coeffs: bytes
    data: bytes


class RlncEncoder:
    """Seeded coded-chunk generator for one group.

    Coefficients are drawn uniformly from GF(256). A row is re-drawn if it
    would make any ``min(n, k)`` of the emitted rows linearly dependent, so
    every ``k``-subset of the output decodes. Successive calls to
    :meth:`next_chunks` extend the same family, which is what repair
    transmissions rely on.
    """

    def __init__(self, group: RlncGroup, rng_seed: int):
        self.group = group
        self._rng = random.Random(rng_seed)
        self._src = np.frombuffer(b"".join(group.source_chunks), dtype=np.uint8).reshape(group.k, group.chunk_len)
        self.rows: list[list[int]] = []
        self._echelon: dict[int, list[int]] = {}
        self._basis_inv: list[list[int]] | None = None
        self._coords: list[list[int]] = []  # systematic coordinates of rows beyond the first k

    @property
    def emitted(self) -> int:
        return len(self.rows)

    def _draw(self) -> list[int]:
        return [self._rng.randrange(256) for _ in range(self.group.k)]

    def _accept(self, row: list[int]) -> bool:
        k = self.group.k
        if len(self.rows) < k:
            return any(gf.reduce_against(row, self._echelon))
        a = gf.vec_mat(row, self._basis_inv)
        # [I; A] generates an MDS family iff every square submatrix of A is
        # nonsingular; only submatrices containing the new row are new.
        prev = self._coords
        cost = sum(comb(len(prev), t - 1) * comb(k, t) for t in range(1, min(len(prev) + 1, k) + 1))
        if cost > MDS_CHECK_BUDGET:
            return any(a)
        if not all(a):
            return False
        mul = gf.MUL_ROWS
        pairs = list(itertools.combinations(range(k), 2))
        for o in prev:
            for i, j in pairs:
                if mul[a[i]][o[j]] == mul[a[j]][o[i]]:
                    return False
        for t in range(3, min(len(prev) + 1, k) + 1):
            for others in itertools.combinations(prev, t - 1):
                for cols in itertools.combinations(range(k), t):
                    sub = [[a[c] for c in cols]] + [[o[c] for c in cols] for o in others]
                    if gf.determinant(sub) == 0:
                        return False
        return True

    def _add_echelon(self, row: list[int]) -> None:
        row = gf.reduce_against(row, self._echelon)
        col = next(j for j, v in enumerate(row) if v)
        m = gf.MUL_ROWS[gf.INV[row[col]]]
        row = [m[v] for v in row]
        for other_col, other in self._echelon.items():
            c = other[col]
            if c:
                mc = gf.MUL_ROWS[c]
                self._echelon[other_col] = [a ^ mc[b] for a, b in zip(other, row)]
        self._echelon[col] = row

    def _emit(self, row: list[int]) -> CodedChunk:
        k = self.group.k
        self.rows.append(row)
        if len(self.rows) <= k:
            self._add_echelon(row)
        if len(self.rows) == k:
            self._basis_inv = gf.matrix_inverse(self.rows)
        elif len(self.rows) > k:
            self._coords.append(gf.vec_mat(row, self._basis_inv))
        products = gf.MUL[np.array(row, dtype=np.uint8)[:, None], self._src]
        return CodedChunk(coeffs=bytes(row), data=np.bitwise_xor.reduce(products, axis=0).tobytes())

    def next_chunks(self, n: int) -> list[CodedChunk]:
        out = []
        for _ in range(n):
            for _ in range(MAX_REDRAWS):
                row = self._draw()
                if self._accept(row):
                    break
            else:
                raise RuntimeError("could not draw an independent coefficient row")
            out.append(self._emit(row))
        return out


def rlnc_encode(group: RlncGroup, k_prime: int, rng_seed: int) -> list[CodedChunk]:
    if k_prime < group.k:
        raise BadParam(f"k_prime={k_prime} must be >= k={group.k}")
    return RlncEncoder(group, rng_seed).next_chunks(k_prime)


def pack_group(
    coded: Sequence[CodedChunk],
    h: int,
    *,
    k: int,
    group_id: int,
    directive: WashDirective | None = None,
    tos: int = 0,
    flow_id: int = 0,
    seq_base: int = 0,
) -> list[QualitativePacket]:
    """Place coded chunks ``h`` at a time into CODED_RANDOM packets."""
    if h < 1:
        raise BadParam("h must be >= 1")
    if directive is None:
        directive = WashDirective(q_function=QFunction.CODED_RANDOM)
    elif directive.q_function != QFunction.CODED_RANDOM:
        raise BadParam("coded packets must use CODED_RANDOM")
    packets = []
    for n, start in enumerate(range(0, len(coded), h)):
        chunk_slice = coded[start : start + h]
        packets.append(
            make_coded_packet(
                [(c.coeffs, c.data) for c in chunk_slice],
                directive,
                k=k,
                group_id=group_id,
                tos=tos,
                flow_id=flow_id,
                seq=seq_base + n,
            )
        )
    return packets


@dataclass
class DecoderState:
    """Incremental Gauss-Jordan decoder.

    Innovative chunks are stored as received. Elimination runs on the
    coefficient vectors, each pivot row also recording which combination of
    stored chunks it is, so the data bytes are combined once, in :meth:`solve`.
    """

    k: int
    chunk_len: int
    received: list[bytes] = field(default_factory=list)
    # pivot column -> coefficients (k) followed by the combination of received chunks (k)
    pivots: dict[int, list[int]] = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def add(self, chunk: CodedChunk) -> tuple[int, bool]:
        if len(chunk.coeffs) != self.k or len(chunk.data) != self.chunk_len:
            raise LengthMismatch("coded chunk does not match the decoder's group shape")
        if self.rank == self.k:
            return self.rank, False
        tag = [0] * self.k
        tag[len(self.received)] = 1
        row = gf.reduce_against(list(chunk.coeffs) + tag, self.pivots)
        col = next((j for j in range(self.k) if row[j]), None)
        if col is None:
            return self.rank, False
        m = gf.MUL_ROWS[gf.INV[row[col]]]
        row = [m[v] for v in row]
        for other_col, other in self.pivots.items():
            c = other[col]
            if c:
                mc = gf.MUL_ROWS[c]
                self.pivots[other_col] = [a ^ mc[b] for a, b in zip(other, row)]
        self.pivots[col] = row
        self.received.append(chunk.data)
        return self.rank, True

    def solve(self) -> list[bytes]:
        if self.rank < self.k:
            raise InsufficientRank(self.rank, self.k)
        combo = np.array([self.pivots[j][self.k :] for j in range(self.k)], dtype=np.uint8)
        data = np.frombuffer(b"".join(self.received), dtype=np.uint8).reshape(self.k, self.chunk_len)
        products = gf.MUL[combo[:, :, None], data[None, :, :]]
        return [row.tobytes() for row in np.bitwise_xor.reduce(products, axis=1)]


def decoder_add(state: DecoderState, chunk: CodedChunk) -> tuple[int, bool]:
    return state.add(chunk)


def decoder_solve(state: DecoderState) -> list[bytes]:
    return state.solve()
