"""Construction and brute-force validation of MDS generator matrices.

The constructor is a Vandermonde matrix on the consecutive nonzero nodes
1..code_len; any info_len rows with distinct nodes are then invertible.
One extra node (code_len + 1) is reserved for constructions that need a row
independent of every user block, which is why the field must satisfy
q > code_len.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import EnumerationGuardExceeded, FieldTooSmall
from .gf import FieldMatrix, array_rank, check_modulus

ASSERT_MDS_GUARD = 10**6


@dataclass(frozen=True)
class MdsSpec:
    """Parameters of an MDS code: info_len data rows, code_len coded rows."""

    info_len: int
    code_len: int
    modulus: int

    def __post_init__(self):
        check_modulus(self.modulus)
        if not 0 < self.info_len <= self.code_len:
            raise FieldTooSmall(
                f"need 0 < info_len <= code_len, got {self.info_len}, {self.code_len}"
            )


def vandermonde_row(node: int, info_len: int, q: int) -> np.ndarray:
    return np.array([pow(node % q, e, q) for e in range(info_len)], dtype=np.int64)


def vandermonde(spec: MdsSpec) -> FieldMatrix:
    """code_len x info_len Vandermonde generator on nodes 1..code_len."""
    q = spec.modulus
    if q <= spec.code_len:
        raise FieldTooSmall(
            f"q={q} too small for {spec.code_len} distinct nonzero nodes"
        )
    rows = [vandermonde_row(x, spec.info_len, q) for x in range(1, spec.code_len + 1)]
    return FieldMatrix(np.vstack(rows), q)


def extension_row(spec: MdsSpec) -> np.ndarray:
    """The reserved extra Vandermonde row at node code_len + 1."""
    q = spec.modulus
    if q <= spec.code_len + 1:
        raise FieldTooSmall(f"q={q} leaves no headroom node beyond {spec.code_len}")
    return vandermonde_row(spec.code_len + 1, spec.info_len, q)


@dataclass(frozen=True)
class MdsCheck:
    passed: bool
    witness: tuple[int, ...] | None  # offending row index set on failure

    def __bool__(self):
        return self.passed


def assert_mds(g: FieldMatrix, k: int) -> MdsCheck:
    """Brute-force MDS oracle: every k-row submatrix must have rank k.

    This is the ground truth every placement matrix is checked against; it
    enumerates all C(rows, k) submatrices and is therefore guarded.
    """
    if k > g.rows:
        raise FieldTooSmall(f"k={k} exceeds row count {g.rows}")
    count = math.comb(g.rows, k)
    if count > ASSERT_MDS_GUARD:
        raise EnumerationGuardExceeded(
            f"C({g.rows},{k})={count} submatrices exceeds the {ASSERT_MDS_GUARD} guard"
        )
    for combo in itertools.combinations(range(g.rows), k):
        if array_rank(g.data[list(combo), :], g.modulus) != k:
            return MdsCheck(False, combo)
    return MdsCheck(True, None)
