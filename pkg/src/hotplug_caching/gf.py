"""Exact arithmetic in prime fields GF(q) and the dense linear algebra on top.

Matrices are stored as numpy int64 arrays with all entries reduced mod q.
Since q is capped at 2**15, products and row operations stay far below the
int64 range, so everything remains exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DivisionByZero, ModulusMismatch

MAX_MODULUS = 1 << 15


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def check_modulus(q: int) -> int:
    if not isinstance(q, int) or not is_prime(q):
        raise ConfigurationError(f"modulus {q} is not prime")
    if q > MAX_MODULUS:
        raise ConfigurationError(f"modulus {q} exceeds the 2^15 cap")
    return q


@dataclass(frozen=True)
class FieldElement:
    """An element of GF(q), stored as an integer in [0, q)."""

    value: int
    modulus: int

    def __post_init__(self):
        check_modulus(self.modulus)
        object.__setattr__(self, "value", self.value % self.modulus)

    def _coerce(self, other: "FieldElement") -> "FieldElement":
        if not isinstance(other, FieldElement):
            return FieldElement(other, self.modulus)
        if other.modulus != self.modulus:
            raise ModulusMismatch(f"{self.modulus} != {other.modulus}")
        return other

    def __add__(self, other):
        other = self._coerce(other)
        return FieldElement(self.value + other.value, self.modulus)

    def __sub__(self, other):
        other = self._coerce(other)
        return FieldElement(self.value - other.value, self.modulus)

    def __mul__(self, other):
        other = self._coerce(other)
        return FieldElement(self.value * other.value, self.modulus)

    def __neg__(self):
        return FieldElement(-self.value, self.modulus)

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise DivisionByZero("zero has no multiplicative inverse")
        return FieldElement(pow(self.value, -1, self.modulus), self.modulus)

    def __truediv__(self, other):
        other = self._coerce(other)
        return self * other.inverse()


def fe_arith(a: FieldElement, b: FieldElement, op: str) -> FieldElement:
    """Dispatch one of {add, sub, mul, div} on two field elements."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ConfigurationError(f"unknown op {op!r}")


def _as_array(data, q: int) -> np.ndarray:
    a = np.asarray(data, dtype=np.int64)
    if a.ndim != 2:
        raise ConfigurationError("matrix data must be two-dimensional")
    return np.mod(a, q)


class FieldMatrix:
    """Dense matrix over GF(q) with exact Gaussian-elimination kernels.

    Pivoting is first-nonzero with lowest-row-index tie breaking, so rank,
    solve and nullspace results are reproducible bit for bit.
    """

    __slots__ = ("data", "modulus")

    def __init__(self, data, modulus: int):
        check_modulus(modulus)
        self.modulus = modulus
        self.data = _as_array(data, modulus)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @classmethod
    def identity(cls, n: int, q: int) -> "FieldMatrix":
        return cls(np.eye(n, dtype=np.int64), q)

    @classmethod
    def zeros(cls, rows: int, cols: int, q: int) -> "FieldMatrix":
        return cls(np.zeros((rows, cols), dtype=np.int64), q)

    def entry(self, i: int, j: int) -> FieldElement:
        return FieldElement(int(self.data[i, j]), self.modulus)

    def take_rows(self, indices) -> "FieldMatrix":
        return FieldMatrix(self.data[list(indices), :], self.modulus)

    def stack(self, other: "FieldMatrix") -> "FieldMatrix":
        if other.modulus != self.modulus:
            raise ModulusMismatch("cannot stack matrices over different fields")
        return FieldMatrix(np.vstack([self.data, other.data]), self.modulus)

    def __matmul__(self, other):
        q = self.modulus
        if isinstance(other, FieldMatrix):
            if other.modulus != q:
                raise ModulusMismatch("matmul over different fields")
            return FieldMatrix(self.data @ other.data, q)
        return np.mod(self.data @ np.asarray(other, dtype=np.int64), q)

    def __eq__(self, other):
        return (
            isinstance(other, FieldMatrix)
            and self.modulus == other.modulus
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self):
        return f"FieldMatrix({self.data.tolist()}, modulus={self.modulus})"


def rref(a: np.ndarray, q: int, limit: int | None = None):
    """Reduced row echelon form over GF(q). Returns (rref, pivot columns)."""
    a = np.mod(np.asarray(a, dtype=np.int64), q).copy()
    rows, cols = a.shape
    stop = cols if limit is None else limit
    pivots = []
    r = 0
    for c in range(stop):
        if r == rows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        inv = pow(int(a[r, c]), -1, q)
        a[r] = (a[r] * inv) % q
        col = a[:, c].copy()
        col[r] = 0
        if np.any(col):
            a = (a - np.outer(col, a[r])) % q
        pivots.append(c)
        r += 1
    return a, pivots


def mat_rank(m: FieldMatrix) -> int:
    """Row rank (= column rank) of the matrix over GF(q)."""
    if m.rows == 0 or m.cols == 0:
        return 0
    _, pivots = rref(m.data, m.modulus)
    return len(pivots)


def array_rank(a: np.ndarray, q: int) -> int:
    if a.shape[0] == 0 or a.shape[1] == 0:
        return 0
    _, pivots = rref(a, q)
    return len(pivots)


def mat_solve(m: FieldMatrix, b) -> np.ndarray | None:
    """Return some x with M x = b, or None when the system is inconsistent.

    b may be a vector or a matrix of stacked right-hand sides; the result has
    matching shape. Free variables are set to zero, so square full-rank
    systems return the unique solution.
    """
    q = m.modulus
    bb = np.mod(np.asarray(b, dtype=np.int64), q)
    vector = bb.ndim == 1
    if vector:
        bb = bb[:, None]
    if bb.shape[0] != m.rows:
        raise ConfigurationError("right-hand side has wrong number of rows")
    aug = np.hstack([m.data, bb])
    red, pivots = rref(aug, q, limit=m.cols)
    # Any nonzero row past the pivot rows signals inconsistency.
    r = len(pivots)
    if np.any(red[r:, m.cols:]):
        return None
    x = np.zeros((m.cols, bb.shape[1]), dtype=np.int64)
    for i, c in enumerate(pivots):
        x[c] = red[i, m.cols:]
    return x[:, 0] if vector else x


def mat_nullspace(m: FieldMatrix) -> list[np.ndarray]:
    """Basis of the right nullspace, in deterministic free-column order."""
    q = m.modulus
    if m.cols == 0:
        return []
    if m.rows == 0:
        return [np.eye(m.cols, dtype=np.int64)[i] for i in range(m.cols)]
    red, pivots = rref(m.data, q)
    free = [c for c in range(m.cols) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(m.cols, dtype=np.int64)
        v[f] = 1
        for i, c in enumerate(pivots):
            v[c] = (-red[i, f]) % q
        basis.append(v)
    return basis


def mat_inverse(m: FieldMatrix) -> FieldMatrix:
    if m.rows != m.cols:
        raise ConfigurationError("only square matrices can be inverted")
    sol = mat_solve(m, np.eye(m.rows, dtype=np.int64))
    if sol is None or mat_rank(m) != m.rows:
        raise ConfigurationError("matrix is singular")
    return FieldMatrix(sol, m.modulus)


def solve_with_cache(cache: dict, a: np.ndarray, q: int, rhs: np.ndarray) -> np.ndarray | None:
    """mat_solve with per-matrix memoization for repeated square systems.

    Square invertible coefficient matrices get their inverse cached keyed by
    content, so decoding many demand cells against the same generator rows
    costs one elimination plus a multiply per cell.
    """
    a = np.mod(np.asarray(a, dtype=np.int64), q)
    if a.shape[0] == a.shape[1]:
        key = (a.shape[0], a.tobytes())
        inv = cache.get(key)
        if inv is None:
            m = FieldMatrix(a, q)
            if mat_rank(m) == a.shape[0]:
                inv = mat_inverse(m).data
                cache[key] = inv
        if inv is not None:
            return np.mod(inv @ np.mod(np.asarray(rhs, dtype=np.int64), q), q)
    return mat_solve(FieldMatrix(a, q), rhs)
