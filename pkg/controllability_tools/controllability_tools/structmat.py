"""Mixed fixed/free structured matrices and exact arithmetic over GF(p)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from controllability_tools.errors import PrimeDividesDenominator

logger = logging.getLogger(__name__)

DEFAULT_PRIME = 2**31 - 1
FALLBACK_PRIMES = (2147483647, 2147483629, 2147483587, 2147483579, 2147483563)
MIN_PRIME = 2**30


@dataclass(frozen=True)
class FieldConfig:
    prime: int = DEFAULT_PRIME
    trials: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.prime < MIN_PRIME:
            raise ValueError(f"Field prime must be at least 2**30, got {self.prime}")
        if self.prime >= 2**31:
            # products of two residues must fit in int64
            raise ValueError(f"Field prime must be below 2**31, got {self.prime}")
        if self.trials < 1:
            raise ValueError("FieldConfig needs at least one trial")
        if self.seed < 0:
            raise ValueError("Seed must be non-negative")

    def rng(self, stream=0):
        """Returns the pseudorandom generator for one stream position."""
        return np.random.default_rng([self.seed, int(stream)])

    def with_next_prime(self):
        """Returns a copy using the next prime of the fallback list."""
        later = [p for p in FALLBACK_PRIMES if p < self.prime]
        if not later:
            raise ValueError(f"No fallback prime below {self.prime}")
        return FieldConfig(prime=later[0], trials=self.trials, seed=self.seed)


def _as_fraction(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator()
    return Fraction(value)


@dataclass(frozen=True)
class StructuredMatrix:
    """
    Mixed matrix X = Q + T.

    The fixed part Q maps positions to exact rationals. The free part T is
    a set of positions holding independent indeterminates; a position may
    belong to both parts.
    """

    rows: int
    cols: int
    fixed: dict = field(default_factory=dict)
    free: frozenset = frozenset()

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError("StructuredMatrix dimensions must be non-negative")
        fixed = {}
        for (r, c), value in dict(self.fixed).items():
            self._check_position(r, c)
            q = _as_fraction(value)
            if q != 0:
                fixed[(int(r), int(c))] = q
        free = frozenset((int(r), int(c)) for r, c in self.free)
        for r, c in free:
            self._check_position(r, c)
        object.__setattr__(self, "fixed", fixed)
        object.__setattr__(self, "free", free)

    def _check_position(self, r, c):
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise ValueError(f"Position ({r}, {c}) outside a {self.rows}x{self.cols} matrix")

    def __hash__(self):
        return hash((self.rows, self.cols, frozenset(self.fixed.items()), self.free))

    @property
    def shape(self):
        return self.rows, self.cols

    @classmethod
    def zeros(cls, rows, cols):
        return cls(rows, cols)

    @classmethod
    def identity(cls, n):
        return cls(n, n, {(i, i): 1 for i in range(n)})

    @classmethod
    def from_dense(cls, values, free=()):
        """Builds a matrix from a nested sequence of rationals."""
        dense = [list(row) for row in values]
        rows = len(dense)
        cols = len(dense[0]) if rows else 0
        fixed = {(r, c): v for r, row in enumerate(dense) for c, v in enumerate(row) if v != 0}
        return cls(rows, cols, fixed, frozenset(free))

    @classmethod
    def free_diagonal(cls, n, indices):
        return cls(n, n, free=frozenset((i, i) for i in indices))

    def support(self):
        """Positions that are nonzero for generic parameter values."""
        return frozenset(self.fixed) | self.free

    def fixed_part(self):
        return StructuredMatrix(self.rows, self.cols, self.fixed)

    def free_part(self):
        return StructuredMatrix(self.rows, self.cols, free=self.free)

    def __add__(self, other):
        if self.shape != other.shape:
            raise ValueError(f"Cannot add {self.shape} and {other.shape} matrices")
        fixed = dict(self.fixed)
        for pos, value in other.fixed.items():
            fixed[pos] = fixed.get(pos, 0) + value
        return StructuredMatrix(self.rows, self.cols, fixed, self.free | other.free)

    def __neg__(self):
        return StructuredMatrix(self.rows, self.cols, {p: -v for p, v in self.fixed.items()}, self.free)

    def __sub__(self, other):
        return self + (-other)

    def transpose(self):
        return StructuredMatrix(
            self.cols,
            self.rows,
            {(c, r): v for (r, c), v in self.fixed.items()},
            frozenset((c, r) for r, c in self.free),
        )

    def submatrix(self, rows=None, cols=None):
        """Selects rows and columns (in the given order)."""
        rows = list(range(self.rows)) if rows is None else list(rows)
        cols = list(range(self.cols)) if cols is None else list(cols)
        row_at = {r: i for i, r in enumerate(rows)}
        col_at = {c: j for j, c in enumerate(cols)}
        fixed = {
            (row_at[r], col_at[c]): v
            for (r, c), v in self.fixed.items()
            if r in row_at and c in col_at
        }
        free = frozenset((row_at[r], col_at[c]) for r, c in self.free if r in row_at and c in col_at)
        return StructuredMatrix(len(rows), len(cols), fixed, free)

    def fixed_dense(self):
        """Fixed part as a nested list of Fractions."""
        dense = [[Fraction(0)] * self.cols for _ in range(self.rows)]
        for (r, c), v in self.fixed.items():
            dense[r][c] = v
        return dense

    def to_json(self):
        return {
            "rows": self.rows,
            "cols": self.cols,
            "fixed": [
                [r, c, f"{v.numerator}/{v.denominator}"] for (r, c), v in sorted(self.fixed.items())
            ],
            "free": [[r, c] for r, c in sorted(self.free)],
        }

    @classmethod
    def from_json(cls, data):
        fixed = {(int(r), int(c)): Fraction(value) for r, c, value in data.get("fixed", [])}
        free = frozenset((int(r), int(c)) for r, c in data.get("free", []))
        return cls(int(data["rows"]), int(data["cols"]), fixed, free)


def hstack(*matrices):
    """Concatenates structured matrices side by side."""
    if not matrices:
        raise ValueError("Cannot stack an empty list of matrices")
    rows = matrices[0].rows
    fixed, free, offset = {}, set(), 0
    for m in matrices:
        if m.rows != rows:
            raise ValueError("All blocks of an hstack need the same row count")
        fixed.update({(r, c + offset): v for (r, c), v in m.fixed.items()})
        free.update((r, c + offset) for r, c in m.free)
        offset += m.cols
    return StructuredMatrix(rows, offset, fixed, frozenset(free))


def vstack(*matrices):
    """Concatenates structured matrices top to bottom."""
    return hstack(*(m.transpose() for m in matrices)).transpose()


@dataclass(frozen=True, eq=False)
class DenseFieldMatrix:
    """A dense matrix of residues modulo ``prime`` backed by an int64 array."""

    prime: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.int64)
        if data.ndim != 2:
            raise ValueError("DenseFieldMatrix needs a two dimensional array")
        object.__setattr__(self, "data", data % self.prime)

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def entries(self):
        """Row-major tuple of field elements."""
        return tuple(int(v) for v in self.data.ravel())

    def __eq__(self, other):
        return (
            isinstance(other, DenseFieldMatrix)
            and self.prime == other.prime
            and np.array_equal(self.data, other.data)
        )

    def columns(self, cols):
        return DenseFieldMatrix(self.prime, self.data[:, list(cols)])


def reduce_fraction(value, prime):
    """Maps a rational to GF(prime)."""
    value = _as_fraction(value)
    if value.denominator % prime == 0:
        raise PrimeDividesDenominator(value, prime)
    return value.numerator * pow(value.denominator, -1, prime) % prime


def fixed_array(matrix, prime):
    """Fixed part of ``matrix`` reduced modulo ``prime``."""
    out = np.zeros((matrix.rows, matrix.cols), dtype=np.int64)
    for (r, c), v in matrix.fixed.items():
        out[r, c] = reduce_fraction(v, prime)
    return out


def draw_free_values(matrix, cfg, draw):
    """
    Draws one uniform nonzero field element per free position.

    Args:
        matrix (StructuredMatrix): Matrix whose free positions are filled.
        cfg (FieldConfig): Field parameters.
        draw (int | numpy.random.Generator): Stream position or generator.

    Returns:
        dict: Position to residue, filled in sorted position order.
    """
    rng = cfg.rng(draw) if isinstance(draw, (int, np.integer)) else draw
    positions = sorted(matrix.free)
    values = rng.integers(1, cfg.prime, size=len(positions), dtype=np.int64)
    return {pos: int(v) for pos, v in zip(positions, values)}


def free_array(matrix, values, prime):
    out = np.zeros((matrix.rows, matrix.cols), dtype=np.int64)
    for (r, c) in matrix.free:
        out[r, c] = values[(r, c)]
    return out % prime


def substitute(matrix, cfg, draw=0):
    """
    Replaces every free entry by a random nonzero field element.

    Args:
        matrix (StructuredMatrix): Matrix to realize.
        cfg (FieldConfig): Field parameters.
        draw (int | numpy.random.Generator): Stream position or generator.

    Returns:
        DenseFieldMatrix: Q + T evaluated at the drawn point.
    """
    values = draw_free_values(matrix, cfg, draw)
    data = (fixed_array(matrix, cfg.prime) + free_array(matrix, values, cfg.prime)) % cfg.prime
    return DenseFieldMatrix(cfg.prime, data)


def row_reduce(array, prime, reduced=True):
    """
    Gaussian elimination over GF(prime).

    Args:
        array (array-like): Integer matrix.
        prime (int): Field modulus below 2**31.
        reduced (bool): Eliminate above pivots too (reduced row echelon form).

    Returns:
        tuple: The echelon matrix and the list of pivot columns.
    """
    a = np.array(array, dtype=np.int64) % prime
    if a.ndim != 2:
        raise ValueError("row_reduce needs a two dimensional array")
    n_rows, n_cols = a.shape
    pivots = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        nonzero = np.flatnonzero(a[r:, c])
        if nonzero.size == 0:
            continue
        p = r + int(nonzero[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        inv = pow(int(a[r, c]), -1, prime)
        a[r] = a[r] * inv % prime
        targets = np.arange(n_rows) if reduced else np.arange(r + 1, n_rows)
        targets = targets[(targets != r) & (a[targets, c] != 0)]
        if targets.size:
            factors = a[targets, c]
            a[targets] = (a[targets] - factors[:, None] * a[r][None, :] % prime) % prime
        pivots.append(c)
        r += 1
    return a, pivots


def rank_mod(array, prime):
    array = np.asarray(array)
    if array.size == 0:
        return 0
    return len(row_reduce(array, prime, reduced=False)[1])


def rank_gf(matrix):
    """Exact rank of a DenseFieldMatrix."""
    return rank_mod(matrix.data, matrix.prime)


def det_mod(array, prime):
    """Determinant over GF(prime) of a square matrix."""
    a = np.array(array, dtype=np.int64) % prime
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"Determinant needs a square matrix, got {a.shape}")
    det = 1
    for c in range(n):
        nonzero = np.flatnonzero(a[c:, c])
        if nonzero.size == 0:
            return 0
        p = c + int(nonzero[0])
        if p != c:
            a[[c, p]] = a[[p, c]]
            det = -det
        pivot = int(a[c, c])
        det = det * pivot % prime
        if c + 1 < n:
            factors = a[c + 1:, c] * pow(pivot, -1, prime) % prime
            a[c + 1:] = (a[c + 1:] - factors[:, None] * a[c][None, :] % prime) % prime
    return det % prime


def inverse_mod(array, prime):
    """Inverse over GF(prime); raises ValueError when singular."""
    a = np.array(array, dtype=np.int64) % prime
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"Inverse needs a square matrix, got {a.shape}")
    reduced, pivots = row_reduce(np.hstack([a, np.eye(n, dtype=np.int64)]), prime)
    if pivots[:n] != list(range(n)):
        raise ValueError("Matrix is singular over the field")
    return reduced[:, n:]


def nullspace_mod(array, prime):
    """
    Basis of the right null space over GF(prime).

    Returns:
        numpy.ndarray: One basis vector per row, shape (cols - rank, cols).
    """
    a = np.asarray(array, dtype=np.int64)
    n_cols = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(n_cols, dtype=np.int64)
    reduced, pivots = row_reduce(a, prime)
    free_cols = [c for c in range(n_cols) if c not in set(pivots)]
    basis = np.zeros((len(free_cols), n_cols), dtype=np.int64)
    for k, f in enumerate(free_cols):
        basis[k, f] = 1
        for i, pc in enumerate(pivots):
            basis[k, pc] = (-reduced[i, f]) % prime
    return basis


def generic_rank(matrix, cfg):
    """
    Generic rank of a structured matrix by repeated random substitution.

    Args:
        matrix (StructuredMatrix): The mixed matrix.
        cfg (FieldConfig): Prime, trial count and seed.

    Returns:
        int: Maximum rank observed over ``cfg.trials`` substitutions.
    """
    if matrix.rows == 0 or matrix.cols == 0:
        return 0
    while True:
        try:
            return max(rank_gf(substitute(matrix, cfg, t)) for t in range(cfg.trials))
        except PrimeDividesDenominator as exc:
            logger.warning("%s; retrying with the next fallback prime", exc)
            cfg = cfg.with_next_prime()


def rational_row_reduce(rows):
    """Reduced row echelon form over the rationals; returns (matrix, pivots)."""
    a = [[Fraction(v) for v in row] for row in rows]
    n_rows = len(a)
    n_cols = len(a[0]) if n_rows else 0
    pivots = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        p = next((i for i in range(r, n_rows) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        pivot = a[r][c]
        a[r] = [v / pivot for v in a[r]]
        for i in range(n_rows):
            if i != r and a[i][c] != 0:
                factor = a[i][c]
                a[i] = [x - factor * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


def rational_rank(rows):
    if not rows or not rows[0]:
        return 0
    return len(rational_row_reduce(rows)[1])


def rational_inverse(rows):
    """Exact inverse of a square rational matrix."""
    n = len(rows)
    augmented = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(rows)]
    reduced, pivots = rational_row_reduce(augmented)
    if pivots[:n] != list(range(n)):
        raise ValueError("Matrix is singular")
    return [row[n:] for row in reduced]


def rational_reconstruct(residue, prime):
    """
    Smallest fraction a/b with a = b * residue (mod prime), |a|, b < sqrt(prime / 2).

    Returns:
        Fraction | None: The fraction, or None when no small one exists.
    """
    bound = int((prime // 2) ** 0.5)
    r0, r1 = prime, int(residue) % prime
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if s1 == 0 or abs(s1) > bound:
        return None
    return Fraction(r1, s1)
