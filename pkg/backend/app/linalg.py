"""
Exact graded linear algebra over the rationals.

Vectors are sparse ``{index: QQ}`` dicts and all row reduction goes through
sympy's DomainMatrix. Inside the engine a degree ``k`` is a polynomial degree;
public GradedSpace objects are keyed by ``2k`` because linear functions carry
degree 2.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from sympy import Rational
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from .exceptions import CapTooLow, InternalTripwire, NotSymmetric, OddDegree

logger = logging.getLogger(__name__)

Vector = Dict[int, object]


# Scalars
def qq(value):
    """Coerce ints, Fractions, sympy Rationals and "p/q" strings into QQ."""
    if isinstance(value, str):
        return QQ.from_sympy(Rational(value.strip()))
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    return QQ.convert(value)


def fmt(value) -> str:
    return str(QQ.to_sympy(value))


# Sparse vectors
def sparse(values: Sequence) -> Vector:
    return {i: v for i, v in enumerate(values) if v}


def dense(vec: Vector, dim: int) -> list:
    out = [QQ.zero] * dim
    for i, v in vec.items():
        out[i] = v
    return out


def axpy(target: Vector, scale, vec: Vector) -> Vector:
    """target += scale * vec (in place)."""
    for i, v in vec.items():
        s = target.get(i, QQ.zero) + scale * v
        if s:
            target[i] = s
        else:
            target.pop(i, None)
    return target


def combine(coeffs: Sequence, vectors: Sequence[Vector]) -> Vector:
    out: Vector = {}
    for c, vec in zip(coeffs, vectors):
        if c:
            axpy(out, c, vec)
    return out


def shift_indices(vec: Vector, offset: int) -> Vector:
    return {i + offset: v for i, v in vec.items()}


def dot(a: Sequence, b: Sequence):
    total = QQ.zero
    for x, y in zip(a, b):
        if x and y:
            total += x * y
    return total


# Row reduction
def _matrix(rows: Sequence[Vector], ncols: int) -> DomainMatrix:
    dod = {i: dict(row) for i, row in enumerate(rows) if row}
    return DomainMatrix.from_dod(dod, (len(rows), ncols), QQ)


def rref(rows: Sequence[Vector], ncols: int) -> Tuple[List[Vector], Tuple[int, ...]]:
    """Nonzero rows of the reduced row echelon form and the pivot columns."""
    if ncols == 0 or not any(rows):
        return [], ()
    reduced, pivots = _matrix(rows, ncols).rref()
    dod = reduced.to_dod()
    return [dict(dod.get(i, {})) for i in range(len(pivots))], tuple(pivots)


def rank(rows: Sequence[Vector], ncols: int) -> int:
    return len(rref(rows, ncols)[1])


def nullspace(rows: Sequence[Vector], ncols: int) -> List[Vector]:
    """Kernel basis of ``x -> rows . x``, one vector per free column."""
    reduced, pivots = rref(rows, ncols)
    pivot_set = set(pivots)
    kernel: Dict[int, Vector] = {c: {c: QQ.one} for c in range(ncols) if c not in pivot_set}
    for row, p in zip(reduced, pivots):
        for c, v in row.items():
            if c in kernel:
                kernel[c][p] = -v
    return [kernel[c] for c in sorted(kernel)]


def as_columns(vectors: Sequence[Vector], dim: int) -> List[Vector]:
    """Rows of the matrix whose columns are ``vectors``."""
    rows: List[Vector] = [dict() for _ in range(dim)]
    for j, vec in enumerate(vectors):
        for i, v in vec.items():
            rows[i][j] = v
    return rows


def independent(vectors: Sequence[Vector], dim: int) -> List[int]:
    """Indices of the earliest-first maximal independent subfamily."""
    if not vectors:
        return []
    return list(rref(as_columns(vectors, dim), len(vectors))[1])


def span_rank(vectors: Sequence[Vector], dim: int) -> int:
    return len(independent(vectors, dim))


def solve(basis: Sequence[Vector], targets: Sequence[Vector], dim: int) -> List[Optional[list]]:
    """
    Coefficients expressing each target in ``basis`` (None when outside the span).

    For a dependent basis the particular solution with zero free coefficients is
    returned, which keeps every lift deterministic.
    """
    if not targets:
        return []
    nb = len(basis)
    reduced, pivots = rref(as_columns(list(basis) + list(targets), dim), nb + len(targets))
    lead = [p for p in pivots if p < nb]
    r = len(lead)
    out: List[Optional[list]] = []
    for t in range(len(targets)):
        col = nb + t
        if any(row.get(col) for row in reduced[r:]):
            out.append(None)
            continue
        coeffs = [QQ.zero] * nb
        for i, p in enumerate(lead):
            coeffs[p] = reduced[i].get(col, QQ.zero)
        out.append(coeffs)
    return out


def solve_one(basis: Sequence[Vector], target: Vector, dim: int) -> list:
    (coeffs,) = solve(basis, [target], dim)
    if coeffs is None:
        raise InternalTripwire("vector is not in the expected span")
    return coeffs


class QuotientBasis:
    """Representatives of span(vectors) / span(sub), chosen by earliest pivots."""

    def __init__(self, sub: Sequence[Vector], vectors: Sequence[Vector], dim: int):
        order = independent(list(sub) + list(vectors), dim)
        ns = len(sub)
        self.dim = dim
        self.sub = [sub[i] for i in order if i < ns]
        self.reps = [vectors[i - ns] for i in order if i >= ns]

    def __len__(self) -> int:
        return len(self.reps)

    def coordinates(self, targets: Sequence[Vector]) -> List[list]:
        full = self.sub + self.reps
        out = []
        for coeffs in solve(full, targets, self.dim):
            if coeffs is None:
                raise InternalTripwire("vector lies outside the quotient's ambient span")
            out.append(coeffs[len(self.sub):])
        return out


# Monomials
@lru_cache(maxsize=None)
def monomials(nvars: int, degree: int, width: int) -> Tuple[Tuple[int, ...], ...]:
    """Exponent tuples of a total degree in the first ``nvars`` of ``width`` variables."""
    if degree < 0 or (nvars == 0 and degree > 0):
        return ()
    out = []
    for combo in combinations_with_replacement(range(nvars), degree):
        exps = [0] * width
        for i in combo:
            exps[i] += 1
        out.append(tuple(exps))
    return tuple(sorted(out, reverse=True))


@lru_cache(maxsize=None)
def monomial_index(nvars: int, degree: int, width: int) -> Dict[Tuple[int, ...], int]:
    return {m: i for i, m in enumerate(monomials(nvars, degree, width))}


# Graded spaces and maps
@dataclass(frozen=True)
class GradedSpace:
    """Finite graded vector space; keys are (even) cohomological degrees."""

    dims: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for d, n in sorted(self.dims.items()):
            if n < 0:
                raise ValueError(f"negative dimension {n} in degree {d}")
            if n == 0:
                continue
            if d % 2:
                raise OddDegree(f"nonzero dimension {n} in odd degree {d}")
            clean[int(d)] = int(n)
        object.__setattr__(self, "dims", clean)

    @classmethod
    def from_counts(cls, counts: Dict[int, int]) -> "GradedSpace":
        """Build from polynomial-degree counts."""
        return cls({2 * k: n for k, n in counts.items()})

    def __getitem__(self, degree: int) -> int:
        return self.dims.get(degree, 0)

    def degrees(self) -> List[int]:
        return sorted(self.dims)

    def total(self) -> int:
        return sum(self.dims.values())

    def shifted(self, by: int) -> "GradedSpace":
        return GradedSpace({d + by: n for d, n in self.dims.items()})

    def betti(self) -> str:
        return " ".join(f"{d}:{n}" for d, n in sorted(self.dims.items()))


@dataclass
class GradedMap:
    """
    Homogeneous map between graded spaces.

    ``blocks[d]`` lists the images of the degree-d source basis vectors as sparse
    vectors over the degree ``d + shift`` target basis.
    """

    source: GradedSpace
    target: GradedSpace
    shift: int
    blocks: Dict[int, List[Vector]] = field(default_factory=dict)

    def __post_init__(self):
        if self.shift % 2:
            raise OddDegree(f"map of odd degree {self.shift}")

    def block(self, degree: int) -> List[Vector]:
        cols = self.blocks.get(degree)
        if cols is None:
            return [dict() for _ in range(self.source[degree])]
        return cols

    def apply(self, degree: int, vec: Vector) -> Vector:
        return combine([vec.get(j, QQ.zero) for j in range(self.source[degree])], self.block(degree))

    def rank(self, degree: int) -> int:
        return span_rank(self.block(degree), self.target[degree + self.shift])

    def kernel(self, degree: int) -> List[Vector]:
        rows = as_columns(self.block(degree), self.target[degree + self.shift])
        return nullspace(rows, self.source[degree])

    def image(self, degree: int) -> List[Vector]:
        cols = self.block(degree)
        return [cols[i] for i in independent(cols, self.target[degree + self.shift])]

    def compose(self, other: "GradedMap") -> "GradedMap":
        """``self`` after ``other``."""
        blocks = {}
        for d in other.source.degrees():
            mid = d + other.shift
            blocks[d] = [self.apply(mid, col) for col in other.block(d)]
        return GradedMap(other.source, self.target, self.shift + other.shift, blocks)

    def power(self, exponent: int) -> "GradedMap":
        if self.source != self.target:
            raise ValueError("only endomorphisms have powers")
        result = GradedMap.identity(self.source)
        for _ in range(exponent):
            result = self.compose(result)
        return result

    def dense(self, degree: int) -> list:
        """Dense matrix (target rows x source columns) of one block."""
        rows = as_columns(self.block(degree), self.target[degree + self.shift])
        return [dense(r, self.source[degree]) for r in rows]

    @classmethod
    def identity(cls, space: GradedSpace) -> "GradedMap":
        return cls(space, space, 0, {d: [{j: QQ.one} for j in range(n)] for d, n in space.dims.items()})

    @classmethod
    def zero(cls, source: GradedSpace, target: GradedSpace, shift: int) -> "GradedMap":
        return cls(source, target, shift, {})


def restrict_map(columns: Sequence[Vector], sub: Sequence[Vector], target_sub: Sequence[Vector], dim: int) -> List[Vector]:
    """
    Matrix of a map restricted to subspaces: images of ``sub`` basis vectors
    (already mapped into ``columns``) expressed on the ``target_sub`` basis.
    """
    images = [combine([v.get(j, QQ.zero) for j in range(len(columns))], columns) for v in sub]
    out = []
    for coeffs in solve(target_sub, images, dim):
        if coeffs is None:
            raise InternalTripwire("operator does not preserve the subspace")
        out.append(sparse(coeffs))
    return out


# Degreewise modules
class DegreewiseModule:
    """
    Graded module over a polynomial ring in ``nvars`` variables, truncated at
    polynomial degree ``cap``.

    ``basis(k)`` spans the degree-k piece inside an ambient coordinate space of
    dimension ``ambient_dim(k)``; ``act(i, vec, k)`` multiplies a degree-k vector
    by the i-th variable.
    """

    def __init__(
        self,
        nvars: int,
        cap: int,
        basis: Callable[[int], List[Vector]],
        act: Callable[[int, Vector, int], Vector],
        ambient_dim: Callable[[int], int],
    ):
        self.nvars = nvars
        self.cap = cap
        self._basis = basis
        self._act = act
        self._ambient = ambient_dim
        self._cache: Dict[int, List[Vector]] = {}

    def basis(self, k: int) -> List[Vector]:
        if k < 0 or k > self.cap:
            return []
        if k not in self._cache:
            self._cache[k] = self._basis(k)
        return self._cache[k]

    def dim(self, k: int) -> int:
        return len(self.basis(k))

    def ambient_dim(self, k: int) -> int:
        return self._ambient(k)

    def act(self, i: int, vec: Vector, k: int) -> Vector:
        return self._act(i, vec, k)

    def decomposables(self, k: int) -> List[Vector]:
        """Spanning set of the degree-k piece of m·M."""
        return [self.act(i, b, k - 1) for b in self.basis(k - 1) for i in range(self.nvars)]

    def hilbert(self) -> GradedSpace:
        return GradedSpace.from_counts({k: self.dim(k) for k in range(self.cap + 1)})

    @classmethod
    def free(cls, generator_degrees: Sequence[int], nvars: int, cap: int) -> "DegreewiseModule":
        """Free module on generators of the given polynomial degrees, monomial coordinates."""
        gens = sorted(generator_degrees)

        def layout(k):
            blocks, offset = [], 0
            for a in gens:
                mons = monomials(nvars, k - a, max(nvars, 1))
                blocks.append((offset, mons))
                offset += len(mons)
            return blocks, offset

        def basis(k):
            return [{i: QQ.one} for i in range(layout(k)[1])]

        def act(i, vec, k):
            src, _ = layout(k)
            dst, _ = layout(k + 1)
            out = {}
            for j, (offset, mons) in enumerate(src):
                index = monomial_index(nvars, k + 1 - gens[j], max(nvars, 1))
                for pos, mon in enumerate(mons):
                    v = vec.get(offset + pos)
                    if v:
                        bumped = list(mon)
                        bumped[i] += 1
                        out[dst[j][0] + index[tuple(bumped)]] = v
            return out

        return cls(nvars, cap, basis, act, lambda k: layout(k)[1])


def minimal_generators(module: DegreewiseModule, upto: Optional[int] = None) -> Tuple[GradedSpace, Dict[int, List[Vector]]]:
    """
    Degrees of a minimal generating set (a basis of M/mM) and chosen lifts.

    Lifts are the earliest basis vectors extending m·M, so repeated runs pick the
    same generators.
    """
    top = module.cap if upto is None else upto
    if top > module.cap:
        raise CapTooLow(f"generators may occur in degree {2 * top} above the cap {2 * module.cap}")
    counts: Dict[int, int] = {}
    lifts: Dict[int, List[Vector]] = {}
    for k in range(top + 1):
        basis = module.basis(k)
        if not basis:
            continue
        dec = module.decomposables(k)
        order = independent(dec + basis, module.ambient_dim(k))
        chosen = [basis[i - len(dec)] for i in order if i >= len(dec)]
        if chosen:
            counts[k] = len(chosen)
            lifts[k] = chosen
    return GradedSpace.from_counts(counts), lifts


def hilbert_check_free(module: DegreewiseModule, generators: Optional[Tuple[GradedSpace, Dict[int, List[Vector]]]] = None) -> bool:
    """
    Freeness certificate up to the cap.

    Two parts: Hilb(M)·(1−t²)^k must equal Hilb(M/mM) coefficientwise, and the
    chosen generator lifts must span every degree under the operators.
    """
    space, lifts = generators if generators is not None else minimal_generators(module)
    k_vars = module.nvars
    hil = [module.dim(k) for k in range(module.cap + 1)]
    for k in range(module.cap + 1):
        coeff = sum((-1) ** j * comb(k_vars, j) * hil[k - j] for j in range(min(k, k_vars) + 1))
        if coeff != space[2 * k]:
            logger.debug("hilbert tripwire failed in degree %s: %s != %s", 2 * k, coeff, space[2 * k])
            return False
    previous: List[Vector] = []
    for k in range(module.cap + 1):
        spanning = list(lifts.get(k, [])) + [module.act(i, v, k - 1) for v in previous for i in range(k_vars)]
        spanning = [spanning[i] for i in independent(spanning, module.ambient_dim(k))]
        if len(spanning) != hil[k]:
            logger.debug("generators fail to span degree %s", 2 * k)
            return False
        previous = spanning
    return True


# Symmetric forms
def signature(matrix: Sequence[Sequence]) -> Tuple[int, int, int]:
    """Inertia (positives, negatives, zeros) by exact symmetric congruence."""
    a = [[qq(x) for x in row] for row in matrix]
    n = len(a)
    for i in range(n):
        if len(a[i]) != n:
            raise NotSymmetric("form matrix is not square")
        for j in range(i):
            if a[i][j] != a[j][i]:
                raise NotSymmetric(f"entries ({i},{j}) and ({j},{i}) differ")
    pos = neg = 0
    active = list(range(n))
    while active:
        pivot = next((i for i in active if a[i][i]), None)
        if pivot is None:
            pair = next(((i, j) for i in active for j in active if i < j and a[i][j]), None)
            if pair is None:
                break
            i, j = pair
            for k in range(n):
                a[i][k] += a[j][k]
            for k in range(n):
                a[k][i] += a[k][j]
            pivot = i
        p = a[pivot][pivot]
        if p > 0:
            pos += 1
        else:
            neg += 1
        active.remove(pivot)
        for r in active:
            f = a[r][pivot] / p
            if not f:
                continue
            for c in range(n):
                a[r][c] -= f * a[pivot][c]
            for c in range(n):
                a[c][r] -= f * a[c][pivot]
    return pos, neg, n - pos - neg


def congruent(matrix: Sequence[Sequence], basis: Sequence[Sequence]) -> list:
    """B^T M B for a basis given as a list of coordinate vectors."""
    mb = [[dot(row, b) for b in basis] for row in matrix]
    return [[dot([mb[r][j] for r in range(len(matrix))], b) for j in range(len(basis))] for b in basis]


@dataclass
class SymmetricForm:
    """Pairing blocks between degrees d and 2·center − d on a graded space."""

    space: GradedSpace
    center: int
    blocks: Dict[int, list] = field(default_factory=dict)

    def block(self, degree: int) -> list:
        other = 2 * self.center - degree
        return self.blocks.get(degree) or [[QQ.zero] * self.space[other] for _ in range(self.space[degree])]

    def is_symmetric(self) -> bool:
        for d in self.space.degrees():
            m, t = self.block(d), self.block(2 * self.center - d)
            if any(m[i][j] != t[j][i] for i in range(len(m)) for j in range(len(t))):
                return False
        return True

    def is_nondegenerate(self) -> bool:
        for d in self.space.degrees():
            m = self.block(d)
            if len(m) != self.space[2 * self.center - d] or rank([sparse(r) for r in m], len(m)) != len(m):
                return False
        return True


def dump_matrix(rows: Sequence[Sequence]) -> dict:
    """Degree-free dump of a dense rational matrix, row-major with "p/q" entries."""
    ncols = len(rows[0]) if rows else 0
    return {"shape": [len(rows), ncols], "rows": [[fmt(x) for x in row] for row in rows]}
