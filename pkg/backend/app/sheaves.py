"""
Sheaves of graded modules on fans.

A sheaf is stored by its generators: every cone carries a free module over the
polynomial ring of its span, and every generator remembers its image in each
proper face. Restricting any stalk element then follows by module linearity.
All fans handled here are pointed; degrees are polynomial degrees unless a
GradedSpace is returned.
"""
from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import ceil
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from sympy.polys.domains import QQ
from sympy.polys.rings import ring

from .config import settings
from .exceptions import (
    CapTooLow,
    FreenessCheckFailed,
    InternalTripwire,
    NotASection,
    NotQuasiConvex,
    SumRuleViolation,
)
from .fans import Fan, PiecewiseFunction, Point, SubdivisionMap, classify_support, point
from .linalg import (
    DegreewiseModule,
    GradedMap,
    GradedSpace,
    QuotientBasis,
    Vector,
    as_columns,
    axpy,
    combine,
    dot,
    hilbert_check_free,
    minimal_generators,
    monomial_index,
    monomials,
    nullspace,
    shift_indices,
    solve,
    solve_one,
    sparse,
)

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def local_ring(d: int):
    """Polynomial ring on the frame coordinates y0..y(d-1) of a d-dimensional cone."""
    if d == 0:
        return ring("", QQ)[0]
    return ring(",".join(f"y{i}" for i in range(d)), QQ)[0]


def poly_degree(poly) -> int:
    return sum(next(iter(poly.keys()))) if poly else 0


def dual_frame(fan: Fan, sigma: int) -> List[Point]:
    """Ambient covectors u_i with u_i(b_j) = delta_ij on the frame of sigma."""
    frame = fan.basis_vectors(sigma)
    d = len(frame)
    columns = [{j: b[c] for j, b in enumerate(frame) if b[c]} for c in range(fan.dim)]
    out = []
    for coeffs in solve(columns, [{i: QQ.one} for i in range(d)], d):
        if coeffs is None:
            raise InternalTripwire(f"frame of cone {sigma} is not independent")
        out.append(tuple(coeffs))
    return out


class FreeStalk:
    """Free graded module over Q[y0..y(d-1)] on generators of fixed degrees."""

    def __init__(self, nvars: int, degrees: Sequence[int] = ()):
        self.nvars = nvars
        self.degrees = tuple(degrees)
        if list(self.degrees) != sorted(self.degrees):
            raise InternalTripwire("stalk generators must be listed by degree")
        self._layouts: Dict[int, tuple] = {}

    def __bool__(self) -> bool:
        return bool(self.degrees)

    def __repr__(self) -> str:
        return f"FreeStalk(nvars={self.nvars}, degrees={self.degrees})"

    def layout(self, k: int) -> tuple:
        """(block offsets, decode table of (generator, monomial), dimension) in degree k."""
        if k not in self._layouts:
            offsets, decode, total = [], [], 0
            for j, a in enumerate(self.degrees):
                mons = monomials(self.nvars, k - a, self.nvars)
                offsets.append(total)
                decode.extend((j, m) for m in mons)
                total += len(mons)
            self._layouts[k] = (offsets, decode, total)
        return self._layouts[k]

    def dim(self, k: int) -> int:
        return self.layout(k)[2]

    def index(self, j: int, mono: Tuple[int, ...], k: int) -> int:
        offsets = self.layout(k)[0]
        return offsets[j] + monomial_index(self.nvars, k - self.degrees[j], self.nvars)[mono]

    def generator(self, j: int) -> Vector:
        return {self.index(j, (0,) * self.nvars, self.degrees[j]): QQ.one}

    def generators_in(self, k: int) -> List[int]:
        return [j for j, a in enumerate(self.degrees) if a == k]

    def multiply(self, poly, vec: Vector, k: int) -> Vector:
        """A homogeneous local polynomial times a degree-k vector."""
        out: Vector = {}
        if not poly or not vec:
            return out
        e = poly_degree(poly)
        decode = self.layout(k)[1]
        for idx, v in vec.items():
            j, mono = decode[idx]
            for pm, c in poly.iterterms():
                target = self.index(j, tuple(a + b for a, b in zip(mono, pm)), k + e)
                axpy(out, v, {target: c})
        return out


@dataclass
class FiberData:
    """Sections over a fiber, as used to build one stalk of a pushforward."""

    space: "SectionSpace"
    module: DegreewiseModule
    degrees: List[int]
    lifts: List[Vector]
    _columns: Dict[Tuple[int, Tuple[int, ...]], Vector] = field(default_factory=dict)

    def column(self, j: int, mono: Tuple[int, ...]) -> Vector:
        """The fiber section mono * lift_j."""
        key = (j, mono)
        if key not in self._columns:
            i = next((i for i, e in enumerate(mono) if e), None)
            if i is None:
                self._columns[key] = self.lifts[j]
            else:
                prev = tuple(e - (1 if p == i else 0) for p, e in enumerate(mono))
                k = self.degrees[j] + sum(prev)
                self._columns[key] = self.space.act(i, self.column(j, prev), k)
        return self._columns[key]

    def evaluate(self, stalk: FreeStalk, vec: Vector, k: int) -> Vector:
        """Fiber section represented by a stalk vector."""
        decode = stalk.layout(k)[1]
        out: Vector = {}
        for idx, v in vec.items():
            axpy(out, v, self.column(*decode[idx]))
        return out


class SheafModel:
    """Stalk generator degrees and generator images for every cone of a pointed fan."""

    def __init__(self, fan: Fan, cap: int, provenance: str = ""):
        if fan.lineality_dim:
            raise InternalTripwire("sheaves are built on pointed fans")
        self.fan = fan
        self.cap = cap
        self.provenance = provenance
        self.degrees: Dict[int, Tuple[int, ...]] = {}
        self.images: Dict[int, Dict[int, List[Vector]]] = {}
        self.fibers: Dict[int, FiberData] = {}
        self._stalks: Dict[int, FreeStalk] = {}
        self._restrictions: Dict[Tuple[int, int, int], List[Vector]] = {}
        self._substitutions: Dict[Tuple[int, int], list] = {}
        self._ambient: Dict[int, list] = {}

    def __repr__(self) -> str:
        return f"SheafModel({self.provenance or 'unnamed'}, cones={len(self.fan)}, cap={self.cap})"

    def set_stalk(self, sigma: int, degrees: Sequence[int], images: Dict[int, List[Vector]]) -> None:
        self.degrees[sigma] = tuple(degrees)
        self.images[sigma] = images
        self._stalks.pop(sigma, None)

    def stalk(self, sigma: int) -> FreeStalk:
        if sigma not in self._stalks:
            self._stalks[sigma] = FreeStalk(self.fan.pointed_dim(sigma), self.degrees.get(sigma, ()))
        return self._stalks[sigma]

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(s for s in range(len(self.fan)) if self.degrees.get(s))

    def generator_space(self, sigma: int) -> GradedSpace:
        counts: Dict[int, int] = {}
        for a in self.degrees.get(sigma, ()):
            counts[a] = counts.get(a, 0) + 1
        return GradedSpace.from_counts(counts)

    def to_dict(self) -> Dict[int, Dict[int, int]]:
        return {s: self.generator_space(s).dims for s in self.support}

    # coordinate changes
    def substitution(self, sigma: int, rho: int) -> list:
        """Frame coordinates of sigma as linear polynomials in those of a face rho."""
        key = (sigma, rho)
        if key not in self._substitutions:
            R = local_ring(self.fan.pointed_dim(rho))
            cols = self.fan.basis_change(rho, sigma)
            subs = []
            for i in range(self.fan.pointed_dim(sigma)):
                subs.append(sum((cols[l][i] * g for l, g in enumerate(R.gens) if cols[l][i]), R.zero))
            self._substitutions[key] = subs
        return self._substitutions[key]

    def localize(self, sigma: int, poly):
        """An ambient polynomial restricted to span(sigma), in frame coordinates."""
        if sigma not in self._ambient:
            R = local_ring(self.fan.pointed_dim(sigma))
            frame = self.fan.basis_vectors(sigma)
            self._ambient[sigma] = [
                sum((b[c] * g for b, g in zip(frame, R.gens) if b[c]), R.zero) for c in range(self.fan.dim)
            ]
        return substitute(local_ring(self.fan.pointed_dim(sigma)), poly, self._ambient[sigma])

    def linear(self, sigma: int, covector: Sequence):
        R = local_ring(self.fan.pointed_dim(sigma))
        frame = self.fan.basis_vectors(sigma)
        return sum((dot(covector, b) * g for b, g in zip(frame, R.gens)), R.zero)

    # restriction maps
    def restriction(self, sigma: int, rho: int, k: int) -> List[Vector]:
        """Columns of res^sigma_rho in degree k."""
        key = (sigma, rho, k)
        if key in self._restrictions:
            return self._restrictions[key]
        source = self.stalk(sigma)
        if sigma == rho:
            cols = [{i: QQ.one} for i in range(source.dim(k))]
        elif not self.stalk(rho):
            cols = [{} for _ in range(source.dim(k))]
        else:
            if not self.fan.is_face(rho, sigma):
                raise InternalTripwire(f"cone {rho} is not a face of {sigma}")
            target = self.stalk(rho)
            images = self.images[sigma][rho]
            R = local_ring(self.fan.pointed_dim(rho))
            subs = self.substitution(sigma, rho)
            cols = []
            for j, mono in source.layout(k)[1]:
                poly = R.one
                for s, e in zip(subs, mono):
                    if e:
                        poly *= s ** e
                cols.append(target.multiply(poly, images[j], source.degrees[j]))
        self._restrictions[key] = cols
        return cols

    def restrict(self, sigma: int, rho: int, vec: Vector, k: int) -> Vector:
        cols = self.restriction(sigma, rho, k)
        out: Vector = {}
        for i, v in vec.items():
            axpy(out, v, cols[i])
        return out

    # checks
    def verify(self, cap: Optional[int] = None) -> List[str]:
        """Problems found with composition, freeness or flabbiness (empty when sound)."""
        cap = self.cap if cap is None else cap
        problems = []
        fan = self.fan
        for sigma in self.support:
            for tau in fan.proper_faces(sigma):
                for rho in fan.proper_faces(tau):
                    if not self.stalk(rho):
                        continue
                    for k in range(cap + 1):
                        direct = self.restriction(sigma, rho, k)
                        via = [self.restrict(tau, rho, c, k) for c in self.restriction(sigma, tau, k)]
                        if direct != via:
                            problems.append(f"restrictions {sigma}>{tau}>{rho} do not compose in degree {2 * k}")
                            break
        problems.extend(f"stalk at cone {s} is not flabby" for s in check_flabby(self, cap))
        return problems


def substitute(R, poly, values):
    out = R.zero
    for mono, c in poly.iterterms():
        term = R(c)
        for v, e in zip(values, mono):
            if e:
                term *= v ** e
        out += term
    return out


class SectionSpace:
    """
    Compatible families of stalk elements over a set of cones.

    Unknowns are the stalks of the maximal members, concatenated; agreement is
    imposed on the stalk of every pairwise meet and, for ``vanishing`` cones,
    the restriction must be zero. ``operators`` are ambient covectors acting by
    multiplication and make the space a module.
    """

    def __init__(
        self,
        sheaf: SheafModel,
        members: Iterable[int],
        operators: Sequence[Sequence],
        vanishing: Iterable[int] = (),
    ):
        fan = sheaf.fan
        self.sheaf = sheaf
        self.members = tuple(sorted(m for m in set(members) if sheaf.stalk(m)))
        self.tops = fan.maximal_among(self.members)
        self.operators = [point(u) for u in operators]
        self._local_ops = {s: [sheaf.linear(s, u) for u in self.operators] for s in self.tops}
        self.pairs = []
        for a, b in combinations(self.tops, 2):
            rho = fan.meet(a, b)
            if sheaf.stalk(rho):
                self.pairs.append((a, b, rho))
        vanishing = [v for v in set(vanishing) if sheaf.stalk(v)]
        self.vanishing = tuple(sorted(vanishing))
        self.walls = [(s, v) for s in self.tops for v in self.vanishing if fan.is_face(v, s)]
        self._position = {s: i for i, s in enumerate(self.tops)}
        self._layouts: Dict[int, Tuple[List[int], int]] = {}
        self._basis: Dict[int, List[Vector]] = {}

    def __repr__(self) -> str:
        return f"SectionSpace(tops={self.tops}, vanishing={self.vanishing})"

    def layout(self, k: int) -> Tuple[List[int], int]:
        if k not in self._layouts:
            offsets, total = [], 0
            for s in self.tops:
                offsets.append(total)
                total += self.sheaf.stalk(s).dim(k)
            self._layouts[k] = (offsets, total)
        return self._layouts[k]

    def ambient_dim(self, k: int) -> int:
        return self.layout(k)[1]

    def split(self, vec: Vector, k: int) -> List[Vector]:
        offsets, _ = self.layout(k)
        blocks: List[Vector] = [{} for _ in self.tops]
        for i, v in vec.items():
            pos = bisect.bisect_right(offsets, i) - 1
            blocks[pos][i - offsets[pos]] = v
        return blocks

    def join(self, blocks: Sequence[Vector], k: int) -> Vector:
        offsets, _ = self.layout(k)
        out: Vector = {}
        for off, block in zip(offsets, blocks):
            out.update(shift_indices(block, off))
        return out

    def _rows(self, k: int) -> List[Vector]:
        sheaf = self.sheaf
        offsets, _ = self.layout(k)
        rows: List[Vector] = []

        def block_rows(top: int, face: int, sign) -> List[Vector]:
            cols = sheaf.restriction(top, face, k)
            off = offsets[self._position[top]]
            width = sheaf.stalk(face).dim(k)
            return [{off + j: sign * v for j, v in r.items()} for r in as_columns(cols, width)]

        for a, b, rho in self.pairs:
            for ra, rb in zip(block_rows(a, rho, QQ.one), block_rows(b, rho, -QQ.one)):
                merged = dict(ra)
                axpy(merged, QQ.one, rb)
                if merged:
                    rows.append(merged)
        for s, v in self.walls:
            rows.extend(r for r in block_rows(s, v, QQ.one) if r)
        return rows

    def basis(self, k: int) -> List[Vector]:
        if k not in self._basis:
            dim = self.ambient_dim(k)
            self._basis[k] = nullspace(self._rows(k), dim) if dim else []
        return self._basis[k]

    def dim(self, k: int) -> int:
        return len(self.basis(k))

    def value(self, vec: Vector, k: int, cone: int) -> Vector:
        """Stalk element at ``cone`` (a member) of a section."""
        if not self.sheaf.stalk(cone):
            return {}
        top = next((s for s in self.tops if self.sheaf.fan.is_face(cone, s)), None)
        if top is None:
            raise InternalTripwire(f"cone {cone} is not covered by the section space")
        block = self.split(vec, k)[self._position[top]]
        return self.sheaf.restrict(top, cone, block, k)

    def act(self, i: int, vec: Vector, k: int) -> Vector:
        blocks = self.split(vec, k)
        out = [self.sheaf.stalk(s).multiply(self._local_ops[s][i], b, k) for s, b in zip(self.tops, blocks)]
        return self.join(out, k + 1)

    def multiply(self, function: PiecewiseFunction, vec: Vector, k: int) -> Vector:
        """Multiplication by a piecewise polynomial living on the sheaf's fan."""
        fan = self.sheaf.fan
        if function.fan is not fan and (
            len(function.fan) != len(fan) or function.fan.rays != fan.rays
        ):
            raise NotASection("function lives on a different fan than the sections")
        if function.degree % 2:
            raise NotASection("piecewise polynomials have even degree")
        e = function.degree // 2
        blocks = self.split(vec, k)
        out = []
        for s, b in zip(self.tops, blocks):
            poly = self.sheaf.localize(s, function.piece(s))
            out.append(self.sheaf.stalk(s).multiply(poly, b, k))
        return self.join(out, k + e)

    def coordinates(self, vec: Vector, k: int) -> Vector:
        """Coordinates of a section on ``basis(k)``."""
        return sparse(solve_one(self.basis(k), vec, self.ambient_dim(k)))

    def module(self, cap: int) -> DegreewiseModule:
        return DegreewiseModule(len(self.operators), cap, self.basis, self.act, self.ambient_dim)

    def hilbert(self, cap: int) -> GradedSpace:
        return GradedSpace.from_counts({k: self.dim(k) for k in range(cap + 1)})


class IHQuotient:
    """Sections modulo m·sections in degrees 0..top, with chosen representatives."""

    def __init__(self, sections: SectionSpace, top: int):
        self.sections = sections
        self.top = top
        self.module = sections.module(top)
        self.quotients: Dict[int, QuotientBasis] = {}
        for k in range(top + 1):
            self.quotients[k] = QuotientBasis(
                self.module.decomposables(k), self.module.basis(k), sections.ambient_dim(k)
            )
        self.space = GradedSpace.from_counts({k: len(q) for k, q in self.quotients.items()})

    def __repr__(self) -> str:
        return f"IHQuotient({self.space.betti()})"

    def reps(self, k: int) -> List[Vector]:
        q = self.quotients.get(k)
        return list(q.reps) if q else []

    def coordinates(self, vec: Vector, k: int) -> Vector:
        q = self.quotients.get(k)
        if q is None or not q.reps:
            return {}
        return sparse(q.coordinates([vec])[0])

    def operator(self, function: PiecewiseFunction) -> GradedMap:
        """Induced action of a piecewise polynomial on the quotient."""
        e = function.degree // 2
        blocks = {}
        for k in range(self.top + 1):
            reps = self.reps(k)
            if not reps:
                continue
            if k + e > self.top:
                blocks[2 * k] = [{} for _ in reps]
                continue
            blocks[2 * k] = [self.coordinates(self.sections.multiply(function, r, k), k + e) for r in reps]
        return GradedMap(self.space, self.space, function.degree, blocks)


def coordinate_operators(fan: Fan) -> List[Point]:
    return [tuple(QQ.one if i == j else QQ.zero for i in range(fan.dim)) for j in range(fan.dim)]


# constructors
def structure_sheaf(fan: Fan, cap: Optional[int] = None) -> SheafModel:
    """The sheaf of piecewise polynomials: one degree-0 generator on every cone."""
    fan = fan.pointed()
    cap = settings.default_cap(fan.dim) if cap is None else cap
    sheaf = SheafModel(fan, cap, provenance="A")
    for sigma in range(len(fan)):
        sheaf.set_stalk(sigma, (0,), {rho: [{0: QQ.one}] for rho in fan.proper_faces(sigma)})
    return sheaf


def minimal_extension_sheaf(fan: Fan, tau: int = 0, cap: Optional[int] = None) -> SheafModel:
    """
    L^tau, built cone by cone in increasing dimension: each stalk is the free
    module on a minimal generating set of the sections over its boundary.
    """
    fan = fan.pointed()
    cap = settings.default_cap(fan.dim) if cap is None else cap
    sheaf = SheafModel(fan, cap, provenance=f"L^{tau}" if tau else "L")
    sheaf.set_stalk(tau, (0,), {})
    d_tau = fan.pointed_dim(tau)
    above = sorted((s for s in fan.cofaces(tau) if s != tau), key=lambda s: (fan.cones[s].dim, s))
    for sigma in above:
        members = [r for r in fan.proper_faces(sigma) if fan.is_face(tau, r)]
        space = SectionSpace(sheaf, members, dual_frame(fan, sigma))
        bound = ceil((fan.pointed_dim(sigma) - d_tau) / 2) - 1
        if bound > cap:
            raise CapTooLow(f"cone {sigma} needs generators up to degree {2 * bound}, cap is {2 * cap}")
        gens, lifts = minimal_generators(space.module(min(bound + 1, cap)))
        if any(k > bound for k in lifts):
            raise InternalTripwire(f"boundary sections of cone {sigma} need a generator above degree {2 * bound}")
        degrees: List[int] = []
        images: Dict[int, List[Vector]] = {r: [] for r in space.members}
        for k in sorted(lifts):
            for vec in lifts[k]:
                degrees.append(k)
                for r in space.members:
                    images[r].append(space.value(vec, k, r))
        sheaf.set_stalk(sigma, degrees, images)
        logger.debug("L^%s stalk at cone %s: %s", tau, sigma, gens.betti())
    return sheaf


def sections(sheaf: SheafModel, members: Optional[Iterable[int]] = None) -> SectionSpace:
    fan = sheaf.fan
    members = range(len(fan)) if members is None else members
    return SectionSpace(sheaf, members, coordinate_operators(fan))


def boundary_vanishing_sections(sheaf: SheafModel) -> SectionSpace:
    fan = sheaf.fan
    support = classify_support(fan)
    if support not in ("complete", "convex", "quasi_convex"):
        raise NotQuasiConvex("relative sections need a quasi-convex support")
    return SectionSpace(sheaf, range(len(fan)), coordinate_operators(fan), vanishing=fan.boundary_walls())


def ih_quotient(sheaf: SheafModel, rel: bool = False) -> IHQuotient:
    fan = sheaf.fan
    space = boundary_vanishing_sections(sheaf) if rel else None
    if space is None:
        if classify_support(fan) == "none":
            logger.warning("support of %r is not quasi-convex; the quotient need not be free", fan)
        space = sections(sheaf)
    return IHQuotient(space, min(fan.dim, sheaf.cap))


def ih(sheaf: SheafModel, rel: bool = False) -> GradedSpace:
    return ih_quotient(sheaf, rel).space


def check_flabby(sheaf: SheafModel, cap: Optional[int] = None) -> List[int]:
    """Cones whose stalk does not surject onto the boundary sections."""
    cap = sheaf.cap if cap is None else cap
    fan = sheaf.fan
    failing = []
    for sigma in sheaf.support:
        space = SectionSpace(sheaf, fan.proper_faces(sigma), dual_frame(fan, sigma))
        stalk = sheaf.stalk(sigma)
        for k in range(cap + 1):
            if not space.members:
                break
            images = []
            for c in range(stalk.dim(k)):
                images.append(space.join([sheaf.restrict(sigma, t, {c: QQ.one}, k) for t in space.tops], k))
            reached = solve(images, space.basis(k), space.ambient_dim(k))
            if any(c is None for c in reached):
                failing.append(sigma)
                break
    return failing


# pushforward
def pushforward(subdivision: SubdivisionMap, sheaf: SheafModel, cap: Optional[int] = None) -> SheafModel:
    """
    pi_* of a sheaf on the source: the stalk at sigma is the module of sections
    over the fiber, presented by minimal generators.
    """
    target = subdivision.target.pointed()
    if len(subdivision.source) != len(sheaf.fan):
        raise InternalTripwire("sheaf does not live on the source of the subdivision")
    cap = sheaf.cap if cap is None else cap
    result = SheafModel(target, cap, provenance=f"pi_*{sheaf.provenance}")
    for sigma in sorted(range(len(target)), key=lambda s: (target.cones[s].dim, s)):
        space = SectionSpace(sheaf, subdivision.fiber(sigma), dual_frame(target, sigma))
        if not space.members:
            result.set_stalk(sigma, (), {})
            continue
        d = target.pointed_dim(sigma)
        module = space.module(min(cap, d + 1))
        generators = minimal_generators(module, upto=min(cap, d))
        if not hilbert_check_free(module, generators):
            raise FreenessCheckFailed(f"sections over the fiber of cone {sigma} are not free up to the cap")
        lifts = generators[1]
        degrees = [k for k in sorted(lifts) for _ in lifts[k]]
        vectors = [v for k in sorted(lifts) for v in lifts[k]]
        images: Dict[int, List[Vector]] = {}
        for rho in target.proper_faces(sigma):
            fd = result.fibers.get(rho)
            if fd is None:
                continue
            stalk = result.stalk(rho)
            images[rho] = []
            for k, v in zip(degrees, vectors):
                section = fd.space.join([space.value(v, k, alpha) for alpha in fd.space.tops], k)
                images[rho].append(_evaluation_inverse(fd, stalk, section, k))
        result.set_stalk(sigma, degrees, images)
        result.fibers[sigma] = FiberData(space, module, degrees, vectors)
        logger.debug("pushforward stalk at cone %s: %s", sigma, generators[0].betti())
    return result


def _evaluation_inverse(fd: FiberData, stalk: FreeStalk, section: Vector, k: int) -> Vector:
    columns = [fd.column(j, mono) for j, mono in stalk.layout(k)[1]]
    return sparse(solve_one(columns, section, fd.space.ambient_dim(k)))


# decomposition
@dataclass
class MultiplicityTable:
    """W_tau for every cone, with bases over the stalk generators of F_tau."""

    sheaf: SheafModel
    spaces: Dict[int, GradedSpace]
    bases: Dict[int, Dict[int, List[Vector]]]
    offset: int = 0
    provenance: str = ""

    def nonzero(self) -> Tuple[int, ...]:
        return tuple(s for s in sorted(self.spaces) if self.spaces[s].total())

    def to_dict(self) -> Dict[int, Dict[int, int]]:
        return {s: self.spaces[s].dims for s in self.nonzero()}


def decompose(sheaf: SheafModel, offset: int = 0, check: bool = True) -> MultiplicityTable:
    """
    W_tau = kernel of the stalk generators toward the boundary sections taken
    modulo the maximal ideal of A_tau.
    """
    fan = sheaf.fan
    spaces: Dict[int, GradedSpace] = {}
    bases: Dict[int, Dict[int, List[Vector]]] = {}
    for tau in sheaf.support:
        stalk = sheaf.stalk(tau)
        boundary = SectionSpace(sheaf, fan.proper_faces(tau), dual_frame(fan, tau))
        module = boundary.module(max(stalk.degrees))
        per_degree: Dict[int, List[Vector]] = {}
        for k in sorted(set(stalk.degrees)):
            gens = stalk.generators_in(k)
            if not boundary.members:
                kernel = [{i: QQ.one} for i in range(len(gens))]
            else:
                q = QuotientBasis(module.decomposables(k), module.basis(k), boundary.ambient_dim(k))
                images = [
                    boundary.join([sheaf.images[tau][t][j] for t in boundary.tops], k) for j in gens
                ]
                coords = [sparse(c) for c in q.coordinates(images)] if q.reps else [{} for _ in gens]
                kernel = nullspace(as_columns(coords, len(q)), len(gens))
            if kernel:
                per_degree[k] = [{gens[i]: v for i, v in vec.items()} for vec in kernel]
        spaces[tau] = GradedSpace.from_counts({k: len(v) for k, v in per_degree.items()})
        bases[tau] = per_degree
    table = MultiplicityTable(sheaf, spaces, bases, offset, provenance=sheaf.provenance)
    if check:
        check_sum_rule(table)
    return table


def check_sum_rule(table: MultiplicityTable) -> None:
    """Stalk generators of F must be the union of W_tau shifted onto L^tau."""
    sheaf = table.sheaf
    fan = sheaf.fan
    expected: Dict[int, List[int]] = {s: [] for s in range(len(fan))}
    for tau in table.nonzero():
        ext = minimal_extension_sheaf(fan, tau, cap=sheaf.cap)
        for w_degree, count in table.spaces[tau].dims.items():
            shift = w_degree // 2
            for sigma in ext.support:
                expected[sigma].extend(shift + a for a in ext.degrees[sigma] for _ in range(count))
    for sigma in range(len(fan)):
        have = sorted(a for a in sheaf.degrees.get(sigma, ()) if a <= sheaf.cap)
        want = sorted(a for a in expected[sigma] if a <= sheaf.cap)
        if have != want:
            raise SumRuleViolation(f"cone {sigma}: stalk generators {have} but the decomposition predicts {want}")


@dataclass
class PerverseTable:
    entries: Dict[int, Dict[int, int]]
    graded: Dict[int, Dict[int, int]]
    filtration: Dict[int, int]

    def to_dict(self) -> dict:
        return {
            "entries": {str(s): {str(p): n for p, n in row.items()} for s, row in self.entries.items()},
            "graded": {str(p): {str(s): n for s, n in row.items()} for p, row in self.graded.items()},
            "filtration": {str(p): n for p, n in self.filtration.items()},
        }


def perverse_table(table: MultiplicityTable) -> PerverseTable:
    """Re-center each W_sigma at its cone dimension; p = degree - (dim sigma - offset)."""
    fan = table.sheaf.fan
    entries: Dict[int, Dict[int, int]] = {}
    graded: Dict[int, Dict[int, int]] = {}
    for sigma in table.nonzero():
        centre = fan.pointed_dim(sigma) - table.offset
        row = {}
        for degree, n in table.spaces[sigma].dims.items():
            p = degree - centre
            row[p] = n
            graded.setdefault(p, {})[sigma] = n
        entries[sigma] = row
    filtration = {}
    running = 0
    for p in sorted(graded):
        running += sum(graded[p].values())
        filtration[p] = running
    return PerverseTable(entries, {p: graded[p] for p in sorted(graded)}, filtration)


# operators
def function_action(
    function: PiecewiseFunction,
    target: Union[IHQuotient, SectionSpace, MultiplicityTable],
    cone: Optional[int] = None,
) -> GradedMap:
    """Degree-2 (or higher) action of a piecewise polynomial."""
    if isinstance(target, IHQuotient):
        return target.operator(function)
    if isinstance(target, SectionSpace):
        return _section_action(function, target)
    if cone is None:
        raise NotASection("pick the cone whose multiplicity space to act on")
    return _table_action(function, target, cone)


def _section_action(function: PiecewiseFunction, space: SectionSpace) -> GradedMap:
    cap = space.sheaf.cap
    e = function.degree // 2
    blocks = {}
    for k in range(cap + 1):
        basis = space.basis(k)
        if not basis:
            continue
        if k + e > cap:
            blocks[2 * k] = [{} for _ in basis]
            continue
        blocks[2 * k] = [space.coordinates(space.multiply(function, b, k), k + e) for b in basis]
    hilb = space.hilbert(cap)
    return GradedMap(hilb, hilb, function.degree, blocks)


def _table_action(function: PiecewiseFunction, table: MultiplicityTable, tau: int) -> GradedMap:
    sheaf = table.sheaf
    fd = sheaf.fibers.get(tau)
    if fd is None:
        raise NotASection("the multiplicity table does not come from a pushforward")
    if function.fan is not fd.space.sheaf.fan and function.fan.rays != fd.space.sheaf.fan.rays:
        raise NotASection("function must live on the source of the subdivision")
    e = function.degree // 2
    space = table.spaces.get(tau, GradedSpace())
    bases = table.bases.get(tau, {})
    stalk = sheaf.stalk(tau)
    blocks = {}
    for k, vectors in bases.items():
        out_basis = bases.get(k + e, [])
        if not out_basis:
            blocks[2 * k] = [{} for _ in vectors]
            continue
        gens_out = stalk.generators_in(k + e)
        lifts_out = [fd.lifts[j] for j in gens_out]
        dim = fd.space.ambient_dim(k + e)
        q = QuotientBasis(fd.module.decomposables(k + e), lifts_out, dim)
        if len(q) != len(gens_out):
            raise InternalTripwire(f"generator lifts of cone {tau} are not independent mod m")
        cols = []
        for w in vectors:
            lift = combine([w.get(j, QQ.zero) for j in range(len(fd.lifts))], fd.lifts)
            image = fd.space.multiply(function, lift, k)
            coords = q.coordinates([image])[0]
            gen_vec = {gens_out[i]: c for i, c in enumerate(coords) if c}
            (coeffs,) = solve(out_basis, [gen_vec], len(fd.lifts))
            if coeffs is None:
                raise InternalTripwire(f"action leaves the multiplicity space of cone {tau}")
            cols.append(sparse(coeffs))
        blocks[2 * k] = cols
    return GradedMap(space, space, function.degree, blocks)
