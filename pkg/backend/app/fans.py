"""
Exact-rational polyhedral fans.

A fan is a ray matrix, an optional lineality basis and its full face lattice.
Cones are indexed in (dimension, rays) order so every traversal is
deterministic; the minimal cone always has index 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix
from sympy.polys.rings import ring
from sympy.solvers.simplex import InfeasibleLPError, linprog

from .exceptions import (
    DegenerateRay,
    InputError,
    MixedDimension,
    NotAFace,
    NotConvex,
    NotPiecewiseLinear,
    OverlappingCones,
    RayNotInterior,
    RayNotOpposite,
    SourceNotSimplicial,
    SubdivisionMismatch,
)
from .linalg import combine, dense, dot, independent, nullspace, qq, solve, sparse, span_rank

logger = logging.getLogger(__name__)

Point = Tuple


def point(values: Iterable) -> Point:
    return tuple(qq(v) for v in values)


def add(a: Sequence, b: Sequence) -> Point:
    return tuple(x + y for x, y in zip(a, b))


def scale(c, a: Sequence) -> Point:
    return tuple(c * x for x in a)


def sign(x) -> int:
    return 1 if x > 0 else (-1 if x < 0 else 0)


def det(columns: Sequence[Sequence]) -> object:
    if not columns:
        return QQ.one
    n = len(columns)
    rows = [[columns[j][i] for j in range(n)] for i in range(n)]
    return DomainMatrix(rows, (n, n), QQ).det()


@lru_cache(maxsize=None)
def ambient_ring(n: int):
    """Polynomial ring on the ambient coordinates x0..x(n-1)."""
    return ring(",".join(f"x{i}" for i in range(n)), QQ)[0]


def coordinates(basis: Sequence[Sequence], points: Sequence[Sequence], width: int) -> List[Optional[list]]:
    return solve([sparse(b) for b in basis], [sparse(p) for p in points], width)


def enumerate_faces(vectors: Mapping[int, Sequence], ids: Iterable[int], width: int) -> Dict[FrozenSet[int], int]:
    """
    All faces of cone(vectors[ids]) as ray-id sets, mapped to their dimension.

    Facets come from (d-1)-subsets of independent rays whose normal inside the
    span leaves every ray on one side; faces of faces are found recursively.
    """
    found: Dict[FrozenSet[int], int] = {}

    def visit(face: FrozenSet[int]) -> None:
        if face in found:
            return
        ordered = sorted(face)
        vecs = [sparse(vectors[i]) for i in ordered]
        basis_pos = independent(vecs, width)
        d = len(basis_pos)
        found[face] = d
        if d == 0:
            return
        coords = [dense(sparse(c), d) for c in solve([vecs[p] for p in basis_pos], vecs, width)]
        for combo in combinations(range(len(ordered)), d - 1):
            sub = [sparse(coords[c]) for c in combo]
            if span_rank(sub, d) != d - 1:
                continue
            normal = dense(nullspace(sub, d)[0], d)
            values = [dot(normal, c) for c in coords]
            if all(v >= 0 for v in values) or all(v <= 0 for v in values):
                visit(frozenset(ordered[j] for j, v in enumerate(values) if not v))

    visit(frozenset(ids))
    return found


@dataclass(frozen=True)
class Chart:
    """
    Linear coordinates on span(basis) / span(kernel).

    ``lift`` sends chart coordinates back to ambient vectors; ``pull_form``
    rewrites an ambient covector that vanishes on the kernel.
    """

    width: int
    basis: Tuple[Point, ...]
    kernel: Tuple[Point, ...]
    complement: Tuple[int, ...]

    @classmethod
    def build(cls, width: int, basis: Optional[Sequence[Sequence]] = None, kernel: Sequence[Sequence] = ()) -> "Chart":
        if basis is None:
            basis = [tuple(QQ.one if i == j else QQ.zero for i in range(width)) for j in range(width)]
        basis = tuple(point(b) for b in basis)
        s = len(basis)
        kernel_coords = [sparse(c) for c in coordinates(basis, kernel, width)] if kernel else []
        kernel_coords = [kernel_coords[i] for i in independent(kernel_coords, s)]
        units = [{j: QQ.one} for j in range(s)]
        order = independent(kernel_coords + units, s)
        complement = tuple(i - len(kernel_coords) for i in order if i >= len(kernel_coords))
        kept = tuple(tuple(dense(k, s)) for k in kernel_coords)
        return cls(width, basis, kept, complement)

    @property
    def dim(self) -> int:
        return len(self.complement)

    def project_many(self, points: Sequence[Sequence]) -> List[Point]:
        if not points:
            return []
        s = len(self.basis)
        local = coordinates(self.basis, points, self.width)
        if any(c is None for c in local):
            raise InputError("point lies outside the chart's span")
        frame = [sparse(k) for k in self.kernel] + [{j: QQ.one} for j in self.complement]
        out = []
        for coeffs in solve(frame, [sparse(c) for c in local], s):
            out.append(tuple(coeffs[len(self.kernel):]))
        return out

    def project(self, p: Sequence) -> Point:
        return self.project_many([p])[0]

    def lift(self, y: Sequence) -> Point:
        out = tuple(QQ.zero for _ in range(self.width))
        for c, j in zip(y, self.complement):
            if c:
                out = add(out, scale(c, self.basis[j]))
        return out

    def pull_form(self, form: Sequence) -> Point:
        return tuple(dot(form, self.basis[j]) for j in self.complement)


def _split_row(p: Sequence) -> List:
    """LP row in the nonnegative variables (u_plus, u_minus) of a free covector u."""
    row = [QQ.to_sympy(x) for x in p]
    return row + [-x for x in row]


@dataclass(frozen=True)
class Cone:
    """A cone of a fan; ``basis`` is the ordered orientation frame (ray ids)."""

    index: int
    rays: Tuple[int, ...]
    dim: int
    basis: Tuple[int, ...]

    @property
    def simplicial(self) -> bool:
        return len(self.rays) == len(self.basis)


class Fan:
    """
    A fan in Q^n of shape pointed-fan x lineality.

    ``cones`` lists ray-index sets; faces are derived. With ``validate`` the
    pairwise intersections of maximal cones are certified to be common faces.
    """

    def __init__(
        self,
        dim: int,
        rays: Sequence[Sequence],
        cones: Iterable[Iterable[int]],
        lineality: Sequence[Sequence] = (),
        validate: bool = True,
    ):
        self.dim = int(dim)
        self.rays: Tuple[Point, ...] = tuple(point(r) for r in rays)
        for i, r in enumerate(self.rays):
            if len(r) != self.dim:
                raise InputError(f"ray {i} has {len(r)} coordinates, expected {self.dim}")
            if not any(r):
                raise DegenerateRay(f"ray {i} is zero")
        lineality = [point(b) for b in lineality]
        if span_rank([sparse(b) for b in lineality], self.dim) != len(lineality):
            raise DegenerateRay("lineality basis is not independent")
        self.lineality: Tuple[Point, ...] = tuple(lineality)
        self.chart = Chart.build(self.dim, kernel=self.lineality)
        self.projected: Tuple[Point, ...] = tuple(self.chart.project_many(self.rays))
        self._check_rays()

        width = self.chart.dim
        vectors = dict(enumerate(self.projected))
        faces: Dict[FrozenSet[int], int] = {frozenset(): 0}
        listed = [frozenset(int(i) for i in c) for c in cones]
        for ids in listed:
            for i in ids:
                if not 0 <= i < len(self.rays):
                    raise InputError(f"cone refers to unknown ray {i}")
            found = enumerate_faces(vectors, ids, width)
            self._check_extreme(ids, found)
            faces.update(found)

        m = len(self.lineality)
        keys = sorted(faces, key=lambda f: (faces[f], tuple(sorted(f))))
        self._by_rays: Dict[FrozenSet[int], int] = {}
        built = []
        for index, key in enumerate(keys):
            ordered = tuple(sorted(key))
            basis = tuple(ordered[p] for p in independent([sparse(vectors[i]) for i in ordered], width))
            built.append(Cone(index, ordered, faces[key] + m, basis))
            self._by_rays[key] = index
        self.cones: Tuple[Cone, ...] = tuple(built)
        self._ray_sets = [frozenset(c.rays) for c in self.cones]
        if validate:
            self._check_overlaps()

    # construction checks
    def _check_rays(self) -> None:
        seen: Dict[Point, int] = {}
        for i, p in enumerate(self.projected):
            if not any(p):
                raise DegenerateRay(f"ray {i} lies in the lineality space")
            lead = next(abs(x) for x in p if x)
            key = tuple(x / lead for x in p)
            if key in seen:
                raise DegenerateRay(f"rays {seen[key]} and {i} are positively parallel")
            seen[key] = i

    @staticmethod
    def _check_extreme(ids: FrozenSet[int], found: Dict[FrozenSet[int], int]) -> None:
        covered = set()
        for face, d in found.items():
            if d != 1:
                continue
            if len(face) > 1:
                raise DegenerateRay(f"rays {sorted(face)} span the same half-line")
            covered |= face
        missing = sorted(ids - covered)
        if missing:
            raise NotAFace(f"rays {missing} are not extreme in cone {sorted(ids)}")

    def _check_overlaps(self) -> None:
        maximal = self.maximal
        width = self.chart.dim
        for a, b in combinations(maximal, 2):
            ra, rb = self._ray_sets[a], self._ray_sets[b]
            shared = ra & rb
            eq = [_split_row(self.projected[i]) for i in sorted(shared)]
            ineq = [_split_row(scale(QQ(-1), self.projected[i])) for i in sorted(ra - shared)]
            ineq += [_split_row(self.projected[i]) for i in sorted(rb - shared)]
            if not ineq:
                raise OverlappingCones(f"cones {a} and {b} coincide")
            try:
                linprog(
                    [0] * (2 * width),
                    A=ineq,
                    b=[-1] * len(ineq),
                    A_eq=eq or None,
                    b_eq=[0] * len(eq) if eq else None,
                )
            except InfeasibleLPError:
                raise OverlappingCones(
                    f"cones {list(self.cones[a].rays)} and {list(self.cones[b].rays)} meet outside a common face"
                ) from None

    # lattice
    def __len__(self) -> int:
        return len(self.cones)

    def __repr__(self) -> str:
        return f"Fan(dim={self.dim}, rays={len(self.rays)}, cones={len(self.cones)}, lineality={len(self.lineality)})"

    @property
    def lineality_dim(self) -> int:
        return len(self.lineality)

    @property
    def origin(self) -> int:
        return 0

    def cone_by_rays(self, ids: Iterable[int]) -> Optional[int]:
        return self._by_rays.get(frozenset(ids))

    def is_face(self, tau: int, sigma: int) -> bool:
        return self._ray_sets[tau] <= self._ray_sets[sigma]

    @cached_property
    def _faces(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(t for t in range(s + 1) if self.is_face(t, s)) for s in range(len(self.cones)))

    @cached_property
    def _cofaces(self) -> Tuple[Tuple[int, ...], ...]:
        up: List[List[int]] = [[] for _ in self.cones]
        for s, fs in enumerate(self._faces):
            for t in fs:
                up[t].append(s)
        return tuple(tuple(u) for u in up)

    def faces(self, sigma: int) -> Tuple[int, ...]:
        """Closed face set [sigma], increasing index."""
        return self._faces[sigma]

    def proper_faces(self, sigma: int) -> Tuple[int, ...]:
        return self._faces[sigma][:-1]

    def cofaces(self, tau: int) -> Tuple[int, ...]:
        """star tau: every cone containing tau."""
        return self._cofaces[tau]

    def facets(self, sigma: int) -> Tuple[int, ...]:
        d = self.cones[sigma].dim
        return tuple(t for t in self._faces[sigma] if self.cones[t].dim == d - 1)

    def closure(self, members: Iterable[int]) -> Tuple[int, ...]:
        out = set()
        for s in members:
            out.update(self._faces[s])
        return tuple(sorted(out))

    def meet(self, a: int, b: int) -> int:
        index = self.cone_by_rays(self._ray_sets[a] & self._ray_sets[b])
        if index is None:
            raise NotAFace(f"cones {a} and {b} do not meet in a common face")
        return index

    def maximal_among(self, members: Iterable[int]) -> Tuple[int, ...]:
        members = sorted(set(members))
        return tuple(s for s in members if not any(s != t and self.is_face(s, t) for t in members))

    @cached_property
    def maximal(self) -> Tuple[int, ...]:
        return self.maximal_among(range(len(self.cones)))

    def of_dim(self, d: int) -> Tuple[int, ...]:
        return tuple(c.index for c in self.cones if c.dim == d)

    @property
    def pure_dim(self) -> int:
        dims = {self.cones[s].dim for s in self.maximal}
        if len(dims) != 1:
            raise MixedDimension(f"maximal cones have dimensions {sorted(dims)}")
        return dims.pop()

    @property
    def is_simplicial(self) -> bool:
        return all(c.simplicial for c in self.cones)

    def pointed_dim(self, sigma: int) -> int:
        return self.cones[sigma].dim - self.lineality_dim

    # geometry
    def ray_vectors(self, sigma: int) -> List[Point]:
        return [self.rays[i] for i in self.cones[sigma].rays]

    def basis_vectors(self, sigma: int) -> List[Point]:
        return [self.rays[i] for i in self.cones[sigma].basis] + list(self.lineality)

    def barycenter(self, sigma: int) -> Point:
        out = tuple(QQ.zero for _ in range(self.dim))
        for v in self.ray_vectors(sigma):
            out = add(out, v)
        return out

    def local_coordinates(self, sigma: int, points: Sequence[Sequence]) -> List[Optional[list]]:
        """Coordinates in the pointed frame of sigma (None outside its span)."""
        frame = [self.projected[i] for i in self.cones[sigma].basis]
        return coordinates(frame, self.chart.project_many(points), self.chart.dim)

    @lru_cache(maxsize=None)
    def basis_change(self, tau: int, sigma: int) -> Tuple[Tuple, ...]:
        """Columns: the frame of tau written in the frame of sigma (tau <= sigma)."""
        frame_s = [self.projected[i] for i in self.cones[sigma].basis]
        frame_t = [self.projected[i] for i in self.cones[tau].basis]
        cols = coordinates(frame_s, frame_t, self.chart.dim)
        return tuple(tuple(c) for c in cols)

    @lru_cache(maxsize=None)
    def facet_normals(self, sigma: int) -> Tuple[Tuple[int, Tuple], ...]:
        """(facet, inward normal in sigma's frame) pairs."""
        d = self.pointed_dim(sigma)
        out = []
        for tau in self.facets(sigma):
            cols = self.basis_change(tau, sigma)
            normal = dense(nullspace([sparse(c) for c in cols], d)[0], d)
            inward = next(i for i in self.cones[sigma].rays if i not in self._ray_sets[tau])
            (v,) = self.local_coordinates(sigma, [self.rays[inward]])
            if dot(normal, v) < 0:
                normal = [-x for x in normal]
            out.append((tau, tuple(normal)))
        return tuple(out)

    def _position(self, sigma: int, p: Sequence) -> Optional[List[int]]:
        (coords,) = self.local_coordinates(sigma, [p])
        if coords is None:
            return None
        return [sign(dot(normal, coords)) for _, normal in self.facet_normals(sigma)]

    def contains(self, sigma: int, p: Sequence) -> bool:
        signs = self._position(sigma, p)
        return signs is not None and all(s >= 0 for s in signs)

    def in_relint(self, sigma: int, p: Sequence) -> bool:
        signs = self._position(sigma, p)
        return signs is not None and all(s > 0 for s in signs)

    def locate(self, p: Sequence) -> Optional[int]:
        """Smallest cone containing p, or None outside the support."""
        for cone in self.cones:
            if self.contains(cone.index, p):
                return cone.index
        return None

    def incidence(self, sigma: int, tau: int) -> int:
        """Orientation sign of the facet tau in sigma (frame of tau, then an inward ray)."""
        cols = [list(c) for c in self.basis_change(tau, sigma)[: self.pointed_dim(tau)]]
        inward = next(i for i in self.cones[sigma].rays if i not in self._ray_sets[tau])
        (v,) = self.local_coordinates(sigma, [self.rays[inward]])
        return sign(det(cols + [v]))

    def boundary_matrix(self, members: Sequence[int], d: int) -> Tuple[List[int], List[int], List[dict]]:
        """Cellular differential from d-cones to (d-1)-cones among ``members``, as sparse columns."""
        top = [s for s in members if self.cones[s].dim == d]
        low = [t for t in members if self.cones[t].dim == d - 1]
        pos = {t: i for i, t in enumerate(low)}
        cols = []
        for s in top:
            cols.append({pos[t]: QQ(self.incidence(s, t)) for t in self.facets(s) if t in pos})
        return top, low, cols

    # support
    def walls(self) -> Tuple[Tuple[int, Tuple[int, ...]], ...]:
        """(cone of codim 1 in the pure dimension, its top-dimensional cofaces)."""
        d = self.pure_dim
        out = []
        for w in self.of_dim(d - 1):
            tops = tuple(s for s in self.cofaces(w) if self.cones[s].dim == d)
            out.append((w, tops))
        return tuple(out)

    def boundary_walls(self) -> Tuple[int, ...]:
        return tuple(w for w, tops in self.walls() if len(tops) == 1)

    def boundary_cones(self) -> Tuple[int, ...]:
        """The boundary subfan (faces of boundary walls); empty when complete."""
        walls = self.boundary_walls()
        return self.closure(walls) if walls else ()

    def wall_normal(self, wall: int) -> Point:
        """Covector on the pointed chart vanishing on ``wall``."""
        rows = [sparse(self.projected[i]) for i in self.cones[wall].basis]
        return tuple(dense(nullspace(rows, self.chart.dim)[0], self.chart.dim))

    def pointed(self) -> "Fan":
        if not self.lineality:
            return self
        return Fan(self.chart.dim, self.projected, [self.cones[s].rays for s in self.maximal], validate=False)

    def quotient_subfan(
        self,
        tau: int,
        members: Optional[Iterable[int]] = None,
        span: Optional[Sequence[Sequence]] = None,
    ) -> "FanQuotient":
        """
        The fan {sigma / span(tau)} for the given cones containing tau.

        ``span`` fixes the ambient subspace the result lives in; by default the
        whole space. Lineality is always divided out.
        """
        members = tuple(sorted(self.cofaces(tau) if members is None else members))
        chart = Chart.build(self.dim, span, list(self.lineality) + self.ray_vectors(tau))
        tau_rays = self._ray_sets[tau]
        d_tau = self.cones[tau].dim
        member_set = set(members)
        directions = [k for k in members if self.cones[k].dim == d_tau + 1]
        new_rays = []
        for k in directions:
            extra = next(i for i in self.cones[k].rays if i not in tau_rays)
            new_rays.append(self.rays[extra])
        projected = chart.project_many(new_rays)
        cones_out = []
        for s in self.maximal_among(members):
            cones_out.append([j for j, k in enumerate(directions) if self.is_face(k, s)])
        fan = Fan(chart.dim, projected, cones_out, validate=False)
        cone_map = {}
        for s in members:
            ids = [j for j, k in enumerate(directions) if k in member_set and self.is_face(k, s)]
            cone_map[s] = fan.cone_by_rays(ids)
        return FanQuotient(fan, cone_map, chart, tau)

    def star_quotient(self, tau: int) -> "FanQuotient":
        return self.quotient_subfan(tau)

    def cellular_homology(self, members: Sequence[int]) -> Dict[int, int]:
        """Rational homology of the cellular chain complex on ``members``, graded by cone dimension."""
        members = sorted(members)
        dims = sorted({self.cones[s].dim for s in members})
        ranks = {}
        for d in dims:
            top, low, cols = self.boundary_matrix(members, d)
            ranks[d] = span_rank(cols, len(low)) if low and top else 0
        out = {}
        for d in dims:
            count = sum(1 for s in members if self.cones[s].dim == d)
            h = count - ranks.get(d, 0) - ranks.get(d + 1, 0)
            if h:
                out[d] = h
        return out


def check_cellular_signs(fan: Fan, members: Optional[Sequence[int]] = None) -> bool:
    """The incidence signs square to zero on the oriented cone complex."""
    members = sorted(range(len(fan)) if members is None else members)
    dims = sorted({fan.cones[s].dim for s in members})
    for d in dims:
        top, mid, upper = fan.boundary_matrix(members, d)
        _, low, lower = fan.boundary_matrix(members, d - 1)
        if not top or not mid or not low:
            continue
        for col in upper:
            composed = combine([col.get(i, QQ.zero) for i in range(len(mid))], lower)
            if composed:
                logger.debug("d o d is nonzero from dimension %s", d)
                return False
    return True


@dataclass(frozen=True)
class FanQuotient:
    fan: Fan
    cone_map: Dict[int, int]
    chart: Chart
    bottom: int


def build_fan(dim: int, rays: Sequence[Sequence], cones: Iterable[Iterable[int]], lineality: Sequence[Sequence] = ()) -> Fan:
    return Fan(dim, rays, cones, lineality, validate=True)


def classify_support(fan: Fan) -> str:
    """One of complete, convex, quasi_convex, none."""
    d = fan.pure_dim
    if d != fan.dim:
        return "none"
    walls = fan.boundary_walls()
    if not walls:
        return "complete"
    convex = True
    for w in walls:
        normal = fan.wall_normal(w)
        values = [dot(normal, p) for p in fan.projected]
        if not (all(v >= 0 for v in values) or all(v <= 0 for v in values)):
            convex = False
            break
    if convex:
        return "convex"
    boundary = fan.boundary_cones()
    for tau in boundary:
        upper = [s for s in boundary if fan.is_face(tau, s)]
        if fan.cellular_homology(upper) != {d - 1: 1}:
            logger.debug("boundary link at cone %s is not a homology sphere", tau)
            return "none"
    return "quasi_convex"


@dataclass(frozen=True)
class SubdivisionMap:
    """pi: source -> target, sending each source cone to the smallest target cone containing it."""

    source: Fan
    target: Fan
    assignment: Tuple[int, ...]

    @classmethod
    def from_fans(
        cls,
        source: Fan,
        target: Fan,
        assignment: Optional[Sequence[int]] = None,
        validate: bool = True,
    ) -> "SubdivisionMap":
        if source.dim != target.dim or source.lineality_dim != target.lineality_dim:
            raise SubdivisionMismatch("source and target live in different spaces")
        computed = []
        for cone in source.cones:
            sigma = target.locate(source.barycenter(cone.index))
            if sigma is None or not all(target.contains(sigma, v) for v in source.ray_vectors(cone.index)):
                raise SubdivisionMismatch(f"source cone {list(cone.rays)} is not inside a target cone")
            computed.append(sigma)
        if assignment is not None and list(assignment) != computed:
            raise SubdivisionMismatch("given assignment disagrees with the geometric one")
        result = cls(source, target, tuple(computed))
        if validate:
            result._check()
        return result

    def _check(self) -> None:
        src, tgt = self.source, self.target
        if self.assignment[src.origin] != tgt.origin:
            raise SubdivisionMismatch("the minimal cone must map to the minimal cone")
        for s in range(len(src)):
            for t in src.faces(s):
                if not tgt.is_face(self.assignment[t], self.assignment[s]):
                    raise SubdivisionMismatch("assignment is not order preserving")
        for sigma in tgt.maximal:
            d = tgt.cones[sigma].dim
            fiber = self.fiber(sigma)
            tops = [a for a in fiber if src.cones[a].dim == d]
            if not tops:
                raise SubdivisionMismatch(f"target cone {sigma} is not covered")
            for w in fiber:
                if src.cones[w].dim != d - 1:
                    continue
                cover = sum(1 for a in tops if src.is_face(w, a))
                need = 2 if self.assignment[w] == sigma else 1
                if cover != need:
                    raise SubdivisionMismatch(f"fiber over target cone {sigma} does not cover it")

    def image(self, alpha: int) -> int:
        return self.assignment[alpha]

    def fiber(self, sigma: int) -> Tuple[int, ...]:
        """Inverse image of [sigma]."""
        return tuple(a for a, s in enumerate(self.assignment) if self.target.is_face(s, sigma))

    def preimage(self, sigma: int) -> Tuple[int, ...]:
        return tuple(a for a, s in enumerate(self.assignment) if s == sigma)

    @property
    def is_identity(self) -> bool:
        return len(self.source) == len(self.target) and all(
            self.source.cones[a].dim == self.target.cones[s].dim for a, s in enumerate(self.assignment)
        )


def star_subdivision(fan: Fan, sigma: int, new_ray: Sequence) -> Tuple[Fan, SubdivisionMap]:
    rho = point(new_ray)
    if fan.pointed_dim(sigma) < 2 or not fan.in_relint(sigma, rho):
        raise RayNotInterior(f"ray {[str(QQ.to_sympy(x)) for x in rho]} is not interior to cone {sigma}")
    new_index = len(fan.rays)
    maximal = []
    for gamma in fan.maximal:
        if not fan.is_face(sigma, gamma):
            maximal.append(list(fan.cones[gamma].rays))
            continue
        for eta in fan.facets(gamma):
            if not fan.is_face(sigma, eta):
                maximal.append(list(fan.cones[eta].rays) + [new_index])
    result = Fan(fan.dim, list(fan.rays) + [rho], maximal, fan.lineality, validate=False)
    logger.debug("star subdivision of cone %s: %s -> %s maximal cones", sigma, len(fan.maximal), len(result.maximal))
    return result, SubdivisionMap.from_fans(result, fan, validate=False)


def barycentric_subdivision(fan: Fan) -> Tuple[Fan, SubdivisionMap, List[Tuple[Fan, SubdivisionMap]]]:
    """Star subdivisions at barycenters of all cones of dimension >= 2, largest first."""
    order = sorted(
        (c for c in fan.cones if fan.pointed_dim(c.index) >= 2),
        key=lambda c: (-c.dim, c.rays),
    )
    current = fan
    steps = []
    for cone in order:
        target = current.cone_by_rays(cone.rays)
        current, step = star_subdivision(current, target, fan.barycenter(cone.index))
        steps.append((current, step))
    return current, SubdivisionMap.from_fans(current, fan, validate=False), steps


def star_function(fan: Fan, new_ray: int) -> "PiecewiseFunction":
    """-1 on ``new_ray``, 0 on every other ray; bends across each wall through the new ray."""
    if fan.pure_dim != fan.dim:
        raise NotPiecewiseLinear("star functions need a full-dimensional fan")
    rho = fan.rays[new_ray]
    zero = tuple(QQ.zero for _ in range(fan.dim))
    forms = {}
    for s in fan.maximal:
        if new_ray not in fan.cones[s].rays:
            forms[s] = zero
            continue
        rows = [fan.rays[i] for i in fan.cones[s].rays if i != new_ray] + list(fan.lineality) + [rho]
        columns = [{r: v[c] for r, v in enumerate(rows) if v[c]} for c in range(fan.dim)]
        (form,) = solve(columns, [{len(rows) - 1: -QQ.one}], len(rows))
        if form is None:
            raise NotPiecewiseLinear(f"cone {s} is not a cone over a facet and the new ray")
        forms[s] = tuple(form)
    return PiecewiseFunction.from_linear_forms(fan, forms)


STELLAR_HALVINGS = 64


def stellar_function(final: Fan, steps: Sequence[Tuple[Fan, "SubdivisionMap"]]) -> "PiecewiseFunction":
    """
    Relatively strictly convex function for a sequence of star subdivisions.

    Star functions are concave along the boundary of their star, so each step's
    star function is added with a weight halved until the running sum bends
    strictly across every wall interior to a cone of the original fan.
    """
    if not steps:
        return PiecewiseFunction.global_linear(final, [0] * final.dim)
    original = steps[0][1].target
    total: Optional[PiecewiseFunction] = None
    for fan, step in steps:
        psi = star_function(fan, len(fan.rays) - 1)
        if total is None:
            total = psi
            continue
        base = PiecewiseFunction.pullback(step, total)
        to_original = SubdivisionMap.from_fans(fan, original, validate=False)
        weight = QQ.one
        for _ in range(STELLAR_HALVINGS):
            candidate = base + psi.scaled(weight)
            if check_convexity(candidate, to_original).relatively_strictly_convex:
                break
            weight /= 2
        else:
            raise NotPiecewiseLinear(f"no weight makes the star function at ray {len(fan.rays) - 1} fit")
        total = candidate
    if total.fan is not final:
        total = PiecewiseFunction.pullback(SubdivisionMap.from_fans(final, total.fan, validate=False), total)
    return total


def complete_convex_fan(fan: Fan, ray: Sequence) -> Fan:
    """Phi^c = Phi together with rho + w for every boundary wall w."""
    if classify_support(fan) != "convex":
        raise NotConvex("completion needs a convex, non-complete fan")
    rho = point(ray)
    opposite = fan.chart.project(scale(-QQ.one, rho))
    for w in fan.boundary_walls():
        normal = fan.wall_normal(w)
        inside = next(dot(normal, p) for p in fan.projected if dot(normal, p))
        if sign(dot(normal, opposite)) != sign(inside):
            raise RayNotOpposite("-rho is not in the interior of the support")
    new_index = len(fan.rays)
    cones = [list(fan.cones[s].rays) for s in fan.maximal]
    cones += [list(fan.cones[w].rays) + [new_index] for w in fan.boundary_walls()]
    return Fan(fan.dim, list(fan.rays) + [rho], cones, fan.lineality, validate=False)


def product_fan(first: Fan, second: Fan) -> Fan:
    n1, n2 = first.dim, second.dim
    zero1, zero2 = (QQ.zero,) * n1, (QQ.zero,) * n2
    rays = [tuple(r) + zero2 for r in first.rays] + [zero1 + tuple(r) for r in second.rays]
    lineality = [tuple(b) + zero2 for b in first.lineality] + [zero1 + tuple(b) for b in second.lineality]
    offset = len(first.rays)
    cones = [
        list(first.cones[a].rays) + [offset + i for i in second.cones[b].rays]
        for a in first.maximal
        for b in second.maximal
    ]
    return Fan(n1 + n2, rays, cones, lineality, validate=False)


@dataclass(frozen=True)
class LocalProduct:
    has_structure: bool
    complements: Dict[int, int] = field(default_factory=dict)


def detect_local_product(fan: Fan, tau: int) -> LocalProduct:
    """For each sigma >= tau, a face sigma' with sigma = tau + sigma' and spans meeting in 0."""
    complements = {}
    tau_rays = set(fan.cones[tau].rays)
    for sigma in fan.cofaces(tau):
        rest = [i for i in fan.cones[sigma].rays if i not in tau_rays]
        other = fan.cone_by_rays(rest)
        if other is None or not fan.is_face(other, sigma):
            return LocalProduct(False, complements)
        if fan.pointed_dim(other) + fan.pointed_dim(tau) != fan.pointed_dim(sigma):
            return LocalProduct(False, complements)
        complements[sigma] = other
    return LocalProduct(True, complements)


def detect_semismall(subdivision: SubdivisionMap) -> Tuple[bool, bool]:
    src, tgt = subdivision.source, subdivision.target
    if not src.is_simplicial:
        raise SourceNotSimplicial("semi-smallness is defined for simplicial sources")
    semi_small = small = True
    for cone in src.cones:
        d = src.pointed_dim(cone.index)
        image = tgt.pointed_dim(subdivision.image(cone.index))
        if image > 2 * d:
            semi_small = False
        if d > 0 and image >= 2 * d:
            small = False
    return semi_small, semi_small and small


class PiecewiseFunction:
    """
    Piecewise polynomial on a fan: one ambient polynomial per maximal cone.

    ``degree`` is cohomological, so linear pieces have degree 2.
    """

    def __init__(self, fan: Fan, pieces: Mapping[int, object], degree: int):
        self.fan = fan
        self.ring = ambient_ring(fan.dim)
        self.pieces = {s: self.ring(pieces[s]) for s in fan.maximal}
        self.degree = degree

    def __repr__(self) -> str:
        return f"PiecewiseFunction(degree={self.degree}, pieces={len(self.pieces)})"

    @classmethod
    def from_linear_forms(cls, fan: Fan, forms: Mapping[int, Sequence]) -> "PiecewiseFunction":
        R = ambient_ring(fan.dim)
        pieces = {}
        for s in fan.maximal:
            if s not in forms:
                raise NotPiecewiseLinear(f"no linear form given for maximal cone {s}")
            form = point(forms[s])
            if len(form) != fan.dim:
                raise NotPiecewiseLinear(f"form on cone {s} has the wrong length")
            pieces[s] = sum((c * g for c, g in zip(form, R.gens)), R.zero)
        result = cls(fan, pieces, 2)
        result._check_agreement()
        return result

    @classmethod
    def global_linear(cls, fan: Fan, form: Sequence) -> "PiecewiseFunction":
        return cls.from_linear_forms(fan, {s: form for s in fan.maximal})

    @classmethod
    def from_ray_values(cls, fan: Fan, values: Sequence) -> "PiecewiseFunction":
        """Simplicial fans only; the function vanishes on the lineality space."""
        if not fan.is_simplicial:
            raise NotPiecewiseLinear("ray values determine a function only on simplicial fans")
        values = point(values)
        forms = {}
        for s in fan.maximal:
            rows = [sparse(v) for v in fan.basis_vectors(s)]
            rhs = [values[i] for i in fan.cones[s].basis] + [QQ.zero] * fan.lineality_dim
            # solve rows . form = rhs for the form: transpose system
            cols = [dict() for _ in range(fan.dim)]
            for r, row in enumerate(rows):
                for j, v in row.items():
                    cols[j][r] = v
            (coeffs,) = solve(cols, [sparse(rhs)], len(rows))
            forms[s] = coeffs
        return cls.from_linear_forms(fan, forms)

    @classmethod
    def pullback(cls, subdivision: SubdivisionMap, function: "PiecewiseFunction") -> "PiecewiseFunction":
        src, tgt = subdivision.source, subdivision.target
        pieces = {}
        for a in src.maximal:
            sigma = subdivision.image(a)
            host = next(s for s in tgt.cofaces(sigma) if s in function.pieces)
            pieces[a] = function.pieces[host]
        return cls(src, pieces, function.degree)

    def _check_agreement(self) -> None:
        fan = self.fan
        for a, b in combinations(fan.maximal, 2):
            shared = [fan.rays[i] for i in set(fan.cones[a].rays) & set(fan.cones[b].rays)]
            for v in shared + list(fan.lineality):
                if self.evaluate(a, v) != self.evaluate(b, v):
                    raise NotPiecewiseLinear(f"pieces on cones {a} and {b} disagree on their common face")

    def evaluate(self, sigma: int, p: Sequence):
        return self.piece(sigma)(*p) if self.fan.dim else self.piece(sigma).LC

    def piece(self, sigma: int):
        """Polynomial of any maximal cone containing sigma."""
        if sigma in self.pieces:
            return self.pieces[sigma]
        host = next(s for s in self.fan.cofaces(sigma) if s in self.pieces)
        return self.pieces[host]

    def linear_form(self, sigma: int) -> Point:
        if self.degree != 2:
            raise NotPiecewiseLinear("function is not piecewise linear")
        poly = self.piece(sigma)
        return tuple(poly.coeff(g) for g in self.ring.gens)

    def __add__(self, other: "PiecewiseFunction") -> "PiecewiseFunction":
        return PiecewiseFunction(self.fan, {s: self.pieces[s] + other.pieces[s] for s in self.pieces}, self.degree)

    def __mul__(self, other: "PiecewiseFunction") -> "PiecewiseFunction":
        return PiecewiseFunction(
            self.fan, {s: self.pieces[s] * other.pieces[s] for s in self.pieces}, self.degree + other.degree
        )

    def scaled(self, c) -> "PiecewiseFunction":
        c = qq(c)
        return PiecewiseFunction(self.fan, {s: c * p for s, p in self.pieces.items()}, self.degree)

    def power(self, k: int) -> "PiecewiseFunction":
        return PiecewiseFunction(self.fan, {s: p ** k for s, p in self.pieces.items()}, self.degree * k)

    def pointed(self) -> "PiecewiseFunction":
        """The function on ``fan.pointed()``; changes it by a global linear function at most."""
        if not self.fan.lineality:
            return self
        fan = self.fan.pointed()
        chart = self.fan.chart
        return PiecewiseFunction.from_linear_forms(fan, {s: chart.pull_form(self.linear_form(s)) for s in fan.maximal})

    def descend(self, quotient: FanQuotient) -> "PiecewiseFunction":
        """Normalize to vanish on the bottom cone, then push to the quotient fan."""
        anchor = self.linear_form(quotient.bottom)
        forms = {}
        inverse = {}
        for old, new in quotient.cone_map.items():
            inverse.setdefault(new, old)
        for s in quotient.fan.maximal:
            form = tuple(x - y for x, y in zip(self.linear_form(inverse[s]), anchor))
            forms[s] = quotient.chart.pull_form(form)
        return PiecewiseFunction.from_linear_forms(quotient.fan, forms)


@dataclass(frozen=True)
class ConvexityReport:
    convex: bool
    strictly_convex: bool
    relatively_strictly_convex: Optional[bool] = None


def _wall_gap(function: PiecewiseFunction, fan: Fan, wall: int, a: int, b: int):
    """l_b(v) - l_a(v) for a ray v of b off the wall."""
    v = next(fan.rays[i] for i in fan.cones[b].rays if i not in fan.cones[wall].rays)
    return function.evaluate(b, v) - function.evaluate(a, v)


def check_convexity(function: PiecewiseFunction, target: Union[Fan, SubdivisionMap, None] = None) -> ConvexityReport:
    if function.degree != 2:
        raise NotPiecewiseLinear("convexity is checked for piecewise linear functions")
    fan = function.fan
    convex = strict = True
    for wall, tops in fan.walls():
        if len(tops) != 2:
            continue
        gap = _wall_gap(function, fan, wall, *tops)
        convex &= gap >= 0
        strict &= gap > 0
    relative = None
    if isinstance(target, SubdivisionMap):
        if target.source is not fan:
            raise NotPiecewiseLinear("function must live on the source of the subdivision")
        relative = True
        for sigma in range(len(target.target)):
            d = target.target.cones[sigma].dim
            fiber = target.fiber(sigma)
            tops = [a for a in fiber if fan.cones[a].dim == d]
            for w in fiber:
                if fan.cones[w].dim != d - 1 or target.image(w) != sigma:
                    continue
                pair = [a for a in tops if fan.is_face(w, a)]
                if len(pair) == 2 and not _wall_gap(function, fan, w, *pair) > 0:
                    relative = False
    return ConvexityReport(convex, convex and strict, relative)


def strictness_locus(function: PiecewiseFunction) -> Fan:
    """
    The coarsest fan on whose cones ``function`` is linear.

    Regions are unions of maximal cones joined across walls where the function
    does not bend; the lineality space is the common kernel of all differences
    of pieces.
    """
    fan = function.fan
    parent = {s: s for s in fan.maximal}

    def find(s):
        while parent[s] != s:
            parent[s] = parent[parent[s]]
            s = parent[s]
        return s

    for wall, tops in fan.walls():
        if len(tops) == 2 and not _wall_gap(function, fan, wall, *tops):
            a, b = find(tops[0]), find(tops[1])
            parent[max(a, b)] = min(a, b)
    regions: Dict[int, List[int]] = {}
    for s in fan.maximal:
        regions.setdefault(find(s), []).append(s)
    forms = [function.linear_form(s) for s in fan.maximal]
    base = forms[0]
    diffs = [sparse(tuple(x - y for x, y in zip(f, base))) for f in forms[1:]]
    lineality = [tuple(dense(v, fan.dim)) for v in nullspace(diffs, fan.dim)]
    chart = Chart.build(fan.dim, kernel=lineality)
    rays: List[Point] = []
    index: Dict[int, int] = {}
    cones = []
    for root in sorted(regions):
        ids = sorted({i for s in regions[root] for i in fan.cones[s].rays})
        ids = [i for i in ids if any(chart.project(fan.rays[i]))]
        vectors = {i: chart.project(fan.rays[i]) for i in ids}
        faces = enumerate_faces(vectors, ids, chart.dim)
        extreme = sorted(min(face) for face, d in faces.items() if d == 1)
        for i in extreme:
            index.setdefault(i, len(rays))
            if index[i] == len(rays):
                rays.append(fan.rays[i])
        cones.append([index[i] for i in extreme])
    return Fan(fan.dim, rays, cones, lineality, validate=False)
