"""
Evaluation of piecewise polynomials and the duality pairings built on it.

Intersection cohomology classes of a quasi-convex fan are realized as piecewise
polynomials on a simplicial refinement, multiplied, and summed cone by cone
with the localization formula.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from sympy.polys.domains import QQ

from .exceptions import (
    DegenerateRestriction,
    DenominatorNotCleared,
    InputError,
    NoLocalProduct,
    NotQuasiConvex,
    PairingDegenerate,
    RefinementNotSimplicial,
)
from .fans import (
    Fan,
    FanQuotient,
    PiecewiseFunction,
    Point,
    SubdivisionMap,
    ambient_ring,
    barycentric_subdivision,
    classify_support,
    det,
    detect_local_product,
)
from .linalg import (
    GradedSpace,
    Vector,
    as_columns,
    dense,
    dot,
    dump_matrix,
    independent,
    rank,
    signature,
    solve,
    sparse,
)
from .sheaves import (
    FiberData,
    IHQuotient,
    MultiplicityTable,
    SectionSpace,
    SheafModel,
    decompose,
    dual_frame,
    ih_quotient,
    minimal_extension_sheaf,
    pushforward,
    structure_sheaf,
)

logger = logging.getLogger(__name__)


def _linear_poly(R, covector: Sequence):
    return sum((c * g for c, g in zip(covector, R.gens) if c), R.zero)


def _evaluate_poly(poly, p: Sequence):
    total = QQ.zero
    for mono, c in poly.iterterms():
        term = c
        for x, e in zip(p, mono):
            if e:
                term *= x ** e
        total += term
    return total


@dataclass(frozen=True)
class EvaluationTerm:
    cone: int
    volume: object
    duals: Tuple[Point, ...]


class EvaluationContext:
    """Per maximal cone of a simplicial full-dimensional fan: |det| of its rays and their dual forms."""

    def __init__(self, fan: Fan):
        fan = fan.pointed()
        if not fan.is_simplicial:
            raise RefinementNotSimplicial("evaluation needs a simplicial fan")
        if fan.pure_dim != fan.dim:
            raise InputError("evaluation needs a full-dimensional fan")
        self.fan = fan
        self.ring = ambient_ring(fan.dim)
        self.terms = tuple(
            EvaluationTerm(a, abs(det(fan.basis_vectors(a))), tuple(dual_frame(fan, a))) for a in fan.maximal
        )
        self._points: Optional[List[Point]] = None

    def denominator(self, term: EvaluationTerm):
        out = self.ring(term.volume)
        for u in term.duals:
            out *= _linear_poly(self.ring, u)
        return out

    def sample_points(self, count: int = 2) -> List[Point]:
        """Moment-curve points (1, t, t^2, ...) off every dual hyperplane."""
        if self._points is None:
            points, t = [], 2
            while len(points) < count:
                p = tuple(QQ(t) ** i for i in range(self.fan.dim))
                if all(dot(u, p) for term in self.terms for u in term.duals):
                    points.append(p)
                t += 1
            self._points = points
        return self._points


def brion_evaluate(context: EvaluationContext, function: PiecewiseFunction, exact: bool = False):
    """
    Sum of f_a / (|det a| * prod u_i) over the maximal cones.

    Returns a rational in top degree and an ambient polynomial otherwise. The
    top-degree fast path evaluates at two generic points and falls back to exact
    rational-function arithmetic when they disagree.
    """
    fan = context.fan
    if function.fan is not fan and function.fan.rays != fan.rays:
        raise InputError("function does not live on the evaluation fan")
    excess = function.degree // 2 - fan.dim
    if excess < 0 and not exact:
        exact = True
    if excess == 0 and not exact:
        values = []
        for p in context.sample_points():
            total = QQ.zero
            for term in context.terms:
                denominator = term.volume
                for u in term.duals:
                    denominator *= dot(u, p)
                total += _evaluate_poly(function.piece(term.cone), p) / denominator
            values.append(total)
        if all(v == values[0] for v in values):
            return values[0]
        logger.debug("sample points disagree, evaluating exactly")
    R = context.ring
    F = R.to_field()
    total = F.zero
    for term in context.terms:
        total += F(function.piece(term.cone)) / F(context.denominator(term))
    numer, denom = total.numer.set_ring(R), total.denom.set_ring(R)
    if not denom.is_ground:
        raise DenominatorNotCleared("the localization sum is not a polynomial")
    result = numer.quo_ground(denom.LC)
    if excess == 0:
        return result.get(R.zero_monom, QQ.zero)
    return result


class Embedding:
    """
    A morphism L -> pi_* A onto a summand, built cone by cone: every stalk
    generator goes to a fiber section extending the images already chosen on
    the facets (particular solutions, so the choice is reproducible).
    """

    def __init__(self, sheaf: SheafModel, refinement: SubdivisionMap):
        self.sheaf = sheaf
        self.refinement = refinement
        self.structure = structure_sheaf(refinement.source, cap=sheaf.cap)
        self.fine = self.structure.fan
        self.pieces: Dict[int, FiberData] = {}
        self._forms: Dict[int, list] = {}
        fan = sheaf.fan
        for sigma in sorted(range(len(fan)), key=lambda s: (fan.cones[s].dim, s)):
            stalk = sheaf.stalk(sigma)
            if not stalk:
                continue
            space = SectionSpace(self.structure, refinement.fiber(sigma), dual_frame(fan, sigma))
            lifts = [self._lift(sigma, space, stalk.generator(j), a) for j, a in enumerate(stalk.degrees)]
            self.pieces[sigma] = FiberData(space, space.module(sheaf.cap), list(stalk.degrees), lifts)

    def _lift(self, sigma: int, space: SectionSpace, generator: Vector, k: int) -> Vector:
        fan = self.sheaf.fan
        facets = [r for r in fan.facets(sigma) if r in self.pieces]
        basis = space.basis(k)
        if not facets:
            if len(basis) != 1:
                raise PairingDegenerate(f"fiber of cone {sigma} is not connected")
            return basis[0]
        blocks = [(r, a) for r in facets for a in self.pieces[r].space.tops]
        offsets, total = [], 0
        for _, a in blocks:
            offsets.append(total)
            total += self.structure.stalk(a).dim(k)

        def boundary(values: Dict[int, Dict[int, Vector]]) -> Vector:
            out: Vector = {}
            for (r, a), off in zip(blocks, offsets):
                for i, v in values[r][a].items():
                    out[off + i] = v
            return out

        target = {}
        for r in facets:
            piece = self.pieces[r]
            section = piece.evaluate(self.sheaf.stalk(r), self.sheaf.restrict(sigma, r, generator, k), k)
            target[r] = {a: piece.space.value(section, k, a) for a in piece.space.tops}
        columns = []
        for b in basis:
            columns.append(boundary({r: {a: space.value(b, k, a) for a in self.pieces[r].space.tops} for r in facets}))
        (coeffs,) = solve(columns, [boundary(target)], total)
        if coeffs is None:
            raise PairingDegenerate(f"generator of cone {sigma} has no extension to the refinement")
        out: Vector = {}
        for c, b in zip(coeffs, basis):
            if c:
                for i, v in b.items():
                    out[i] = out.get(i, QQ.zero) + c * v
        return {i: v for i, v in out.items() if v}

    def function(self, sections: SectionSpace, vec: Vector, k: int) -> PiecewiseFunction:
        """The piecewise polynomial on the refinement representing a section of L."""
        R = ambient_ring(self.fine.dim)
        pieces = {}
        for sigma in sections.tops:
            piece = self.pieces[sigma]
            fiber_section = piece.evaluate(self.sheaf.stalk(sigma), sections.value(vec, k, sigma), k)
            for a in piece.space.tops:
                local = piece.space.value(fiber_section, k, a)
                pieces[a] = self._ambient(a, local, k)
        for a in self.fine.maximal:
            pieces.setdefault(a, R.zero)
        return PiecewiseFunction(self.fine, pieces, 2 * k)

    def _ambient(self, alpha: int, local: Vector, k: int):
        R = ambient_ring(self.fine.dim)
        if alpha not in self._forms:
            self._forms[alpha] = [_linear_poly(R, u) for u in dual_frame(self.fine, alpha)]
        stalk = self.structure.stalk(alpha)
        decode = stalk.layout(k)[1]
        out = R.zero
        for idx, v in local.items():
            _, mono = decode[idx]
            term = R(v)
            for lin, e in zip(self._forms[alpha], mono):
                if e:
                    term *= lin ** e
            out += term
        return out


@dataclass
class PairingData:
    """
    ``matrices[d]``: rows are relative classes in degree 2n - d, columns are
    absolute classes in degree d.
    """

    fan: Fan
    refinement: SubdivisionMap
    absolute: IHQuotient
    relative: IHQuotient
    embedding: Embedding
    context: EvaluationContext
    matrices: Dict[int, list] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.fan.dim

    def function(self, vec: Vector, k: int, rel: bool = False) -> PiecewiseFunction:
        space = self.relative if rel else self.absolute
        return self.embedding.function(space.sections, vec, k)

    def pair(self, first: PiecewiseFunction, second: PiecewiseFunction):
        return brion_evaluate(self.context, first * second)

    def block(self, d: int) -> list:
        return self.matrices.get(d, [])

    def to_dict(self) -> dict:
        return {str(d): dump_matrix(m) for d, m in sorted(self.matrices.items())}


def default_refinement(fan: Fan) -> SubdivisionMap:
    if fan.is_simplicial:
        return SubdivisionMap.from_fans(fan, fan, validate=False)
    return barycentric_subdivision(fan)[1]


def poincare_pairing(fan: Fan, refinement: Optional[SubdivisionMap] = None, cap: Optional[int] = None) -> PairingData:
    fan = fan.pointed()
    if classify_support(fan) not in ("complete", "convex", "quasi_convex"):
        raise NotQuasiConvex("the pairing needs a quasi-convex fan")
    if refinement is None:
        refinement = default_refinement(fan)
    if not refinement.source.is_simplicial:
        raise RefinementNotSimplicial("the refinement must be simplicial")
    if refinement.target.rays != fan.rays or len(refinement.target) != len(fan):
        raise InputError("refinement does not subdivide the given fan")
    sheaf = structure_sheaf(fan, cap) if fan.is_simplicial else minimal_extension_sheaf(fan, cap=cap)
    absolute = ih_quotient(sheaf)
    relative = ih_quotient(sheaf, rel=True)
    embedding = Embedding(sheaf, refinement)
    context = EvaluationContext(embedding.fine)
    data = PairingData(fan, refinement, absolute, relative, embedding, context)
    n = fan.dim
    for d in range(0, 2 * n + 1, 2):
        other = 2 * n - d
        if absolute.space[d] != relative.space[other]:
            raise PairingDegenerate(
                f"IH^{d} has dimension {absolute.space[d]} but the relative IH^{other} has {relative.space[other]}"
            )
        if not absolute.space[d]:
            continue
        rows = [data.function(r, other // 2, rel=True) for r in relative.reps(other // 2)]
        cols = [data.function(c, d // 2) for c in absolute.reps(d // 2)]
        matrix = [[data.pair(f, g) for g in cols] for f in rows]
        if rank([sparse(r) for r in matrix], len(cols)) != len(cols):
            raise PairingDegenerate(f"pairing between degrees {other} and {d} is degenerate")
        data.matrices[d] = matrix
    logger.debug("pairing on %r: IH %s", fan, absolute.space.betti())
    return data


@dataclass
class WForm:
    """
    Symmetric form on W_sigma; ``blocks[d]`` pairs W^(2c-d) (rows) with W^d (columns).

    W^d is spanned by the images of the relative classes ``chosen[d]`` of the
    fiber fan in its absolute classes; ``images[d]`` holds all of them.
    """

    cone: int
    center: int
    space: GradedSpace
    blocks: Dict[int, list] = field(default_factory=dict)
    pairing: Optional[PairingData] = None
    lifts: Dict[int, List[Vector]] = field(default_factory=dict)
    images: Dict[int, List[Vector]] = field(default_factory=dict)
    chosen: Dict[int, List[int]] = field(default_factory=dict)
    quotient: Optional[FanQuotient] = None

    def block(self, d: int) -> list:
        return self.blocks.get(d, [])

    def basis(self, d: int) -> List[Vector]:
        """W^d basis in absolute coordinates of the fiber fan."""
        return [self.images[d][j] for j in self.chosen.get(d, [])]

    def is_symmetric(self) -> bool:
        for d, m in self.blocks.items():
            t = self.block(2 * self.center - d)
            if any(m[i][j] != t[j][i] for i in range(len(m)) for j in range(len(m[i]))):
                return False
        return True

    def to_dict(self) -> dict:
        return {str(d): dump_matrix(m) for d, m in sorted(self.blocks.items())}


def fiber_fan(subdivision: SubdivisionMap, sigma: int, tau: int = 0) -> Optional[FanQuotient]:
    """The cones over sigma that contain tau, as a fan in span(sigma) / span(tau)."""
    source = subdivision.source.pointed()
    target = subdivision.target.pointed()
    members = [a for a in subdivision.fiber(sigma) if source.is_face(tau, a)]
    if not members:
        return None
    return source.quotient_subfan(tau, members, span=target.basis_vectors(sigma))


def image_form(data: PairingData, cone: int = 0, quotient: Optional[FanQuotient] = None) -> WForm:
    """
    The image of relative classes in absolute classes with the form
    (w', w) -> <w', h> for any relative class h mapping to w.
    """
    c = data.dim
    images: Dict[int, List[Vector]] = {}
    chosen: Dict[int, List[int]] = {}
    for d in range(0, 2 * c + 1, 2):
        reps = data.relative.reps(d // 2)
        images[d] = [data.absolute.coordinates(r, d // 2) for r in reps]
        chosen[d] = independent(images[d], data.absolute.space[d])
    space = GradedSpace({d: len(idx) for d, idx in chosen.items()})
    form = WForm(cone, c, space, pairing=data, images=images, chosen=chosen, quotient=quotient)
    for d, idx in chosen.items():
        if not idx:
            continue
        other = 2 * c - d
        matrix = data.block(d)
        cols = [dense(images[d][j], data.absolute.space[d]) for j in idx]
        gram = [[dot(matrix[i], col) for col in cols] for i in chosen[other]]
        if rank([sparse(r) for r in gram], len(cols)) != len(cols):
            raise DegenerateRestriction(f"form on W of cone {cone} is degenerate in degree {d}")
        form.blocks[d] = gram
        form.lifts[d] = [data.relative.reps(d // 2)[j] for j in idx]
    return form


def w_form(
    subdivision: SubdivisionMap,
    tau: int = 0,
    table: Optional[MultiplicityTable] = None,
    cap: Optional[int] = None,
) -> Dict[int, WForm]:
    """
    Forms on the multiplicity spaces: W_sigma is the image of the relative
    classes of the fiber fan in its absolute classes, paired by the fiber fan's
    own duality.
    """
    if table is None:
        table = decompose(pushforward(subdivision, minimal_extension_sheaf(subdivision.source, tau, cap), cap))
    out: Dict[int, WForm] = {}
    for sigma in table.nonzero():
        quotient = fiber_fan(subdivision, sigma, tau)
        if quotient is None:
            raise DegenerateRestriction(f"cone {sigma} carries multiplicities but its fiber misses the cone {tau}")
        form = image_form(poincare_pairing(quotient.fan, cap=cap), sigma, quotient)
        if form.space != table.spaces[sigma]:
            raise DegenerateRestriction(
                f"cone {sigma}: fiber classes give W = {form.space.betti()} but the decomposition gives "
                f"{table.spaces[sigma].betti()}"
            )
        out[sigma] = form
    return out


# local product generators
def chi_generator(fan: Fan, tau: int) -> PiecewiseFunction:
    """
    Product of the dual forms of tau's rays on star(tau), extended by the local
    product structure and zero elsewhere; positive on the relative interior of tau.
    """
    cone = fan.cones[tau]
    if not cone.simplicial:
        raise NoLocalProduct(f"cone {tau} is not simplicial")
    product = detect_local_product(fan, tau)
    if not product.has_structure:
        raise NoLocalProduct(f"fan has no local product structure at cone {tau}")
    R = ambient_ring(fan.dim)
    tau_rays = [fan.rays[i] for i in cone.rays]
    pieces = {}
    for sigma in fan.maximal:
        if not fan.is_face(tau, sigma):
            pieces[sigma] = R.zero
            continue
        frame = tau_rays + fan.basis_vectors(product.complements[sigma])
        columns = [{j: b[c] for j, b in enumerate(frame) if b[c]} for c in range(fan.dim)]
        chi = R.one
        for i in range(len(tau_rays)):
            (u,) = solve(columns, [{i: QQ.one}], len(frame))
            chi *= _linear_poly(R, u)
        pieces[sigma] = chi
    return PiecewiseFunction(fan, pieces, 2 * fan.pointed_dim(tau))


def closed_star(fan: Fan, tau: int) -> Tuple[Fan, int]:
    """[star tau] as a fan on the same rays, and the index of tau in it."""
    tops = [fan.cones[s].rays for s in fan.maximal_among(fan.cofaces(tau))]
    star = Fan(fan.dim, fan.rays, tops, fan.lineality, validate=False)
    return star, star.cone_by_rays(fan.cones[tau].rays)


def check_chi_isomorphism(fan: Fan, tau: int, cap: Optional[int] = None) -> bool:
    """Multiplication by chi maps IH([star tau]) bijectively onto the relative classes."""
    star, t = closed_star(fan.pointed(), tau)
    chi = chi_generator(star, t)
    sheaf = minimal_extension_sheaf(star, cap=cap)
    absolute = ih_quotient(sheaf)
    relative = ih_quotient(sheaf, rel=True)
    shift = chi.degree
    for d in absolute.space.degrees():
        if absolute.space[d] != relative.space[d + shift]:
            logger.debug("degree %s: %s classes against %s relative ones", d, absolute.space[d], relative.space[d + shift])
            return False
        k = d // 2
        images = [relative.coordinates(absolute.sections.multiply(chi, r, k), k + shift // 2) for r in absolute.reps(k)]
        if rank(as_columns(images, relative.space[d + shift]), len(images)) != len(images):
            return False
    return True


def check_chi_transport(fan: Fan, tau: int, cap: Optional[int] = None) -> bool:
    """
    The form (a, b) -> <chi a, b> on IH([star tau]) matches the duality of the
    star quotient up to congruence: same ranks, same inertia on the middle degree.
    """
    fan = fan.pointed()
    star, t = closed_star(fan, tau)
    chi = chi_generator(star, t)
    data = poincare_pairing(star, cap=cap)
    chi_fine = PiecewiseFunction.pullback(data.refinement, chi)
    quotient = poincare_pairing(fan.star_quotient(tau).fan, cap=cap)
    m = quotient.dim
    for d in range(0, 2 * m + 1, 2):
        other = 2 * m - d
        if data.absolute.space[d] != quotient.absolute.space[d]:
            return False
        if not data.absolute.space[d]:
            continue
        rows = [chi_fine * data.function(r, other // 2) for r in data.absolute.reps(other // 2)]
        cols = [data.function(c, d // 2) for c in data.absolute.reps(d // 2)]
        matrix = [[data.pair(f, g) for g in cols] for f in rows]
        if rank([sparse(r) for r in matrix], len(cols)) != len(cols):
            return False
        if d == other and signature(matrix) != signature(quotient.block(d)):
            return False
    return True
