"""
Lefschetz operators and the verifier suite.

Every verifier certifies its convexity hypotheses first (raising a
HypothesisError when they fail, unless ``certify=False``), then checks the
finite statement degree by degree and returns a report. A failing statement
is reported with ``passed=False``; it is never raised.

Degrees are cohomological throughout: a space with center ``c`` is checked on
the pairs (c - i, c + i).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from sqlalchemy.orm import Session
from sympy.polys.domains import QQ

from .config import settings
from .exceptions import (
    HLFailed,
    HypothesisError,
    InternalTripwire,
    NotComplete,
    NotConvex,
    NotRelativelyConvex,
    NotStrictlyConvex,
)
from .fans import (
    Fan,
    FanQuotient,
    PiecewiseFunction,
    SubdivisionMap,
    check_convexity,
    classify_support,
    enumerate_faces,
    strictness_locus,
)
from .linalg import (
    GradedMap,
    GradedSpace,
    Vector,
    combine,
    congruent,
    dense,
    dot,
    fmt,
    independent,
    qq,
    rank,
    restrict_map,
    signature,
    solve,
    sparse,
)
from .models import CheckReport, DegreeRow, HodgeRiemannReport, LefschetzReport
from .orchestrator import run_checks
from .pairing import PairingData, WForm, image_form, poincare_pairing, w_form
from .sheaves import (
    decompose,
    function_action,
    ih_quotient,
    minimal_extension_sheaf,
    pushforward,
)

logger = logging.getLogger(__name__)

Gram = Callable[[int], list]


# degree tables
def _witnesses(vectors: Sequence[Vector], dim: int) -> List[List[str]]:
    return [[fmt(x) for x in dense(v, dim)] for v in vectors]


def _powers(op: GradedMap, top: int) -> List[GradedMap]:
    out = [GradedMap.identity(op.source)]
    for _ in range(top):
        out.append(op.compose(out[-1]))
    return out


def lefschetz_rows(op: GradedMap, space: GradedSpace, center: int) -> Tuple[List[DegreeRow], List[List[str]]]:
    """Rank of op^i on degree center - i against the required dimension, for i >= 1."""
    rows: List[DegreeRow] = []
    witnesses: List[List[str]] = []
    powers = _powers(op, center)
    for i in range(1, center + 1):
        d = center - i
        if d % 2 or not (space[d] or space[center + i]):
            continue
        power = powers[i]
        r = power.rank(d)
        passed = r == space[d] == space[center + i]
        if not passed:
            witnesses.extend(_witnesses(power.kernel(d), space[d]))
        rows.append(DegreeRow(degree=d, i=i, rank=r, required=space[d], passed=passed))
    return rows, witnesses


def _primitive_dims(space: GradedSpace, center: int) -> Dict[int, int]:
    return {d: space[d] - space[d - 2] for d in range(0, center + 1, 2)}


def _expected_inertia(space: GradedSpace, center: int, d: int, sign: Callable[[int], int]) -> List[int]:
    """Inertia predicted by the Lefschetz decomposition: piece l^j Prim^(d-2j) has sign sign(d-2j)."""
    prim = _primitive_dims(space, center)
    pos = neg = 0
    for e in range(d, -1, -2):
        n = prim.get(e, 0)
        if sign(e) > 0:
            pos += n
        else:
            neg += n
    return [pos, neg, 0]


def hodge_riemann_rows(
    op: GradedMap,
    space: GradedSpace,
    center: int,
    gram: Gram,
    sign: Optional[Callable[[int], int]] = None,
) -> Tuple[List[DegreeRow], List[List[str]]]:
    """
    Q(a, b) = <op^i a, b> on degree center - i for i >= 0.

    ``gram(d)`` pairs degree 2*center - d (rows) with degree d (columns). Each
    row passes when sign * Q is positive definite on ker op^(i+1) and the
    inertia on the whole degree matches the Lefschetz decomposition.
    """
    sign = sign or (lambda d: -1 if (d // 2) % 2 else 1)
    rows: List[DegreeRow] = []
    witnesses: List[List[str]] = []
    powers = _powers(op, center + 1)
    for i in range(0, center + 1):
        d = center - i
        if d % 2 or not space[d]:
            continue
        n = space[d]
        g = gram(d)
        images = [dense(powers[i].apply(d, {a: QQ.one}), space[center + i]) for a in range(n)]
        q = [[sum((x * row[b] for x, row in zip(img, g)), QQ.zero) for b in range(n)] for img in images]
        inertia = signature(q)
        prim = powers[i + 1].kernel(d)
        s = sign(d)
        if prim:
            restricted = congruent(q, [dense(v, n) for v in prim])
            prim_inertia = signature([[s * x for x in row] for row in restricted])
        else:
            prim_inertia = (0, 0, 0)
        expected = _expected_inertia(space, center, d, sign)
        passed = prim_inertia == (len(prim), 0, 0) and list(inertia) == expected
        if not passed:
            witnesses.extend(_witnesses(prim, n))
        rows.append(
            DegreeRow(
                degree=d,
                i=i,
                rank=powers[i].rank(d),
                required=n,
                inertia=list(inertia),
                expected=expected,
                primitive_inertia=list(prim_inertia),
                sign=s,
                passed=passed,
            )
        )
    return rows, witnesses


@dataclass
class PrimitiveDecomposition:
    """``primitive[d]`` = ker op^(c-d+1) in degree d; ``components[(d, j)]`` = op^j of it."""

    center: int
    space: GradedSpace
    primitive: Dict[int, List[Vector]] = field(default_factory=dict)
    components: Dict[Tuple[int, int], List[Vector]] = field(default_factory=dict)

    def dims(self) -> Dict[int, int]:
        return {d: len(self.primitive.get(d, [])) for d in self.space.degrees()}


def primitive_decomposition(op: GradedMap, space: GradedSpace, center: int) -> PrimitiveDecomposition:
    rows, _ = lefschetz_rows(op, space, center)
    failed = [r for r in rows if not r.passed]
    if failed:
        raise HLFailed(f"op^{failed[0].i} is not bijective on degree {failed[0].degree}")
    powers = _powers(op, center + 1)
    out = PrimitiveDecomposition(center, space)
    for d in range(center, -1, -1):
        if d % 2 or not space[d]:
            continue
        i = center - d
        prim = powers[i + 1].kernel(d)
        if len(prim) != space[d] - space[d - 2]:
            raise InternalTripwire(f"primitive part in degree {d} has dimension {len(prim)}")
        out.primitive[d] = prim
        for j in range(i + 1):
            if prim:
                out.components[(d, j)] = [powers[j].apply(d, v) for v in prim]
    for e in space.degrees():
        pieces = [v for (d, j), vs in out.components.items() if d + 2 * j == e for v in vs]
        if len(pieces) != space[e] or rank(pieces, space[e]) != space[e]:
            raise InternalTripwire(f"Lefschetz components do not split degree {e}")
    return out


# hypotheses
def _cone_rays(fan: Fan, sigma: int) -> List[int]:
    return list(fan.cones[sigma].rays)


def _star_quotient(fan: Fan, l: PiecewiseFunction, tau: Optional[int]) -> Tuple[FanQuotient, PiecewiseFunction]:
    tau = fan.origin if tau is None else tau
    quotient = fan.quotient_subfan(tau)
    return quotient, l.descend(quotient)


def _certify_complete_strict(fan: Fan, l: PiecewiseFunction) -> Dict[str, object]:
    support = classify_support(fan)
    if support != "complete":
        raise NotComplete(f"support is {support}, a complete fan is required")
    report = check_convexity(l)
    if not report.strictly_convex:
        raise NotStrictlyConvex("l is not strictly convex")
    return {"support": support, "strictly_convex": True}


def _certify_relative(subdivision: SubdivisionMap, l_hat: PiecewiseFunction) -> Dict[str, object]:
    report = check_convexity(l_hat, subdivision)
    if not report.relatively_strictly_convex:
        raise NotRelativelyConvex("l_hat is not strictly convex on every fiber")
    return {"relatively_strictly_convex": True}


def _relative_transfer(data: PairingData) -> Gram:
    """Gram matrices of an IH pairing on a complete fan, rows converted to absolute classes."""
    absolute, relative = data.absolute, data.relative
    n = data.dim

    def gram(d: int) -> list:
        other = 2 * n - d
        k = other // 2
        matrix = data.block(d)
        out = []
        for r in absolute.reps(k):
            t = relative.coordinates(r, k)
            out.append([sum((c * matrix[m][b] for m, c in t.items()), QQ.zero) for b in range(absolute.space[d])])
        return out

    return gram


# HL / HR
def check_hl(
    fan: Fan,
    l: PiecewiseFunction,
    tau: Optional[int] = None,
    cap: Optional[int] = None,
    certify: bool = True,
) -> LefschetzReport:
    """l^i : IH^(c-i) -> IH^(c+i) on the star of tau, computed on the quotient fan."""
    quotient, l_q = _star_quotient(fan, l, tau)
    hypotheses = _certify_complete_strict(quotient.fan, l_q) if certify else {"certified": False}
    quotient_ih = ih_quotient(minimal_extension_sheaf(quotient.fan, cap=cap))
    op = quotient_ih.operator(l_q)
    c = quotient.fan.dim
    rows, witnesses = lefschetz_rows(op, quotient_ih.space, c)
    hypotheses.update(center=c, ih=quotient_ih.space.betti())
    logger.debug("HL on star of %s: %s", tau, [(r.degree, r.rank, r.required) for r in rows])
    return LefschetzReport(
        name="hl",
        hypotheses=hypotheses,
        cone=_cone_rays(fan, quotient.bottom),
        table=rows,
        passed=all(r.passed for r in rows),
        witnesses=witnesses,
    )


def check_hr(
    fan: Fan,
    l: PiecewiseFunction,
    tau: Optional[int] = None,
    cap: Optional[int] = None,
    certify: bool = True,
) -> HodgeRiemannReport:
    """(-1)^((c-i)/2) <l^i h, h> positive definite on ker l^(i+1) in degree c - i."""
    quotient, l_q = _star_quotient(fan, l, tau)
    hypotheses = _certify_complete_strict(quotient.fan, l_q) if certify else {"certified": False}
    data = poincare_pairing(quotient.fan, cap=cap)
    op = data.absolute.operator(l_q)
    c = data.dim
    rows, witnesses = hodge_riemann_rows(op, data.absolute.space, c, _relative_transfer(data))
    hypotheses.update(center=c, ih=data.absolute.space.betti())
    return HodgeRiemannReport(
        name="hr",
        hypotheses=hypotheses,
        cone=_cone_rays(fan, quotient.bottom),
        table=rows,
        passed=all(r.passed for r in rows),
        witnesses=witnesses,
    )


# relative statements
def _w_operator(form: WForm, op: GradedMap) -> GradedMap:
    """An operator on the fiber's relative classes, transported to W through the image map."""
    data = form.pairing
    blocks = {}
    for d in form.space.degrees():
        e = d + op.shift
        target = form.basis(e)
        cols = []
        for j in form.chosen[d]:
            rel = op.apply(d, {j: QQ.one})
            image = combine([rel.get(m, QQ.zero) for m in range(len(form.images[e]))], form.images[e])
            if not target:
                if image:
                    raise InternalTripwire(f"operator leaves W of cone {form.cone}")
                cols.append({})
                continue
            (coeffs,) = solve(target, [image], data.absolute.space[e])
            if coeffs is None:
                raise InternalTripwire(f"operator leaves W of cone {form.cone}")
            cols.append(sparse(coeffs))
        blocks[d] = cols
    return GradedMap(form.space, form.space, op.shift, blocks)


def _relative_jobs(
    table_cones: Sequence[int],
    check: Callable[[int], CheckReport],
    db: Optional[Session],
    run_id: Optional[str],
) -> List[CheckReport]:
    jobs = [(f"cone {sigma}", (lambda s=sigma: check(s))) for sigma in table_cones]
    return run_checks(jobs, db=db, run_id=run_id)


def check_rhl(
    subdivision: SubdivisionMap,
    l_hat: PiecewiseFunction,
    tau: Optional[int] = None,
    cap: Optional[int] = None,
    certify: bool = True,
    db: Optional[Session] = None,
    run_id: Optional[str] = None,
) -> LefschetzReport:
    """l_hat^p : W_sigma^(-p) -> W_sigma^(p) for every cone, in the grading centered at dim sigma - dim tau."""
    source = subdivision.source
    tau = source.origin if tau is None else tau
    hypotheses = _certify_relative(subdivision, l_hat) if certify else {"certified": False}
    d_tau = source.pointed_dim(tau)
    table = decompose(pushforward(subdivision, minimal_extension_sheaf(source, tau, cap), cap), offset=d_tau)
    target = table.sheaf.fan
    function = l_hat.pointed()

    def one(sigma: int) -> CheckReport:
        op = function_action(function, table, sigma)
        centre = target.pointed_dim(sigma) - d_tau
        rows, witnesses = lefschetz_rows(op, table.spaces[sigma], centre)
        return LefschetzReport(
            name=f"rhl cone {sigma}",
            hypotheses={"center": centre, "w": table.spaces[sigma].betti()},
            cone=_cone_rays(target, sigma),
            table=rows,
            passed=all(r.passed for r in rows),
            witnesses=witnesses,
        )

    children = _relative_jobs(table.nonzero(), one, db, run_id)
    hypotheses.update(tau=_cone_rays(source, tau))
    return LefschetzReport(
        name="rhl",
        hypotheses=hypotheses,
        passed=all(c.passed for c in children),
        children=children,
    )


def _w_report(name: str, form: WForm, op: GradedMap, sign: Optional[Callable[[int], int]] = None) -> CheckReport:
    hl, hl_witnesses = lefschetz_rows(op, form.space, form.center)
    hr, hr_witnesses = hodge_riemann_rows(op, form.space, form.center, form.block, sign)
    children = [
        LefschetzReport(name=f"{name} hl", table=hl, passed=all(r.passed for r in hl), witnesses=hl_witnesses),
        HodgeRiemannReport(name=f"{name} hr", table=hr, passed=all(r.passed for r in hr), witnesses=hr_witnesses),
    ]
    return HodgeRiemannReport(
        name=name,
        hypotheses={"center": form.center, "w": form.space.betti()},
        table=hr,
        passed=all(c.passed for c in children),
        witnesses=hr_witnesses,
        children=children,
    )


def check_rhr(
    subdivision: SubdivisionMap,
    l_hat: PiecewiseFunction,
    tau: Optional[int] = None,
    cap: Optional[int] = None,
    certify: bool = True,
    db: Optional[Session] = None,
    run_id: Optional[str] = None,
) -> HodgeRiemannReport:
    """Signed definiteness of <l_hat^i w, w> on the primitive part of every W_sigma."""
    source = subdivision.source
    tau = source.origin if tau is None else tau
    hypotheses = _certify_relative(subdivision, l_hat) if certify else {"certified": False}
    table = decompose(
        pushforward(subdivision, minimal_extension_sheaf(source, tau, cap), cap), offset=source.pointed_dim(tau)
    )
    forms = w_form(subdivision, tau, table, cap)
    target = table.sheaf.fan
    function = l_hat.pointed()

    def one(sigma: int) -> CheckReport:
        form = forms[sigma]
        local = function.descend(form.quotient)
        op = _w_operator(form, form.pairing.relative.operator(local))
        report = _w_report(f"rhr cone {sigma}", form, op)
        report.cone = _cone_rays(target, sigma)
        return report

    children = _relative_jobs(sorted(forms), one, db, run_id)
    hypotheses.update(tau=_cone_rays(source, tau))
    return HodgeRiemannReport(
        name="rhr",
        hypotheses=hypotheses,
        passed=all(c.passed for c in children),
        children=children,
    )


def _is_pointed_support(fan: Fan) -> bool:
    if fan.lineality:
        return False
    vectors = dict(enumerate(fan.projected))
    faces = enumerate_faces(vectors, range(len(fan.rays)), fan.chart.dim)
    return min(faces.values()) == 0


def check_convex_theorem(
    fan: Fan,
    l_hat: PiecewiseFunction,
    cap: Optional[int] = None,
    certify: bool = True,
) -> HodgeRiemannReport:
    """
    On a convex fan whose support is a pointed cone: HL and HR for l_hat on the
    image of the relative classes in IH, centered at the dimension.
    """
    support = classify_support(fan)
    if support != "convex":
        raise NotConvex(f"support is {support}, a convex non-complete fan is required")
    if not _is_pointed_support(fan):
        raise NotConvex("support must be a pointed cone")
    hypotheses: Dict[str, object] = {"support": support}
    if certify:
        if not check_convexity(l_hat).strictly_convex:
            raise NotStrictlyConvex("l_hat is not strictly convex")
        hypotheses["strictly_convex"] = True
    else:
        hypotheses["certified"] = False
    data = poincare_pairing(fan, cap=cap)
    form = image_form(data)
    op = _w_operator(form, data.relative.operator(l_hat.pointed()))
    report = _w_report("convex", form, op)
    report.hypotheses.update(hypotheses)
    return report


def check_complete_theorem(
    fan: Fan,
    l: PiecewiseFunction,
    l_hat: PiecewiseFunction,
    tau: Optional[int] = None,
    cap: Optional[int] = None,
    certify: bool = True,
) -> HodgeRiemannReport:
    """
    On W = l * IH of a complete fan: l_hat^(i-1) : W^(n-i+2) -> W^(n+i) is
    bijective and (-1)^((n-i)/2) <l_hat^(i-1) l h, h> is positive definite on
    the primitive part.
    """
    quotient, l_q = _star_quotient(fan, l, tau)
    _, lh_q = _star_quotient(fan, l_hat, tau)
    sub = quotient.fan
    hypotheses: Dict[str, object] = {}
    if certify:
        support = classify_support(sub)
        if support != "complete":
            raise NotComplete(f"support is {support}, a complete fan is required")
        if not check_convexity(l_q).convex:
            raise NotConvex("l is not convex")
        if not check_convexity(lh_q).strictly_convex:
            raise NotStrictlyConvex("l_hat is not strictly convex")
        hypotheses.update(support=support, convex=True, strictly_convex=True)
    else:
        hypotheses["certified"] = False
    locus = strictness_locus(l_q)
    if locus.lineality:
        hypotheses["strictness_lineality"] = locus.lineality_dim
    data = poincare_pairing(sub, cap=cap)
    absolute = data.absolute
    n = data.dim
    op_l = absolute.operator(l_q)
    op_h = absolute.operator(lh_q)

    # W^a = l * IH^(a-2); keep the classes h whose images form the basis
    sources: Dict[int, List[int]] = {}
    basis: Dict[int, List[Vector]] = {}
    for a in range(2, 2 * n + 1, 2):
        cols = op_l.block(a - 2)
        idx = independent(cols, absolute.space[a])
        if idx:
            sources[a] = idx
            basis[a] = [cols[j] for j in idx]
    space = GradedSpace({a: len(v) for a, v in basis.items()})
    blocks = {}
    for a, vectors in basis.items():
        target = basis.get(a + 2, [])
        if not target:
            blocks[a] = [{} for _ in vectors]
            continue
        blocks[a] = restrict_map(op_h.block(a), vectors, target, absolute.space[a + 2])
    op = GradedMap(space, space, 2, blocks)

    raw = _relative_transfer(data)
    center = n + 1

    def gram(a: int) -> list:
        # rows: W^(2c - a) in IH coordinates; columns: the classes h with l*h spanning W^a
        other = 2 * center - a
        g = raw(a - 2)
        cols = sources[a]
        return [[dot(dense(w, absolute.space[other]), [row[b] for row in g]) for b in cols] for w in basis.get(other, [])]

    def sign(a: int) -> int:
        return -1 if ((a - 2) // 2) % 2 else 1

    hl, hl_witnesses = lefschetz_rows(op, space, center)
    hr, hr_witnesses = hodge_riemann_rows(op, space, center, gram, sign)
    children = [
        LefschetzReport(name="complete hl", table=hl, passed=all(r.passed for r in hl), witnesses=hl_witnesses),
        HodgeRiemannReport(name="complete hr", table=hr, passed=all(r.passed for r in hr), witnesses=hr_witnesses),
    ]
    hypotheses.update(center=center, w=space.betti())
    notes = []
    if locus.lineality:
        notes.append(
            f"strictness locus of l has lineality of dimension {locus.lineality_dim}; centre kept at n + 1, not shifted down"
        )
    return HodgeRiemannReport(
        name="complete",
        hypotheses=hypotheses,
        cone=_cone_rays(fan, quotient.bottom),
        table=hr,
        passed=all(c.passed for c in children),
        witnesses=hr_witnesses,
        notes=notes,
        children=children,
    )


# deformation
def default_eps_schedule() -> List[object]:
    return [QQ(1, 2 ** k) for k in range(2, settings.eps_steps + 1)]


def check_deformation(
    subdivision: SubdivisionMap,
    l: PiecewiseFunction,
    l_hat: PiecewiseFunction,
    tau: Optional[int] = None,
    eps: Optional[Sequence] = None,
    cap: Optional[int] = None,
    certify: bool = True,
) -> CheckReport:
    """
    HL and HR for l + eps^2 * l_hat on the source (sections of the pushforward
    of L^tau) and on l * H, for every eps of the schedule.
    """
    target = subdivision.target
    hypotheses: Dict[str, object] = {}
    if certify:
        hypotheses.update(_certify_complete_strict(target, l))
        hypotheses.update(_certify_relative(subdivision, l_hat))
    else:
        hypotheses["certified"] = False
    schedule = [qq(e) for e in eps] if eps is not None else default_eps_schedule()
    pulled = PiecewiseFunction.pullback(subdivision, l)
    source = subdivision.source
    children: List[CheckReport] = []
    passing = []
    for e in schedule:
        f = pulled + l_hat.scaled(e * e)
        name = f"eps={fmt(e)}"
        parts: List[CheckReport] = []
        notes: List[str] = []
        try:
            parts.append(check_hl(source, f, tau, cap, certify=False))
            parts.append(check_hr(source, f, tau, cap, certify=False))
            parts.append(check_complete_theorem(source, pulled, f, tau, cap, certify=False))
        except HypothesisError as exc:
            notes.append(f"{type(exc).__name__}: {exc}")
        ok = bool(parts) and not notes and all(p.passed for p in parts)
        if not e and not ok:
            logger.warning("eps = 0 fails: l alone is not strictly convex on the subdivision")
        if ok:
            passing.append(e)
        children.append(
            CheckReport(
                name=name,
                hypotheses={"strictly_convex": check_convexity(f).strictly_convex},
                passed=ok,
                notes=notes,
                children=parts,
            )
        )
    if passing:
        hypotheses["largest_passing_eps"] = fmt(max(passing))
    return CheckReport(name="deform", kind="deformation", hypotheses=hypotheses, passed=bool(passing), children=children)
