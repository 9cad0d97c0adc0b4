"""
Computation service shared by the command line and the HTTP API.

Takes validated input models, runs the library and returns report models.
"""
from __future__ import annotations

import logging
from typing import List, Optional, Sequence

from sqlalchemy.orm import Session

from .exceptions import InputError
from .fans import Fan, barycentric_subdivision, classify_support, complete_convex_fan, detect_semismall, star_subdivision
from .lefschetz import (
    check_complete_theorem,
    check_convex_theorem,
    check_deformation,
    check_hl,
    check_hr,
    check_rhl,
    check_rhr,
)
from .models import (
    BettiTable,
    CheckKind,
    CheckReport,
    FanSpec,
    LocalHReport,
    PerverseTableModel,
    SubdivisionSpec,
    VerifyInput,
    WTable,
)
from .oracles import check_local_h
from .pairing import poincare_pairing
from .sheaves import (
    MultiplicityTable,
    decompose,
    ih_quotient,
    minimal_extension_sheaf,
    perverse_table,
    pushforward,
)

logger = logging.getLogger(__name__)


def _cone(fan: Fan, rays: Optional[Sequence[int]]) -> Optional[int]:
    if rays is None:
        return None
    index = fan.cone_by_rays(rays)
    if index is None:
        raise InputError(f"{list(rays)} is not a cone of the fan")
    return index


def _degrees(space) -> dict:
    return {str(d): n for d, n in space.dims.items()}


def betti_table(spec: FanSpec, cap: Optional[int] = None, refinement: Optional[SubdivisionSpec] = None) -> BettiTable:
    fan = spec.build()
    sheaf = minimal_extension_sheaf(fan, cap=cap)
    absolute = ih_quotient(sheaf)
    table = BettiTable(dims=_degrees(absolute.space), betti=absolute.space.betti())
    if classify_support(fan.pointed()) in ("convex", "quasi_convex"):
        table.relative = _degrees(ih_quotient(sheaf, rel=True).space)
    if refinement is not None:
        data = poincare_pairing(fan, refinement.build(), cap=cap)
        table.pairing = data.to_dict()
    return table


def _w_table(table: MultiplicityTable) -> WTable:
    fan = table.sheaf.fan
    return WTable(
        cones={str(s): _degrees(table.spaces[s]) for s in table.nonzero()},
        rays={str(s): list(fan.cones[s].rays) for s in table.nonzero()},
        provenance=table.provenance,
    )


def multiplicities(spec: SubdivisionSpec, tau: Optional[Sequence[int]] = None, cap: Optional[int] = None):
    subdivision = spec.build()
    source = subdivision.source
    t = _cone(source, tau)
    t = source.origin if t is None else t
    sheaf = pushforward(subdivision, minimal_extension_sheaf(source, t, cap), cap)
    return subdivision, decompose(sheaf, offset=source.pointed_dim(t)), t


def local_h(spec: SubdivisionSpec, cap: Optional[int] = None) -> LocalHReport:
    """W-table and centered perverse table of pi_* L; simplicial inputs are checked against the oracle."""
    subdivision, table, _ = multiplicities(spec, cap=cap)
    semi_small = None
    if subdivision.source.is_simplicial:
        semi_small = detect_semismall(subdivision)[0]
        if subdivision.target.is_simplicial:
            check_local_h(table, subdivision)
    perverse = perverse_table(table).to_dict()
    return LocalHReport(w=_w_table(table), perverse=PerverseTableModel(**perverse, semi_small=semi_small))


def decomposition(spec: SubdivisionSpec, tau: Optional[Sequence[int]] = None, cap: Optional[int] = None) -> dict:
    _, table, _ = multiplicities(spec, tau, cap)
    stalks = {str(s): {str(d): n for d, n in dims.items()} for s, dims in table.sheaf.to_dict().items()}
    return {"stalks": stalks, "w": _w_table(table).model_dump()}


def subdivide_star(spec: FanSpec, cone: Sequence[int], ray: Sequence) -> SubdivisionSpec:
    fan = spec.build()
    source, step = star_subdivision(fan, _cone(fan, cone), ray)
    return SubdivisionSpec(source=FanSpec.from_fan(source), target=spec, assignment=list(step.assignment))


def subdivide_barycentric(spec: FanSpec) -> SubdivisionSpec:
    fan = spec.build()
    source, subdivision, _ = barycentric_subdivision(fan)
    return SubdivisionSpec(source=FanSpec.from_fan(source), target=spec, assignment=list(subdivision.assignment))


def complete_fan(spec: FanSpec, ray: Sequence) -> FanSpec:
    return FanSpec.from_fan(complete_convex_fan(spec.build(), ray))


def _need(inputs: VerifyInput, kind: CheckKind, *names: str) -> None:
    missing = [n for n in names if getattr(inputs, n) is None]
    if missing:
        raise InputError(f"verify {kind.value} needs {', '.join(missing)}")


def verify(
    kind: CheckKind,
    inputs: VerifyInput,
    cap: Optional[int] = None,
    eps: Optional[List[str]] = None,
    tau: Optional[List[int]] = None,
    db: Optional[Session] = None,
    run_id: Optional[str] = None,
) -> CheckReport:
    """Run one verifier; ``cap``, ``eps`` and ``tau`` override the values in ``inputs``."""
    cap = inputs.cap if cap is None else cap
    tau = inputs.tau if tau is None else tau
    eps = inputs.eps if eps is None else eps
    logger.debug("verify %s (cap=%s, tau=%s)", kind.value, cap, tau)

    if kind in (CheckKind.HL, CheckKind.HR, CheckKind.CONVEX, CheckKind.COMPLETE):
        _need(inputs, kind, "fan")
        fan = inputs.fan.build()
        t = _cone(fan, tau)
        if kind == CheckKind.CONVEX:
            _need(inputs, kind, "l_hat")
            return check_convex_theorem(fan, inputs.l_hat.build(fan, inputs.fan), cap)
        _need(inputs, kind, "l")
        l = inputs.l.build(fan, inputs.fan)
        if kind == CheckKind.HL:
            return check_hl(fan, l, t, cap)
        if kind == CheckKind.HR:
            return check_hr(fan, l, t, cap)
        _need(inputs, kind, "l_hat")
        return check_complete_theorem(fan, l, inputs.l_hat.build(fan, inputs.fan), t, cap)

    _need(inputs, kind, "subdivision", "l_hat")
    subdivision = inputs.subdivision.build()
    source = subdivision.source
    t = _cone(source, tau)
    l_hat = inputs.l_hat.build(source, inputs.subdivision.source)
    if kind == CheckKind.RHL:
        return check_rhl(subdivision, l_hat, t, cap, db=db, run_id=run_id)
    if kind == CheckKind.RHR:
        return check_rhr(subdivision, l_hat, t, cap, db=db, run_id=run_id)
    _need(inputs, kind, "l")
    l = inputs.l.build(subdivision.target, inputs.subdivision.target)
    return check_deformation(subdivision, l, l_hat, t, eps, cap)
