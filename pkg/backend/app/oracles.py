"""
Closed-form counts for simplicial fans, used to cross-check the sheaf engine.
"""
from __future__ import annotations

import logging
from math import comb
from typing import Dict, List

from .exceptions import InputError, SourceNotSimplicial, SumRuleViolation
from .fans import Fan, PiecewiseFunction, SubdivisionMap
from .linalg import GradedSpace
from .sheaves import MultiplicityTable

logger = logging.getLogger(__name__)


def f_vector(fan: Fan) -> List[int]:
    """f[i] = number of cones of pointed dimension i (f[0] = 1 for the minimal cone)."""
    fan = fan.pointed()
    top = max(c.dim for c in fan.cones)
    out = [0] * (top + 1)
    for c in fan.cones:
        out[c.dim] += 1
    return out


def h_polynomial(f: List[int], dim: int) -> List[int]:
    """Coefficients of sum_i f[i] x^i (1 - x)^(dim - i)."""
    h = [0] * (dim + 1)
    for i, count in enumerate(f):
        if not count or i > dim:
            continue
        for j in range(dim - i + 1):
            h[i + j] += count * comb(dim - i, j) * (-1) ** j
    return h


def h_vector(fan: Fan) -> List[int]:
    """h-vector of a complete (or any pure) simplicial fan."""
    fan = fan.pointed()
    if not fan.is_simplicial:
        raise SourceNotSimplicial("h-vectors are defined for simplicial fans")
    return h_polynomial(f_vector(fan), fan.pure_dim)


def betti_from_h(h: List[int]) -> GradedSpace:
    return GradedSpace({2 * k: n for k, n in enumerate(h)})


def _fiber_h(subdivision: SubdivisionMap, sigma: int) -> List[int]:
    source = subdivision.source
    d = subdivision.target.pointed_dim(sigma)
    counts = [0] * (d + 1)
    for a in subdivision.fiber(sigma):
        counts[source.pointed_dim(a)] += 1
    return h_polynomial(counts, d)


def local_h_oracle(subdivision: SubdivisionMap) -> Dict[int, List[int]]:
    """
    Alternating sum over faces: l(sigma) = sum_{tau <= sigma} (-1)^(dim sigma - dim tau) h(fiber of tau).

    Returns the nonzero local h-vectors, indexed by target cone.
    """
    source, target = subdivision.source, subdivision.target
    if not source.is_simplicial or not target.is_simplicial:
        raise SourceNotSimplicial("the local h oracle needs simplicial fans on both sides")
    h = {s: _fiber_h(subdivision, s) for s in range(len(target))}
    out: Dict[int, List[int]] = {}
    for sigma in range(len(target)):
        d = target.pointed_dim(sigma)
        local = [0] * (d + 1)
        for tau in target.faces(sigma):
            e = target.pointed_dim(tau)
            for k, v in enumerate(h[tau]):
                local[k] += (-1) ** (d - e) * v
        if any(local):
            out[sigma] = local
    return out


def check_local_h(table: MultiplicityTable, subdivision: SubdivisionMap) -> None:
    """Compare a decomposition with the oracle; raises SumRuleViolation on mismatch."""
    expected = {s: betti_from_h(v) for s, v in local_h_oracle(subdivision).items()}
    got = {s: table.spaces[s] for s in table.nonzero()}
    if expected != got:
        logger.debug("local h mismatch: engine %s, oracle %s", got, expected)
        raise SumRuleViolation("multiplicity spaces disagree with the alternating-sum local h-vectors")


def betti_convolution(first: GradedSpace, second: GradedSpace) -> GradedSpace:
    """Graded dimensions of a tensor product."""
    counts: Dict[int, int] = {}
    for a, m in first.dims.items():
        for b, n in second.dims.items():
            counts[a + b] = counts.get(a + b, 0) + m * n
    return GradedSpace(counts)


def product_function(first: PiecewiseFunction, second: PiecewiseFunction, product: Fan) -> PiecewiseFunction:
    """l1 (x) 1 + 1 (x) l2 on a fan built by ``product_fan(first.fan, second.fan)``."""
    offset = len(first.fan.rays)
    forms = {}
    for a in first.fan.maximal:
        for b in second.fan.maximal:
            rays = list(first.fan.cones[a].rays) + [offset + i for i in second.fan.cones[b].rays]
            cone = product.cone_by_rays(rays)
            if cone is None:
                raise InputError("product fan does not contain the product of maximal cones")
            forms[cone] = tuple(first.linear_form(a)) + tuple(second.linear_form(b))
    return PiecewiseFunction.from_linear_forms(product, forms)
