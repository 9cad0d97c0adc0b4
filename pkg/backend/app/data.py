"""
Sample fans, subdivisions and functions for demos and tests.
"""
from dataclasses import dataclass
from itertools import product
from typing import Callable, Dict, List, Optional, Tuple

from .exceptions import InputError
from .fans import (
    Fan,
    PiecewiseFunction,
    SubdivisionMap,
    barycentric_subdivision,
    product_fan,
    star_subdivision,
    stellar_function,
)
from .models import FanSpec


def unit(n: int, i: int, sign: int = 1) -> List[int]:
    return [sign if j == i else 0 for j in range(n)]


def cross_polytope(n: int) -> FanSpec:
    """Face fan of the n-dimensional cross-polytope: rays +-e_i, one orthant per cone."""
    rays = [unit(n, i, s) for i in range(n) for s in (1, -1)]
    cones = [[2 * i + (0 if s > 0 else 1) for i, s in enumerate(signs)] for signs in product((1, -1), repeat=n)]
    return FanSpec(dim=n, rays=rays, cones=cones)


def cube(n: int) -> FanSpec:
    """Face fan of the cube [-1, 1]^n: one cone per facet."""
    rays = [list(v) for v in product((1, -1), repeat=n)]
    cones = []
    for i in range(n):
        for s in (1, -1):
            cones.append([j for j, v in enumerate(rays) if v[i] == s])
    return FanSpec(dim=n, rays=rays, cones=cones)


def cone_over_cube(n: int) -> FanSpec:
    """The cone over a facet of the n-cube, in dimension n."""
    rays = [list(v) + [1] for v in product((1, -1), repeat=n - 1)]
    return FanSpec(dim=n, rays=rays, cones=[list(range(len(rays)))])


def simplex_cone(n: int) -> FanSpec:
    """The positive orthant of Q^n as a single simplicial cone."""
    return FanSpec(dim=n, rays=[unit(n, i) for i in range(n)], cones=[list(range(n))])


def projective_space(n: int) -> FanSpec:
    """Fan of P^n: rays e_1, ..., e_n and -(e_1 + ... + e_n), every n of them spanning a cone."""
    rays = [unit(n, i) for i in range(n)] + [[-1] * n]
    cones = [[j for j in range(n + 1) if j != skip] for skip in range(n + 1)]
    return FanSpec(dim=n, rays=rays, cones=cones)


SAMPLE_FANS: Dict[str, FanSpec] = {
    "point": FanSpec(dim=0),
    "line": cross_polytope(1),
    "ray": FanSpec(dim=1, rays=[[1]], cones=[[0]]),
    "quadrant": simplex_cone(2),
    "four_quadrants": cross_polytope(2),
    "three_quadrants": FanSpec(dim=2, rays=[[1, 0], [0, 1], [-1, 0], [0, -1]], cones=[[0, 1], [1, 2], [2, 3]]),
    "upper_half_plane": FanSpec(dim=2, rays=[[1, 0], [0, 1], [-1, 0]], cones=[[0, 1], [1, 2]]),
    "line_times_line": FanSpec(dim=2, rays=[[1, 0], [-1, 0]], cones=[[0], [1]], lineality=[[0, 1]]),
    "octahedron": cross_polytope(3),
    "cross_polytope_4": cross_polytope(4),
    "cube": cube(3),
    "delta2_cone": simplex_cone(3),
    "delta3_cone": simplex_cone(4),
    "cone_over_square": cone_over_cube(3),
    "cone_over_cube": cone_over_cube(4),
    "square_cone_split": FanSpec(
        dim=3,
        rays=[[1, 1, 1], [-1, 1, 1], [-1, -1, 1], [1, -1, 1]],
        cones=[[0, 1, 2], [0, 2, 3]],
    ),
}


def sample_fan(name: str) -> Fan:
    spec = SAMPLE_FANS.get(name)
    if spec is None:
        raise InputError(f"unknown sample fan {name!r}")
    return spec.build()


def abs_sum(fan: Fan) -> PiecewiseFunction:
    """|x_1| + ... + |x_n| on a cross-polytope fan; strictly convex."""
    return PiecewiseFunction.from_ray_values(fan, [1] * len(fan.rays))


def max_norm(fan: Fan) -> PiecewiseFunction:
    """max |x_i| on a cube face fan: each facet cone carries +-e_i."""
    forms = {}
    for s in fan.maximal:
        rays = [fan.rays[i] for i in fan.cones[s].rays]
        i = next(k for k in range(fan.dim) if len({r[k] for r in rays}) == 1)
        forms[s] = unit(fan.dim, i, 1 if rays[0][i] > 0 else -1)
    return PiecewiseFunction.from_linear_forms(fan, forms)


@dataclass
class SampleSubdivision:
    """A subdivision with a relatively strictly convex function on its source."""

    subdivision: SubdivisionMap
    l_hat: PiecewiseFunction
    l: Optional[PiecewiseFunction] = None


def _identity(name: str) -> SampleSubdivision:
    fan = sample_fan(name)
    return SampleSubdivision(
        SubdivisionMap.from_fans(fan, fan), PiecewiseFunction.global_linear(fan, [0] * fan.dim)
    )


def _star(name: str, cone_rays: List[int], ray: List[int]) -> SampleSubdivision:
    fan = sample_fan(name)
    source, step = star_subdivision(fan, fan.cone_by_rays(cone_rays), ray)
    return SampleSubdivision(step, stellar_function(source, [(source, step)]))


def _barycentric(name: str) -> SampleSubdivision:
    fan = sample_fan(name)
    source, subdivision, steps = barycentric_subdivision(fan)
    return SampleSubdivision(subdivision, stellar_function(source, steps))


def _square_cone_split() -> SampleSubdivision:
    source = sample_fan("square_cone_split")
    target = sample_fan("cone_over_square")
    # max(0, x - y): bends along the diagonal through rays 0 and 2
    forms = {source.cone_by_rays([0, 1, 2]): [0, 0, 0], source.cone_by_rays([0, 2, 3]): [1, -1, 0]}
    return SampleSubdivision(SubdivisionMap.from_fans(source, target), PiecewiseFunction.from_linear_forms(source, forms))


def _quadrant_split() -> SampleSubdivision:
    sample = _star("four_quadrants", [0, 2], [1, 1])
    sample.l = abs_sum(sample.subdivision.target)
    return sample


SAMPLE_SUBDIVISIONS: Dict[str, Callable[[], SampleSubdivision]] = {
    "identity_quadrant": lambda: _identity("quadrant"),
    "identity_four_quadrants": lambda: _identity("four_quadrants"),
    "edge_split": lambda: _star("quadrant", [0, 1], [1, 1]),
    "delta2_star": lambda: _star("delta2_cone", [0, 1, 2], [1, 1, 1]),
    "delta2_edge": lambda: _star("delta2_cone", [0, 1], [1, 1, 0]),
    "delta2_barycentric": lambda: _barycentric("delta2_cone"),
    "delta3_star": lambda: _star("delta3_cone", [0, 1, 2, 3], [1, 1, 1, 1]),
    "delta3_edge": lambda: _star("delta3_cone", [0, 1], [1, 1, 0, 0]),
    "delta3_face": lambda: _star("delta3_cone", [0, 1, 2], [1, 1, 1, 0]),
    "delta3_barycentric": lambda: _barycentric("delta3_cone"),
    "square_cone_split": _square_cone_split,
    "square_cone_star": lambda: _star("cone_over_square", [0, 1, 2, 3], [0, 0, 1]),
    "quadrant_split": _quadrant_split,
    "four_quadrants_barycentric": lambda: _barycentric("four_quadrants"),
    "cube_barycentric": lambda: _barycentric("cube"),
}


def sample_subdivision(name: str) -> SampleSubdivision:
    build = SAMPLE_SUBDIVISIONS.get(name)
    if build is None:
        raise InputError(f"unknown sample subdivision {name!r}")
    return build()


def _starred(spec: FanSpec, *steps: Tuple[List[int], List[int]]) -> Fan:
    fan = spec.build()
    for cone_rays, ray in steps:
        fan, _ = star_subdivision(fan, fan.cone_by_rays(cone_rays), ray)
    return fan


def _refined(spec: FanSpec) -> Fan:
    return barycentric_subdivision(spec.build())[0]


def _product(*specs: FanSpec) -> Fan:
    fan = specs[0].build()
    for spec in specs[1:]:
        fan = product_fan(fan, spec.build())
    return fan


# complete simplicial fans, for comparing intersection cohomology with h-vectors
COMPLETE_SIMPLICIAL: Dict[str, Callable[[], Fan]] = {
    "line": lambda: cross_polytope(1).build(),
    "cross2": lambda: cross_polytope(2).build(),
    "p2": lambda: projective_space(2).build(),
    "cross2_star": lambda: _starred(cross_polytope(2), ([0, 2], [1, 1])),
    "cross2_double_star": lambda: _starred(cross_polytope(2), ([0, 2], [1, 1]), ([1, 3], [-1, -1])),
    "p2_star": lambda: _starred(projective_space(2), ([0, 1], [1, 1])),
    "line_x_line": lambda: _product(cross_polytope(1), cross_polytope(1)),
    "cross2_barycentric": lambda: _refined(cross_polytope(2)),
    "p2_barycentric": lambda: _refined(projective_space(2)),
    "cross3": lambda: cross_polytope(3).build(),
    "p3": lambda: projective_space(3).build(),
    "cross3_edge_star": lambda: _starred(cross_polytope(3), ([0, 2], [1, 1, 0])),
    "cross3_star": lambda: _starred(cross_polytope(3), ([0, 2, 4], [1, 1, 1])),
    "cross3_double_star": lambda: _starred(cross_polytope(3), ([0, 2, 4], [1, 1, 1]), ([1, 3, 5], [-1, -1, -1])),
    "p3_star": lambda: _starred(projective_space(3), ([0, 1, 2], [1, 1, 1])),
    "p3_edge_star": lambda: _starred(projective_space(3), ([0, 1], [1, 1, 0])),
    "line_x_p2": lambda: _product(cross_polytope(1), projective_space(2)),
    "line_x_line_x_line": lambda: _product(cross_polytope(1), cross_polytope(1), cross_polytope(1)),
    "line_x_cross2_star": lambda: product_fan(cross_polytope(1).build(), _starred(cross_polytope(2), ([0, 2], [1, 1]))),
    "cross4": lambda: cross_polytope(4).build(),
    "p4": lambda: projective_space(4).build(),
    "cross4_star": lambda: _starred(cross_polytope(4), ([0, 2, 4, 6], [1, 1, 1, 1])),
    "line_x_p3": lambda: _product(cross_polytope(1), projective_space(3)),
    "p2_x_p2": lambda: _product(projective_space(2), projective_space(2)),
    "p2_x_cross2": lambda: _product(projective_space(2), cross_polytope(2)),
}
