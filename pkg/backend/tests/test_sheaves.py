import pytest

from app.data import sample_fan, sample_subdivision
from app.exceptions import CapTooLow, NotQuasiConvex
from app.fans import PiecewiseFunction, build_fan, product_fan
from app.linalg import GradedSpace
from app.oracles import betti_convolution, betti_from_h, check_local_h, h_vector
from app.sheaves import (
    boundary_vanishing_sections,
    check_flabby,
    decompose,
    function_action,
    ih,
    minimal_extension_sheaf,
    perverse_table,
    pushforward,
    sections,
    structure_sheaf,
)


@pytest.mark.parametrize(
    "name, betti",
    [
        ("line", "0:1 2:1"),
        ("four_quadrants", "0:1 2:2 4:1"),
        ("octahedron", "0:1 2:3 4:3 6:1"),
        ("cube", "0:1 2:5 4:5 6:1"),
        ("quadrant", "0:1"),
        ("cone_over_square", "0:1 2:1"),
    ],
)
def test_intersection_cohomology_betti_numbers(name, betti):
    assert ih(minimal_extension_sheaf(sample_fan(name))).betti() == betti


def test_simplicial_fans_have_constant_stalks():
    fan = sample_fan("octahedron")
    sheaf = minimal_extension_sheaf(fan)
    assert all(tuple(sheaf.degrees[s]) == (0,) for s in range(len(fan)))
    assert ih(sheaf) == ih(structure_sheaf(fan))


def test_stalk_over_a_cone_on_a_square():
    fan = sample_fan("cone_over_square")
    sheaf = minimal_extension_sheaf(fan)
    (top,) = fan.maximal
    assert sorted(sheaf.degrees[top]) == [0, 1]
    assert check_flabby(sheaf) == []
    assert sheaf.verify() == []


def test_minimal_extension_from_a_ray_lives_on_its_star():
    fan = sample_fan("four_quadrants")
    tau = fan.cone_by_rays([0])
    sheaf = minimal_extension_sheaf(fan, tau)
    assert set(sheaf.support) == set(fan.cofaces(tau))
    assert sheaf.provenance == f"L^{tau}"


def test_relative_classes_are_dual_to_absolute_ones():
    for name in ("quadrant", "upper_half_plane", "cone_over_square"):
        fan = sample_fan(name)
        sheaf = minimal_extension_sheaf(fan)
        absolute, relative = ih(sheaf), ih(sheaf, rel=True)
        n = fan.dim
        assert {2 * n - d: k for d, k in relative.dims.items()} == absolute.dims, name


def test_relative_classes_need_quasi_convex_support():
    fan = build_fan(2, [[1, 0], [0, 1]], [[0], [1]])
    with pytest.raises(NotQuasiConvex):
        ih(minimal_extension_sheaf(fan), rel=True)


def test_sections_of_a_simplicial_fan_follow_the_h_vector():
    fan = sample_fan("octahedron")
    h = h_vector(fan)
    assert h == [1, 3, 3, 1]
    assert ih(minimal_extension_sheaf(fan)).dims == {2 * k: n for k, n in enumerate(h)}


def test_global_sections_of_a_cone_are_polynomials():
    fan = sample_fan("quadrant")
    space = sections(structure_sheaf(fan, cap=3))
    assert space.hilbert(3).dims == {0: 1, 2: 2, 4: 3, 6: 4}


def test_sections_vanishing_on_the_boundary_are_multiples_of_xy():
    space = boundary_vanishing_sections(structure_sheaf(sample_fan("quadrant"), cap=3))
    assert space.hilbert(3).dims == {4: 1, 6: 2}


def test_linear_function_acts_injectively_below_the_cap():
    fan = sample_fan("quadrant")
    x = PiecewiseFunction.global_linear(fan, [1, 0])
    action = function_action(x, sections(structure_sheaf(fan, cap=3)))
    assert [action.rank(d) for d in (0, 2, 4)] == [1, 2, 3]
    assert action.kernel(2) == []


@pytest.mark.parametrize(
    "first, second",
    [
        ("line", "line"),
        ("line", "four_quadrants"),
        ("line", "octahedron"),
        ("line", "cube"),
        ("ray", "cone_over_square"),
    ],
)
def test_kunneth_for_product_fans(first, second):
    a, b = sample_fan(first), sample_fan(second)
    assert ih(minimal_extension_sheaf(product_fan(a, b))) == betti_convolution(
        ih(minimal_extension_sheaf(a)), ih(minimal_extension_sheaf(b))
    )


def test_cap_too_low_is_reported():
    with pytest.raises(CapTooLow):
        minimal_extension_sheaf(sample_fan("cone_over_cube"), cap=0)


def test_pushforward_along_an_edge_split():
    sample = sample_subdivision("edge_split")
    subdivision = sample.subdivision
    target = subdivision.target
    sheaf = pushforward(subdivision, minimal_extension_sheaf(subdivision.source))
    (top,) = target.maximal
    assert sorted(sheaf.degrees[top]) == [0, 1]
    table = decompose(sheaf)
    assert table.to_dict() == {target.origin: {0: 1}, top: {2: 1}}
    check_local_h(table, subdivision)


def test_pushforward_along_the_identity_is_the_minimal_extension():
    subdivision = sample_subdivision("identity_four_quadrants").subdivision
    table = decompose(pushforward(subdivision, minimal_extension_sheaf(subdivision.source)))
    assert table.to_dict() == {subdivision.target.origin: {0: 1}}


def test_barycentric_subdivision_of_a_triangle_cone():
    subdivision = sample_subdivision("delta2_barycentric").subdivision
    target = subdivision.target
    table = decompose(pushforward(subdivision, minimal_extension_sheaf(subdivision.source)))
    (top,) = target.maximal
    assert table.spaces[top].dims == {2: 1, 4: 1}
    for edge in target.of_dim(2):
        assert table.spaces[edge].dims == {2: 1}
    for ray in target.of_dim(1):
        assert not table.spaces[ray].total()
    check_local_h(table, subdivision)


def test_star_subdivision_of_a_square_cone_is_not_simplicial():
    subdivision = sample_subdivision("square_cone_star").subdivision
    table = decompose(pushforward(subdivision, minimal_extension_sheaf(subdivision.source)))
    (top,) = subdivision.target.maximal
    assert table.spaces[subdivision.target.origin].dims == {0: 1}
    assert table.spaces[top].dims == {2: 1, 4: 1}


def test_perverse_table_of_a_semismall_map_is_concentrated_in_zero():
    subdivision = sample_subdivision("edge_split").subdivision
    table = decompose(pushforward(subdivision, minimal_extension_sheaf(subdivision.source)))
    perverse = perverse_table(table)
    assert set(perverse.graded) == {0}
    assert perverse.filtration == {0: 2}


def test_perverse_table_of_a_barycentric_subdivision():
    subdivision = sample_subdivision("delta2_barycentric").subdivision
    table = decompose(pushforward(subdivision, minimal_extension_sheaf(subdivision.source)))
    (top,) = subdivision.target.maximal
    perverse = perverse_table(table)
    assert perverse.entries[top] == {-1: 1, 1: 1}
    assert perverse.filtration[max(perverse.filtration)] == sum(t.total() for t in table.spaces.values())


def test_cube_cohomology_from_its_barycentric_refinement():
    subdivision = sample_subdivision("cube_barycentric").subdivision
    target = subdivision.target
    counts = dict(betti_from_h(h_vector(subdivision.source)).dims)
    assert counts == {0: 1, 2: 23, 4: 23, 6: 1}
    table = decompose(pushforward(subdivision, minimal_extension_sheaf(subdivision.source)))
    assert table.spaces[target.origin].dims == {0: 1}
    for sigma in table.nonzero():
        if sigma == target.origin:
            continue
        link = ih(minimal_extension_sheaf(target.quotient_subfan(sigma).fan))
        for d, w in table.spaces[sigma].dims.items():
            for e, k in link.dims.items():
                counts[d + e] -= w * k
    remainder = GradedSpace(counts)
    assert remainder == ih(minimal_extension_sheaf(target))
    assert remainder.betti() == "0:1 2:5 4:5 6:1"
