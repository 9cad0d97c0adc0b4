import pytest

from app.data import SAMPLE_FANS, abs_sum, sample_fan, sample_subdivision
from app.exceptions import DegenerateRay, NotConvex, OverlappingCones, RayNotInterior, RayNotOpposite
from app.fans import (
    PiecewiseFunction,
    barycentric_subdivision,
    build_fan,
    check_cellular_signs,
    check_convexity,
    classify_support,
    complete_convex_fan,
    detect_local_product,
    detect_semismall,
    product_fan,
    star_subdivision,
    strictness_locus,
)
from app.models import SubdivisionSpec
from app.sheaves import ih, minimal_extension_sheaf


def test_faces_are_derived_from_maximal_cones():
    fan = sample_fan("four_quadrants")
    assert len(fan.maximal) == 4
    assert len(fan.of_dim(1)) == 4
    assert len(fan) == 9
    assert fan.origin == 0
    quadrant = fan.cone_by_rays([0, 2])
    assert set(fan.facets(quadrant)) == {fan.cone_by_rays([0]), fan.cone_by_rays([2])}
    assert fan.meet(quadrant, fan.cone_by_rays([1, 2])) == fan.cone_by_rays([2])


def test_zero_ray_is_rejected():
    with pytest.raises(DegenerateRay):
        build_fan(2, [[0, 0]], [[0]])


def test_overlapping_cones_are_rejected():
    # the diagonal ray lies inside the cone on e1, e2
    with pytest.raises(OverlappingCones):
        build_fan(2, [[1, 0], [0, 1], [1, 1]], [[0, 2], [1, 2], [0, 1]])


def test_adjacent_cones_meeting_along_a_face_are_accepted():
    fan = build_fan(2, [[1, 0], [0, 1], [1, 1]], [[0, 2], [1, 2]])
    assert len(fan.maximal) == 2
    assert fan.meet(fan.cone_by_rays([0, 2]), fan.cone_by_rays([1, 2])) == fan.cone_by_rays([2])


@pytest.mark.parametrize("name", ["four_quadrants", "three_quadrants", "octahedron", "cube", "square_cone_split"])
def test_validated_sample_fans_build(name):
    fan = SAMPLE_FANS[name].build()
    assert len(fan.maximal) == len(SAMPLE_FANS[name].cones)


def test_subdivision_specs_build_with_validation():
    sample = sample_subdivision("edge_split")
    rebuilt = SubdivisionSpec.from_subdivision(sample.subdivision).build()
    assert rebuilt.assignment == sample.subdivision.assignment


def test_rescaling_rays_changes_nothing():
    scaled = build_fan(2, [[2, 0], [0, 3], [-5, 0], [0, "1/2"]], [[0, 1], [1, 2], [2, 3], [3, 0]])
    fan = sample_fan("four_quadrants")
    assert len(scaled) == len(fan)
    assert classify_support(scaled) == "complete"
    assert ih(minimal_extension_sheaf(scaled)) == ih(minimal_extension_sheaf(fan))
    cube = SAMPLE_FANS["cube"]
    stretched = build_fan(3, [[x * (i + 1) for x in ray] for i, ray in enumerate(cube.rays)], cube.cones)
    assert len(stretched) == len(sample_fan("cube"))
    assert ih(minimal_extension_sheaf(stretched)).betti() == "0:1 2:5 4:5 6:1"


@pytest.mark.parametrize(
    "name, support",
    [
        ("four_quadrants", "complete"),
        ("octahedron", "complete"),
        ("cube", "complete"),
        ("quadrant", "convex"),
        ("upper_half_plane", "convex"),
        ("cone_over_square", "convex"),
        ("three_quadrants", "quasi_convex"),
        ("ray", "convex"),
    ],
)
def test_support_classification(name, support):
    assert classify_support(sample_fan(name)) == support


def test_lower_dimensional_fan_has_no_quasi_convex_support():
    fan = build_fan(2, [[1, 0]], [[0]])
    assert classify_support(fan) == "none"


def test_lineality_is_divided_out():
    fan = sample_fan("line_times_line")
    assert fan.lineality_dim == 1
    pointed = fan.pointed()
    assert pointed.dim == 1
    assert len(pointed.maximal) == 2
    assert classify_support(pointed) == "complete"


def test_cellular_signs_square_to_zero():
    for name in ("octahedron", "cube"):
        assert check_cellular_signs(sample_fan(name))


def test_cellular_homology_of_a_complete_fan_is_a_sphere():
    # the minimal cone augments the complex, so only the top class survives
    fan = sample_fan("octahedron")
    assert fan.cellular_homology(range(len(fan))) == {3: 1}


def test_star_subdivision_of_an_edge():
    fan = sample_fan("quadrant")
    source, step = star_subdivision(fan, fan.cone_by_rays([0, 1]), [1, 1])
    assert len(source.rays) == 3
    assert len(source.maximal) == 2
    new_ray = source.cone_by_rays([2])
    assert step.image(new_ray) == fan.cone_by_rays([0, 1])
    assert step.preimage(fan.origin) == (source.origin,)
    assert not step.is_identity


def test_star_subdivision_needs_an_interior_ray():
    fan = sample_fan("quadrant")
    with pytest.raises(RayNotInterior):
        star_subdivision(fan, fan.cone_by_rays([0, 1]), [1, 0])


def test_barycentric_subdivision_of_a_simplex_cone():
    fan = sample_fan("delta2_cone")
    source, subdivision, steps = barycentric_subdivision(fan)
    # one new ray per cone of dimension >= 2
    assert len(steps) == 4
    assert len(source.rays) == 7
    assert len(source.maximal) == 6
    assert source.is_simplicial
    assert subdivision.target is fan


def test_semismall_detection():
    assert detect_semismall(sample_subdivision("edge_split").subdivision) == (True, False)
    assert detect_semismall(sample_subdivision("delta2_barycentric").subdivision)[0] is False
    assert detect_semismall(sample_subdivision("identity_quadrant").subdivision) == (True, True)


def test_complete_convex_fan():
    fan = sample_fan("quadrant")
    completed = complete_convex_fan(fan, [-1, -1])
    assert classify_support(completed) == "complete"
    assert len(completed.maximal) == 3


def test_completion_requires_an_opposite_ray():
    fan = sample_fan("quadrant")
    with pytest.raises(RayNotOpposite):
        complete_convex_fan(fan, [1, 1])
    with pytest.raises(NotConvex):
        complete_convex_fan(sample_fan("three_quadrants"), [1, -1])


def test_product_fan():
    line = sample_fan("line")
    square = product_fan(line, line)
    assert square.dim == 2
    assert len(square.maximal) == 4
    assert classify_support(square) == "complete"


def test_local_product_on_a_simplicial_fan():
    fan = sample_fan("octahedron")
    ray = fan.cone_by_rays([0])
    product = detect_local_product(fan, ray)
    assert product.has_structure
    assert len(product.complements) == len(fan.cofaces(ray))


def test_convexity_of_piecewise_linear_functions():
    fan = sample_fan("four_quadrants")
    report = check_convexity(abs_sum(fan))
    assert report.convex and report.strictly_convex
    flat = check_convexity(PiecewiseFunction.global_linear(fan, [1, 0]))
    assert flat.convex and not flat.strictly_convex
    concave = check_convexity(abs_sum(fan).scaled(-1))
    assert not concave.convex


def test_stellar_functions_are_relatively_strictly_convex():
    for name in ("edge_split", "delta2_star", "delta2_barycentric", "quadrant_split"):
        sample = sample_subdivision(name)
        report = check_convexity(sample.l_hat, sample.subdivision)
        assert report.relatively_strictly_convex, name


def test_pullbacks_are_not_relatively_strictly_convex():
    sample = sample_subdivision("edge_split")
    subdivision = sample.subdivision
    pulled = PiecewiseFunction.pullback(subdivision, PiecewiseFunction.global_linear(subdivision.target, [1, 2]))
    assert check_convexity(pulled, subdivision).relatively_strictly_convex is False


def test_strictness_locus():
    fan = sample_fan("four_quadrants")
    assert strictness_locus(PiecewiseFunction.global_linear(fan, [1, 1])).lineality_dim == 2
    locus = strictness_locus(abs_sum(fan))
    assert locus.lineality_dim == 0
    assert len(locus.maximal) == 4
    # |x| bends along one line only
    bend = PiecewiseFunction.from_ray_values(fan, [1, 1, 0, 0])
    assert strictness_locus(bend).lineality_dim == 1


def test_functions_descend_along_lineality():
    fan = sample_fan("line_times_line")
    function = PiecewiseFunction.from_linear_forms(
        fan, {fan.cone_by_rays([0]): [1, 0], fan.cone_by_rays([1]): [-1, 0]}
    )
    pointed = function.pointed()
    assert pointed.fan.dim == 1
    assert check_convexity(pointed).strictly_convex
