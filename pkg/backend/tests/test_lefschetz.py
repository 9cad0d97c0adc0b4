import pytest

from app.data import abs_sum, max_norm, sample_fan, sample_subdivision
from app.exceptions import HLFailed, NotConvex, NotStrictlyConvex
from app.fans import PiecewiseFunction, product_fan
from app.lefschetz import (
    check_complete_theorem,
    check_convex_theorem,
    check_deformation,
    check_hl,
    check_hr,
    check_rhl,
    check_rhr,
    default_eps_schedule,
    primitive_decomposition,
)
from app.models import HodgeRiemannReport, LefschetzReport
from app.oracles import product_function
from app.sheaves import ih_quotient, minimal_extension_sheaf


def test_hard_lefschetz_on_a_complete_fan():
    fan = sample_fan("four_quadrants")
    report = check_hl(fan, abs_sum(fan))
    assert isinstance(report, LefschetzReport)
    assert report.passed
    assert report.hypotheses["strictly_convex"] is True
    assert [(row.degree, row.rank, row.required) for row in report.table] == [(0, 1, 1)]


def test_hard_lefschetz_on_a_non_simplicial_fan():
    fan = sample_fan("cube")
    assert check_hl(fan, max_norm(fan)).passed


def test_hodge_riemann_on_a_non_simplicial_fan():
    fan = sample_fan("cube")
    report = check_hr(fan, max_norm(fan))
    assert report.passed
    assert report.hypotheses["strictly_convex"] is True


def test_hodge_riemann_on_a_complete_fan():
    fan = sample_fan("four_quadrants")
    report = check_hr(fan, abs_sum(fan))
    assert isinstance(report, HodgeRiemannReport)
    assert report.passed
    middle = next(row for row in report.table if row.degree == 2)
    assert middle.sign == -1
    assert middle.primitive_inertia == [1, 0, 0]


def test_hard_lefschetz_on_a_star():
    fan = sample_fan("octahedron")
    report = check_hl(fan, abs_sum(fan), fan.cone_by_rays([0]))
    assert report.passed
    assert report.cone == [0]


def test_global_linear_functions_are_refused():
    fan = sample_fan("four_quadrants")
    flat = PiecewiseFunction.global_linear(fan, [1, 0])
    with pytest.raises(NotStrictlyConvex):
        check_hl(fan, flat)
    report = check_hl(fan, flat, certify=False)
    assert not report.passed
    assert report.witnesses
    assert report.hypotheses["certified"] is False


def test_primitive_decomposition():
    fan = sample_fan("four_quadrants")
    quotient = ih_quotient(minimal_extension_sheaf(fan))
    op = quotient.operator(abs_sum(fan))
    decomposition = primitive_decomposition(op, quotient.space, 2)
    assert decomposition.dims() == {0: 1, 2: 1, 4: 0}


def test_primitive_decomposition_needs_hard_lefschetz():
    fan = sample_fan("four_quadrants")
    quotient = ih_quotient(minimal_extension_sheaf(fan))
    op = quotient.operator(PiecewiseFunction.global_linear(fan, [1, 1]))
    with pytest.raises(HLFailed):
        primitive_decomposition(op, quotient.space, 2)


@pytest.mark.parametrize("name", ["edge_split", "delta2_star", "delta2_barycentric", "square_cone_split"])
def test_relative_hard_lefschetz(name):
    sample = sample_subdivision(name)
    report = check_rhl(sample.subdivision, sample.l_hat)
    assert report.passed, name
    assert report.children


def test_relative_hard_lefschetz_fails_without_a_convex_function():
    sample = sample_subdivision("delta2_barycentric")
    subdivision = sample.subdivision
    zero = PiecewiseFunction.global_linear(subdivision.source, [0, 0, 0])
    report = check_rhl(subdivision, zero, certify=False)
    assert not report.passed
    (top,) = subdivision.target.maximal
    failing = [child for child in report.children if not child.passed]
    assert [child.cone for child in failing] == [list(subdivision.target.cones[top].rays)]
    row = failing[0].table[0]
    assert (row.degree, row.rank, row.required) == (2, 0, 1)


def test_relative_hodge_riemann_on_an_edge_split():
    sample = sample_subdivision("edge_split")
    report = check_rhr(sample.subdivision, sample.l_hat)
    assert report.passed
    assert len(report.children) == 2


@pytest.mark.parametrize("name", ["delta2_star", "delta2_barycentric", "square_cone_split"])
def test_relative_hodge_riemann(name):
    sample = sample_subdivision(name)
    report = check_rhr(sample.subdivision, sample.l_hat)
    assert report.passed, name
    assert report.children


@pytest.mark.parametrize("name", ["edge_split", "delta2_star"])
def test_relative_theorems_for_every_source_cone(name):
    sample = sample_subdivision(name)
    source = sample.subdivision.source
    for tau in range(len(source)):
        assert check_rhl(sample.subdivision, sample.l_hat, tau).passed, tau
        assert check_rhr(sample.subdivision, sample.l_hat, tau).passed, tau


@pytest.mark.parametrize("second", ["line", "four_quadrants"])
def test_lefschetz_on_product_fans(second):
    line, other = sample_fan("line"), sample_fan(second)
    product = product_fan(line, other)
    l = product_function(abs_sum(line), abs_sum(other), product)
    assert check_hl(product, l).passed
    assert check_hr(product, l).passed

@pytest.mark.parametrize("name", ["quadrant", "delta2_cone", "cone_over_square"])
def test_convex_theorem_on_a_cone(name):
    fan = sample_fan(name)
    report = check_convex_theorem(fan, PiecewiseFunction.global_linear(fan, [0] * fan.dim))
    assert report.passed
    assert report.hypotheses["support"] == "convex"


@pytest.mark.parametrize(
    "name", ["edge_split", "delta2_star", "delta2_barycentric", "square_cone_split", "square_cone_star"]
)
def test_convex_theorem_on_a_subdivided_cone(name):
    sample = sample_subdivision(name)
    report = check_convex_theorem(sample.subdivision.source, sample.l_hat)
    assert report.passed, name
    assert report.hypotheses["strictly_convex"] is True


@pytest.mark.parametrize("name", ["upper_half_plane", "three_quadrants", "four_quadrants"])
def test_convex_theorem_needs_a_pointed_convex_support(name):
    fan = sample_fan(name)
    with pytest.raises(NotConvex):
        check_convex_theorem(fan, PiecewiseFunction.global_linear(fan, [0, 0]), certify=False)


def _ray_values(values):
    return lambda fan: PiecewiseFunction.from_ray_values(fan, values)


@pytest.mark.parametrize(
    "name, l, l_hat",
    [
        ("four_quadrants", abs_sum, abs_sum),
        ("four_quadrants", abs_sum, _ray_values([1, 2, 3, 4])),
        ("four_quadrants", _ray_values([2, 1, 1, 3]), abs_sum),
        ("octahedron", abs_sum, abs_sum),
        ("cube", max_norm, max_norm),
    ],
)
def test_complete_theorem(name, l, l_hat):
    fan = sample_fan(name)
    report = check_complete_theorem(fan, l(fan), l_hat(fan))
    assert report.passed, name
    assert report.hypotheses["center"] == fan.dim + 1


def test_complete_theorem_with_a_pulled_back_function():
    sample = sample_subdivision("quadrant_split")
    source = sample.subdivision.source
    l = PiecewiseFunction.pullback(sample.subdivision, sample.l)
    report = check_complete_theorem(source, l, abs_sum(source))
    assert report.passed
    assert "strictness_lineality" not in report.hypotheses


def test_complete_theorem_with_a_degenerate_function():
    fan = sample_fan("four_quadrants")
    bend = PiecewiseFunction.from_ray_values(fan, [1, 1, 0, 0])
    report = check_complete_theorem(fan, bend, abs_sum(fan))
    assert report.hypotheses["strictness_lineality"] == 1
    assert report.notes


def test_deformation_with_a_given_schedule():
    sample = sample_subdivision("quadrant_split")
    report = check_deformation(sample.subdivision, sample.l, sample.l_hat, eps=["1/4"])
    assert report.passed
    assert report.hypotheses["largest_passing_eps"] == "1/4"
    assert [child.name for child in report.children] == ["eps=1/4"]


def test_default_eps_schedule_halves():
    schedule = default_eps_schedule()
    assert len(schedule) == 7
    assert schedule[0] * 4 == 1
    assert all(a == 2 * b for a, b in zip(schedule, schedule[1:]))


def test_deformation_with_the_default_schedule():
    sample = sample_subdivision("quadrant_split")
    report = check_deformation(sample.subdivision, sample.l, sample.l_hat)
    assert report.passed
    assert len(report.children) == len(default_eps_schedule())
    assert report.hypotheses["largest_passing_eps"] == "1/4"
