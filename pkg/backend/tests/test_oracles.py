from dataclasses import replace

import pytest

from app.data import COMPLETE_SIMPLICIAL, abs_sum, sample_fan, sample_subdivision
from app.exceptions import SourceNotSimplicial, SumRuleViolation
from app.fans import check_convexity, product_fan
from app.linalg import GradedSpace
from app.oracles import (
    betti_convolution,
    betti_from_h,
    check_local_h,
    f_vector,
    h_polynomial,
    h_vector,
    local_h_oracle,
    product_function,
)
from app.sheaves import decompose, ih, minimal_extension_sheaf, pushforward


def test_face_counts_of_the_octahedron():
    fan = sample_fan("octahedron")
    assert f_vector(fan) == [1, 6, 12, 8]
    assert h_vector(fan) == [1, 3, 3, 1]
    assert betti_from_h([1, 3, 3, 1]).betti() == "0:1 2:3 4:3 6:1"


def test_h_polynomial_of_a_subdivided_triangle():
    assert h_polynomial([1, 7, 12, 6], 3) == [1, 4, 1, 0]


def test_h_vector_needs_a_simplicial_fan():
    with pytest.raises(SourceNotSimplicial):
        h_vector(sample_fan("cube"))


def test_betti_convolution():
    line = GradedSpace({0: 1, 2: 1})
    assert betti_convolution(line, line).dims == {0: 1, 2: 2, 4: 1}


def test_local_h_of_an_edge_split():
    subdivision = sample_subdivision("edge_split").subdivision
    (top,) = subdivision.target.maximal
    assert local_h_oracle(subdivision) == {subdivision.target.origin: [1], top: [0, 1, 0]}


def test_local_h_of_the_identity_is_concentrated_at_the_origin():
    subdivision = sample_subdivision("identity_quadrant").subdivision
    assert local_h_oracle(subdivision) == {subdivision.target.origin: [1]}


@pytest.mark.parametrize("name", sorted(COMPLETE_SIMPLICIAL))
def test_intersection_cohomology_of_complete_simplicial_fans_follows_h(name):
    fan = COMPLETE_SIMPLICIAL[name]()
    assert ih(minimal_extension_sheaf(fan)) == betti_from_h(h_vector(fan))


@pytest.mark.parametrize(
    "name",
    [
        "identity_quadrant",
        "identity_four_quadrants",
        "edge_split",
        "quadrant_split",
        "four_quadrants_barycentric",
        "delta2_star",
        "delta2_edge",
        "delta2_barycentric",
        "delta3_star",
        "delta3_edge",
        "delta3_face",
        "delta3_barycentric",
    ],
)
def test_decomposition_matches_local_h(name):
    subdivision = sample_subdivision(name).subdivision
    table = decompose(pushforward(subdivision, minimal_extension_sheaf(subdivision.source)))
    check_local_h(table, subdivision)


def test_local_h_mismatch_is_reported():
    subdivision = sample_subdivision("edge_split").subdivision
    table = decompose(pushforward(subdivision, minimal_extension_sheaf(subdivision.source)))
    (top,) = subdivision.target.maximal
    wrong = replace(table, spaces={**table.spaces, top: GradedSpace({})})
    with pytest.raises(SumRuleViolation):
        check_local_h(wrong, subdivision)


def test_product_of_strictly_convex_functions():
    line = sample_fan("line")
    square = product_fan(line, line)
    f = product_function(abs_sum(line), abs_sum(line), square)
    assert check_convexity(f).strictly_convex
