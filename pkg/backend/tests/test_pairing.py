import pytest
from sympy.polys.domains import QQ

from app.data import abs_sum, sample_fan, sample_subdivision
from app.fans import PiecewiseFunction
from app.linalg import SymmetricForm, rank, sparse
from app.pairing import (
    EvaluationContext,
    brion_evaluate,
    check_chi_isomorphism,
    check_chi_transport,
    poincare_pairing,
    w_form,
)
from app.sheaves import decompose, minimal_extension_sheaf, pushforward


def test_localization_sum_of_a_square():
    fan = sample_fan("four_quadrants")
    context = EvaluationContext(fan)
    f = abs_sum(fan)
    assert brion_evaluate(context, f * f) == QQ(8)
    assert brion_evaluate(context, f * f, exact=True) == QQ(8)


def test_global_polynomials_integrate_to_zero():
    fan = sample_fan("four_quadrants")
    g = PiecewiseFunction.global_linear(fan, [1, 2])
    assert brion_evaluate(EvaluationContext(fan), g * g) == 0


def test_pairing_on_a_complete_fan():
    data = poincare_pairing(sample_fan("four_quadrants"))
    assert data.absolute.space.dims == {0: 1, 2: 2, 4: 1}
    assert sorted(data.matrices) == [0, 2, 4]
    middle = data.block(2)
    assert len(middle) == 2 and all(len(row) == 2 for row in middle)
    assert set(data.to_dict()) == {"0", "2", "4"}


def test_pairing_on_a_cone_pairs_relative_top_with_constants():
    data = poincare_pairing(sample_fan("quadrant"))
    assert data.absolute.space.dims == {0: 1}
    assert data.relative.space.dims == {4: 1}
    ((value,),) = data.block(0)
    assert value != 0


def test_forms_on_multiplicity_spaces_are_symmetric():
    subdivision = sample_subdivision("edge_split").subdivision
    table = decompose(pushforward(subdivision, minimal_extension_sheaf(subdivision.source)))
    forms = w_form(subdivision, table=table)
    assert set(forms) == set(table.nonzero())
    for sigma, form in forms.items():
        assert form.space == table.spaces[sigma]
        assert form.is_symmetric()
        assert SymmetricForm(form.space, form.center, form.blocks).is_nondegenerate()


def test_chi_multiplication_on_a_star():
    fan = sample_fan("octahedron")
    assert check_chi_isomorphism(fan, fan.cone_by_rays([0]))


def test_chi_transports_the_pairing_of_the_star_quotient():
    fan = sample_fan("octahedron")
    assert check_chi_transport(fan, fan.cone_by_rays([0]))


def _courant(fan, ray):
    return PiecewiseFunction.from_ray_values(fan, [1 if i == ray else 0 for i in range(len(fan.rays))])


def _absolute_gram(data, d):
    n = data.dim
    rows = [data.function(r, n - d // 2) for r in data.absolute.reps(n - d // 2)]
    cols = [data.function(c, d // 2) for c in data.absolute.reps(d // 2)]
    return [[data.pair(f, g) for g in cols] for f in rows]


@pytest.mark.parametrize("name", ["four_quadrants", "octahedron"])
def test_pairing_on_a_complete_fan_is_symmetric(name):
    data = poincare_pairing(sample_fan(name))
    n = data.dim
    for d in data.absolute.space.degrees():
        gram, mirror = _absolute_gram(data, d), _absolute_gram(data, 2 * n - d)
        assert gram == [list(col) for col in zip(*mirror)], d
        assert rank([sparse(row) for row in gram], len(gram)) == len(gram)


def test_functions_with_disjoint_supports_pair_to_zero():
    fan = sample_fan("four_quadrants")
    context = EvaluationContext(fan)
    # rays 0 and 1 are e1 and -e1, ray 2 is e2
    assert brion_evaluate(context, _courant(fan, 0) * _courant(fan, 1)) == 0
    assert brion_evaluate(context, _courant(fan, 0) * _courant(fan, 2)) == 1


@pytest.mark.parametrize("p, q", [(1, 0), (0, 1), (3, -2), (-5, 7)])
def test_evaluation_is_linear_over_global_polynomials(p, q):
    fan = sample_fan("four_quadrants")
    context = EvaluationContext(fan)
    x0, x1 = context.ring.gens
    a = PiecewiseFunction.global_linear(fan, [p, q])
    for f, g in [(abs_sum(fan), abs_sum(fan)), (_courant(fan, 0), _courant(fan, 2)), (_courant(fan, 1), abs_sum(fan))]:
        value = brion_evaluate(context, f * g)
        assert brion_evaluate(context, a * f * g) == (p * x0 + q * x1) * value


@pytest.mark.parametrize("name", ["edge_split", "quadrant_split"])
def test_pairing_does_not_depend_on_the_refinement(name):
    subdivision = sample_subdivision(name).subdivision
    coarse = poincare_pairing(subdivision.target)
    fine = poincare_pairing(subdivision.target, refinement=subdivision)
    assert fine.matrices == coarse.matrices
    assert fine.to_dict() == coarse.to_dict()
