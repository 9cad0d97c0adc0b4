import pytest
from sympy.polys.domains import QQ

from app.exceptions import CapTooLow, NotSymmetric, OddDegree
from app.linalg import (
    DegreewiseModule,
    GradedMap,
    GradedSpace,
    QuotientBasis,
    SymmetricForm,
    congruent,
    fmt,
    hilbert_check_free,
    minimal_generators,
    nullspace,
    qq,
    rank,
    signature,
    solve,
)


def test_rationals_are_canonical():
    assert qq("3/6") == QQ(1, 2)
    assert fmt(qq("-4/2")) == "-2"
    assert fmt(qq(" 2/6 ")) == "1/3"


def test_rank_and_nullspace():
    rows = [{0: QQ(1), 1: QQ(1)}, {0: QQ(2), 1: QQ(2)}]
    assert rank(rows, 2) == 1
    (kernel,) = nullspace(rows, 2)
    assert kernel == {0: QQ(-1), 1: QQ(1)}


def test_solve_reports_unreachable_targets():
    basis = [{0: QQ(1)}]
    reached, missed = solve(basis, [{0: QQ(3)}, {1: QQ(1)}], 2)
    assert reached == [QQ(3)]
    assert missed is None


def test_quotient_basis_skips_the_subspace():
    q = QuotientBasis([{0: QQ(1)}], [{0: QQ(1)}, {1: QQ(1)}], 2)
    assert len(q) == 1
    assert q.reps == [{1: QQ(1)}]


def test_signature_by_congruence():
    assert signature([[1, 0], [0, -1]]) == (1, 1, 0)
    assert signature([[0, 1], [1, 0]]) == (1, 1, 0)
    assert signature([[1, 1], [1, 1]]) == (1, 0, 1)
    assert signature([[2, "1/2"], ["1/2", 3]]) == (2, 0, 0)


@pytest.mark.parametrize(
    "matrix",
    [
        [[1, 0], [0, -1]],
        [[0, 1], [1, 0]],
        [[1, 1], [1, 1]],
        [[2, "1/2"], ["1/2", 3]],
        [[0, 0], [0, -3]],
    ],
)
def test_signature_is_invariant_under_unimodular_congruence(matrix):
    m = [[qq(x) for x in row] for row in matrix]
    for columns in ([[1, 0], [2, 1]], [[0, 1], [1, 0]], [[1, -3], [1, -2]]):
        basis = [[QQ(x) for x in col] for col in columns]
        assert signature(congruent(m, basis)) == signature(m)


def test_signature_rejects_asymmetric_matrices():
    with pytest.raises(NotSymmetric):
        signature([[1, 2], [0, 1]])


def test_graded_space_drops_zeros_and_rejects_odd_degrees():
    assert GradedSpace({0: 1, 2: 0, 4: 1}).dims == {0: 1, 4: 1}
    assert GradedSpace({0: 1, 2: 2, 4: 1}).betti() == "0:1 2:2 4:1"
    with pytest.raises(OddDegree):
        GradedSpace({1: 1})


def test_graded_map_powers():
    space = GradedSpace({0: 1, 2: 1, 4: 1})
    op = GradedMap(space, space, 2, {0: [{0: QQ(1)}], 2: [{0: QQ(2)}]})
    square = op.power(2)
    assert square.shift == 4
    assert square.apply(0, {0: QQ(1)}) == {0: QQ(2)}
    assert op.rank(4) == 0
    with pytest.raises(OddDegree):
        GradedMap(space, space, 1)


def test_free_module_generators():
    module = DegreewiseModule.free([0], 2, 3)
    assert module.hilbert().dims == {0: 1, 2: 2, 4: 3, 6: 4}
    space, lifts = minimal_generators(module)
    assert space.dims == {0: 1}
    assert hilbert_check_free(module, (space, lifts))


def test_free_module_with_two_generators():
    module = DegreewiseModule.free([0, 1], 1, 3)
    assert minimal_generators(module)[0].dims == {0: 1, 2: 1}
    assert hilbert_check_free(module)


def test_generators_above_the_cap_are_refused():
    module = DegreewiseModule.free([0], 1, 2)
    with pytest.raises(CapTooLow):
        minimal_generators(module, upto=3)


def test_symmetric_form_blocks():
    space = GradedSpace({0: 1, 4: 1})
    form = SymmetricForm(space, 2, {0: [[QQ(1)]], 4: [[QQ(1)]]})
    assert form.is_symmetric() and form.is_nondegenerate()
    skew = SymmetricForm(space, 2, {0: [[QQ(1)]], 4: [[QQ(2)]]})
    assert not skew.is_symmetric()
    assert not SymmetricForm(space, 2).is_nondegenerate()


def test_torsion_module_is_not_free():
    # Q[x]/(x): one generator in degree 0, nothing above it
    module = DegreewiseModule(
        1,
        2,
        lambda k: [{0: QQ.one}] if k == 0 else [],
        lambda i, vec, k: {},
        lambda k: 1 if k == 0 else 0,
    )
    space, _ = minimal_generators(module)
    assert space.dims == {0: 1}
    assert not hilbert_check_free(module)
