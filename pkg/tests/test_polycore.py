import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyapsos.polycore import (
    DegreeError,
    DimensionError,
    Polynomial,
    VectorField,
    arithmetic,
    euler_residual,
    grlex_key,
    homogenize,
    lie_derivative,
    monomials_of_degree,
    monomials_up_to,
    motzkin,
    norm_squared,
    symmetrize_quarter_turn,
)
from lyapsos.reductions import gallery, rotation_pair

from strategies import forms, polynomial_pairs, polynomials

x, y = Polynomial.variables(2)


def _convolve(a, b):
    """Term-by-term product, independent of Polynomial.__mul__."""
    out = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = tuple(i + j for i, j in zip(ma, mb))
            out[m] = out.get(m, 0) + ca * cb
    return {m: c for m, c in out.items() if c}


def test_difference_of_squares():
    assert arithmetic(x + y, x - y, "mul") == x ** 2 - y ** 2


def test_cancellation_gives_zero():
    p = arithmetic(x ** 2, -(x ** 2), "add")
    assert p.is_zero() and p.degree == -1


def test_motzkin_squared():
    M = motzkin()
    sq = arithmetic(M, M, "mul")
    assert sq.terms == _convolve(M, M)
    # frozen from the convolution oracle
    assert sq.terms == {(8, 4): 1, (6, 6): 2, (6, 4): -6, (4, 8): 1, (4, 6): -6, (4, 4): 9,
                        (4, 2): 2, (2, 4): 2, (2, 2): -6, (0, 0): 1}
    assert sq.degree == 12
    assert sq.evaluate([1, 1]) == 0


def test_unknown_op_rejected():
    with pytest.raises(ValueError):
        arithmetic(x, y, "div")


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        x + Polynomial.variable(3, 0)


def test_substitute_shift():
    shifted = motzkin().substitute([x - 1, y - 1])
    assert shifted.evaluate([1, 1]) == 1
    assert motzkin().substitute([x, y]) == motzkin()


def test_homogenize_with_zeros_at_infinity():
    p = x ** 2 + (1 - x * y) ** 2
    X, Y, W = Polynomial.variables(3)
    ph = homogenize(p, 4)
    assert ph == X ** 2 * W ** 2 + (W ** 2 - X * Y) ** 2
    assert ph.substitute([x, y, Polynomial.constant(2, 1)]) == p
    # zeros at infinity
    assert ph.evaluate([1, 0, 0]) == 0 and ph.evaluate([0, 1, 0]) == 0


def test_homogenize_rejects_low_target():
    with pytest.raises(DegreeError):
        homogenize(x ** 3 + 1, 2)


def test_gradient_examples():
    assert (x ** 4 + y ** 4).gradient() == [4 * x ** 3, 4 * y ** 3]
    assert (norm_squared(2) * Fraction(1, 2)).gradient() == [x, y]
    assert all(g.is_zero() for g in Polynomial.constant(2, 5).gradient())


def test_lie_derivative_motzkin_system():
    f = gallery("motzkin-cx").field
    assert lie_derivative(norm_squared(2) * Fraction(1, 2), f) == -motzkin().substitute([x - 1, y - 1])


@given(forms(degree=4))
def test_lie_derivative_of_gradient_flow(V):
    f = VectorField([-g for g in V.gradient()])
    grad_sq = sum((g * g for g in V.gradient()), Polynomial.zero(V.nvars))
    assert lie_derivative(V, f) == -grad_sq


def test_lie_derivative_rotation_family():
    c, s = rotation_pair(0.3)
    f = gallery("non-monotone", c=c, s=s).field
    V = x ** 4 + y ** 4
    assert lie_derivative(V, f) == -4 * s * (x ** 6 + y ** 6)


def test_evaluate():
    assert motzkin().evaluate([1, 1]) == 0
    assert isinstance(motzkin().evaluate([Fraction(1, 2), 2]), Fraction)
    assert (x ** 3 * y).evaluate([0, 0]) == 0


def test_evaluate_many_matches_exact():
    pts = np.array([[0.5, -1.25], [2.0, 3.0]])
    vals = motzkin().evaluate_many(pts)
    for p, v in zip(pts, vals):
        assert v == pytest.approx(float(motzkin().evaluate([Fraction(p[0]), Fraction(p[1])])))


def test_symmetrize_quarter_turn():
    assert symmetrize_quarter_turn(x ** 6) == 2 * x ** 6 + 2 * y ** 6
    assert symmetrize_quarter_turn(x ** 4 + y ** 4) == 4 * (x ** 4 + y ** 4)


@given(forms(nvars=2))
def test_quarter_turn_invariance(W):
    S = symmetrize_quarter_turn(W)
    assert S.substitute([y, -x]) == S


def test_invariant_sextics_may_keep_odd_monomials():
    # x^5 y - x y^5 is fixed by (x, y) -> (y, -x)
    assert symmetrize_quarter_turn(x ** 5 * y) == 2 * x ** 5 * y - 2 * x * y ** 5
    # the even-exponent part has only the two symmetric families
    S = symmetrize_quarter_turn(x ** 4 * y ** 2 + 3 * x ** 6 - x ** 3 * y ** 3)
    assert S == 6 * (x ** 6 + y ** 6) + 2 * (x ** 4 * y ** 2 + x ** 2 * y ** 4)


def test_euler_examples():
    assert euler_residual(x ** 4 + y ** 4).is_zero()
    assert euler_residual(x ** 2 * y ** 2).is_zero()
    with pytest.raises(DegreeError):
        euler_residual(x ** 2 + y)


@given(forms())
def test_euler_residual_vanishes(V):
    assert euler_residual(V).is_zero()


def test_monomial_counts_match_binomials():
    for n in range(1, 5):
        for d in range(0, 6):
            assert len(monomials_of_degree(n, d)) == math.comb(n + d - 1, d)
            assert len(monomials_up_to(n, d)) == math.comb(n + d, d)


def test_grlex_order():
    mons = monomials_up_to(2, 2)
    assert mons == sorted(mons, key=grlex_key)
    assert mons[0] == (0, 0)
    assert grlex_key((2, 0)) > grlex_key((1, 1)) > grlex_key((0, 2))


# ring properties -----------------------------------------------------------------


@given(polynomial_pairs())
def test_addition_commutes(pair):
    a, b = pair
    assert a + b == b + a


@given(polynomial_pairs())
def test_product_matches_convolution(pair):
    a, b = pair
    assert (a * b).terms == _convolve(a, b)


@settings(max_examples=50)
@given(polynomial_pairs(), st.integers(0, 2))
def test_distributivity(pair, k):
    a, b = pair
    c = a ** k
    assert c * (a + b) == c * a + c * b


@given(polynomials())
def test_subtract_self(p):
    assert (p - p).is_zero()


@given(polynomial_pairs())
def test_evaluate_is_ring_homomorphism(pair):
    a, b = pair
    pt = [Fraction(k + 1, 3) for k in range(a.nvars)]
    assert (a * b).evaluate(pt) == a.evaluate(pt) * b.evaluate(pt)
    assert (a - b).evaluate(pt) == a.evaluate(pt) - b.evaluate(pt)


@given(polynomials())
def test_homogenize_round_trip(p):
    if p.is_zero():
        return
    assert p.homogenize(p.degree).dehomogenize() == p
    assert p.homogenize(p.degree).is_homogeneous()


@given(polynomial_pairs())
def test_product_rule(pair):
    a, b = pair
    for i in range(a.nvars):
        assert (a * b).diff(i) == a.diff(i) * b + a * b.diff(i)


def test_vector_field_basics():
    f = gallery("krstic").field
    assert f.linear_part() == [[-1, 0], [0, -1]]
    assert f.vanishes_at_origin()
    assert not f.is_homogeneous()
    assert f.compile()(np.array([2.0, 3.0])).tolist() == [4.0, -3.0]
    with pytest.raises(DimensionError):
        VectorField([x, Polynomial.variable(3, 0)])
