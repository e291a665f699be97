import itertools
from fractions import Fraction

import numpy as np
import pytest

from lyapsos.polycore import Polynomial, VectorField, lie_derivative
from lyapsos.reductions import (
    GALLERY_NAMES,
    CnfError,
    CnfInstance,
    GadgetKind,
    collision_polytope,
    control_matrix,
    gadget,
    gallery,
    homogenize_quartic,
    one_in_three_brute_force,
    sample_instance,
    parse_cnf,
    quartic_to_gradient_field,
    random_instance,
    sat_to_quartic,
)

SAMPLE_CNF = "p cnf 5 4\n1 -2 4 0\n-2 -3 5 0\n-1 3 -5 0\n1 3 4 0\n"


def _boolean_points(n):
    return np.array(list(itertools.product([0, 1], repeat=n)), dtype=float)


def test_parse_sample_instance():
    inst = parse_cnf(SAMPLE_CNF)
    assert inst.nvars == 5 and len(inst.clauses) == 4
    assert inst == sample_instance()
    assert parse_cnf(inst.to_dimacs()) == inst


@pytest.mark.parametrize("text, needle", [
    ("p cnf 3 0\n", "clause"),
    ("p cnf 3 1\n1 2 0\n", "line 2"),
    ("p cnf 3 1\n1 2 9 0\n", "line 2"),
    ("1 2 3 0\n", "line 1"),
])
def test_cnf_errors(text, needle):
    with pytest.raises(CnfError) as info:
        parse_cnf(text)
    assert needle in str(info.value)


def test_single_clause_pattern():
    x1, x2, x3 = Polynomial.variables(3)
    p = sat_to_quartic(CnfInstance(3, ((1, 2, 3),)))
    expected = sum((v ** 2 * (1 - v) ** 2 for v in (x1, x2, x3)), Polynomial.zero(3)) + (x1 + x2 + x3 - 1) ** 2
    assert p == expected
    for pt in [(1, 0, 0), (0, 1, 0), (0, 0, 1)]:
        assert p.evaluate(pt) == 0


def test_sample_polynomial_term_for_term():
    x = Polynomial.variables(5)
    one = Polynomial.constant(5, 1)
    expected = sum((v ** 2 * (1 - v) ** 2 for v in x), Polynomial.zero(5))
    expected += (x[0] + (one - x[1]) + x[3] - 1) ** 2
    expected += ((one - x[1]) + (one - x[2]) + x[4] - 1) ** 2
    expected += ((one - x[0]) + x[2] + (one - x[4]) - 1) ** 2
    expected += (x[0] + x[2] + x[3] - 1) ** 2
    assert sat_to_quartic(sample_instance()) == expected


def test_sample_instance_verdict():
    res = one_in_three_brute_force(sample_instance())
    assert res.satisfiable and res.assignment == (1, 1, 0, 0, 0)
    assert sample_instance().one_in_three(res.assignment)
    assert sat_to_quartic(sample_instance()).evaluate(res.assignment) == 0


def test_brute_force_examples():
    res = one_in_three_brute_force(CnfInstance(3, ((1, 2, 3),)))
    assert res.assignment == (1, 0, 0)
    assert not one_in_three_brute_force(CnfInstance(1, ((1, 1, 1), (-1, -1, -1)))).satisfiable


def test_zero_set_is_solution_set():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(3, 13))
        inst = random_instance(n, int(rng.integers(1, n + 1)), rng)
        pts = _boolean_points(n)
        vals = sat_to_quartic(inst).evaluate_many(pts)  # integer data, exact in floats
        zeros = {tuple(int(v) for v in pt) for pt, val in zip(pts, vals) if val == 0}
        sols = {tuple(int(v) for v in pt) for pt in pts if inst.one_in_three(pt.astype(int))}
        assert zeros == sols
        assert bool(sols) == one_in_three_brute_force(inst).satisfiable


def test_homogenization_properties():
    ph = homogenize_quartic(sat_to_quartic(sample_instance()))
    assert ph.nvars == 6 and ph.is_homogeneous() and ph.degree == 4
    x = Polynomial.variables(5)
    at_infinity = ph.substitute(list(x) + [Polynomial.zero(5)])
    assert at_infinity == sum((v ** 4 for v in x), Polynomial.zero(5))
    assert ph.substitute(list(x) + [Polynomial.constant(5, 1)]) == sat_to_quartic(sample_instance())


def test_unsatisfiable_form_is_positive_on_sphere():
    rng = np.random.default_rng(9)
    while True:
        inst = random_instance(6, 6, rng)
        if not one_in_three_brute_force(inst).satisfiable:
            break
    ph = homogenize_quartic(sat_to_quartic(inst))
    pts = rng.normal(size=(10_000, 7))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    assert ph.evaluate_many(pts).min() > 0
    field = quartic_to_gradient_field(ph)
    for bits in itertools.product([0, 1], repeat=6):
        assert any(c.evaluate(list(bits) + [1]) != 0 for c in field)


def test_gradient_field():
    x1, x2 = Polynomial.variables(2)
    assert quartic_to_gradient_field(x1 ** 4 + x2 ** 4) == VectorField([-4 * x1 ** 3, -4 * x2 ** 3])
    ph = homogenize_quartic(sat_to_quartic(sample_instance()))
    field = quartic_to_gradient_field(ph)
    witness = list(one_in_three_brute_force(sample_instance()).assignment) + [1]
    assert all(c.evaluate(witness) == 0 for c in field)


def test_gadgets():
    x1, x2 = Polynomial.variables(2)
    base = VectorField([-4 * x1 ** 3, -4 * x2 ** 3])
    bounded = gadget(GadgetKind.BOUNDEDNESS, base)
    assert bounded.field == VectorField([-4 * x1 ** 3 + x1, -4 * x2 ** 3 + x2])
    g = control_matrix(2)
    assert all(e == x1 * x2 ** 2 - x1 ** 2 * x2 for row in g for e in row)
    for pt in itertools.product([0, 1], repeat=2):
        assert all(e.evaluate(pt) == 0 for row in g for e in row)
    p = x1 ** 4 - x1 ** 2 * x2 ** 2 + 2 * x2 ** 4
    semi = gadget("SemialgebraicInvariance", p)
    assert semi.field == VectorField([-x1, -x2]) and semi.identities_hold()
    assert lie_derivative(p, semi.field) == -4 * p
    for kind in GadgetKind:
        inst = gadget(kind, p if kind.value.endswith("Invariance") else base)
        assert inst.identities_hold()
    with pytest.raises(TypeError):
        gadget(GadgetKind.BOUNDEDNESS, p)
    hs = collision_polytope(3)
    assert len(hs) == 5


def test_gallery():
    x, y = Polynomial.variables(2)
    assert gallery("krstic").field == VectorField([-x + x * y, -y])
    still = gallery("non-monotone", c=1, s=0).field
    assert still == VectorField([y ** 3, -(x ** 3)])
    assert lie_derivative(x ** 4 + y ** 4, still).is_zero()
    half = (x ** 2 + y ** 2) * Fraction(1, 2)
    M = x ** 4 * y ** 2 + x ** 2 * y ** 4 - 3 * x ** 2 * y ** 2 + 1
    assert lie_derivative(half, gallery("motzkin-cx").field) == -M.substitute([x - 1, y - 1])
    for name in GALLERY_NAMES:
        meta = gallery(name).metadata()
        assert meta["name"] == name and meta["nvars"] == 2
    with pytest.raises(KeyError):
        gallery("nope")
