import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from lyapsos.polycore import DegreeError, Polynomial, monomials_up_to, motzkin
from lyapsos.sos import (
    BasisMode,
    DualCertificate,
    GramBasis,
    SosCertificate,
    SosStatus,
    check_sos,
    compile_sos,
    decomposition_residual,
    extract_decomposition,
    face_from_zeros,
    half_newton_points,
    monomial_basis,
    rationalize_certificate,
    verify_certificate,
    verify_dual,
)

x, y = Polynomial.variables(2)


def test_basis_sizes():
    q = x ** 4 + x ** 2 * y ** 2 + y ** 4
    assert monomial_basis(q, "homogeneous").monomials == ((0, 2), (1, 1), (2, 0))  # ascending grlex
    assert len(monomial_basis(q, "full")) == 6
    with pytest.raises(DegreeError):
        monomial_basis(x ** 3)
    with pytest.raises(DegreeError):
        monomial_basis(x ** 4 + 1, "homogeneous")


@pytest.mark.parametrize("nvars, degree", [(1, 4), (2, 6), (3, 4), (4, 2)])
def test_full_basis_matches_sympy_monomials(nvars, degree):
    syms = sympy.symbols(f"z0:{nvars}")
    expected = {tuple(sympy.degree_list(m, *syms)) if m != 1 else (0,) * nvars
                for m in sympy.polys.monomials.itermonomials(list(syms), degree // 2)}
    p = Polynomial(nvars, {(degree,) + (0,) * (nvars - 1): 1, (0,) * nvars: 1})
    assert set(monomial_basis(p, BasisMode.FULL).monomials) == expected


def _half_newton_oracle(p):
    """Lattice points of half the Newton polytope, via Qhull facets."""
    pts = np.array(p.monomials(), dtype=float) / 2
    hull = ConvexHull(pts)
    hi = pts.max(axis=0).astype(int)
    out = []
    for m in itertools.product(*[range(h + 1) for h in hi]):
        if np.all(hull.equations[:, :-1] @ np.array(m, float) + hull.equations[:, -1] <= 1e-9):
            out.append(m)
    return set(out)


def test_newton_basis_of_motzkin():
    newton = set(monomial_basis(motzkin(), "newton").monomials)
    assert newton == _half_newton_oracle(motzkin())
    assert newton == {(0, 0), (1, 1), (2, 1), (1, 2)}  # frozen from the oracle
    assert newton < set(monomial_basis(motzkin(), "full").monomials)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=3, max_size=7, unique=True))
def test_newton_points_match_hull_oracle(support):
    p = Polynomial(2, {(2 * a, 2 * b): 1 for a, b in support})
    pts = np.array(support, dtype=float)
    if np.linalg.matrix_rank(pts[1:] - pts[0]) < 2:
        return  # Qhull needs a full-dimensional hull
    assert set(half_newton_points(p)) == _half_newton_oracle(p)


def test_compile_sizes():
    assert compile_sos(motzkin(), monomial_basis(motzkin(), "full")).block_dims == [10]


def test_check_sos_examples():
    assert check_sos((x - y) ** 2).status is SosStatus.SOS
    for p in (motzkin(), motzkin().substitute([x - 1, y - 1])):
        v = check_sos(p)
        assert v.status is SosStatus.NOT_SOS
        assert verify_dual(p, v.dual)
    # odd degree: not a sum of squares, certified by the same linear functional
    v = check_sos(x ** 3 + y ** 2)
    assert v.status is SosStatus.NOT_SOS


def test_decompositions():
    squares = extract_decomposition(check_sos((x - y) ** 2).certificate)
    assert len(squares) == 1
    q = squares[0]
    ratio = float(q.coefficient((0, 1))) / float(q.coefficient((1, 0)))
    assert ratio == pytest.approx(-1.0, abs=1e-6)
    assert len(extract_decomposition(check_sos(x ** 2 + y ** 2).certificate)) == 2


def test_rationalize_examples():
    p = (x ** 2 + y ** 2) ** 2
    exact = rationalize_certificate(p, check_sos(p).certificate)
    assert exact.status is SosStatus.SOS
    assert all(v.denominator == 1 for row in exact.certificate.gram for v in row)
    t = Polynomial.variable(1, 0)
    q = t ** 4 + t ** 2 + 1
    exact = rationalize_certificate(q, check_sos(q).certificate)
    assert verify_certificate(q, exact.certificate)
    # independent completion of squares: (t^2 + 1/2)^2 + 3/4
    assert (t ** 2 + Fraction(1, 2)) ** 2 + Fraction(3, 4) == q


def test_perturbed_motzkin_near_sos_boundary():
    bump = (x ** 2 + y ** 2 + 1) ** 3
    # the SOS cone is closed, so a tiny bump leaves Motzkin outside it
    tiny = motzkin() + Fraction(1, 10 ** 9) * bump
    v = check_sos(tiny)
    assert v.status is SosStatus.NOT_SOS and verify_dual(tiny, v.dual)
    # just past the threshold (about 0.004596) rounding needs a finer grid
    near = motzkin() + Fraction("0.004597") * bump
    cert = check_sos(near).certificate
    assert rationalize_certificate(near, cert, 100).status is SosStatus.INDETERMINATE
    exact = rationalize_certificate(near, cert, 10 ** 4)
    assert exact.status is SosStatus.SOS and verify_certificate(near, exact.certificate)
    far = motzkin() + Fraction("0.005") * bump
    assert rationalize_certificate(far, check_sos(far).certificate, 100).status is SosStatus.SOS


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_random_sums_of_squares(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    d = int(rng.integers(1, 3))
    mons = monomials_up_to(n, d)
    p = Polynomial.zero(n)
    for _ in range(int(rng.integers(len(mons), len(mons) + 3))):
        q = Polynomial(n, {m: int(rng.integers(-3, 4)) for m in mons})
        p = p + q * q
    if p.is_zero():
        return
    v = check_sos(p)
    assert v.status is SosStatus.SOS
    assert verify_certificate(p, v.certificate)
    assert decomposition_residual(p, extract_decomposition(v.certificate)) < 1e-6
    # negating a nonzero SOS gives a certified non-SOS
    w = check_sos(-p - 1)
    assert w.status is SosStatus.NOT_SOS
    assert verify_dual(-p - 1, w.dual)


def test_face_from_zeros():
    basis = monomial_basis(motzkin().substitute([x - 1, y - 1]), "newton")
    N = face_from_zeros(basis, [(1, 1)])
    z = basis.exact_vector((1, 1))
    for col in range(len(N[0])):
        assert sum(z[i] * N[i][col] for i in range(len(z))) == 0


def test_certificate_json_round_trip():
    p = (x ** 2 + y ** 2) ** 2
    exact = rationalize_certificate(p, check_sos(p).certificate).certificate
    again = SosCertificate.from_dict(json.loads(json.dumps(exact.to_dict())))
    assert again.exact and again.gram == exact.gram
    assert verify_certificate(p, again)
    v = check_sos(motzkin())
    dual = DualCertificate.from_dict(json.loads(json.dumps(v.dual.to_dict())), motzkin())
    assert verify_dual(motzkin(), dual)
    assert not verify_dual(-motzkin() + 2, dual)


def test_tampered_certificate_fails():
    p = (x ** 2 + y ** 2) ** 2
    cert = rationalize_certificate(p, check_sos(p).certificate).certificate
    gram = [row[:] for row in cert.gram]
    gram[0][0] += 1
    assert not verify_certificate(p, SosCertificate(cert.basis, gram, True))
    assert not verify_certificate(p + x ** 4, cert)
    bad = SosCertificate(GramBasis(2, ((1, 0), (0, 1))), [[Fraction(1), Fraction(2)], [Fraction(2), Fraction(1)]], True)
    assert not verify_certificate(x ** 2 + 4 * x * y + y ** 2, bad)
