"""Exact real-root analysis of univariate rational polynomials.

Coefficient lists run from the constant term upward.  Used to decide
positivity of bivariate forms exactly: a form p(x, y) of even degree d is
nonnegative iff p(t, 1) >= 0 for all real t and p(1, 0) >= 0.
"""

from __future__ import annotations

from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .polycore import Polynomial

Coeffs = List[Fraction]


def _trim(a: Sequence) -> Coeffs:
    out = [Fraction(c) for c in a]
    while out and out[-1] == 0:
        out.pop()
    return out


def _deriv(a: Coeffs) -> Coeffs:
    return _trim([i * a[i] for i in range(1, len(a))])


def _divmod(a: Coeffs, b: Coeffs) -> Tuple[Coeffs, Coeffs]:
    a = list(a)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 0)
    lead = b[-1]
    while len(a) >= len(b) and a:
        c = a[-1] / lead
        shift = len(a) - len(b)
        q[shift] = c
        for i, bi in enumerate(b):
            a[shift + i] -= c * bi
        a = _trim(a)
    return _trim(q), a


def _gcd(a: Coeffs, b: Coeffs) -> Coeffs:
    a, b = _trim(a), _trim(b)
    while b:
        a, b = b, _divmod(a, b)[1]
    if not a:
        return a
    return [c / a[-1] for c in a]


def _sub(a: Coeffs, b: Coeffs) -> Coeffs:
    n = max(len(a), len(b))
    return _trim([(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)])


def squarefree_factors(a: Sequence) -> List[Tuple[Coeffs, int]]:
    """Yun's algorithm: a = lc * prod f_i^i with f_i squarefree and coprime."""
    a = _trim(a)
    if len(a) <= 1:
        return []
    g = _gcd(a, _deriv(a))
    b = _divmod(a, g)[0]
    d = _sub(_divmod(_deriv(a), g)[0], _deriv(b))
    out = []
    i = 1
    while len(b) > 1:
        f = _gcd(b, d)
        if len(f) > 1:
            out.append((f, i))
        b = _divmod(b, f)[0]
        d = _sub(_divmod(d, f)[0], _deriv(b))
        i += 1
    return out


def _eval(a: Coeffs, t: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(a):
        acc = acc * t + c
    return acc


def _sign_changes(seq: Sequence[Fraction]) -> int:
    signs = [s for s in (1 if v > 0 else -1 if v < 0 else 0 for v in seq) if s]
    return sum(1 for u, v in zip(signs, signs[1:]) if u != v)


def count_real_roots(a: Sequence) -> int:
    """Number of distinct real roots (Sturm's theorem)."""
    a = _trim(a)
    if len(a) <= 1:
        return 0
    chain = [a, _deriv(a)]
    while len(chain[-1]) > 1:
        r = _divmod(chain[-2], chain[-1])[1]
        if not r:
            break
        chain.append([-c for c in r])
    # signs at -inf and +inf come from leading coefficients and degrees
    at_pos = [p[-1] for p in chain]
    at_neg = [p[-1] * (-1 if (len(p) - 1) % 2 else 1) for p in chain]
    return _sign_changes(at_neg) - _sign_changes(at_pos)


def is_nonnegative(a: Sequence) -> bool:
    """p(t) >= 0 for every real t."""
    a = _trim(a)
    if not a:
        return True
    if a[-1] < 0:
        return False
    if len(a) == 1:
        return True
    if (len(a) - 1) % 2:
        return False
    return all(count_real_roots(f) == 0 for f, mult in squarefree_factors(a) if mult % 2)


def is_positive(a: Sequence) -> bool:
    """p(t) > 0 for every real t."""
    a = _trim(a)
    if not a or a[-1] < 0:
        return False
    return count_real_roots(a) == 0 and (len(a) - 1) % 2 == 0


def _slice(p: Polynomial) -> Tuple[Coeffs, Fraction]:
    if p.nvars != 2:
        raise ValueError("bivariate form expected")
    if not p.is_homogeneous():
        raise ValueError("form expected")
    d = max(p.degree, 0)
    coeffs = [Fraction(0)] * (d + 1)
    for (i, j), c in p.terms.items():
        coeffs[i] += c
    return _trim(coeffs), p.coefficient((d, 0))


def form_is_nonnegative(p: Polynomial) -> bool:
    """Exact nonnegativity of a bivariate form on R^2."""
    if p.degree < 0:
        return True
    if p.degree % 2:
        return False
    t_poly, top = _slice(p)
    return top >= 0 and is_nonnegative(t_poly)


def form_is_positive_definite(p: Polynomial) -> bool:
    """Exact positivity of a bivariate form away from the origin."""
    if p.degree <= 0 or p.degree % 2:
        return False
    t_poly, top = _slice(p)
    return top > 0 and is_positive(t_poly)


def nonpositive_point(p: Polynomial) -> Optional[Tuple[Fraction, Fraction]]:
    """A nonzero rational point where the bivariate form p is <= 0, if one is found."""
    if p.degree < 0:
        return (Fraction(1), Fraction(0))
    d = p.degree
    if p.coefficient((d, 0)) <= 0:
        return (Fraction(1), Fraction(0))
    t_poly, _ = _slice(p)
    if not t_poly:
        return (Fraction(0), Fraction(1))
    roots = np.roots([float(c) for c in reversed(t_poly)]) if len(t_poly) > 1 else []
    cands = [Fraction(0)]
    for r in roots:
        if abs(r.imag) < 1e-6:
            for D in (1, 10, 100, 1000, 10**6):
                cands.append(Fraction(float(r.real)).limit_denominator(D))
    for t in cands:
        if _eval(t_poly, t) <= 0:
            return (t, Fraction(1))
    return None
