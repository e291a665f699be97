"""Search for sum-of-squares Lyapunov functions.

A polynomial V is an SOS Lyapunov function for x' = f(x) when V and -V' are
both sums of squares.  V is parameterised through its own Gram matrix, so the
two conditions become one SDP with two PSD blocks:

    V            = z1^T Q1 z1 + eps * sum x_i^d
    -V' - eps' S = z2^T Q2 z2,        tr Q1 = 1

The trace normalisation rules out V = 0.  The margins eps, eps' make V and
-V' strictly positive; with both set to zero the program is exactly the plain
"V sos, -V' sos" condition, which is what infeasibility claims should refer to.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .linalg import hurwitz_test, psd_check_exact
from .polycore import (DegreeError, DimensionError, Monomial, Polynomial, VectorField, as_fraction,
                       lie_derivative, monomials_up_to, norm_squared, power_sum)
from .sdp import SdpProblem, SdpSolution, SdpStatus, SolverOptions, solve_sdp, verify_farkas_ray
from .sos import (GramBasis, SosCertificate, SosProgram, SosStatus, SosVerdict, check_sos, half_newton_points,
                  monomial_basis, rationalize_certificate, verify_certificate)
from .univariate import form_is_positive_definite, nonpositive_point

DEFAULT_MARGIN = Fraction(1, 10000)
# a derivative margin of 1e-4 is already too strict for the degree-8 example
DEFAULT_MARGIN_DERIV = Fraction(1, 100000)


@dataclass(frozen=True)
class LyapunovProblem:
    field: VectorField
    degree: int
    homogeneous: bool = False
    margin: Fraction = DEFAULT_MARGIN
    margin_deriv: Fraction = DEFAULT_MARGIN_DERIV

    def __post_init__(self):
        if self.degree <= 0 or self.degree % 2:
            raise DegreeError(f"Lyapunov degree must be even and positive, got {self.degree}")
        if self.homogeneous and not self.field.is_homogeneous():
            raise DegreeError("homogeneous search needs a homogeneous vector field")
        object.__setattr__(self, "margin", as_fraction(self.margin))
        object.__setattr__(self, "margin_deriv", as_fraction(self.margin_deriv))
        if self.margin < 0 or self.margin_deriv < 0:
            raise ValueError("margins must be nonnegative")


class LyapunovStatus(Enum):
    FOUND = "Found"
    INFEASIBLE = "CertifiedInfeasible"
    INDETERMINATE = "Indeterminate"


@dataclass
class LyapunovResult:
    status: LyapunovStatus
    V: Optional[Polynomial] = None
    cert_V: Optional[SosCertificate] = None  # for V - eps * sum x_i^d
    cert_Vdot: Optional[SosCertificate] = None  # for -V' - vdot_margin * S
    margin_poly: Optional[Polynomial] = None  # eps * sum x_i^d
    vdot_margin_poly: Optional[Polynomial] = None
    ray: Optional[np.ndarray] = None
    problem: Optional[SdpProblem] = None
    solution: Optional[SdpSolution] = None
    exact: bool = False
    message: str = ""

    @property
    def found(self) -> bool:
        return self.status is LyapunovStatus.FOUND

    def vdot_target(self, field: VectorField) -> Polynomial:
        return -lie_derivative(self.V, field) - self.vdot_margin_poly

    def verify(self, field: VectorField, tol: float = 1e-6) -> bool:
        """Re-check the certificates (exactly when they are rational)."""
        if self.status is LyapunovStatus.INFEASIBLE:
            return self.ray is not None and verify_farkas_ray(self.problem, self.ray)
        if not self.found:
            return False
        if self.V.coefficient((0,) * self.V.nvars) != 0:
            return False
        ok_v = verify_certificate(self.V - self.margin_poly, self.cert_V, tol)
        ok_d = verify_certificate(self.vdot_target(field), self.cert_Vdot, tol)
        return ok_v and ok_d

    def to_dict(self) -> dict:
        out = {"status": self.status.value, "message": self.message, "exact": self.exact}
        if self.V is not None:
            out["V"] = self.V.to_text()
            out["certificates"] = {"V": self.cert_V.to_dict(), "Vdot": self.cert_Vdot.to_dict()}
            out["margins"] = {"V": self.margin_poly.to_text(), "Vdot": self.vdot_margin_poly.to_text()}
        if self.ray is not None:
            out["ray"] = [repr(float(v)) for v in self.ray]
        if self.solution is not None:
            out["solver"] = {"iterations": self.solution.iterations, "margin": float(self.solution.margin),
                             "residuals": {k: float(v) for k, v in sorted(self.solution.residuals.items())}}
        return out


def _field_scale(f: VectorField) -> Fraction:
    return max((c.max_abs_coefficient() for c in f.components), default=Fraction(1)) or Fraction(1)


def _gram_poly(basis: GramBasis, Q) -> Polynomial:
    mons = basis.monomials
    terms: Dict[Monomial, Fraction] = {}
    for i in range(len(mons)):
        for j in range(len(mons)):
            c = Q[i][j]
            if c:
                m = tuple(a + b for a, b in zip(mons[i], mons[j]))
                terms[m] = terms.get(m, 0) + c
    return Polynomial(basis.nvars, terms)


def _round_psd(Q: np.ndarray, D: int):
    r = [[Fraction(float(Q[i, j])).limit_denominator(D) for j in range(Q.shape[0])] for i in range(Q.shape[0])]
    for i in range(len(r)):
        for j in range(i):
            r[i][j] = r[j][i]
    return r if psd_check_exact(r).psd else None


@dataclass
class LyapunovProgram:
    """The joint SDP of a Lyapunov search, kept for re-verification."""

    sdp: SdpProblem
    z1: GramBasis
    z2: GramBasis
    scale: Fraction
    margin_poly: Polynomial
    vdot_margin_poly: Polynomial


def lyapunov_program(prob: LyapunovProblem) -> Optional[LyapunovProgram]:
    """Build the SDP for ``prob``; None when V' vanishes for every candidate.

    The field is normalised by its largest coefficient first, so the margins
    are relative to the coefficient scale.
    """
    f = prob.field
    n = f.nvars
    if not f.vanishes_at_origin():
        raise DimensionError("the vector field must vanish at the origin")
    d = prob.degree
    scale = _field_scale(f)
    fN = f.scale(1 / scale)

    if prob.homogeneous:
        z1 = GramBasis(n, tuple(monomials_up_to(n, d // 2, d // 2)))
    else:
        z1 = GramBasis(n, tuple(monomials_up_to(n, d // 2, 1)))
    zpolys = z1.polynomials()
    lie_z = [lie_derivative(z, fN) for z in zpolys]
    images = {}
    for i in range(len(z1)):
        for j in range(i, len(z1)):
            images[(i, j)] = (zpolys[i] * lie_z[j] + zpolys[j] * lie_z[i]).terms
    S = power_sum(n, d)
    eps, eps_d = prob.margin, prob.margin_deriv
    lie_S = lie_derivative(S, fN)

    support = set(lie_S.terms)
    for img in images.values():
        support.update(img)
    support.discard((0,) * n)
    if not support:
        return None
    top = max(sum(m) for m in support)
    even_top = top - top % 2
    S_d = power_sum(n, even_top) if even_top > 0 else Polynomial.zero(n)
    if prob.homogeneous:
        z2 = GramBasis(n, tuple(monomials_up_to(n, even_top // 2, even_top // 2)))
    else:
        extra = set(S_d.terms) if prob.margin_deriv else set()
        dummy = Polynomial(n, {m: 1 for m in support | extra})
        z2 = GramBasis(n, tuple(half_newton_points(dummy)))

    rhs = -(lie_S * eps) - S_d * eps_d
    prog = SosProgram(n)
    prog.add_block(len(z1), images)
    prog.add_gram(z2)
    prog.set_rhs(rhs)
    prog.add_scalar({0: {(i, i): Fraction(1) for i in range(len(z1))}}, 1)
    return LyapunovProgram(prog.compile(), z1, z2, scale, S * eps, S_d * (eps_d * scale))


def search_sos_lyapunov(prob: LyapunovProblem, opts: SolverOptions | None = None) -> LyapunovResult:
    """Look for V of the requested degree with V and -V' sums of squares.

    Margins are relative to the coefficient scale of the field (see
    :func:`lyapunov_program`); returned certificates refer to the original
    field.
    """
    f = prob.field
    lp = lyapunov_program(prob)
    if lp is None:
        return LyapunovResult(LyapunovStatus.INDETERMINATE, message="Lie derivative vanishes identically")
    sdp, z1, z2, scale = lp.sdp, lp.z1, lp.z2, lp.scale
    margin_poly, vdot_margin_poly = lp.margin_poly, lp.vdot_margin_poly
    sol = solve_sdp(sdp, opts)

    if sol.status is SdpStatus.INFEASIBLE:
        return LyapunovResult(LyapunovStatus.INFEASIBLE, ray=sol.ray, problem=sdp, solution=sol,
                              margin_poly=margin_poly, vdot_margin_poly=vdot_margin_poly,
                              message=sol.message)
    if sol.status is not SdpStatus.FEASIBLE:
        return LyapunovResult(LyapunovStatus.INDETERMINATE, problem=sdp, solution=sol, message=sol.message)

    Q1 = 0.5 * (sol.primal[0] + sol.primal[0].T)
    Q2 = 0.5 * (sol.primal[1] + sol.primal[1].T)
    # exact upgrade: round Q1 (V is defined by it), then rationalise -V'
    for D in (10**4, 10**6, 10**9):
        Q1r = _round_psd(Q1, D)
        if Q1r is None:
            continue
        V = _gram_poly(z1, Q1r) + margin_poly
        target = -lie_derivative(V, f) - vdot_margin_poly
        verdict = rationalize_certificate(target, SosCertificate(z2, Q2 * float(scale)))
        if verdict.status is SosStatus.SOS:
            return LyapunovResult(LyapunovStatus.FOUND, V, SosCertificate(z1, Q1r, True), verdict.certificate,
                                  margin_poly, vdot_margin_poly, problem=sdp, solution=sol, exact=True,
                                  message="exact certificates")
    # float fallback: V carries the exact decimal values of Q1
    Q1f = [[as_fraction(float(Q1[i, j])) for j in range(len(z1))] for i in range(len(z1))]
    V = _gram_poly(z1, Q1f) + margin_poly
    return LyapunovResult(LyapunovStatus.FOUND, V, SosCertificate(z1, Q1), SosCertificate(z2, Q2 * float(scale)),
                          margin_poly, vdot_margin_poly, problem=sdp, solution=sol, exact=False,
                          message="floating-point certificates")


def degree_sweep(field: VectorField, degrees: Sequence[int], homogeneous: bool | None = None,
                 margin=DEFAULT_MARGIN, margin_deriv=DEFAULT_MARGIN_DERIV, stop_on_found: bool = False,
                 opts: SolverOptions | None = None) -> List[Tuple[int, LyapunovResult]]:
    """One search per degree, in the given (ascending, even) order."""
    degs = list(degrees)
    if any(d <= 0 or d % 2 for d in degs):
        raise DegreeError("sweep degrees must be even and positive")
    if degs != sorted(degs):
        raise ValueError("sweep degrees must be ascending")
    if homogeneous is None:
        homogeneous = field.is_homogeneous()
    out = []
    for d in degs:
        res = search_sos_lyapunov(LyapunovProblem(field, d, homogeneous, margin, margin_deriv), opts)
        out.append((d, res))
        if stop_on_found and res.found:
            break
    return out


# converse power search -----------------------------------------------------------


class PowerStatus(Enum):
    FOUND = "FoundPower"
    NOT_FOUND = "NotFoundUpTo"
    PRECONDITION = "PreconditionFailed"


@dataclass
class PowerResult:
    status: PowerStatus
    k: Optional[int] = None
    W: Optional[Polynomial] = None
    cert_W: Optional[SosCertificate] = None
    cert_Wdot: Optional[SosCertificate] = None  # certifies the product polynomial below
    product: Optional[Polynomial] = None  # -W' / (k + 1)
    attempts: List[Tuple[int, SosVerdict]] = field(default_factory=list)
    k_max: int = 0
    message: str = ""

    def to_dict(self) -> dict:
        out = {"status": self.status.value, "k_max": self.k_max, "message": self.message,
               "attempts": [{"k": k, "status": v.status.value} for k, v in self.attempts]}
        if self.k is not None:
            out.update({"k": self.k, "W": self.W.to_text(), "certificates": {
                "W": self.cert_W.to_dict(), "Wdot": self.cert_Wdot.to_dict()}})
        return out


def _square_certificate(q: Polynomial) -> SosCertificate:
    """Exact rank-one Gram certificate for q^2."""
    basis = GramBasis(q.nvars, tuple(q.monomials()))
    c = [q.coefficient(m) for m in basis.monomials]
    return SosCertificate(basis, [[a * b for b in c] for a in c], True, squares=[q])


def grid_zeros(p: Polynomial, radius: int = 3) -> List[Tuple[int, ...]]:
    """Integer points in [-radius, radius]^n where p vanishes exactly."""
    pts = []
    for pt in itertools.product(range(-radius, radius + 1), repeat=p.nvars):
        if p.evaluate(pt) == 0:
            pts.append(pt)
    return pts


def converse_power_search(V: Polynomial, field: VectorField, k_max: int = 10, planar: bool = False,
                          zeros: Sequence[Sequence] | None = None, rationalize: bool = True,
                          max_basis: int = 100, opts: SolverOptions | None = None) -> PowerResult:
    """Smallest k <= k_max making -2 V V' V^(2k) a sum of squares.

    Then W = V^(2k+2) is an SOS Lyapunov function: W is a square and
    -W' = (k + 1) (-2 V V') V^(2k).  In planar mode V is first replaced by
    V + 1, which is nowhere zero, so the search runs on non-homogeneous
    polynomials in the two state variables.  Known zeros of V' sharpen the
    SDP (facial reduction); by default integer zeros in a small box are used.
    The dense solver is memory bound, so the search also stops (with
    NotFoundUpTo) once the Gram basis would exceed ``max_basis`` monomials.
    """
    if V.nvars != field.nvars:
        raise DimensionError("V and the field have different dimensions")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    n = V.nvars
    if planar:
        if n != 2:
            return PowerResult(PowerStatus.PRECONDITION, k_max=k_max, message="planar mode needs two variables")
        top = V.homogeneous_part(V.degree)
        if not form_is_positive_definite(top):
            return PowerResult(PowerStatus.PRECONDITION, k_max=k_max,
                               message="highest-degree component of V has real zeros")
        base = V + 1
    else:
        if not (V.is_homogeneous() and field.is_homogeneous()):
            return PowerResult(PowerStatus.PRECONDITION, k_max=k_max, message="V and the field must be homogeneous")
        if V.degree <= 0 or V.degree % 2:
            return PowerResult(PowerStatus.PRECONDITION, k_max=k_max, message="V must have even positive degree")
        probe = check_sos(V - power_sum(n, V.degree) * Fraction(1, 10**4) * V.max_abs_coefficient(), opts=opts)
        if probe.status is not SosStatus.SOS:
            return PowerResult(PowerStatus.PRECONDITION, k_max=k_max, message="V is not certified positive definite")
        base = V
    vdot = lie_derivative(V, field)
    first = -2 * base * vdot
    if zeros is None:
        zeros = grid_zeros(vdot) if planar else []
    zeros = [z for z in zeros if any(z)]
    attempts = []
    sq = base * base
    prod = first
    for k in range(k_max + 1):
        if k:
            prod = prod * sq
        if len(monomial_basis(prod)) > max_basis:
            return PowerResult(PowerStatus.NOT_FOUND, attempts=attempts, k_max=k,
                               message=f"no k < {k} succeeded; Gram basis for k = {k} exceeds {max_basis}")
        verdict = check_sos(prod, zeros=zeros, opts=opts, second_order=planar)
        attempts.append((k, verdict))
        if verdict.status is SosStatus.SOS:
            cert = verdict.certificate
            if rationalize:
                exact = rationalize_certificate(prod, cert)
                if exact.status is SosStatus.SOS:
                    cert = exact.certificate
            W = base ** (2 * k + 2)
            return PowerResult(PowerStatus.FOUND, k, W, _square_certificate(base ** (k + 1)), cert, prod,
                               attempts, k_max, "found")
    return PowerResult(PowerStatus.NOT_FOUND, attempts=attempts, k_max=k_max, message=f"no k <= {k_max} succeeded")


def square_lyapunov(V: Polynomial) -> Polynomial:
    """W = V^2.

    -W' = -2 V V' inherits positive definiteness from V and -V', but it need
    not be a sum of squares.
    """
    return V * V


def local_exp_stability(field: VectorField) -> bool:
    """Locally exponentially stable iff the exact linearisation is Hurwitz."""
    if not field.vanishes_at_origin():
        raise DimensionError("the vector field must vanish at the origin")
    return hurwitz_test(field.linear_part())


class GradientCheckStatus(Enum):
    VALID = "Valid"
    INVALID = "Invalid"
    INDETERMINATE = "Indeterminate"


@dataclass
class GradientCheck:
    status: GradientCheckStatus
    Wdot: Polynomial
    witness: Optional[Tuple[Fraction, ...]] = None
    message: str = ""


def gradient_quadratic_check(V: Polynomial, boolean_limit: int = 16) -> GradientCheck:
    """Is W = |x|^2 a Lyapunov function for x' = -grad V, V a quartic form?

    Euler's identity gives W' = <2x, -grad V> = -8 V exactly, so the answer is
    yes iff V is positive definite.  Bivariate forms are decided exactly; in
    more variables an SOS certificate of V - eps |x|^4 proves validity and a
    boolean point with V = 0 (as produced by the reductions) disproves it.
    """
    if V.degree != 4 or not V.is_homogeneous():
        raise DegreeError("gradient_quadratic_check needs a quartic form")
    n = V.nvars
    f = VectorField([-g for g in V.gradient()])
    Wdot = lie_derivative(norm_squared(n), f)
    if Wdot != V * -8:
        raise AssertionError("Euler identity W' = -8 V failed")
    if n == 2:
        if form_is_positive_definite(V):
            return GradientCheck(GradientCheckStatus.VALID, Wdot)
        w = nonpositive_point(V)
        return GradientCheck(GradientCheckStatus.INVALID, Wdot, w, "V is not positive definite")
    if n <= boolean_limit:
        for pt in itertools.product((0, 1), repeat=n):
            if any(pt) and V.evaluate(pt) <= 0:
                return GradientCheck(GradientCheckStatus.INVALID, Wdot, tuple(Fraction(v) for v in pt),
                                     "V vanishes at a nonzero boolean point")
    eps = Fraction(1, 10**4) * V.max_abs_coefficient()
    verdict = check_sos(V - power_sum(n, 4) * eps)
    if verdict.status is SosStatus.SOS:
        return GradientCheck(GradientCheckStatus.VALID, Wdot, message="V - eps |x|^4 is SOS")
    return GradientCheck(GradientCheckStatus.INDETERMINATE, Wdot, message="positivity not decided")
