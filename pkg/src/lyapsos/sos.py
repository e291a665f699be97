"""Sum-of-squares programs over Gram matrices.

A polynomial ``p`` is a sum of squares iff ``p = z^T Q z`` for some PSD ``Q``
over a monomial vector ``z``.  Matching coefficients gives one linear
constraint per monomial, so the question becomes SDP feasibility.  The same
machinery drives the joint programs of the Lyapunov search: an
:class:`SosProgram` is a polynomial identity ``sum_b L_b(X_b) = rhs`` that is
linear in several PSD blocks.

Floating certificates can be upgraded to exact rational ones by rounding the
Gram matrix, projecting it exactly onto the affine constraint set and
checking definiteness with an exact LDL^T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import flint
import numpy as np
from scipy.optimize import linprog

from .linalg import Definiteness, nullspace_exact, psd_check_exact
from .polycore import DegreeError, Monomial, Polynomial, as_fraction, grlex_key, monomials_up_to
from .sdp import Constraint, SdpProblem, SdpSolution, SdpStatus, SolverOptions, solve_sdp

Image = Dict[Monomial, Fraction]


def _add(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


# bases ---------------------------------------------------------------------------


class BasisMode(Enum):
    FULL = "full"
    HOMOGENEOUS = "homogeneous"
    NEWTON = "newton"


@dataclass(frozen=True)
class GramBasis:
    nvars: int
    monomials: Tuple[Monomial, ...]

    def __post_init__(self):
        mons = tuple(tuple(int(e) for e in m) for m in self.monomials)
        if any(len(m) != self.nvars or min(m, default=0) < 0 for m in mons):
            raise ValueError("basis monomials must be exponent vectors of length nvars")
        if len(set(mons)) != len(mons):
            raise ValueError("duplicate monomials in basis")
        object.__setattr__(self, "monomials", tuple(sorted(mons, key=grlex_key)))

    def __len__(self) -> int:
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def polynomials(self) -> List[Polynomial]:
        return [Polynomial.monomial(m) for m in self.monomials]

    def vector(self, point) -> np.ndarray:
        x = np.asarray(point, dtype=float)
        return np.array([float(np.prod(x ** np.array(m))) for m in self.monomials])

    def exact_vector(self, point) -> List[Fraction]:
        pt = [as_fraction(v) for v in point]
        out = []
        for m in self.monomials:
            v = Fraction(1)
            for xi, e in zip(pt, m):
                if e:
                    v *= xi ** e
            out.append(v)
        return out

    def products(self) -> Dict[Monomial, List[Tuple[int, int]]]:
        """Monomial -> unordered pairs (i <= j) with z_i z_j equal to it."""
        out: Dict[Monomial, List[Tuple[int, int]]] = {}
        mons = self.monomials
        for i in range(len(mons)):
            for j in range(i, len(mons)):
                out.setdefault(_add(mons[i], mons[j]), []).append((i, j))
        return out


def _in_hull(points: np.ndarray, target: np.ndarray) -> bool:
    k = points.shape[0]
    A_eq = np.vstack([points.T, np.ones((1, k))])
    b_eq = np.concatenate([target, [1.0]])
    res = linprog(np.zeros(k), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * k, method="highs")
    return res.status == 0


def half_newton_points(p: Polynomial) -> List[Monomial]:
    """Lattice points m with 2m in the Newton polytope of p."""
    exps = np.array(p.monomials(), dtype=float)
    if exps.size == 0:
        return []
    lo = np.ceil(exps.min(axis=0) / 2).astype(int)
    hi = np.floor(exps.max(axis=0) / 2).astype(int)
    dmin = math.ceil(p.min_degree / 2)
    dmax = p.degree // 2
    out = []
    for m in monomials_up_to(p.nvars, dmax, dmin):
        if any(e < a or e > b for e, a, b in zip(m, lo, hi)):
            continue
        if _in_hull(exps, 2 * np.array(m, dtype=float)):
            out.append(m)
    return out


def monomial_basis(p: Polynomial, mode: BasisMode | str | None = None) -> GramBasis:
    """Gram basis for ``p``; default is homogeneous for forms, else newton."""
    if p.degree < 0:
        return GramBasis(p.nvars, ())
    if p.degree % 2:
        raise DegreeError(f"odd degree {p.degree} has no Gram basis")
    mode = _mode(p, mode)
    if mode is BasisMode.FULL:
        mons = monomials_up_to(p.nvars, p.degree // 2)
    elif mode is BasisMode.HOMOGENEOUS:
        if not p.is_homogeneous():
            raise DegreeError("homogeneous basis requested for a non-homogeneous polynomial")
        mons = monomials_up_to(p.nvars, p.degree // 2, p.degree // 2)
    else:
        mons = half_newton_points(p)
    return GramBasis(p.nvars, tuple(mons))


def _mode(p: Polynomial, mode) -> BasisMode:
    if mode is None:
        return BasisMode.HOMOGENEOUS if p.is_homogeneous() else BasisMode.NEWTON
    return BasisMode(mode) if isinstance(mode, str) else mode


def _line_coefficients(exps: Sequence[int], point: Sequence[Fraction], u: Sequence[Fraction]) -> List[Fraction]:
    """Coefficients in t of prod_l (point_l + t u_l)^exps_l."""
    out = [Fraction(1)]
    for e, a, v in zip(exps, point, u):
        for _ in range(e):
            nxt = [Fraction(0)] * (len(out) + 1)
            for k, c in enumerate(out):
                nxt[k] += c * a
                nxt[k + 1] += c * v
            out = nxt
    return out


def face_from_zeros(basis: GramBasis, zeros: Iterable[Sequence], p: Polynomial | None = None,
                    infinity: Iterable[Sequence] | None = None) -> Optional[List[List[Fraction]]]:
    """Rational N whose columns span {v : z(a)^T v = 0 for every zero a}.

    If p(a) = 0 and p = z^T Q z with Q PSD then Q z(a) = 0, so every Gram
    matrix has the form N R N^T.  Returns None when no zero cuts the basis.

    When ``p`` is given the reduction also looks at higher order, in the
    homogenisation p_h(x, w) of degree 2h.  If p_h(a + t u) vanishes to order
    m in t then so does every square s_i(a + t u) to order m / 2, which kills
    the first m / 2 Taylor coefficients of Q z_h(a + t u).  The directions u
    tried are the kernel of the Hessian of p_h at a.  Zeros at infinity
    (w = 0) come from ``infinity``, or from the coordinate axes where the
    top-degree part of p vanishes.
    """
    n = basis.nvars
    zeros = [tuple(as_fraction(v) for v in a) for a in zeros]
    rows = [basis.exact_vector(a) for a in zeros]
    if p is not None and len(basis):
        h = max(sum(m) for m in basis.monomials)
        ph = p.homogenize(2 * h)
        hexps = [tuple(m) + (h - sum(m),) for m in basis.monomials]
        points = [a + (Fraction(1),) for a in zeros]
        if infinity is None:
            infinity = [tuple(int(i == k) for i in range(n)) for k in range(n)]
        points += [tuple(as_fraction(v) for v in u) + (Fraction(0),) for u in infinity]
        hess = [[ph.diff(i).diff(j) for j in range(n + 1)] for i in range(n + 1)]
        for pt in points:
            if not any(pt) or ph.evaluate(pt) != 0:
                continue
            rows.append([_line_coefficients(e, pt, pt)[0] for e in hexps])
            H = [[hess[i][j].evaluate(pt) for j in range(n + 1)] for i in range(n + 1)]
            for u in nullspace_exact(H, n + 1):
                along = ph.substitute([Polynomial(1, {(0,): a, (1,): v}) for a, v in zip(pt, u)])
                order = along.min_degree if not along.is_zero() else 2 * h + 1
                lines = [_line_coefficients(e, pt, u) for e in hexps]
                for j in range(1, min((order + 1) // 2, h + 1)):
                    rows.append([c[j] if j < len(c) else Fraction(0) for c in lines])
    rows = [r for r in rows if any(r)]
    if not rows:
        return None
    null = nullspace_exact(rows, len(basis))
    return [[null[k][i] for k in range(len(null))] for i in range(len(basis))]


# programs ------------------------------------------------------------------------


@dataclass
class _Block:
    dim: int
    images: Dict[Tuple[int, int], Image]  # (i <= j) -> coefficient of X_ij in the identity
    face: Optional[List[List[Fraction]]] = None

    @property
    def sdp_dim(self) -> int:
        return self.dim if self.face is None else len(self.face[0]) if self.face and self.face[0] else 0


class SosProgram:
    """Polynomial identity ``sum_b L_b(X_b) = rhs`` with PSD blocks ``X_b``.

    Block ``b`` enters through images ``P_ij`` (``i <= j``): the identity holds
    ``sum_{i,j} X_ij P_ij`` with ``P`` symmetric, so a Gram block has
    ``P_ij = z_i z_j``.  Extra scalar constraints may be added directly.
    """

    def __init__(self, nvars: int):
        self.nvars = nvars
        self.blocks: List[_Block] = []
        self.rhs: Dict[Monomial, Fraction] = {}
        self.scalar: List[Tuple[Dict[int, Dict[Tuple[int, int], Fraction]], Fraction]] = []
        self.monomials: List[Monomial] = []

    def add_block(self, dim: int, images: Mapping[Tuple[int, int], Mapping[Monomial, Fraction]],
                  face=None) -> int:
        self.blocks.append(_Block(dim, {k: dict(v) for k, v in images.items()}, face))
        return len(self.blocks) - 1

    def add_gram(self, basis: GramBasis, face=None, sign: int = 1) -> int:
        one = Fraction(sign)
        images = {}
        for mono, pairs in basis.products().items():
            for ij in pairs:
                images[ij] = {mono: one}
        return self.add_block(len(basis), images, face)

    def set_rhs(self, p: Polynomial) -> None:
        self.rhs = dict(p.terms)

    def add_scalar(self, entries: Dict[int, Dict[Tuple[int, int], Fraction]], rhs) -> None:
        self.scalar.append((entries, as_fraction(rhs)))

    def support(self) -> List[Monomial]:
        mons = set(self.rhs)
        for blk in self.blocks:
            for img in blk.images.values():
                mons.update(m for m, c in img.items() if c)
        return sorted(mons, key=grlex_key)

    def compile(self) -> SdpProblem:
        self.monomials = self.support()
        index = {m: k for k, m in enumerate(self.monomials)}
        rows: List[Dict[int, Dict[Tuple[int, int], float]]] = [dict() for _ in self.monomials]
        for b, blk in enumerate(self.blocks):
            if blk.face is None:
                for ij, img in blk.images.items():
                    for m, c in img.items():
                        if c:
                            rows[index[m]].setdefault(b, {})[ij] = float(c)
            else:
                N = np.array([[float(v) for v in row] for row in blk.face])
                dense: Dict[int, np.ndarray] = {}
                for (i, j), img in blk.images.items():
                    for m, c in img.items():
                        if not c:
                            continue
                        A = dense.setdefault(index[m], np.zeros((blk.dim, blk.dim)))
                        A[i, j] += float(c)
                        if i != j:
                            A[j, i] += float(c)
                for k, A in dense.items():
                    R = N.T @ A @ N
                    ent = {(i, j): float(R[i, j]) for i in range(R.shape[0]) for j in range(i, R.shape[0])
                           if abs(R[i, j]) > 1e-14}
                    if ent:
                        rows[k][b] = ent
        cons = [Constraint(rows[k], float(self.rhs.get(m, 0))) for k, m in enumerate(self.monomials)]
        for entries, rhs in self.scalar:
            cons.append(Constraint({b: {ij: float(v) for ij, v in e.items()} for b, e in entries.items()},
                                   float(rhs)))
        return SdpProblem([blk.sdp_dim for blk in self.blocks], cons)

    def full_gram(self, b: int, X: np.ndarray) -> np.ndarray:
        """Block ``b`` in basis coordinates (undoes facial reduction)."""
        blk = self.blocks[b]
        if blk.face is None:
            return X
        N = np.array([[float(v) for v in row] for row in blk.face])
        return N @ X @ N.T


def compile_sos(p: Polynomial, basis: GramBasis) -> SdpProblem:
    """SDP feasibility problem for ``p = z^T Q z``, one constraint per monomial."""
    prog = _gram_program(p, basis)
    covered = set(basis.products())
    missing = [m for m in p.monomials() if m not in covered]
    if missing:
        raise ValueError(f"basis cannot express monomial {missing[0]} of p")
    return prog.compile()


def _gram_program(p: Polynomial, basis: GramBasis, face=None) -> SosProgram:
    if p.nvars != basis.nvars:
        raise ValueError("basis and polynomial have different numbers of variables")
    prog = SosProgram(p.nvars)
    prog.add_gram(basis, face)
    prog.set_rhs(p)
    return prog


# certificates --------------------------------------------------------------------


def _frac_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


@dataclass
class SosCertificate:
    """``p = z^T gram z`` over ``basis``; gram is a float array or rational rows."""

    basis: GramBasis
    gram: object
    exact: bool = False
    squares: Optional[List[Polynomial]] = None
    face: Optional[List[List[Fraction]]] = None

    def gram_float(self) -> np.ndarray:
        if self.exact:
            return np.array([[float(v) for v in row] for row in self.gram], dtype=float).reshape(len(self.basis), -1)
        return np.asarray(self.gram, dtype=float)

    def polynomial(self) -> Polynomial:
        """z^T gram z; exact for rational certificates."""
        n = len(self.basis)
        terms: Dict[Monomial, Fraction] = {}
        mons = self.basis.monomials
        for i in range(n):
            for j in range(n):
                c = self.gram[i][j]
                if c:
                    m = _add(mons[i], mons[j])
                    terms[m] = terms.get(m, 0) + (c if self.exact else as_fraction(float(c)))
        return Polynomial(self.basis.nvars, terms)

    def to_dict(self) -> dict:
        n = len(self.basis)
        if self.exact:
            gram = [[_frac_str(self.gram[i][j]) for j in range(n)] for i in range(n)]
        else:
            G = self.gram_float()
            gram = [[repr(float(G[i, j])) for j in range(n)] for i in range(n)]
        return {
            "nvars": self.basis.nvars,
            "basis": [list(m) for m in self.basis.monomials],
            "gram": gram,
            "exact": self.exact,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SosCertificate":
        basis = GramBasis(int(data["nvars"]), tuple(tuple(m) for m in data["basis"]))
        if data.get("exact"):
            gram = [[Fraction(v) for v in row] for row in data["gram"]]
            return cls(basis, gram, True)
        gram = np.array([[float(v) for v in row] for row in data["gram"]], dtype=float).reshape(len(basis), len(basis))
        return cls(basis, gram, False)


def polynomial_to_dict(p: Polynomial) -> dict:
    return {"nvars": p.nvars, "terms": [[list(m), _frac_str(c)] for m, c in p.items()]}


def polynomial_from_dict(data: dict) -> Polynomial:
    return Polynomial(int(data["nvars"]), {tuple(m): Fraction(c) for m, c in data["terms"]})


def verify_certificate(p: Polynomial, cert: SosCertificate, tol: float = 1e-6) -> bool:
    """Exact check for rational certificates, tolerance check for float ones."""
    if cert.basis.nvars != p.nvars:
        return False
    if len(cert.basis) == 0:
        return p.degree < 0
    if cert.exact:
        if cert.polynomial() != p:
            return False
        return psd_check_exact(cert.gram).psd
    G = cert.gram_float()
    scale = 1.0 + p.max_abs_coefficient()
    if float(np.linalg.eigvalsh(0.5 * (G + G.T))[0]) < -tol * max(1.0, float(np.abs(G).max())):
        return False
    return _coef_residual(p, cert.basis, G) <= tol * scale


def _coef_residual(p: Polynomial, basis: GramBasis, G: np.ndarray) -> float:
    acc: Dict[Monomial, float] = {m: -float(c) for m, c in p.terms.items()}
    mons = basis.monomials
    n = len(mons)
    for i in range(n):
        for j in range(n):
            if G[i, j]:
                m = _add(mons[i], mons[j])
                acc[m] = acc.get(m, 0.0) + float(G[i, j])
    return max((abs(v) for v in acc.values()), default=0.0)


@dataclass
class DualCertificate:
    """Linear functional on coefficient vectors separating p from the SOS cone.

    ``values[k]`` weighs monomial ``monomials[k]``; it is nonnegative on every
    square of a polynomial spanned by the basis (restricted to ``face`` when
    present) and negative on ``p``.
    """

    monomials: List[Monomial]
    values: np.ndarray
    basis: GramBasis
    face: Optional[List[List[Fraction]]] = None
    zeros: List[Tuple[Fraction, ...]] = field(default_factory=list)
    second_order: bool = False

    def apply(self, q: Polynomial) -> float:
        index = {m: k for k, m in enumerate(self.monomials)}
        total = 0.0
        for m, c in q.terms.items():
            k = index.get(m)
            if k is None:
                if c:
                    # monomial outside the program: functional is undefined there
                    raise ValueError(f"monomial {m} outside the certificate support")
                continue
            total += float(self.values[k]) * float(c)
        return total

    def moment_matrix(self) -> np.ndarray:
        index = {m: k for k, m in enumerate(self.monomials)}
        mons = self.basis.monomials
        n = len(mons)
        M = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                k = index.get(_add(mons[i], mons[j]))
                if k is not None:
                    M[i, j] = self.values[k]
        if self.face is not None:
            N = np.array([[float(v) for v in row] for row in self.face])
            M = N.T @ M @ N
        return M

    def to_dict(self) -> dict:
        return {"monomials": [list(m) for m in self.monomials], "values": [repr(float(v)) for v in self.values],
                "nvars": self.basis.nvars, "basis": [list(m) for m in self.basis.monomials],
                "zeros": [[_frac_str(v) for v in a] for a in self.zeros], "second_order": self.second_order}

    @classmethod
    def from_dict(cls, data: dict, p: Polynomial | None = None) -> "DualCertificate":
        """Rebuild; the face is recomputed from the stored zeros (and ``p``)."""
        basis = GramBasis(int(data["nvars"]), tuple(tuple(m) for m in data["basis"]))
        zeros = [tuple(Fraction(v) for v in a) for a in data.get("zeros", [])]
        second = bool(data.get("second_order", False))
        face = None
        if second:
            face = face_from_zeros(basis, zeros, p)
        elif zeros:
            face = face_from_zeros(basis, zeros)
        return cls([tuple(m) for m in data["monomials"]], np.array([float(v) for v in data["values"]]), basis,
                   face, zeros, second)


def verify_dual(p: Polynomial, dual: DualCertificate, tol: float = 1e-8) -> bool:
    """Check that ``dual`` separates p from the SOS cone over its basis.

    The moment matrix (restricted to the face) must be PSD up to ``tol``
    relative to its trace, the functional must be negative on p, and every
    zero used for the face must really be a zero of p.
    """
    if any(p.evaluate(a) != 0 for a in dual.zeros):
        return False
    M = dual.moment_matrix()
    if M.size == 0:
        return False
    tr = float(np.trace(M))
    if tr <= 0 or float(np.linalg.eigvalsh(0.5 * (M + M.T))[0]) < -tol * tr:
        return False
    try:
        return dual.apply(p) < 0
    except ValueError:
        return False


class SosStatus(Enum):
    SOS = "Sos"
    NOT_SOS = "NotSos"
    INDETERMINATE = "Indeterminate"


@dataclass
class SosVerdict:
    status: SosStatus
    certificate: Optional[SosCertificate] = None
    dual: Optional[DualCertificate] = None
    solution: Optional[SdpSolution] = None
    problem: Optional[SdpProblem] = None
    message: str = ""

    @property
    def is_sos(self) -> bool:
        return self.status is SosStatus.SOS

    def to_dict(self) -> dict:
        out = {"status": self.status.value, "message": self.message}
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        if self.dual is not None:
            out["dual"] = self.dual.to_dict()
        if self.solution is not None:
            out["solver"] = {"iterations": self.solution.iterations,
                             "margin": float(self.solution.margin),
                             "residuals": {k: float(v) for k, v in sorted(self.solution.residuals.items())}}
        return out


def check_sos(p: Polynomial, mode: BasisMode | str | None = None, zeros: Sequence[Sequence] = (),
              opts: SolverOptions | None = None, second_order: bool = False) -> SosVerdict:
    """Decide whether ``p`` is a sum of squares by Gram-matrix SDP feasibility.

    ``zeros`` lists known real zeros of ``p``; they restrict the Gram matrix to
    a face of the PSD cone, which keeps boundary cases numerically tractable.
    Odd degrees and supports the basis cannot reach end in a linear Farkas
    certificate (a monomial that no square can produce).  ``second_order``
    adds the Hessian-kernel reduction of :func:`face_from_zeros`, including
    zeros at infinity on the coordinate axes.
    """
    if p.degree < 0:
        return SosVerdict(SosStatus.SOS, SosCertificate(GramBasis(p.nvars, ()), np.zeros((0, 0))), message="zero polynomial")
    mode = _mode(p, mode)
    if p.degree % 2:
        # half-degree basis cannot reach the odd top part
        mons = monomials_up_to(p.nvars, p.degree // 2)
        basis = GramBasis(p.nvars, tuple(mons))
    elif mode is BasisMode.HOMOGENEOUS and not p.is_homogeneous():
        raise DegreeError("homogeneous basis requested for a non-homogeneous polynomial")
    else:
        basis = monomial_basis(p, mode)
    if len(basis) == 0:
        basis = GramBasis(p.nvars, ((0,) * p.nvars,))
    if second_order:
        face = face_from_zeros(basis, zeros, p)
    else:
        face = face_from_zeros(basis, zeros) if zeros else None
    if face is not None and not face[0]:
        return SosVerdict(SosStatus.INDETERMINATE, message="zeros leave an empty face")
    prog = _gram_program(p, basis, face)
    prob = prog.compile()
    sol = solve_sdp(prob, opts)
    if sol.status is SdpStatus.FEASIBLE:
        G = prog.full_gram(0, sol.primal[0])
        G = 0.5 * (G + G.T)
        cert = SosCertificate(basis, G, False, face=face)
        return SosVerdict(SosStatus.SOS, cert, None, sol, prob, sol.message)
    if sol.status is SdpStatus.INFEASIBLE:
        dual = DualCertificate(list(prog.monomials), np.asarray(sol.ray[: len(prog.monomials)]), basis, face,
                               [tuple(as_fraction(v) for v in a) for a in zeros], second_order)
        return SosVerdict(SosStatus.NOT_SOS, None, dual, sol, prob, sol.message)
    return SosVerdict(SosStatus.INDETERMINATE, None, None, sol, prob, sol.message)


def extract_decomposition(cert: SosCertificate, tol: float = 1e-9) -> List[Polynomial]:
    """Squares q_i with sum q_i^2 = z^T Q z, from an eigendecomposition of Q."""
    G = cert.gram_float()
    n = len(cert.basis)
    if n == 0:
        return []
    G = 0.5 * (G + G.T)
    w, U = np.linalg.eigh(G)
    scale = max(1.0, float(np.abs(w).max()))
    if w[0] < -1e-6 * scale:
        raise ValueError(f"Gram matrix is indefinite (smallest eigenvalue {w[0]:.3e})")
    out = []
    polys = cert.basis.polynomials()
    for lam, u in zip(w[::-1], U.T[::-1]):
        if lam <= tol * scale:
            continue
        c = math.sqrt(lam) * u
        k = int(np.argmax(np.abs(c)))
        if c[k] < 0:
            c = -c
        terms = {polys[i].monomials()[0]: as_fraction(float(c[i])) for i in range(n) if c[i] != 0}
        out.append(Polynomial(cert.basis.nvars, terms))
    return out


def decomposition_residual(p: Polynomial, squares: Sequence[Polynomial]) -> float:
    """max |coef(sum q_i^2 - p)| evaluated in floating point."""
    acc: Dict[Monomial, float] = {m: -float(c) for m, c in p.terms.items()}
    for q in squares:
        items = [(m, float(c)) for m, c in q.terms.items()]
        for m1, c1 in items:
            for m2, c2 in items:
                m = _add(m1, m2)
                acc[m] = acc.get(m, 0.0) + c1 * c2
    return max((abs(v) for v in acc.values()), default=0.0)


# rounding ------------------------------------------------------------------------


def _to_fmpq(v: Fraction):
    return flint.fmpq(v.numerator, v.denominator)


def _from_fmpq(v) -> Fraction:
    return Fraction(int(v.p), int(v.q))


def _classes(basis: GramBasis):
    """Monomial -> ordered index pairs (i, j) with z_i z_j equal to it."""
    out: Dict[Monomial, List[Tuple[int, int]]] = {}
    for m, pairs in basis.products().items():
        lst = out.setdefault(m, [])
        for i, j in pairs:
            lst.append((i, j))
            if i != j:
                lst.append((j, i))
    return out


def _project_plain(p: Polynomial, basis: GramBasis, Q: List[List[Fraction]]) -> Optional[List[List[Fraction]]]:
    # matching classes are disjoint, so the Frobenius projection is a per-class shift
    Q = [row[:] for row in Q]
    for m, pairs in _classes(basis).items():
        r = p.coefficient(m) - sum(Q[i][j] for i, j in pairs)
        if r:
            d = r / len(pairs)
            for i, j in pairs:
                Q[i][j] += d
    extra = [m for m in p.monomials() if m not in _classes(basis)]
    return None if extra else Q


def _face_rows(p: Polynomial, basis: GramBasis, face: List[List[Fraction]]):
    """Linear map R -> coefficients of z^T N R N^T z over upper entries of R."""
    r = len(face[0])
    pairs = [(k, l) for k in range(r) for l in range(k, r)]
    classes = _classes(basis)
    mons = sorted(classes, key=grlex_key)
    rows, rhs = [], []
    for m in mons:
        row = [Fraction(0)] * len(pairs)
        acc: Dict[Tuple[int, int], Fraction] = {}
        for i, j in classes[m]:
            Ni, Nj = face[i], face[j]
            for k in range(r):
                if not Ni[k]:
                    continue
                for l in range(r):
                    if Nj[l]:
                        key = (k, l) if k <= l else (l, k)
                        acc[key] = acc.get(key, 0) + Ni[k] * Nj[l]
        for col, kl in enumerate(pairs):
            if kl in acc:
                row[col] = acc[kl]
        rows.append(row)
        rhs.append(p.coefficient(m))
    return pairs, rows, rhs


class _FaceProjector:
    """Exact minimum-norm correction onto {R : coefficients match p}."""

    def __init__(self, p: Polynomial, basis: GramBasis, face):
        self.face = face
        self.pairs, rows, self.rhs = _face_rows(p, basis, face)
        L = flint.fmpq_mat(len(rows), len(self.pairs), [_to_fmpq(v) for row in rows for v in row])
        # independent rows via the pivots of the reduced echelon form of L^T
        E, rank = L.transpose().rref()
        piv = []
        for i in range(rank):
            for j in range(E.ncols()):
                if E[i, j] != 0:
                    piv.append(j)
                    break
        self.keep = piv
        self.L = flint.fmpq_mat(len(piv), len(self.pairs), [L[i, j] for i in piv for j in range(L.ncols())])
        self.Lfull = L
        self.b = flint.fmpq_mat(len(rows), 1, [_to_fmpq(v) for v in self.rhs])
        self.gram = self.L * self.L.transpose()

    def project(self, R: List[List[Fraction]]) -> Optional[List[Fraction]]:
        x = flint.fmpq_mat(len(self.pairs), 1, [_to_fmpq(R[k][l]) for k, l in self.pairs])
        res = self.b - self.Lfull * x
        resk = flint.fmpq_mat(len(self.keep), 1, [res[i, 0] for i in self.keep])
        try:
            w = self.gram.solve(resk)
        except ZeroDivisionError:
            return None
        x = x + self.L.transpose() * w
        if self.Lfull * x != self.b:
            return None
        return [_from_fmpq(x[i, 0]) for i in range(len(self.pairs))]


def _screened_psd(M):
    # a clearly negative float eigenvalue settles NotPSD without exact work
    F = np.array([[float(v) for v in row] for row in M], dtype=float)
    scale = max(1.0, float(np.abs(F).max()))
    if float(np.linalg.eigvalsh(F)[0]) < -1e-12 * scale:
        return None
    return psd_check_exact(M)


def _round(v: float, D: int) -> Fraction:
    return Fraction(v).limit_denominator(D)


def rationalize_certificate(p: Polynomial, cert: SosCertificate, denominator_bound: int = 10**12) -> SosVerdict:
    """Upgrade a float Gram certificate to an exact rational one.

    Entries are rounded with a shared denominator bound that doubles from 100
    up to ``denominator_bound``; each rounding is projected exactly onto the
    coefficient-matching constraints and then tested with exact LDL^T.
    Failure yields Indeterminate, never NotSos.
    """
    basis = cert.basis
    n = len(basis)
    if n == 0:
        ok = p.degree < 0
        return SosVerdict(SosStatus.SOS if ok else SosStatus.INDETERMINATE,
                          SosCertificate(basis, [], True) if ok else None)
    G = cert.gram_float()
    G = 0.5 * (G + G.T)
    face = cert.face
    projector = None
    if face is not None:
        N = np.array([[float(v) for v in row] for row in face])
        Np = np.linalg.pinv(N)
        target = Np @ G @ Np.T
        projector = _FaceProjector(p, basis, face)
    else:
        target = G
    D = 100
    last = "no rounding tried"
    while True:
        D_eff = min(D, denominator_bound)
        r = target.shape[0]
        R = [[None] * r for _ in range(r)]
        for i in range(r):
            for j in range(i, r):
                R[i][j] = R[j][i] = _round(float(target[i, j]), D_eff)
        if projector is None:
            Q = _project_plain(p, basis, R)
            if Q is None:
                return SosVerdict(SosStatus.INDETERMINATE, message="basis cannot express p")
            check = _screened_psd(Q)
        else:
            x = projector.project(R)
            if x is None:
                return SosVerdict(SosStatus.INDETERMINATE, message="projection system is inconsistent")
            Rx = [[Fraction(0)] * r for _ in range(r)]
            for (k, l), v in zip(projector.pairs, x):
                Rx[k][l] = Rx[l][k] = v
            check = _screened_psd(Rx)
            Q = _expand_face(face, Rx) if check is not None and check.psd else None
        if check is not None and check.psd:
            exact = SosCertificate(basis, Q, True, face=face)
            if exact.polynomial() == p:
                return SosVerdict(SosStatus.SOS, exact, message=f"denominator bound {D_eff}")
            last = "exact re-verification failed"
        else:
            last = f"rounded Gram not PSD at denominator bound {D_eff}"
        if D_eff >= denominator_bound:
            return SosVerdict(SosStatus.INDETERMINATE, message=last)
        D *= 2


def _expand_face(face, R):
    n, r = len(face), len(R)
    NR = [[sum((face[i][k] * R[k][l] for k in range(r) if face[i][k] and R[k][l]), Fraction(0)) for l in range(r)]
          for i in range(n)]
    return [[sum((NR[i][l] * face[j][l] for l in range(r) if NR[i][l] and face[j][l]), Fraction(0))
             for j in range(n)] for i in range(n)]
