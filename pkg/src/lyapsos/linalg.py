"""Dense linear algebra: exact rational elimination, LDL^T definiteness tests,
and the Lyapunov-equation stability test for linear systems."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import flint
import numpy as np

from .polycore import as_fraction

RationalMatrix = List[List[Fraction]]


def to_rational_matrix(m) -> RationalMatrix:
    return [[as_fraction(v) for v in row] for row in m]


def rational_to_float(m: RationalMatrix) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in m], dtype=float)


def eig_min(m) -> float:
    """Smallest eigenvalue of a symmetric matrix (float)."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError("eig_min needs a nonempty square matrix")
    a = 0.5 * (a + a.T)
    return float(np.linalg.eigvalsh(a)[0])


def is_symmetric(m: Sequence[Sequence]) -> bool:
    n = len(m)
    return all(len(row) == n for row in m) and all(m[i][j] == m[j][i] for i in range(n) for j in range(i))


class Definiteness(Enum):
    PD = "PD"
    PSD = "PSD"
    NOT_PSD = "NotPSD"


@dataclass(frozen=True)
class PsdCheck:
    status: Definiteness
    pivots: Tuple[Fraction, ...]
    order: Tuple[int, ...]
    witness: Optional[Tuple[Fraction, ...]] = None

    @property
    def psd(self) -> bool:
        return self.status is not Definiteness.NOT_PSD


def quad_form(m: RationalMatrix, v: Sequence[Fraction]) -> Fraction:
    n = len(v)
    total = Fraction(0)
    for i in range(n):
        if v[i]:
            row = m[i]
            acc = Fraction(0)
            for j in range(n):
                if v[j]:
                    acc += row[j] * v[j]
            total += v[i] * acc
    return total


def _fmpq(v: Fraction):
    return flint.fmpq(v.numerator, v.denominator)


def _frac(v) -> Fraction:
    return Fraction(int(v.p), int(v.q))


def psd_check_exact(m) -> PsdCheck:
    """Exact LDL^T with symmetric (largest-diagonal) pivoting.

    Returns PD when every pivot is positive, PSD when the pivots are
    nonnegative and the matrix is singular, NotPSD with a rational vector
    ``v`` satisfying ``v^T m v < 0`` otherwise.  Arithmetic runs on flint
    rationals; results are plain Fractions.
    """
    A = to_rational_matrix(m)
    n = len(A)
    if not is_symmetric(A):
        raise ValueError("psd_check_exact needs a symmetric matrix")
    S = [[_fmpq(v) for v in row] for row in A]  # running Schur complement (full storage)
    zero = flint.fmpq(0)
    remaining = list(range(n))
    eliminated: List[Tuple[int, dict]] = []
    pivots: List[Fraction] = []
    order: List[int] = []

    def lift(w: dict) -> Tuple[Fraction, ...]:
        # fill eliminated coordinates so the cross terms with them vanish
        v = {i: flint.fmpq(c) for i, c in w.items()}
        for piv, mult in reversed(eliminated):
            acc = flint.fmpq(0)
            for j, l in mult.items():
                if j in v:
                    acc += l * v[j]
            v[piv] = -acc
        return tuple(_frac(v[i]) if i in v else Fraction(0) for i in range(n))

    while remaining:
        worst = min(remaining, key=lambda i: S[i][i])
        if S[worst][worst] < 0:
            vec = lift({worst: 1})
            return PsdCheck(Definiteness.NOT_PSD, tuple(pivots), tuple(order), vec)
        best = max(remaining, key=lambda i: S[i][i])
        if S[best][best] == 0:
            # all remaining diagonals are zero: PSD only if the block is zero
            for i in remaining:
                for j in remaining:
                    if i != j and S[i][j] != 0:
                        sgn = 1 if S[i][j] > 0 else -1
                        vec = lift({i: 1, j: -sgn})
                        return PsdCheck(Definiteness.NOT_PSD, tuple(pivots), tuple(order), vec)
            pivots.extend(Fraction(0) for _ in remaining)
            order.extend(remaining)
            return PsdCheck(Definiteness.PSD, tuple(pivots), tuple(order))
        p = best
        d = S[p][p]
        rest = [i for i in remaining if i != p]
        mult = {i: S[i][p] / d for i in rest if S[i][p] != zero}
        for i, li in mult.items():
            row = S[i]
            lid = li * d
            for j, lj in mult.items():
                row[j] -= lid * lj
        eliminated.append((p, mult))
        pivots.append(_frac(d))
        order.append(p)
        remaining = rest
    status = Definiteness.PD if all(pv > 0 for pv in pivots) else Definiteness.PSD
    return PsdCheck(status, tuple(pivots), tuple(order))


def solve_exact(A, b) -> Optional[List[Fraction]]:
    """Solve A x = b over the rationals by Gauss-Jordan elimination.

    Returns one solution (free variables set to zero) or None when the system
    is inconsistent.
    """
    M = [[as_fraction(v) for v in row] + [as_fraction(bi)] for row, bi in zip(A, b)]
    rows = len(M)
    cols = len(M[0]) - 1 if rows else 0
    pivot_cols: List[int] = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][c]
        M[r] = [v * inv for v in M[r]]
        for i in range(rows):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                Mi, Mr = M[i], M[r]
                M[i] = [a - f * bb for a, bb in zip(Mi, Mr)]
        pivot_cols.append(c)
        r += 1
        if r == rows:
            break
    for i in range(r, rows):
        if M[i][cols] != 0:
            return None
    x = [Fraction(0)] * cols
    for i, c in enumerate(pivot_cols):
        x[c] = M[i][cols]
    return x


def rank_exact(A) -> int:
    M = [[as_fraction(v) for v in row] for row in A]
    rows = len(M)
    cols = len(M[0]) if rows else 0
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        for i in range(r + 1, rows):
            if M[i][c] != 0:
                f = M[i][c] / M[r][c]
                M[i] = [a - f * bb for a, bb in zip(M[i], M[r])]
        r += 1
    return r


def nullspace_exact(A, ncols: int | None = None) -> List[List[Fraction]]:
    """Rational basis of {x : A x = 0}."""
    M = [[as_fraction(v) for v in row] for row in A]
    rows = len(M)
    cols = ncols if ncols is not None else (len(M[0]) if rows else 0)
    pivot_cols: List[int] = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][c]
        M[r] = [v * inv for v in M[r]]
        for i in range(rows):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * bb for a, bb in zip(M[i], M[r])]
        pivot_cols.append(c)
        r += 1
    free = [c for c in range(cols) if c not in pivot_cols]
    basis = []
    for fc in free:
        v = [Fraction(0)] * cols
        v[fc] = Fraction(1)
        for i, pc in enumerate(pivot_cols):
            v[pc] = -M[i][fc]
        basis.append(v)
    return basis


@dataclass(frozen=True)
class LyapunovEquationResult:
    stable: bool
    P: Optional[RationalMatrix] = None
    reason: str = ""


def lyapunov_equation(A) -> LyapunovEquationResult:
    """Decide whether A is Hurwitz by solving A^T P + P A = -I exactly.

    The symmetric unknown P contributes n(n+1)/2 unknowns; the answer is yes
    iff a solution exists and it is positive definite.
    """
    M = to_rational_matrix(A)
    n = len(M)
    if any(len(row) != n for row in M):
        raise ValueError("A must be square")
    idx = {}
    for i in range(n):
        for j in range(i, n):
            idx[(i, j)] = len(idx)

    def var(i, j):
        return idx[(i, j)] if i <= j else idx[(j, i)]

    rows, rhs = [], []
    for i in range(n):
        for j in range(i, n):
            row = [Fraction(0)] * len(idx)
            # (A^T P)_{ij} = sum_k A_{ki} P_{kj};  (P A)_{ij} = sum_k P_{ik} A_{kj}
            for k in range(n):
                if M[k][i]:
                    row[var(k, j)] += M[k][i]
                if M[k][j]:
                    row[var(i, k)] += M[k][j]
            rows.append(row)
            rhs.append(Fraction(-1) if i == j else Fraction(0))
    sol = solve_exact(rows, rhs)
    if sol is None:
        return LyapunovEquationResult(False, None, "no solution")
    P = [[sol[var(i, j)] for j in range(n)] for i in range(n)]
    check = psd_check_exact(P)
    if check.status is Definiteness.PD:
        return LyapunovEquationResult(True, P, "")
    return LyapunovEquationResult(False, P, "solution is not positive definite")


def hurwitz_test(A) -> bool:
    return lyapunov_equation(A).stable
