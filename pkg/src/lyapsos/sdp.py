"""Small dense primal-dual interior-point solver for block-diagonal SDPs.

Standard form::

    minimize    <C, X>
    subject to  <A_i, X> = b_i,   i = 1..m
                X = diag(X_1, ..., X_k) >= 0

with dual ``max b^T y  s.t.  sum_i y_i A_i + Z = C, Z >= 0``.

Feasibility problems (no objective) are decided through an auxiliary problem
that maximises the smallest eigenvalue ``-t`` of ``X`` over the affine set::

    minimize t  s.t.  <A_i, X> = b_i,  X + t I >= 0,  t >= -T

Its dual optimum is attained by a normalised Farkas ray ``z`` (``sum z_i A_i >= 0``,
``tr = 1``, ``b^T z < 0``) whenever the original problem is infeasible, so a
positive optimal ``t`` comes with a checkable certificate.  The search
direction is Nesterov-Todd with a Mehrotra predictor-corrector.

Matrices travel in ``svec`` coordinates (off-diagonals scaled by sqrt 2) so
that trace inner products become dot products.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

Entries = Dict[Tuple[int, int], float]


class SdpStatus(Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    INDETERMINATE = "Indeterminate"


@dataclass
class Constraint:
    """<A, X> = rhs with A given per block as upper-triangular entries.

    An entry ``(i, j): v`` with ``i < j`` stands for ``v`` at both (i, j) and
    (j, i) of the symmetric coefficient matrix.
    """

    blocks: Dict[int, Entries]
    rhs: float


@dataclass
class SdpProblem:
    block_dims: List[int]
    constraints: List[Constraint]
    objective: Optional[Dict[int, Entries]] = None

    def __post_init__(self):
        if not self.block_dims or any(d < 1 for d in self.block_dims):
            raise ValueError("block dimensions must be positive")
        for c in self.constraints:
            for b, ent in c.blocks.items():
                if not 0 <= b < len(self.block_dims):
                    raise ValueError(f"constraint refers to missing block {b}")
                n = self.block_dims[b]
                for (i, j) in ent:
                    if not (0 <= i < n and 0 <= j < n):
                        raise ValueError(f"entry {(i, j)} outside block {b} of size {n}")

    @property
    def m(self) -> int:
        return len(self.constraints)

    def to_dict(self) -> dict:
        def enc(ent: Entries):
            return [[int(i), int(j), float(v)] for (i, j), v in sorted(ent.items())]

        return {
            "block_dims": list(self.block_dims),
            "constraints": [
                {"blocks": {str(b): enc(e) for b, e in sorted(c.blocks.items())}, "rhs": float(c.rhs)}
                for c in self.constraints
            ],
            "objective": None if self.objective is None else {str(b): enc(e) for b, e in sorted(self.objective.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SdpProblem":
        def dec(rows):
            return {(int(i), int(j)): float(v) for i, j, v in rows}

        cons = [Constraint({int(b): dec(e) for b, e in c["blocks"].items()}, float(c["rhs"])) for c in data["constraints"]]
        obj = data.get("objective")
        return cls(list(data["block_dims"]), cons, None if obj is None else {int(b): dec(e) for b, e in obj.items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SdpProblem":
        return cls.from_dict(json.loads(text))


@dataclass
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-9
    max_iter: int = 200
    bound: float = 1.0  # T in t >= -T for feasibility problems
    step_fraction: float = 0.98


@dataclass
class SdpSolution:
    status: SdpStatus
    primal: List[np.ndarray]
    dual: np.ndarray
    dual_matrix: List[np.ndarray]
    residuals: Dict[str, float]
    iterations: int = 0
    ray: Optional[np.ndarray] = None  # Farkas ray when Infeasible
    margin: float = float("nan")  # max min-eigenvalue found (feasibility mode)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "primal": [np.asarray(x).tolist() for x in self.primal],
            "dual": np.asarray(self.dual).tolist(),
            "dual_matrix": [np.asarray(z).tolist() for z in self.dual_matrix],
            "residuals": {k: float(v) for k, v in sorted(self.residuals.items())},
            "iterations": self.iterations,
            "ray": None if self.ray is None else np.asarray(self.ray).tolist(),
            "margin": self.margin,
            "message": self.message,
        }


# svec helpers -------------------------------------------------------------------

def _svec_index(n: int):
    I, J = np.triu_indices(n)
    scale = np.where(I == J, 1.0, SQRT2)
    pos = np.zeros((n, n), dtype=int)
    pos[I, J] = np.arange(len(I))
    pos[J, I] = np.arange(len(I))
    return I, J, scale, pos


_SVEC_CACHE: Dict[int, tuple] = {}


def svec_index(n: int):
    if n not in _SVEC_CACHE:
        _SVEC_CACHE[n] = _svec_index(n)
    return _SVEC_CACHE[n]


def svec(X: np.ndarray) -> np.ndarray:
    I, J, s, _ = svec_index(X.shape[0])
    return X[I, J] * s


def smat(v: np.ndarray, n: int) -> np.ndarray:
    I, J, s, _ = svec_index(n)
    X = np.zeros((n, n))
    X[I, J] = v / s
    X[J, I] = v / s
    return X


def _entries_to_svec(ent: Entries, n: int) -> Dict[int, float]:
    _, _, _, pos = svec_index(n)
    out: Dict[int, float] = {}
    for (i, j), v in ent.items():
        k = pos[i, j]
        out[k] = out.get(k, 0.0) + (v if i == j else SQRT2 * v)
    return out


def _block_matrices(prob: SdpProblem):
    """Sparse m x t_b constraint matrices and dense objective svecs."""
    mats = []
    for b, n in enumerate(prob.block_dims):
        t = n * (n + 1) // 2
        rows, cols, vals = [], [], []
        for r, c in enumerate(prob.constraints):
            ent = c.blocks.get(b)
            if ent:
                for k, v in _entries_to_svec(ent, n).items():
                    rows.append(r)
                    cols.append(k)
                    vals.append(v)
        mats.append(sp.csr_matrix((vals, (rows, cols)), shape=(prob.m, t)))
    cvecs = []
    for b, n in enumerate(prob.block_dims):
        t = n * (n + 1) // 2
        v = np.zeros(t)
        if prob.objective and b in prob.objective:
            for k, val in _entries_to_svec(prob.objective[b], n).items():
                v[k] += val
        cvecs.append(v)
    return mats, cvecs


def _skron(W: np.ndarray) -> np.ndarray:
    """Matrix of S -> W S W in svec coordinates."""
    n = W.shape[0]
    I, J, s, _ = svec_index(n)
    WII = W[np.ix_(I, I)]
    WJJ = W[np.ix_(J, J)]
    WIJ = W[np.ix_(I, J)]
    WJI = W[np.ix_(J, I)]
    return 0.5 * np.outer(s, s) * (WII * WJJ + WIJ * WJI)


# core interior-point method ----------------------------------------------------------

@dataclass
class _IpmResult:
    X: List[np.ndarray]
    y: np.ndarray
    Z: List[np.ndarray]
    pobj: float
    dobj: float
    rp: float
    rd: float
    gap: float
    iterations: int
    converged: bool
    message: str


def _max_step(L: np.ndarray, dX: np.ndarray) -> float:
    Linv_dX = sla.solve_triangular(L, dX, lower=True)
    S = sla.solve_triangular(L, Linv_dX.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (S + S.T))[0]
    return math.inf if lam >= 0 else -1.0 / lam


def _chol(X: np.ndarray) -> Optional[np.ndarray]:
    try:
        return np.linalg.cholesky(0.5 * (X + X.T))
    except np.linalg.LinAlgError:
        return None


def _ipm(mats, b, cvecs, dims, opts: SolverOptions) -> _IpmResult:
    m = len(b)
    nb = len(dims)
    normb = 1.0 + np.linalg.norm(b)
    normC = 1.0 + math.sqrt(sum(float(c @ c) for c in cvecs))
    # initial point (SDPT3-style magnitudes)
    X, Z = [], []
    for k, n in enumerate(dims):
        A = mats[k]
        rn = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
        xi = max(10.0, math.sqrt(n), float(np.max(math.sqrt(n) * (1 + np.abs(b)) / (1 + rn))) if m else 10.0)
        eta = max(10.0, math.sqrt(n), float(rn.max()) if m else 0.0, float(np.linalg.norm(cvecs[k])))
        X.append(xi * np.eye(n))
        Z.append(eta * np.eye(n))
    y = np.zeros(m)
    total_n = sum(dims)
    message = ""
    converged = False
    it = 0

    def Aop(Xs):
        out = np.zeros(m)
        for k in range(nb):
            out += mats[k] @ svec(Xs[k])
        return out

    def ATop(v):
        return [smat(mats[k].T @ v, dims[k]) for k in range(nb)]

    best = None
    for it in range(1, opts.max_iter + 1):
        rp = b - Aop(X)
        ATy = ATop(y)
        Rd = [smat(cvecs[k], dims[k]) - ATy[k] - Z[k] for k in range(nb)]
        pobj = sum(float(cvecs[k] @ svec(X[k])) for k in range(nb))
        dobj = float(b @ y)
        mu = sum(float(np.sum(X[k] * Z[k])) for k in range(nb)) / total_n
        rel_p = np.linalg.norm(rp) / normb
        rel_d = math.sqrt(sum(float(np.sum(R * R)) for R in Rd)) / normC
        rel_gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        cmp = sum(float(np.sum(X[k] * Z[k])) for k in range(nb)) / (1 + abs(pobj) + abs(dobj))
        best = (X, y, Z, pobj, dobj, rel_p, rel_d, max(rel_gap, cmp))
        if rel_p <= opts.feas_tol and rel_d <= opts.feas_tol and max(rel_gap, cmp) <= opts.gap_tol:
            converged = True
            break
        # NT scaling per block
        Gs, Ds, Ws, Ls = [], [], [], []
        ok = True
        for k in range(nb):
            L = _chol(X[k])
            if L is None:
                ok = False
                break
            T = L.T @ Z[k] @ L
            ev, U = np.linalg.eigh(0.5 * (T + T.T))
            if ev[0] <= 0:
                ok = False
                break
            s = np.sqrt(ev)
            G = L @ U / np.sqrt(s)[None, :]
            Gs.append(G)
            Ds.append(s)
            Ws.append(G @ G.T)
            Ls.append(L)
        if not ok:
            message = "lost positive definiteness of iterates"
            break
        Mschur = np.zeros((m, m))
        for k in range(nb):
            if mats[k].nnz == 0:
                continue
            K = _skron(Ws[k])
            AK = mats[k] @ K
            Mschur += np.asarray(mats[k] @ AK.T)
        Mschur = 0.5 * (Mschur + Mschur.T)
        try:
            cf = sla.cho_factor(Mschur, lower=True)

            def msolve(r):
                return sla.cho_solve(cf, r)
        except (np.linalg.LinAlgError, ValueError):
            reg = 1e-14 * max(1.0, float(np.max(np.abs(np.diag(Mschur)))))
            try:
                cf = sla.cho_factor(Mschur + reg * np.eye(m), lower=True)

                def msolve(r):
                    return sla.cho_solve(cf, r)
            except (np.linalg.LinAlgError, ValueError):
                pinv = np.linalg.pinv(Mschur, rcond=1e-15)

                def msolve(r):
                    return pinv @ r

        def direction(sigma_mu, corr):
            Rhat = []
            for k in range(nb):
                s = Ds[k]
                Rt = -2.0 * np.diag(s * s)
                Rt[np.diag_indices_from(Rt)] += 2.0 * sigma_mu
                if corr is not None:
                    Rt -= corr[k]
                Rhat.append(Rt / (s[:, None] + s[None, :]))
            GRG = [Gs[k] @ Rhat[k] @ Gs[k].T for k in range(nb)]
            WRW = [Ws[k] @ Rd[k] @ Ws[k] for k in range(nb)]
            rhs = rp - Aop(GRG) + Aop(WRW)
            dy = msolve(rhs)
            ATdy = ATop(dy)
            dZ = [Rd[k] - ATdy[k] for k in range(nb)]
            dX = [GRG[k] - Ws[k] @ dZ[k] @ Ws[k] for k in range(nb)]
            dX = [0.5 * (D + D.T) for D in dX]
            dZ = [0.5 * (D + D.T) for D in dZ]
            return dX, dy, dZ

        def steps(dX, dZ):
            ap, ad = math.inf, math.inf
            for k in range(nb):
                ap = min(ap, _max_step(Ls[k], dX[k]))
                LZ = _chol(Z[k])
                if LZ is None:
                    return 0.0, 0.0
                ad = min(ad, _max_step(LZ, dZ[k]))
            return ap, ad

        dXa, dya, dZa = direction(0.0, None)
        apa, ada = steps(dXa, dZa)
        apa, ada = min(1.0, apa), min(1.0, ada)
        mu_aff = sum(float(np.sum((X[k] + apa * dXa[k]) * (Z[k] + ada * dZa[k]))) for k in range(nb)) / total_n
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        corr = []
        for k in range(nb):
            Gi = np.linalg.inv(Gs[k])
            dXt = Gi @ dXa[k] @ Gi.T
            dZt = Gs[k].T @ dZa[k] @ Gs[k]
            corr.append(dXt @ dZt + dZt @ dXt)
        dX, dy, dZ = direction(sigma * mu, corr)
        ap, ad = steps(dX, dZ)
        gamma = opts.step_fraction
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        if ap < 1e-12 and ad < 1e-12:
            message = "step length collapsed"
            break
        X = [X[k] + ap * dX[k] for k in range(nb)]
        y = y + ad * dy
        Z = [Z[k] + ad * dZ[k] for k in range(nb)]
    else:
        message = "iteration limit reached"
    X, y, Z, pobj, dobj, rel_p, rel_d, rel_gap = best
    return _IpmResult(X, y, Z, pobj, dobj, rel_p, rel_d, rel_gap, it, converged, message)


# public API ----------------------------------------------------------------------------

def _independent_rows(mats, b, tol=1e-10):
    """Indices of a maximal independent subset of constraint rows, or an
    inconsistency certificate when a dependent row contradicts the others."""
    A = sp.hstack(mats).toarray() if mats else np.zeros((len(b), 0))
    m = A.shape[0]
    if m == 0:
        return [], None
    Q, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if len(diag) and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > tol * scale))
    keep = sorted(piv[:rank].tolist())
    if rank == m:
        return keep, None
    # consistency: b must lie in the row space image
    Ak = A[keep]
    coeffs, *_ = np.linalg.lstsq(Ak.T, A.T, rcond=None)  # A^T = Ak^T coeffs
    resid = b - coeffs.T @ b[keep]
    bad = np.abs(resid) > 1e-9 * (1 + np.abs(b))
    if np.any(bad):
        i = int(np.argmax(np.abs(resid)))
        z = np.zeros(m)
        z[i] = 1.0
        z[keep] -= coeffs[:, i]
        # sum z_j A_j = 0 and b^T z = resid_i; orient so that b^T z < 0
        if b @ z > 0:
            z = -z
        return keep, z
    return keep, None


def solve_sdp(prob: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve an SDP; deterministic for fixed input and options.

    Without an objective this is a feasibility problem: the returned primal is
    the feasible point of largest minimum eigenvalue (capped at ``opts.bound``),
    and an Infeasible verdict carries a normalised Farkas ray ``z`` with
    ``sum z_i A_i >= -feas_tol I`` and ``b^T z < 0``.
    """
    opts = opts or SolverOptions()
    if prob.m == 0:
        raise ValueError("solve_sdp needs at least one constraint")
    dims = list(prob.block_dims)
    mats, cvecs = _block_matrices(prob)
    b = np.array([c.rhs for c in prob.constraints], dtype=float)
    m = len(b)

    # row scaling
    rn = np.sqrt(np.asarray(sp.hstack(mats).multiply(sp.hstack(mats)).sum(axis=1)).ravel())
    zero_rows = rn == 0
    if np.any(zero_rows & (np.abs(b) > 0)):
        i = int(np.argmax(zero_rows & (np.abs(b) > 0)))
        z = np.zeros(m)
        z[i] = -np.sign(b[i])
        return _infeasible_linear(prob, dims, z, "constraint 0 = b_i with b_i != 0")
    rn[zero_rows] = 1.0
    Dr = 1.0 / rn
    mats_s = [sp.diags(Dr) @ A for A in mats]
    b_s = b * Dr

    keep, zbad = _independent_rows(mats_s, b_s)
    if zbad is not None:
        return _infeasible_linear(prob, dims, zbad * Dr, "inconsistent linear constraints")
    keep_arr = np.array(keep, dtype=int)
    mats_k = [A[keep_arr] for A in mats_s]
    b_k = b_s[keep_arr]

    if prob.objective is None:
        return _feasibility(prob, dims, mats, b, mats_k, b_k, keep_arr, Dr, opts)
    feas = _feasibility(prob, dims, mats, b, mats_k, b_k, keep_arr, Dr, opts)
    if feas.status is not SdpStatus.FEASIBLE:
        return feas
    res = _ipm(mats_k, b_k, cvecs, dims, opts)
    y = np.zeros(m)
    y[keep_arr] = res.y
    y = y * Dr
    status = SdpStatus.FEASIBLE if res.converged else SdpStatus.INDETERMINATE
    resid = _residuals(mats, b, res.X)
    return SdpSolution(status, res.X, y, res.Z,
                       {"primal": resid, "dual": res.rd, "gap": res.gap, "pobj": res.pobj, "dobj": res.dobj},
                       res.iterations, None, feas.margin, res.message)


def _residuals(mats, b, X) -> float:
    r = b.copy()
    for k, A in enumerate(mats):
        r -= A @ svec(X[k])
    return float(np.linalg.norm(r, np.inf))


def _polish(mats, b, dims, Xs):
    # min-norm correction back onto the affine set; harmless when the margin dwarfs it
    A = sp.hstack(mats).toarray()
    x = np.concatenate([svec(X) for X in Xs])
    dx, *_ = np.linalg.lstsq(A, b - A @ x, rcond=None)
    x = x + dx
    out, k0 = [], 0
    for n in dims:
        size = n * (n + 1) // 2
        out.append(smat(x[k0:k0 + size], n))
        k0 += size
    return out


def _ray_matrix(mats, dims, z) -> List[np.ndarray]:
    return [smat(mats[k].T @ z, dims[k]) for k in range(len(dims))]


def _infeasible_linear(prob, dims, z, message) -> SdpSolution:
    return SdpSolution(SdpStatus.INFEASIBLE, [np.zeros((n, n)) for n in dims], -z,
                       [np.zeros((n, n)) for n in dims], {"primal": float("inf"), "dual": 0.0, "gap": 0.0},
                       0, z, float("nan"), message)


def _feasibility(prob, dims, mats, b, mats_k, b_k, keep_arr, Dr, opts) -> SdpSolution:
    T = opts.bound
    m = len(b_k)
    # column for the scalar s = t + T >= 0 (an extra 1x1 block)
    trace_coef = np.zeros(m)
    for k, n in enumerate(dims):
        I, J, s, _ = svec_index(n)
        ident = np.where(I == J, 1.0, 0.0)
        trace_coef += mats_k[k] @ ident
    aug_mats = list(mats_k) + [sp.csr_matrix(-trace_coef.reshape(-1, 1))]
    aug_b = b_k - T * trace_coef
    aug_c = [np.zeros(n * (n + 1) // 2) for n in dims] + [np.array([1.0])]
    res = _ipm(aug_mats, aug_b, aug_c, dims + [1], opts)
    s_val = float(res.X[-1][0, 0])
    t_val = s_val - T
    Xs = [res.X[k] - t_val * np.eye(n) for k, n in enumerate(dims)]
    Xs = [0.5 * (X + X.T) for X in Xs]
    scale_b = 1.0 + float(np.max(np.abs(b)))
    if _residuals(mats, b, Xs) > opts.feas_tol * scale_b and -t_val > 0:
        Xs = _polish(mats, b, dims, Xs)
    mineig = min(float(np.linalg.eigvalsh(X)[0]) for X in Xs)
    resid = _residuals(mats, b, Xs)
    y_full = np.zeros(len(b))
    y_full[keep_arr] = res.y
    y_full = y_full * Dr
    residuals = {"primal": resid, "dual": res.rd, "gap": res.gap, "pobj": res.pobj, "dobj": res.dobj,
                 "min_eig": mineig}
    Zs = res.Z[:-1]
    if mineig >= -opts.feas_tol and resid <= opts.feas_tol * scale_b and (res.converged or -t_val > 10 * opts.feas_tol):
        return SdpSolution(SdpStatus.FEASIBLE, Xs, y_full, Zs, residuals, res.iterations, None, -t_val, res.message)
    # Farkas ray from the dual: z = -y, normalised to trace one
    z = -y_full
    S = _ray_matrix(mats, dims, z)
    tr = sum(float(np.trace(Sk)) for Sk in S)
    if tr > 0:
        z = z / tr
        S = [Sk / tr for Sk in S]
        ray_min = min(float(np.linalg.eigvalsh(Sk)[0]) for Sk in S)
        bz = float(b @ z)
        residuals.update({"ray_min_eig": ray_min, "ray_bz": bz})
        if ray_min >= -opts.feas_tol and bz < -10 * opts.feas_tol:
            return SdpSolution(SdpStatus.INFEASIBLE, Xs, y_full, Zs, residuals, res.iterations, z, -t_val,
                               res.message or "certified infeasible")
    msg = res.message or "no verdict at requested tolerances"
    return SdpSolution(SdpStatus.INDETERMINATE, Xs, y_full, Zs, residuals, res.iterations, None, -t_val, msg)


def verify_farkas_ray(prob: SdpProblem, z: np.ndarray, tol: float = 1e-8) -> bool:
    """Check sum z_i A_i >= -tol I on every block and b^T z < 0."""
    dims = list(prob.block_dims)
    mats, _ = _block_matrices(prob)
    b = np.array([c.rhs for c in prob.constraints], dtype=float)
    z = np.asarray(z, dtype=float)
    S = _ray_matrix(mats, dims, z)
    tr = sum(float(np.trace(Sk)) for Sk in S)
    scale = tr if tr > 0 else 1.0
    ok_psd = all(float(np.linalg.eigvalsh(Sk)[0]) >= -tol * scale for Sk in S)
    return ok_psd and float(b @ z) < 0


def constraint_residual(prob: SdpProblem, X: Sequence[np.ndarray]) -> float:
    mats, _ = _block_matrices(prob)
    b = np.array([c.rhs for c in prob.constraints], dtype=float)
    return _residuals(mats, b, list(X))
