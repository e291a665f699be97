"""Trajectory simulation and simple qualitative checks.

The integrator is the Runge-Kutta-Fehlberg 4(5) pair.  It propagates the
fourth-order solution and uses the fifth-order one only for the error
estimate, so a fixed-step run has global error O(h^4).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .polycore import DimensionError, Polynomial, VectorField

# Fehlberg tableau
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])

BOOLEAN_CAP = 24


@dataclass(frozen=True)
class SimConfig:
    t_end: float = math.inf
    initial_step: float = 1e-2
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_steps: int = 100_000
    blowup_radius: float = 1e6
    converge_radius: float = 1e-8
    converge_steps: int = 10
    max_step: float = math.inf
    fixed_step: bool = False  # take exactly initial_step every step (order studies)

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.blowup_radius <= 0:
            raise ValueError("blowup_radius must be positive")
        if self.initial_step <= 0 or self.max_step <= 0:
            raise ValueError("step sizes must be positive")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.max_steps < 1 or self.converge_steps < 1:
            raise ValueError("step counts must be at least one")


class Terminal(Enum):
    CONVERGED = "Converged"
    ESCAPED = "Escaped"
    MAX_STEPS = "MaxSteps"
    END_TIME = "EndTime"


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (samples, nvars)
    terminal: Terminal
    overflow: bool = False  # escape caused by NaN/inf rather than the radius
    rejected: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(self.states.shape[1])])
        for t, x in zip(self.times, self.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
        return buf.getvalue()

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _rkf_step(f, t: float, x: np.ndarray, h: float, k0: np.ndarray):
    ks = [k0]
    for i in range(1, 6):
        xi = x + h * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(xi))
    K = np.array(ks)
    x4 = x + h * (_B4 @ K)
    x5 = x + h * (_B5 @ K)
    return x4, x4 - x5


def integrate(field: VectorField, x0: Sequence[float], cfg: SimConfig | None = None) -> Trajectory:
    """Adaptive RKF45 from ``x0`` until convergence, escape, t_end or max_steps.

    Convergence means ``|x| < converge_radius`` for ``converge_steps``
    consecutive accepted steps.  Escape is ``|x| > blowup_radius`` or a
    non-finite state.
    """
    cfg = cfg or SimConfig()
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (field.nvars,):
        raise DimensionError(f"initial state has shape {x.shape}, field has {field.nvars} variables")
    f = field.compile()
    t = 0.0
    h = min(cfg.initial_step, cfg.max_step)
    times, states = [t], [x.copy()]
    small = 0
    rejected = 0

    def finish(term: Terminal, overflow: bool = False) -> Trajectory:
        return Trajectory(np.array(times), np.array(states), term, overflow, rejected)

    if not np.all(np.isfinite(x)):
        return finish(Terminal.ESCAPED, True)
    for _ in range(cfg.max_steps):
        if t >= cfg.t_end:
            return finish(Terminal.END_TIME)
        h = min(h, cfg.t_end - t)
        with np.errstate(over="ignore", invalid="ignore"):
            k0 = f(x)
            if not np.all(np.isfinite(k0)):
                return finish(Terminal.ESCAPED, True)
            while True:
                xn, err = _rkf_step(f, t, x, h, k0)
                if cfg.fixed_step:
                    break
                if not np.all(np.isfinite(xn)):
                    # an overflowing trial step is a rejected step, not an escape
                    rejected += 1
                    h *= 0.1
                    if h < 1e-14 * max(1.0, abs(t)):
                        break
                    continue
                scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x), np.abs(xn))
                enorm = float(np.sqrt(np.mean((err / scale) ** 2)))
                if enorm <= 1.0:
                    factor = 5.0 if enorm == 0 else min(5.0, 0.9 * enorm ** -0.2)
                    break
                rejected += 1
                h *= max(0.1, 0.9 * enorm ** -0.25)
                if h < 1e-14 * max(1.0, abs(t)):
                    break
        if not np.all(np.isfinite(xn)):
            return finish(Terminal.ESCAPED, True)
        t += h
        x = xn
        times.append(t)
        states.append(x.copy())
        r = float(np.linalg.norm(x))
        if r > cfg.blowup_radius:
            return finish(Terminal.ESCAPED)
        small = small + 1 if r < cfg.converge_radius else 0
        if small >= cfg.converge_steps:
            return finish(Terminal.CONVERGED)
        if not cfg.fixed_step:
            h = min(h * factor, cfg.max_step)
    return finish(Terminal.END_TIME if t >= cfg.t_end else Terminal.MAX_STEPS)


@dataclass(frozen=True)
class MonotoneCheck:
    monotone: bool
    index: Optional[int] = None  # first sample where V went up
    delta: float = 0.0


def lyapunov_monotonic(V: Polynomial, traj: Trajectory, rel_tol: float = 1e-7) -> MonotoneCheck:
    """Is V(x(t_k)) nonincreasing, up to rel_tol * (1 + |V|)?"""
    if V.nvars != traj.states.shape[1]:
        raise DimensionError("V and the trajectory have different dimensions")
    vals = V.evaluate_many(traj.states)
    for k in range(1, len(vals)):
        delta = float(vals[k] - vals[k - 1])
        if delta > rel_tol * (1.0 + abs(float(vals[k - 1]))):
            return MonotoneCheck(False, k, delta)
    return MonotoneCheck(True)


def _integer_terms(p: Polynomial) -> Tuple[List[int], List[int]]:
    den = 1
    for c in p.terms.values():
        den = den * c.denominator // math.gcd(den, c.denominator)
    masks, coefs = [], []
    for m, c in p.items():
        masks.append(sum(1 << i for i, e in enumerate(m) if e))
        coefs.append(int(c * den))
    return masks, coefs


def boolean_equilibria(field: VectorField, augmented: bool = False, chunk: int = 1 << 16) -> List[Tuple[int, ...]]:
    """All points of {0,1}^n where f vanishes exactly.

    On 0/1 points every monomial is 0 or 1, so f_i(x) is the sum of the
    coefficients whose support lies inside the set bits of x; the sums are
    done in exact integer arithmetic.  With ``augmented`` the last coordinate
    is fixed to 1 and only the first n - 1 are enumerated.  Points are listed
    with x1 as the fastest-varying coordinate.
    """
    n = field.nvars
    free = n - 1 if augmented else n
    if free > BOOLEAN_CAP:
        raise ValueError(f"boolean enumeration is capped at {BOOLEAN_CAP} variables, got {free}")
    comps = [_integer_terms(p) for p in field.components]
    big = any(abs(c) >= 2 ** 62 // max(1, len(cf)) for _, cf in comps for c in cf)
    dtype = object if big else np.int64
    fixed = (1 << (n - 1)) if augmented else 0
    out = []
    total = 1 << free
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64) | fixed
        zero = np.ones(len(idx), dtype=bool)
        for masks, coefs in comps:
            acc = np.zeros(len(idx), dtype=dtype)
            for mask, c in zip(masks, coefs):
                acc = acc + np.where((idx & mask) == mask, c, 0).astype(dtype)
            zero &= acc == 0
            if not zero.any():
                break
        for v in idx[zero]:
            out.append(tuple(int((int(v) >> i) & 1) for i in range(n)))
    return out


Halfspace = Tuple[Sequence, object]  # a . x <= b


def polytope_membership(traj: Trajectory, halfspaces: Sequence[Halfspace], tol: float = 0.0) -> Optional[int]:
    """Index of the first sample with a . x <= b for every halfspace, else None."""
    if not halfspaces:
        return 0 if len(traj.states) else None
    A = np.array([[float(v) for v in a] for a, _ in halfspaces], dtype=float)
    b = np.array([float(Fraction(bb)) for _, bb in halfspaces], dtype=float)
    if A.shape[1] != traj.states.shape[1]:
        raise DimensionError("halfspaces and trajectory have different dimensions")
    inside = np.all(traj.states @ A.T <= b + tol, axis=1)
    hits = np.flatnonzero(inside)
    return int(hits[0]) if len(hits) else None


def simulate_many(field: VectorField, starts: Sequence[Sequence[float]], cfg: SimConfig | None = None) -> List[Trajectory]:
    return [integrate(field, x0, cfg) for x0 in starts]


def random_starts(nvars: int, count: int, radius: float, seed: int = 0) -> np.ndarray:
    """Points uniform in the ball of the given radius (fixed seed)."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, nvars))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / nvars)
    return d * r[:, None]
