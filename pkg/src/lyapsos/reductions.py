"""Hardness-reduction instances and the named-system gallery.

The chain is ONE-IN-THREE 3SAT -> quartic p that vanishes exactly at the
one-in-three assignments -> quartic form p_h = y^4 p(x/y) -> cubic gradient
field x' = -grad p_h.  A CNF file uses DIMACS syntax restricted to
three-literal clauses, but is read with ONE-IN-THREE semantics: a clause is
satisfied when exactly one of its literals is true, not at least one.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .polycore import DegreeError, Polynomial, VectorField, as_fraction, lie_derivative, norm_squared

BRUTE_FORCE_CAP = 24


class CnfError(ValueError):
    pass


@dataclass(frozen=True)
class CnfInstance:
    nvars: int
    clauses: Tuple[Tuple[int, int, int], ...]

    def __post_init__(self):
        if self.nvars < 1:
            raise CnfError("an instance needs at least one variable")
        if not self.clauses:
            raise CnfError("an instance needs at least one clause")
        cl = tuple(tuple(int(v) for v in c) for c in self.clauses)
        for c in cl:
            if len(c) != 3:
                raise CnfError(f"clause {c} does not have exactly three literals")
            for lit in c:
                if lit == 0 or abs(lit) > self.nvars:
                    raise CnfError(f"literal {lit} out of range 1..{self.nvars}")
        object.__setattr__(self, "clauses", cl)

    def to_dimacs(self) -> str:
        lines = ["c ONE-IN-THREE semantics: exactly one true literal per clause",
                 f"p cnf {self.nvars} {len(self.clauses)}"]
        lines += [" ".join(str(v) for v in c) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"

    def one_in_three(self, assignment: Sequence[int]) -> bool:
        for c in self.clauses:
            true = sum(1 for lit in c if (assignment[abs(lit) - 1] == 1) == (lit > 0))
            if true != 1:
                return False
        return True


def parse_cnf(text: str) -> CnfInstance:
    """Read DIMACS ``p cnf n m`` with clauses terminated by 0."""
    header = None
    clauses: List[Tuple[int, ...]] = []
    cur: List[int] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            m = re.fullmatch(r"p\s+cnf\s+(\d+)\s+(\d+)", line)
            if not m or header is not None:
                raise CnfError(f"line {no}: malformed header {line!r}")
            header = (int(m.group(1)), int(m.group(2)))
            continue
        if header is None:
            raise CnfError(f"line {no}: clause before the 'p cnf' header")
        for tok in line.split():
            try:
                v = int(tok)
            except ValueError:
                raise CnfError(f"line {no}: bad literal {tok!r}") from None
            if v == 0:
                if len(cur) != 3:
                    raise CnfError(f"line {no}: clause {tuple(cur)} does not have exactly three literals")
                clauses.append(tuple(cur))
                cur = []
            elif abs(v) > header[0]:
                raise CnfError(f"line {no}: literal {v} out of range 1..{header[0]}")
            else:
                cur.append(v)
    if header is None:
        raise CnfError("missing 'p cnf nvars nclauses' header")
    if cur:
        raise CnfError("last clause is not terminated by 0")
    nvars, ncl = header
    if len(clauses) != ncl:
        raise CnfError(f"header announces {ncl} clauses, found {len(clauses)}")
    return CnfInstance(nvars, tuple(clauses))


def read_cnf(path: str) -> CnfInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_cnf(fh.read())


def sample_instance() -> CnfInstance:
    """(x1 | ~x2 | x4) & (~x2 | ~x3 | x5) & (~x1 | x3 | ~x5) & (x1 | x3 | x4)."""
    return CnfInstance(5, ((1, -2, 4), (-2, -3, 5), (-1, 3, -5), (1, 3, 4)))


def random_instance(nvars: int, nclauses: int, rng: np.random.Generator) -> CnfInstance:
    """Random clauses over three distinct variables with random signs."""
    if nvars < 3:
        raise CnfError("random instances need at least three variables")
    clauses = []
    for _ in range(nclauses):
        vs = rng.choice(nvars, size=3, replace=False) + 1
        signs = rng.choice([-1, 1], size=3)
        clauses.append(tuple(int(v * s) for v, s in zip(vs, signs)))
    return CnfInstance(nvars, tuple(clauses))


def _literal(x: List[Polynomial], lit: int) -> Polynomial:
    v = x[abs(lit) - 1]
    return v if lit > 0 else 1 - v


def sat_to_quartic(inst: CnfInstance) -> Polynomial:
    """p = sum x_i^2 (1 - x_i)^2 + sum over clauses (l1 + l2 + l3 - 1)^2."""
    x = Polynomial.variables(inst.nvars)
    p = Polynomial.zero(inst.nvars)
    for xi in x:
        p = p + (xi * (1 - xi)) ** 2
    for c in inst.clauses:
        s = _literal(x, c[0]) + _literal(x, c[1]) + _literal(x, c[2]) - 1
        p = p + s * s
    return p


def homogenize_quartic(p: Polynomial) -> Polynomial:
    """p_h(x, y) = y^4 p(x / y); the new variable y comes last."""
    if p.degree != 4:
        raise DegreeError(f"expected a quartic, got degree {p.degree}")
    return p.homogenize(4)


def quartic_to_gradient_field(V: Polynomial) -> VectorField:
    """x' = -grad V, a homogeneous cubic field with V' = -|grad V|^2."""
    if V.degree != 4 or not V.is_homogeneous():
        raise DegreeError("expected a quartic form")
    return VectorField([-g for g in V.gradient()])


# brute force ---------------------------------------------------------------------


@dataclass(frozen=True)
class OneInThreeResult:
    satisfiable: bool
    assignment: Optional[Tuple[int, ...]] = None


def one_in_three_brute_force(inst: CnfInstance, chunk: int = 1 << 16) -> OneInThreeResult:
    """Exhaustive ONE-IN-THREE search with a deterministic witness.

    Assignments are enumerated as integers with x1 as the least significant
    bit, so the witness is the least 0/1 vector when the vectors are compared
    from x_n down to x1 (for a single clause on x1, x2, x3 this is (1, 0, 0)).
    """
    n = inst.nvars
    if n > BRUTE_FORCE_CAP:
        raise ValueError(f"brute force is capped at {BRUTE_FORCE_CAP} variables, got {n}")
    shifts = np.arange(n, dtype=np.int64)
    lits = np.array(inst.clauses, dtype=np.int64)
    var = np.abs(lits) - 1
    pos = lits > 0
    total = 1 << n
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = (idx[:, None] >> shifts[None, :]) & 1
        vals = bits[:, var]  # (assignments, clauses, 3)
        true = np.where(pos[None], vals, 1 - vals).sum(axis=2)
        ok = np.all(true == 1, axis=1)
        if ok.any():
            k = int(np.argmax(ok))
            return OneInThreeResult(True, tuple(int(b) for b in bits[k]))
    return OneInThreeResult(False, None)


# gadgets -------------------------------------------------------------------------


class GadgetKind(Enum):
    REGION_OF_ATTRACTION_BALL = "RegionOfAttractionBall"
    LOCAL_ATTRACTIVITY = "LocalAttractivity"
    STABILITY_IN_LYAPUNOV_SENSE = "StabilityInLyapunovSense"
    BOUNDEDNESS = "Boundedness"
    LOCAL_QUADRATIC_LYAPUNOV = "LocalQuadraticLyapunov"
    COLLISION_AVOIDANCE = "CollisionAvoidance"
    CONTROL = "Control"
    BALL_INVARIANCE = "BallInvariance"
    SEMIALGEBRAIC_INVARIANCE = "SemialgebraicInvariance"


_QUARTIC_KINDS = {GadgetKind.BALL_INVARIANCE, GadgetKind.SEMIALGEBRAIC_INVARIANCE}

Halfspace = Tuple[Tuple[Fraction, ...], Fraction]  # a . x <= b


@dataclass
class GadgetInstance:
    """A decision question built from a base field or quartic form.

    ``identities`` maps a name to (lhs, rhs) polynomials that hold exactly by
    construction.
    """

    kind: GadgetKind
    field: VectorField
    question: str
    control: Optional[List[List[Polynomial]]] = None
    halfspaces: Optional[List[Halfspace]] = None
    ball_radius: Optional[Fraction] = None
    sublevel: Optional[Polynomial] = None  # S = {x : sublevel(x) <= 1}
    candidate: Optional[Polynomial] = None
    identities: Dict[str, Tuple[Polynomial, Polynomial]] = field(default_factory=dict)

    def identities_hold(self) -> bool:
        return all(lhs == rhs for lhs, rhs in self.identities.values())


def _is_cubic_field(f) -> bool:
    return isinstance(f, VectorField) and f.homogeneous_degree() == 3


def collision_polytope(n: int) -> List[Halfspace]:
    """S = {x : x_i >= 0, 1 <= sum x_i <= 2} as halfspaces a . x <= b."""
    hs: List[Halfspace] = []
    for i in range(n):
        hs.append((tuple(Fraction(-1) if k == i else Fraction(0) for k in range(n)), Fraction(0)))
    hs.append((tuple(Fraction(-1) for _ in range(n)), Fraction(-1)))
    hs.append((tuple(Fraction(1) for _ in range(n)), Fraction(2)))
    return hs


def control_matrix(n: int) -> List[List[Polynomial]]:
    """g(x) = (x1 x2^2 - x1^2 x2) 1 1^T, which vanishes on {0,1}^n."""
    if n < 2:
        raise ValueError("the control gadget needs at least two variables")
    x = Polynomial.variables(n)
    entry = x[0] * x[1] ** 2 - x[0] ** 2 * x[1]
    return [[entry for _ in range(n)] for _ in range(n)]


def gadget(kind: GadgetKind | str, base) -> GadgetInstance:
    """Instance for one of the derived decision problems.

    ``base`` is the cubic gradient field f = -grad V for the stability-type
    gadgets and a quartic form p for the two invariance gadgets.
    """
    kind = GadgetKind(kind) if isinstance(kind, str) else kind
    if kind in _QUARTIC_KINDS:
        if not (isinstance(base, Polynomial) and base.degree == 4 and base.is_homogeneous()):
            raise TypeError(f"{kind.value} needs a quartic form")
        p = base
        n = p.nvars
        x = Polynomial.variables(n)
        if kind is GadgetKind.BALL_INVARIANCE:
            f = VectorField([-g for g in p.gradient()])
            W = norm_squared(n)
            return GadgetInstance(kind, f, "is the unit ball invariant?", ball_radius=Fraction(1), candidate=W,
                                  identities={"Wdot = -8p": (lie_derivative(W, f), p * -8)})
        f = VectorField([-xi for xi in x])
        return GadgetInstance(kind, f, "is {p <= 1} invariant?", sublevel=p,
                              identities={"pdot = -4p": (lie_derivative(p, f), p * -4)})
    if not _is_cubic_field(base):
        raise TypeError(f"{kind.value} needs a homogeneous cubic vector field")
    f = base
    n = f.nvars
    x = Polynomial.variables(n)
    if kind is GadgetKind.REGION_OF_ATTRACTION_BALL:
        return GadgetInstance(kind, f, "does every trajectory from the unit ball converge?", ball_radius=Fraction(1))
    if kind is GadgetKind.LOCAL_ATTRACTIVITY:
        return GadgetInstance(kind, f, "is the origin locally attractive?")
    if kind is GadgetKind.STABILITY_IN_LYAPUNOV_SENSE:
        return GadgetInstance(kind, f + VectorField([xi ** 4 for xi in x]), "is the origin stable in the sense of Lyapunov?")
    if kind is GadgetKind.BOUNDEDNESS:
        return GadgetInstance(kind, f + VectorField(list(x)), "are all trajectories bounded?")
    if kind is GadgetKind.LOCAL_QUADRATIC_LYAPUNOV:
        W = norm_squared(n)
        # for a gradient field f = -grad V, V is recovered by Euler: V = -<x, f> / 4
        V = sum((-(xi * fi) for xi, fi in zip(x, f.components)), Polynomial.zero(n)) * Fraction(1, 4)
        ids = {}
        if VectorField([-g for g in V.gradient()]) == f:
            ids["Wdot = -8V"] = (lie_derivative(W, f), V * -8)
        return GadgetInstance(kind, f, "is |x|^2 a local Lyapunov function?", candidate=W, identities=ids)
    if kind is GadgetKind.COLLISION_AVOIDANCE:
        return GadgetInstance(kind, f + VectorField([xi ** 4 for xi in x]),
                              "do trajectories near the origin avoid S?", halfspaces=collision_polytope(n))
    if kind is GadgetKind.CONTROL:
        return GadgetInstance(kind, f, "is there a stabilising control law for x' = f + g u?",
                              control=control_matrix(n))
    raise ValueError(f"unknown gadget kind {kind}")


# gallery -------------------------------------------------------------------------


@dataclass
class GalleryEntry:
    name: str
    field: VectorField
    description: str
    params: Dict[str, str] = field(default_factory=dict)

    def metadata(self) -> dict:
        return {"name": self.name, "nvars": self.field.nvars, "degree": self.field.degree,
                "homogeneous": self.field.is_homogeneous(), "description": self.description,
                "params": dict(self.params)}


def rotation_pair(theta: float, digits: int = 5) -> Tuple[Fraction, Fraction]:
    """(cos theta, sin theta) rounded to ``digits`` decimals, as rationals."""
    scale = 10 ** digits
    return Fraction(round(math.cos(theta) * scale), scale), Fraction(round(math.sin(theta) * scale), scale)


def _bacciotti_rosier(lam: Fraction) -> Tuple[Polynomial, Polynomial]:
    x, y = Polynomial.variables(2)
    r = x * x + y * y
    q = 2 * x * x + y * y
    return -2 * lam * y * r - 2 * y * q, 4 * lam * x * r + 2 * x * q


def _planar_degree7() -> VectorField:
    x1, x2 = Polynomial.variables(2)
    F = Fraction
    f1 = (F("-0.15") * x1 ** 7 + 200 * x1 ** 6 * x2 - F("10.5") * x1 ** 5 * x2 ** 2 - 807 * x1 ** 4 * x2 ** 3
          + 14 * x1 ** 3 * x2 ** 4 + 600 * x1 ** 2 * x2 ** 5 - F("3.5") * x1 * x2 ** 6 + 9 * x2 ** 7)
    f2 = (-9 * x1 ** 7 - F("3.5") * x1 ** 6 * x2 - 600 * x1 ** 5 * x2 ** 2 + 14 * x1 ** 4 * x2 ** 3
          + 807 * x1 ** 3 * x2 ** 4 - F("10.5") * x1 ** 2 * x2 ** 5 - 200 * x1 * x2 ** 6 - F("0.15") * x2 ** 7)
    return VectorField([f1, f2])


def _motzkin_cx() -> VectorField:
    x1, x2 = Polynomial.variables(2)
    f1 = (-x1 ** 3 * x2 ** 2 + 2 * x1 ** 3 * x2 - x1 ** 3 + 4 * x1 ** 2 * x2 ** 2 - 8 * x1 ** 2 * x2 + 4 * x1 ** 2
          - x1 * x2 ** 4 + 4 * x1 * x2 ** 3 - 4 * x1 + 10 * x2 ** 2)
    f2 = (-9 * x1 ** 2 * x2 + 10 * x1 ** 2 + 2 * x1 * x2 ** 3 - 8 * x1 * x2 ** 2 - 4 * x1 - x2 ** 3
          + 4 * x2 ** 2 - 4 * x2)
    return VectorField([f1, f2])


GALLERY_NAMES = ("krstic", "bacciotti-rosier", "bacciotti-rosier-rotated", "non-monotone", "planar-degree7", "motzkin-cx")


def gallery(name: str, **params) -> GalleryEntry:
    """Named systems with exact rational parameters.

    bacciotti-rosier takes ``lam`` (default 314159/100000); the rotated family
    and non-monotone take a rotation pair ``c``, ``s``.
    """
    p = {k: as_fraction(v) for k, v in params.items()}
    x, y = Polynomial.variables(2)
    if name == "krstic":
        return GalleryEntry(name, VectorField([-x + x * y, -y]), "GAS with no polynomial Lyapunov function")
    if name == "bacciotti-rosier":
        lam = p.get("lam", Fraction(314159, 100000))
        return GalleryEntry(name, VectorField(list(_bacciotti_rosier(lam))), "centre for every lambda > 0",
                            {"lam": str(lam)})
    if name == "bacciotti-rosier-rotated":
        lam = p.get("lam", Fraction(314159, 100000))
        c0, s0 = rotation_pair(0.1)
        c, s = p.get("c", c0), p.get("s", s0)
        g1, g2 = _bacciotti_rosier(lam)
        return GalleryEntry(name, VectorField([c * g1 - s * g2, s * g1 + c * g2]),
                            "rotated centre, asymptotically stable for small rotations",
                            {"lam": str(lam), "c": str(c), "s": str(s)})
    if name == "non-monotone":
        c0, s0 = rotation_pair(0.01)
        c, s = p.get("c", c0), p.get("s", s0)
        return GalleryEntry(name, VectorField([-s * x ** 3 + c * y ** 3, -c * x ** 3 - s * y ** 3]),
                            "quartic but no sextic Lyapunov function for small rotations",
                            {"c": str(c), "s": str(s)})
    if name == "planar-degree7":
        return GalleryEntry(name, _planar_degree7(), "degree-7 planar field needing a degree-8 Lyapunov function")
    if name == "motzkin-cx":
        return GalleryEntry(name, _motzkin_cx(), "V = |x|^2 / 2 has V' = -M(x1 - 1, x2 - 1), not SOS")
    raise KeyError(f"unknown gallery system {name!r}; known: {', '.join(GALLERY_NAMES)}")
