"""Exact multivariate polynomials over the rationals.

Polynomials are immutable maps from exponent tuples to nonzero
:class:`fractions.Fraction` coefficients.  Every polynomial carries its ambient
variable count ``nvars``; mixing polynomials of different ambient dimension is
an error rather than an implicit embedding.

Monomials are plain tuples of nonnegative ints.  The global monomial order is
graded lexicographic (total degree first, then lexicographic on the exponent
vector), see :func:`grlex_key`.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple, Union

import numpy as np

Monomial = Tuple[int, ...]
Scalar = Union[int, Fraction]


class DimensionError(ValueError):
    """Operands live in different ambient dimensions."""


class DegreeError(ValueError):
    """An operation received a polynomial of the wrong degree or shape."""


def grlex_key(m: Monomial) -> Tuple[int, Monomial]:
    return (sum(m), m)


def as_fraction(value) -> Fraction:
    """Convert ints, Fractions, decimal strings and floats to an exact Fraction.

    Floats are converted through their shortest decimal repr, so ``0.15`` becomes
    ``3/20`` rather than the binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def monomials_of_degree(nvars: int, degree: int) -> List[Monomial]:
    """All exponent vectors of exact total degree, in grlex order."""
    if degree < 0:
        return []
    out: List[Monomial] = []

    def rec(prefix: List[int], left: int, k: int) -> None:
        if k == nvars - 1:
            out.append(tuple(prefix + [left]))
            return
        for e in range(left + 1):
            rec(prefix + [e], left - e, k + 1)

    if nvars == 0:
        return [()] if degree == 0 else []
    rec([], degree, 0)
    return sorted(out, key=grlex_key)


def monomials_up_to(nvars: int, degree: int, min_degree: int = 0) -> List[Monomial]:
    out: List[Monomial] = []
    for d in range(max(min_degree, 0), degree + 1):
        out.extend(monomials_of_degree(nvars, d))
    return out


def _add_monomials(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


class Polynomial:
    """Immutable polynomial with exact rational coefficients."""

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Monomial, Scalar] | Iterable = ()):
        if nvars < 1:
            raise DimensionError("a polynomial needs at least one variable")
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean: Dict[Monomial, Fraction] = {}
        for mono, coef in items:
            mono = tuple(int(e) for e in mono)
            if len(mono) != nvars:
                raise DimensionError(f"monomial {mono} does not have {nvars} exponents")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in {mono}")
            c = as_fraction(coef)
            if c:
                c = clean.get(mono, Fraction(0)) + c
                if c:
                    clean[mono] = c
                else:
                    clean.pop(mono, None)
        self.nvars = nvars
        self._terms = clean
        self._hash = None

    # construction helpers -------------------------------------------------

    @classmethod
    def _raw(cls, nvars: int, terms: Dict[Monomial, Fraction]) -> "Polynomial":
        obj = cls.__new__(cls)
        obj.nvars = nvars
        obj._terms = terms
        obj._hash = None
        return obj

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls._raw(nvars, {})

    @classmethod
    def constant(cls, nvars: int, value: Scalar) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Polynomial":
        """The coordinate polynomial x_{index+1} (0-based index)."""
        if not 0 <= index < nvars:
            raise DimensionError(f"variable index {index} out of range for {nvars} variables")
        mono = tuple(1 if i == index else 0 for i in range(nvars))
        return cls._raw(nvars, {mono: Fraction(1)})

    @classmethod
    def variables(cls, nvars: int) -> List["Polynomial"]:
        return [cls.variable(nvars, i) for i in range(nvars)]

    @classmethod
    def monomial(cls, mono: Sequence[int], coef: Scalar = 1) -> "Polynomial":
        return cls(len(mono), {tuple(mono): coef})

    # basic queries ----------------------------------------------------------

    @property
    def terms(self) -> Dict[Monomial, Fraction]:
        return dict(self._terms)

    def items(self) -> Iterator[Tuple[Monomial, Fraction]]:
        for mono in sorted(self._terms, key=grlex_key):
            yield mono, self._terms[mono]

    def monomials(self) -> List[Monomial]:
        return sorted(self._terms, key=grlex_key)

    def coefficient(self, mono: Sequence[int]) -> Fraction:
        return self._terms.get(tuple(mono), Fraction(0))

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        if not self._terms:
            return -1
        return max(sum(m) for m in self._terms)

    @property
    def min_degree(self) -> int:
        if not self._terms:
            return -1
        return min(sum(m) for m in self._terms)

    def is_homogeneous(self) -> bool:
        degs = {sum(m) for m in self._terms}
        return len(degs) <= 1

    def homogeneous_part(self, degree: int) -> "Polynomial":
        return Polynomial._raw(self.nvars, {m: c for m, c in self._terms.items() if sum(m) == degree})

    def max_abs_coefficient(self) -> Fraction:
        return max((abs(c) for c in self._terms.values()), default=Fraction(0))

    # arithmetic -------------------------------------------------------------

    def _check(self, other: "Polynomial") -> None:
        if self.nvars != other.nvars:
            raise DimensionError(f"dimension mismatch: {self.nvars} vs {other.nvars} variables")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction, Rational)):
            return Polynomial.constant(self.nvars, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            v = out.get(m)
            if v is None:
                out[m] = c
            else:
                v = v + c
                if v:
                    out[m] = v
                else:
                    del out[m]
        return Polynomial._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Rational)) and not isinstance(other, bool):
            c = Fraction(other)
            if not c:
                return Polynomial.zero(self.nvars)
            return Polynomial._raw(self.nvars, {m: v * c for m, v in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: Dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _add_monomials(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Polynomial._raw(self.nvars, {m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction, Rational)):
            return self * (Fraction(1) / Fraction(other))
        return NotImplemented

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers are supported")
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    # calculus ---------------------------------------------------------------

    def diff(self, index: int) -> "Polynomial":
        """Exact partial derivative with respect to x_{index+1}."""
        if not 0 <= index < self.nvars:
            raise DimensionError(f"variable index {index} out of range")
        out: Dict[Monomial, Fraction] = {}
        for m, c in self._terms.items():
            e = m[index]
            if e:
                mm = m[:index] + (e - 1,) + m[index + 1:]
                out[mm] = c * e
        return Polynomial._raw(self.nvars, out)

    def gradient(self) -> List["Polynomial"]:
        return [self.diff(i) for i in range(self.nvars)]

    # evaluation -------------------------------------------------------------

    def __call__(self, *point):
        if len(point) == 1 and isinstance(point[0], (list, tuple, np.ndarray)):
            point = tuple(point[0])
        return self.evaluate(point)

    def evaluate(self, point: Sequence):
        """Evaluate at a point.

        Exact (a Fraction) when every coordinate is an int or Fraction; floating
        point otherwise.
        """
        if len(point) != self.nvars:
            raise DimensionError(f"point has {len(point)} coordinates, polynomial has {self.nvars} variables")
        exact = all(isinstance(v, (int, Fraction)) for v in point)
        if exact:
            pt = [Fraction(v) for v in point]
            total = Fraction(0)
            for m, c in self._terms.items():
                term = c
                for v, e in zip(pt, m):
                    if e:
                        term *= v ** e
                total += term
            return total
        x = np.asarray(point, dtype=float)
        total = 0.0
        for m, c in self._terms.items():
            total += float(c) * float(np.prod(x ** np.asarray(m)))
        return total

    def to_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Exponent matrix (terms x nvars) and float coefficient vector."""
        monos = self.monomials()
        if not monos:
            return np.zeros((0, self.nvars), dtype=int), np.zeros(0)
        exps = np.array(monos, dtype=int)
        coefs = np.array([float(self._terms[m]) for m in monos])
        return exps, coefs

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorised float evaluation at an array of points (k x nvars)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        exps, coefs = self.to_arrays()
        if not len(coefs):
            return np.zeros(pts.shape[0])
        powers = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)
        return powers @ coefs

    # composition ------------------------------------------------------------

    def substitute(self, mapping: Sequence["Polynomial"]) -> "Polynomial":
        """Exact composition p(map_1(x), ..., map_n(x))."""
        if len(mapping) != self.nvars:
            raise DimensionError(f"substitution needs {self.nvars} polynomials, got {len(mapping)}")
        if not mapping:
            raise DimensionError("empty substitution")
        target = mapping[0].nvars
        if any(q.nvars != target for q in mapping):
            raise DimensionError("substitution polynomials must share one ambient dimension")
        powers: List[Dict[int, Polynomial]] = [{0: Polynomial.constant(target, 1)} for _ in mapping]

        def power(i: int, e: int) -> Polynomial:
            cache = powers[i]
            if e not in cache:
                k = max(k for k in cache if k < e)
                val = cache[k]
                for j in range(k + 1, e + 1):
                    val = val * mapping[i]
                    cache[j] = val
            return cache[e]

        result = Polynomial.zero(target)
        for m, c in self._terms.items():
            term = Polynomial.constant(target, c)
            for i, e in enumerate(m):
                if e:
                    term = term * power(i, e)
            result = result + term
        return result

    def homogenize(self, target_degree: int | None = None) -> "Polynomial":
        """Return y^D p(x/y) over nvars+1 variables (y is the last variable)."""
        d = self.degree if target_degree is None else target_degree
        if d < self.degree:
            raise DegreeError(f"target degree {d} below degree {self.degree}")
        out = {m + (d - sum(m),): c for m, c in self._terms.items()}
        return Polynomial._raw(self.nvars + 1, out)

    def dehomogenize(self, index: int | None = None) -> "Polynomial":
        """Set one variable (default: the last) to 1, dropping it."""
        if self.nvars < 2:
            raise DimensionError("cannot dehomogenize a univariate polynomial")
        idx = self.nvars - 1 if index is None else index
        out: Dict[Monomial, Fraction] = {}
        for m, c in self._terms.items():
            mm = m[:idx] + m[idx + 1:]
            out[mm] = out.get(mm, 0) + c
        return Polynomial(self.nvars - 1, out)

    def set_variable(self, index: int, value: Scalar) -> "Polynomial":
        """Fix x_{index+1} to a constant; the ambient dimension is kept."""
        v = Fraction(value)
        out: Dict[Monomial, Fraction] = {}
        for m, c in self._terms.items():
            mm = m[:index] + (0,) + m[index + 1:]
            out[mm] = out.get(mm, 0) + c * v ** m[index]
        return Polynomial(self.nvars, out)

    # text -------------------------------------------------------------------

    def to_text(self, names: Sequence[str] | None = None) -> str:
        """Canonical ASCII form, highest grlex term first."""
        if names is None:
            names = [f"x{i + 1}" for i in range(self.nvars)]
        if not self._terms:
            return "0"
        parts: List[str] = []
        for m in sorted(self._terms, key=grlex_key, reverse=True):
            c = self._terms[m]
            factors = []
            for name, e in zip(names, m):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            mag = abs(c)
            sign = "-" if c < 0 else "+"
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = f"{mag}*" + "*".join(factors)
            parts.append(f"{sign} {body}")
        text = " ".join(parts)
        return text[2:] if text.startswith("+ ") else "-" + text[2:]

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"Polynomial({self.nvars}, {self.to_text()!r})"


class VectorField:
    """The right-hand side f of x' = f(x): nvars polynomials in nvars variables."""

    __slots__ = ("nvars", "components", "_compiled")

    def __init__(self, components: Sequence[Polynomial]):
        comps = tuple(components)
        if not comps:
            raise DimensionError("a vector field needs at least one component")
        n = len(comps)
        for i, c in enumerate(comps):
            if c.nvars != n:
                raise DimensionError(f"component {i + 1} has {c.nvars} variables, expected {n}")
        self.nvars = n
        self.components = comps
        self._compiled = None

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i: int) -> Polynomial:
        return self.components[i]

    def __len__(self) -> int:
        return self.nvars

    def __eq__(self, other) -> bool:
        return isinstance(other, VectorField) and self.components == other.components

    def __hash__(self) -> int:
        return hash(self.components)

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.components)

    def homogeneous_degree(self) -> int | None:
        """Common degree if every nonzero component is homogeneous of it, else None."""
        degs = set()
        for c in self.components:
            if c.is_zero():
                continue
            if not c.is_homogeneous():
                return None
            degs.add(c.degree)
        if len(degs) > 1:
            return None
        return degs.pop() if degs else None

    def is_homogeneous(self) -> bool:
        return self.homogeneous_degree() is not None

    def scale(self, factor: Scalar) -> "VectorField":
        return VectorField([c * Fraction(factor) for c in self.components])

    def __add__(self, other: "VectorField") -> "VectorField":
        if other.nvars != self.nvars:
            raise DimensionError("vector fields of different dimension")
        return VectorField([a + b for a, b in zip(self.components, other.components)])

    def evaluate(self, point: Sequence) -> list:
        return [c.evaluate(point) for c in self.components]

    def vanishes_at_origin(self) -> bool:
        origin = (0,) * self.nvars
        return all(c.coefficient(origin) == 0 for c in self.components)

    def linear_part(self) -> List[List[Fraction]]:
        """Jacobian at the origin, exactly."""
        n = self.nvars
        rows = []
        for c in self.components:
            row = []
            for j in range(n):
                mono = tuple(1 if k == j else 0 for k in range(n))
                row.append(c.coefficient(mono))
            rows.append(row)
        return rows

    def compile(self):
        """Return a fast float callable x -> f(x) (numpy array in, array out)."""
        if self._compiled is None:
            monos = sorted({m for c in self.components for m in c._terms}, key=grlex_key)
            exps = np.array(monos, dtype=float).reshape(len(monos), self.nvars)
            coefs = np.zeros((self.nvars, len(monos)))
            index = {m: k for k, m in enumerate(monos)}
            for i, c in enumerate(self.components):
                for m, v in c._terms.items():
                    coefs[i, index[m]] = float(v)
            nz = exps > 0

            def f(x):
                x = np.asarray(x, dtype=float)
                with np.errstate(over="ignore", invalid="ignore"):
                    powers = np.where(nz, x[None, :] ** exps, 1.0).prod(axis=1)
                    return coefs @ powers

            self._compiled = f
        return self._compiled

    def to_text(self, names: Sequence[str] | None = None) -> str:
        if names is None:
            names = [f"x{i + 1}" for i in range(self.nvars)]
        return "\n".join(f"d{n} = {c.to_text(names)}" for n, c in zip(names, self.components))

    def __repr__(self) -> str:
        return f"VectorField({[c.to_text() for c in self.components]})"


# free-function API ------------------------------------------------------------

def arithmetic(a: Polynomial, b: Polynomial, op: str) -> Polynomial:
    if a.nvars != b.nvars:
        raise DimensionError(f"dimension mismatch: {a.nvars} vs {b.nvars} variables")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown operation {op!r}")


def gradient(p: Polynomial) -> List[Polynomial]:
    return p.gradient()


def lie_derivative(V: Polynomial, f: VectorField) -> Polynomial:
    """<grad V, f>, exactly."""
    if V.nvars != f.nvars:
        raise DimensionError(f"V has {V.nvars} variables but the field has {f.nvars}")
    total = Polynomial.zero(V.nvars)
    for dv, fi in zip(V.gradient(), f.components):
        if not dv.is_zero() and not fi.is_zero():
            total = total + dv * fi
    return total


def homogenize(p: Polynomial, target_degree: int) -> Polynomial:
    return p.homogenize(target_degree)


def evaluate(p: Polynomial, point: Sequence):
    return p.evaluate(point)


def symmetrize_quarter_turn(W: Polynomial) -> Polynomial:
    """Orbit sum W(x,y) + W(y,-x) + W(-x,-y) + W(-y,x) under quarter turns."""
    if W.nvars != 2:
        raise DimensionError("quarter-turn symmetrization needs a bivariate polynomial")
    x, y = Polynomial.variables(2)
    total = W
    for image in ((y, -x), (-x, -y), (-y, x)):
        total = total + W.substitute(image)
    return total


def euler_residual(V: Polynomial) -> Polynomial:
    """x . grad V - d V; identically zero for a form of degree d."""
    if V.is_zero():
        return V
    if not V.is_homogeneous():
        raise DegreeError("Euler's identity needs a homogeneous polynomial")
    d = V.degree
    if d < 1:
        raise DegreeError("Euler's identity needs degree >= 1")
    xs = Polynomial.variables(V.nvars)
    total = Polynomial.zero(V.nvars)
    for xi, dv in zip(xs, V.gradient()):
        total = total + xi * dv
    return total - V * d


def norm_squared(nvars: int) -> Polynomial:
    """||x||^2."""
    return Polynomial(nvars, {tuple(2 if k == i else 0 for k in range(nvars)): 1 for i in range(nvars)})


def power_sum(nvars: int, degree: int) -> Polynomial:
    """sum_i x_i^degree."""
    return Polynomial(nvars, {tuple(degree if k == i else 0 for k in range(nvars)): 1 for i in range(nvars)})


def motzkin() -> Polynomial:
    """The dehomogenized Motzkin polynomial x1^4 x2^2 + x1^2 x2^4 - 3 x1^2 x2^2 + 1."""
    return Polynomial(2, {(4, 2): 1, (2, 4): 1, (2, 2): -3, (0, 0): 1})
