"""Random symbolic functions of one variable.

An :class:`Expression` is a sum of :class:`Term` objects, each a coefficient
times an ordered product of :class:`BaseFeature` factors.  Two generators
build random expressions: a pure trigonometric one (random integer
coefficients, factors from ``sin``, ``cos``, ``sin*cos``) and a mixed one
(unit coefficients, random products over powers of x, trig, log and exp).

Randomness comes from numpy's ``default_rng`` (the PCG64 bit generator),
which produces the same stream on every platform for a given seed.  Integer
draws go through ``Generator.integers``, which rejects out-of-range samples
instead of reducing modulo the range.

Text form::

    95*sin(x)*cos(x)+37*sin(x)
    x^3*tan(x)*sin(x)*log(x)+exp(x)

Terms are joined by ``+``, factors by ``*``; a coefficient of 1 is omitted and
the empty expression is written ``0``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import DomainError, ExpressionOverflowError, ParseError

__all__ = [
    "Kind", "BaseFeature", "Term", "Expression", "DomainSpec",
    "X", "SIN", "COS", "TAN", "LOG", "EXP", "xpow",
    "TRIG_FACTORS", "mixed_pool", "DEFAULT_GUARD",
    "gen_trig_function", "trig_function_from_draws", "gen_mixed_function",
    "eval_expression", "evaluate", "domain_of", "check_domain",
    "format_expression", "parse_expression",
    "TRIG_EXAMPLE", "MIXED_EXAMPLE",
]

#: distance kept from log's singularity and from tan's poles
DEFAULT_GUARD = 0.01


class Kind(str, Enum):
    XPOW = "x"
    SIN = "sin"
    COS = "cos"
    TAN = "tan"
    LOG = "log"
    EXP = "exp"


_UFUNC = {
    Kind.SIN: np.sin,
    Kind.COS: np.cos,
    Kind.TAN: np.tan,
    Kind.LOG: np.log,
    Kind.EXP: np.exp,
}


@dataclass(frozen=True)
class BaseFeature:
    """One elementary function of x: ``x**power``, sin, cos, tan, log or exp."""

    kind: Kind
    power: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.XPOW:
            if int(self.power) != self.power or self.power < 1:
                raise ValueError(f"x power must be a positive integer, got {self.power!r}")
            object.__setattr__(self, "power", int(self.power))
        elif self.power != 1:
            raise ValueError(f"{self.kind.value} takes no power")

    @property
    def name(self) -> str:
        if self.kind is Kind.XPOW:
            return "x" if self.power == 1 else f"x^{self.power}"
        return f"{self.kind.value}(x)"

    def __str__(self):
        return self.name

    def __call__(self, x):
        """Evaluate without domain checks (numpy semantics, may return nan/inf)."""
        x = np.asarray(x, dtype=float)
        if self.kind is Kind.XPOW:
            return x ** self.power
        return _UFUNC[self.kind](x)

    def valid(self, x, guard: float = DEFAULT_GUARD):
        """Boolean mask of points inside the guarded domain of this factor."""
        x = np.asarray(x, dtype=float)
        if self.kind is Kind.LOG:
            return x >= guard
        if self.kind is Kind.TAN:
            return _pole_distance(x) >= guard
        return np.ones(x.shape, dtype=bool)


def xpow(k: int) -> BaseFeature:
    return BaseFeature(Kind.XPOW, k)


X = xpow(1)
SIN = BaseFeature(Kind.SIN)
COS = BaseFeature(Kind.COS)
TAN = BaseFeature(Kind.TAN)
LOG = BaseFeature(Kind.LOG)
EXP = BaseFeature(Kind.EXP)

# factor choices of the trigonometric generator, in draw-index order
TRIG_FACTORS: tuple[tuple[BaseFeature, ...], ...] = ((SIN,), (COS,), (SIN, COS))


def mixed_pool(degree: int) -> tuple[BaseFeature, ...]:
    """Feature pool of the mixed generator: x..x^degree, cos, sin, tan, log, exp."""
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    return tuple(xpow(k) for k in range(1, degree + 1)) + (COS, SIN, TAN, LOG, EXP)


def _pole_distance(x):
    # tan poles sit at odd multiples of pi/2
    k = np.round((x - math.pi / 2) / math.pi)
    return np.abs(x - (math.pi / 2 + k * math.pi))


@dataclass(frozen=True)
class Term:
    coefficient: float
    factors: tuple[BaseFeature, ...]

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise ValueError("a term needs at least one factor")
        if not all(isinstance(f, BaseFeature) for f in factors):
            raise TypeError("factors must be BaseFeature instances")
        coefficient = float(self.coefficient)
        if not math.isfinite(coefficient):
            raise ValueError(f"coefficient must be finite, got {self.coefficient!r}")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "coefficient", coefficient)


@dataclass(frozen=True)
class Expression:
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def features(self) -> set[BaseFeature]:
        return {f for t in self.terms for f in t.factors}

    def __str__(self):
        return format_expression(self)

    def __call__(self, x, guard: float = DEFAULT_GUARD):
        if np.ndim(x) == 0:
            return eval_expression(self, x, guard)
        return evaluate(self, x, guard)


@dataclass(frozen=True)
class DomainSpec:
    """Closed interval ``[lower, upper]`` minus open intervals ``(center - r, center + r)``."""

    lower: float
    upper: float
    exclusions: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not self.lower < self.upper:
            raise DomainError(f"empty domain [{self.lower}, {self.upper}]")
        object.__setattr__(self, "exclusions", tuple(tuple(e) for e in self.exclusions))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        ok = (x >= self.lower) & (x <= self.upper)
        for center, radius in self.exclusions:
            ok &= np.abs(x - center) >= radius
        return ok

    def grid(self, step: float) -> np.ndarray:
        """Points ``lower + i*step`` up to ``upper``, with excluded points removed."""
        if step <= 0:
            raise ValueError(f"step must be positive, got {step}")
        n = int(math.floor((self.upper - self.lower) / step + 1e-9)) + 1
        xs = self.lower + step * np.arange(n)
        return xs[self.contains(xs)]


# -- generators ---------------------------------------------------------------

def trig_function_from_draws(draws: Iterable[tuple[int, int]]) -> Expression:
    """Build a trigonometric expression from explicit ``(coefficient, factor_index)`` draws.

    ``factor_index`` selects from :data:`TRIG_FACTORS`.
    """
    return Expression(tuple(Term(c, TRIG_FACTORS[i]) for c, i in draws))


def gen_trig_function(seed: int, n_terms: int) -> Expression:
    """Random sum of ``n_terms`` terms ``c * g(x)``, c uniform in 0..99, g in sin, cos, sin*cos."""
    if n_terms < 1:
        raise ValueError(f"n_terms must be >= 1, got {n_terms}")
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(n_terms):
        coef = int(rng.integers(0, 100))
        which = int(rng.integers(0, len(TRIG_FACTORS)))
        draws.append((coef, which))
    return trig_function_from_draws(draws)


def gen_mixed_function(seed: int, max_terms: int = 10, degree: int = 2) -> Expression:
    """Random sum of unit-coefficient products drawn with replacement from :func:`mixed_pool`.

    The term count is uniform in ``1..max_terms`` and each term's factor count
    is uniform in ``1..len(pool)``.
    """
    if max_terms < 1:
        raise ValueError(f"max_terms must be >= 1, got {max_terms}")
    pool = mixed_pool(degree)
    rng = np.random.default_rng(seed)
    n_terms = int(rng.integers(0, max_terms)) + 1
    terms = []
    for _ in range(n_terms):
        n_factors = int(rng.integers(0, len(pool))) + 1
        factors = tuple(pool[int(rng.integers(0, len(pool)))] for _ in range(n_factors))
        terms.append(Term(1, factors))
    return Expression(tuple(terms))


# -- evaluation ---------------------------------------------------------------

def check_domain(expr: Expression, x, guard: float = DEFAULT_GUARD) -> None:
    """Raise :class:`DomainError` naming the first factor whose domain excludes a point of ``x``."""
    x = np.asarray(x, dtype=float)
    for feature in sorted(expr.features, key=_feature_key):
        bad = ~feature.valid(x, guard)
        if bad.any():
            where = float(x[bad].flat[0])
            raise DomainError(
                f"{feature.name} is undefined or unguarded at x={where!r} (guard {guard})",
                factor=feature, x=where,
            )


def evaluate(expr: Expression, xs, guard: float = DEFAULT_GUARD) -> np.ndarray:
    """Vectorized evaluation over an array of points."""
    xs = np.asarray(xs, dtype=float)
    check_domain(expr, xs, guard)
    total = np.zeros(xs.shape)
    with np.errstate(all="ignore"):
        for term in expr.terms:
            value = np.full(xs.shape, term.coefficient)
            for factor in term.factors:
                value = value * factor(xs)
            total = total + value
    if not np.all(np.isfinite(total)):
        raise ExpressionOverflowError(f"non-finite value while evaluating {format_expression(expr)}")
    return total


def eval_expression(expr: Expression, x: float, guard: float = DEFAULT_GUARD) -> float:
    return float(evaluate(expr, np.asarray(float(x)), guard))


def domain_of(expr: Expression, lower: float, upper: float, guard: float = DEFAULT_GUARD) -> DomainSpec:
    """Guarded domain of ``expr`` inside ``[lower, upper]``.

    A log factor raises the lower bound to ``guard``.  A tan factor excludes
    radius-``guard`` neighbourhoods of its poles; a neighbourhood that reaches
    past an end of the interval trims that end instead, so exclusions always
    lie inside the bounds.
    """
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    if guard <= 0:
        raise ValueError(f"guard must be positive, got {guard}")
    kinds = {f.kind for f in expr.features}
    if Kind.LOG in kinds:
        lower = max(lower, guard)
    exclusions = []
    if Kind.TAN in kinds and lower < upper:
        half_pi = math.pi / 2
        k_lo = math.floor((lower - guard - half_pi) / math.pi)
        k_hi = math.ceil((upper + guard - half_pi) / math.pi)
        for k in range(k_lo, k_hi + 1):
            pole = half_pi + k * math.pi
            if abs(pole - lower) < guard:
                lower = pole + guard
            elif abs(pole - upper) < guard:
                upper = pole - guard
            elif lower < pole < upper:
                exclusions.append((pole, guard))
    if not lower < upper:
        raise DomainError(f"guarded domain of {format_expression(expr)} is empty")
    return DomainSpec(lower, upper, tuple(exclusions))


# -- text form ----------------------------------------------------------------

_KIND_ORDER = {Kind.XPOW: 0, Kind.SIN: 1, Kind.COS: 2, Kind.TAN: 3, Kind.LOG: 4, Kind.EXP: 5}


def _feature_key(f: BaseFeature):
    return (_KIND_ORDER[f.kind], f.power)


def _format_coefficient(c: float) -> str:
    if c == int(c) and abs(c) < 1e16:
        return str(int(c))
    return repr(c)


def format_expression(expr: Expression) -> str:
    if not expr.terms:
        return "0"
    parts = []
    for term in expr.terms:
        factors = "*".join(f.name for f in term.factors)
        if term.coefficient == 1.0:
            parts.append(factors)
        else:
            parts.append(f"{_format_coefficient(term.coefficient)}*{factors}")
    return "+".join(parts)


_TOKEN = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<number>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<func>(?:np\.)?(?:sin|cos|tan|log|exp)\(\s*x\s*\))
  | (?P<x>x)
  | (?P<pow>\^|\*\*)
  | (?P<op>[+*])
  | (?P<assign>y\s*=)
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind == "pow" and m.group() == "**":
            tokens.append(("pow", "^", pos))
        elif kind != "space":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def parse_expression(text: str) -> Expression:
    """Parse the text form produced by :func:`format_expression`.

    Also accepts a leading ``y=``, ``**`` for powers and ``np.``-prefixed
    function names.
    """
    tokens = _tokenize(text)
    i = 0

    def peek():
        return tokens[i]

    def take(kind):
        nonlocal i
        tok = tokens[i]
        if tok[0] != kind:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {kind}, found {found}", tok[2])
        i += 1
        return tok

    if peek()[0] == "assign":
        i += 1
    if peek()[0] == "number" and tokens[i + 1][0] == "end" and float(peek()[1]) == 0.0:
        return Expression(())

    def factor():
        kind, value, pos = peek()
        if kind == "func":
            take("func")
            name = value.removeprefix("np.").split("(")[0]
            return BaseFeature(Kind(name))
        if kind == "x":
            take("x")
            if peek()[0] == "pow":
                take("pow")
                _, digits, ppos = take("number")
                if not digits.isdigit() or int(digits) < 1:
                    raise ParseError(f"power must be a positive integer, got {digits!r}", ppos)
                return xpow(int(digits))
            return X
        found = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"expected a factor, found {found}", pos)

    terms = []
    while True:
        coefficient = 1.0
        if peek()[0] == "number":
            coefficient = float(take("number")[1])
            kind, value, pos = peek()
            if (kind, value) != ("op", "*"):
                raise ParseError("expected '*' after coefficient", pos)
            i += 1
        factors = [factor()]
        while peek()[0] == "op" and peek()[1] == "*":
            take("op")
            factors.append(factor())
        terms.append(Term(coefficient, tuple(factors)))
        if peek()[0] == "end":
            break
        tok = peek()
        if tok[1] != "+":
            raise ParseError(f"expected '+' or end of input, found {tok[1]!r}", tok[2])
        take("op")
    return Expression(tuple(terms))


TRIG_EXAMPLE = parse_expression("95*sin(x)*cos(x)+37*sin(x)+90*sin(x)*cos(x)+45*sin(x)*cos(x)")
MIXED_EXAMPLE = parse_expression(
    "exp(x)*cos(x)*tan(x)*tan(x)+x^3*sin(x)+x^3*tan(x)*sin(x)*log(x)"
    "+x^3+x^3*cos(x)*tan(x)*exp(x)*log(x)+x^4*exp(x)*tan(x)"
)
