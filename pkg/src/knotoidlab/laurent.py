"""Exact multivariate Laurent polynomials with integer coefficients.

The default variable tuple is ``("A", "t", "V")``: the bracket variable, the
annular winding variable and the pre-crossing weight.  Exponents may be any
integers, coefficients are arbitrary-precision ints.  Terms are stored
sparsely as a dict mapping exponent vectors to nonzero coefficients.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Dict, Iterable, Optional, Tuple

from .errors import NotInvertible, ParseError

Exponents = Tuple[int, ...]

DEFAULT_VARS = ("A", "t", "V")


class LaurentPoly:
    __slots__ = ("variables", "terms")

    def __init__(self, terms: Dict[Exponents, int] | None = None,
                 variables: Tuple[str, ...] = DEFAULT_VARS):
        self.variables = tuple(variables)
        clean: Dict[Exponents, int] = {}
        if terms:
            n = len(self.variables)
            for exps, coeff in terms.items():
                if len(exps) != n:
                    raise ValueError(f"exponent vector {exps} does not match "
                                     f"variables {self.variables}")
                if coeff:
                    key = tuple(int(e) for e in exps)
                    clean[key] = clean.get(key, 0) + int(coeff)
                    if not clean[key]:
                        del clean[key]
        self.terms = clean

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------
    @classmethod
    def zero(cls, variables: Tuple[str, ...] = DEFAULT_VARS) -> "LaurentPoly":
        return cls({}, variables)

    @classmethod
    def const(cls, c: int, variables: Tuple[str, ...] = DEFAULT_VARS) -> "LaurentPoly":
        return cls({(0,) * len(variables): c}, variables)

    @classmethod
    def one(cls, variables: Tuple[str, ...] = DEFAULT_VARS) -> "LaurentPoly":
        return cls.const(1, variables)

    @classmethod
    def monomial(cls, coeff: int, exps: Iterable[int],
                 variables: Tuple[str, ...] = DEFAULT_VARS) -> "LaurentPoly":
        return cls({tuple(exps): coeff}, variables)

    @classmethod
    def var(cls, name: str, power: int = 1,
            variables: Tuple[str, ...] = DEFAULT_VARS) -> "LaurentPoly":
        idx = variables.index(name)
        exps = [0] * len(variables)
        exps[idx] = power
        return cls.monomial(1, exps, variables)

    # ------------------------------------------------------------------
    # ring operations
    # ------------------------------------------------------------------
    def _check(self, other: "LaurentPoly") -> None:
        if self.variables != other.variables:
            raise ValueError("variable mismatch: "
                             f"{self.variables} vs {other.variables}")

    def __add__(self, other):
        if isinstance(other, int):
            other = LaurentPoly.const(other, self.variables)
        self._check(other)
        terms = dict(self.terms)
        for exps, c in other.terms.items():
            terms[exps] = terms.get(exps, 0) + c
        return LaurentPoly(terms, self.variables)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPoly({e: -c for e, c in self.terms.items()}, self.variables)

    def __sub__(self, other):
        if isinstance(other, int):
            other = LaurentPoly.const(other, self.variables)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, int):
            if not other:
                return LaurentPoly.zero(self.variables)
            return LaurentPoly({e: c * other for e, c in self.terms.items()},
                               self.variables)
        self._check(other)
        terms: Dict[Exponents, int] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                terms[key] = terms.get(key, 0) + c1 * c2
        return LaurentPoly(terms, self.variables)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n == 0:
            return LaurentPoly.one(self.variables)
        if n < 0:
            inv = self.inverse()
            return inv ** (-n)
        base, result = self, LaurentPoly.one(self.variables)
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def inverse(self) -> "LaurentPoly":
        """Invert a unit (a single term with coefficient +-1)."""
        if len(self.terms) != 1:
            raise NotInvertible(f"{self!r} is not a unit monomial")
        (exps, coeff), = self.terms.items()
        if coeff not in (1, -1):
            raise NotInvertible(f"coefficient {coeff} is not a unit")
        return LaurentPoly({tuple(-e for e in exps): coeff}, self.variables)

    # ------------------------------------------------------------------
    # structure
    # ------------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, int):
            other = LaurentPoly.const(other, self.variables)
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        return self.variables == other.variables and self.terms == other.terms

    def __hash__(self):
        return hash((self.variables, frozenset(self.terms.items())))

    def sorted_terms(self):
        """Terms in canonical (descending lexicographic exponent) order."""
        return sorted(self.terms.items(), key=lambda kv: kv[0], reverse=True)

    def max_exp(self, name: str) -> int:
        idx = self.variables.index(name)
        return max((e[idx] for e in self.terms), default=0)

    def min_exp(self, name: str) -> int:
        idx = self.variables.index(name)
        return min((e[idx] for e in self.terms), default=0)

    def uses(self, name: str) -> bool:
        idx = self.variables.index(name)
        return any(e[idx] for e in self.terms)

    def mirror(self, name: str = "A") -> "LaurentPoly":
        """Substitute ``name -> name^-1`` (diagram mirror image)."""
        idx = self.variables.index(name)
        terms = {}
        for e, c in self.terms.items():
            e2 = list(e)
            e2[idx] = -e2[idx]
            terms[tuple(e2)] = c
        return LaurentPoly(terms, self.variables)

    # ------------------------------------------------------------------
    # rendering
    # ------------------------------------------------------------------
    def __str__(self):
        return render(self)

    def __repr__(self):
        return f"LaurentPoly({render(self)!r})"


def delta() -> LaurentPoly:
    """The loop value -A^2 - A^-2."""
    return LaurentPoly({(2, 0, 0): -1, (-2, 0, 0): -1})


def div_exact(p: LaurentPoly, q: LaurentPoly) -> Optional[LaurentPoly]:
    """Exact quotient p / q in the Laurent ring, or None if q does not divide.

    Long division by leading terms (descending lexicographic order); monomial
    quotients always exist in a Laurent ring, so only coefficient divisibility
    and termination can fail.  Intended for structured divisors such as the
    loop value delta; bails out (returns None) rather than looping on
    non-terminating expansions.
    """
    if q.is_zero():
        raise ZeroDivisionError("Laurent division by zero")
    if p.is_zero():
        return LaurentPoly.zero(p.variables)
    p._check(q)
    qe, qc = q.sorted_terms()[0]
    rem = p
    quot = LaurentPoly.zero(p.variables)
    for _ in range(100 * len(p.terms) + 1000):
        if rem.is_zero():
            return quot
        re_, rc = rem.sorted_terms()[0]
        if rc % qc:
            return None
        mono = LaurentPoly.monomial(rc // qc,
                                    tuple(a - b for a, b in zip(re_, qe)),
                                    p.variables)
        quot = quot + mono
        rem = rem - mono * q
    return None


A = LaurentPoly.var("A")
T = LaurentPoly.var("t")
V = LaurentPoly.var("V")


# ----------------------------------------------------------------------
# text form: groups by non-A variables, A-polynomial factors in parens
# ----------------------------------------------------------------------

def _pow_str(name: str, exp: int) -> str:
    if exp == 1:
        return name
    return f"{name}^{exp}"


def _mono_str(coeff: int, exps: Exponents, variables) -> str:
    parts = [_pow_str(v, e) for v, e in zip(variables, exps) if e]
    if not parts:
        return str(coeff)
    if coeff == 1:
        return "*".join(parts)
    if coeff == -1:
        return "-" + "*".join(parts)
    return "*".join([str(coeff)] + parts)


def _join(rendered_terms) -> str:
    out = ""
    for term in rendered_terms:
        if not out:
            out = term
        elif term.startswith("-"):
            out += " - " + term[1:]
        else:
            out += " + " + term
    return out or "0"


def render(poly: LaurentPoly) -> str:
    """Canonical text form, grouping the A-polynomial per (t, V) exponent."""
    if not poly.terms:
        return "0"
    if poly.variables != DEFAULT_VARS:
        return _join(_mono_str(c, e, poly.variables)
                     for e, c in poly.sorted_terms())
    groups: Dict[Tuple[int, int], Dict[int, int]] = {}
    for (a, b, v), c in poly.terms.items():
        groups.setdefault((b, v), {})[a] = c
    rendered = []
    for (b, v) in sorted(groups, reverse=True):
        apoly = groups[(b, v)]
        amonos = [_mono_str(c, (a,), ("A",))
                  for a, c in sorted(apoly.items(), reverse=True)]
        suffix = [_pow_str(n, e) for n, e in (("t", b), ("V", v)) if e]
        if not suffix:
            rendered.extend(amonos)
        elif len(amonos) == 1:
            m = amonos[0]
            if m in ("1", "-1"):
                m = m[:-1]  # keep sign, drop the 1
            if m and not m.endswith("*"):
                m += "*"
            rendered.append(m + "*".join(suffix))
        else:
            rendered.append("(" + _join(amonos) + ")*" + "*".join(suffix))
    return _join(rendered)


_TOKEN = re.compile(r"\s*([()+\-*]|[A-Za-z]+(?:\^-?\d+)?|\d+)")


def parse(text: str, variables: Tuple[str, ...] = DEFAULT_VARS) -> LaurentPoly:
    """Parse the output of :func:`render` (and natural variants of it)."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ParseError(f"bad polynomial text at {text[pos:]!r}")
            break
        tokens.append(m.group(1))
        pos = m.end()
    if not tokens:
        raise ParseError("empty polynomial text")

    idx = 0

    def peek():
        return tokens[idx] if idx < len(tokens) else None

    def take():
        nonlocal idx
        tok = tokens[idx]
        idx += 1
        return tok

    def parse_sum() -> LaurentPoly:
        result = parse_product(sign=1)
        while peek() in ("+", "-"):
            sign = 1 if take() == "+" else -1
            result = result + parse_product(sign)
        return result

    def parse_product(sign: int) -> LaurentPoly:
        while peek() in ("+", "-"):
            if take() == "-":
                sign = -sign
        result = LaurentPoly.const(sign, variables)
        expect_factor = True
        while True:
            tok = peek()
            if tok == "*":
                take()
                expect_factor = True
                continue
            if not expect_factor:
                break
            if tok == "(":
                take()
                inner = parse_sum()
                if take() != ")":
                    raise ParseError("unbalanced parenthesis")
                result = result * inner
            elif tok is not None and tok.isdigit():
                result = result * int(take())
            elif tok is not None and tok[0].isalpha():
                take()
                if "^" in tok:
                    name, exp = tok.split("^")
                    power = int(exp)
                else:
                    name, power = tok, 1
                if name not in variables:
                    raise ParseError(f"unknown variable {name!r}")
                result = result * LaurentPoly.var(name, power, variables)
            else:
                break
            expect_factor = False
        return result

    result = parse_sum()
    if idx != len(tokens):
        raise ParseError(f"trailing tokens {tokens[idx:]!r}")
    return result


# ----------------------------------------------------------------------
# Jones specialisation: A -> t^(-1/4)
# ----------------------------------------------------------------------

JONES_VARS = ("q",)  # q stands for t^(1/4)


def substitute_jones(poly: LaurentPoly) -> LaurentPoly:
    """Substitute A = t^(-1/4); result is a Laurent polynomial in q=t^(1/4).

    Raises :class:`MixedVariablePresent` if the annular variable t or the
    pre-crossing weight V occurs.
    """
    from .errors import MixedVariablePresent

    if poly.uses("t") or poly.uses("V"):
        raise MixedVariablePresent(
            "bracket involves annular winding or V; Jones specialisation "
            "needs a spherical, fully resolved diagram")
    terms: Dict[Exponents, int] = {}
    for (a, _b, _v), c in poly.terms.items():
        key = (-a,)  # A^a = q^-a
        terms[key] = terms.get(key, 0) + c
    return LaurentPoly(terms, JONES_VARS)


def render_jones(poly: LaurentPoly) -> str:
    """Render a polynomial in q = t^(1/4) using fractional powers of t."""
    if poly.variables != JONES_VARS:
        raise ValueError("expected a Jones polynomial in q")
    if not poly.terms:
        return "0"
    rendered = []
    for (k,), c in poly.sorted_terms():
        q = Fraction(k, 4)
        if q == 0:
            rendered.append(str(c))
            continue
        p = "t" if q == 1 else (f"t^{q}" if q.denominator == 1
                                else f"t^({q})")
        if c == 1:
            rendered.append(p)
        elif c == -1:
            rendered.append("-" + p)
        else:
            rendered.append(f"{c}*{p}")
    return _join(rendered)
