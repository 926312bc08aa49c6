"""Homogeneous polynomial arithmetic, map parsing and degree computations.

Coefficients are exact Gaussian rationals by default (fractions.Fraction
pairs), so that cancelling the common polynomial factor of composed map
components is meaningful; float arithmetic is used only when evaluating on
numpy arrays.  Multivariate gcds are delegated to sympy over QQ_I.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import sympy

from .geom import ProjectivePoint, fs_distance

__all__ = [
    "ExactComplex",
    "HomogeneousPolynomial",
    "HomogeneousMap",
    "DegreeReport",
    "MapSyntaxError",
    "parse_map",
    "compose",
    "indeterminacy_points",
    "topological_degree",
    "dynamical_degree_estimate",
]


# ---------------------------------------------------------------------------
# exact coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactComplex:
    """A Gaussian rational a + b*i with exact Fraction parts."""

    re: Fraction
    im: Fraction = Fraction(0)

    @classmethod
    def of(cls, value) -> "ExactComplex":
        if isinstance(value, ExactComplex):
            return value
        if isinstance(value, (int, Fraction)):
            return cls(Fraction(value))
        if isinstance(value, str):
            return cls(Fraction(value))
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag))
        if isinstance(value, float):
            return cls(Fraction(value))
        raise TypeError(f"cannot make an exact coefficient from {value!r}")

    def __add__(self, o):
        o = ExactComplex.of(o)
        return ExactComplex(self.re + o.re, self.im + o.im)

    def __sub__(self, o):
        o = ExactComplex.of(o)
        return ExactComplex(self.re - o.re, self.im - o.im)

    def __neg__(self):
        return ExactComplex(-self.re, -self.im)

    def __mul__(self, o):
        o = ExactComplex.of(o)
        return ExactComplex(self.re * o.re - self.im * o.im,
                            self.re * o.im + self.im * o.re)

    def __truediv__(self, o):
        o = ExactComplex.of(o)
        n = o.re * o.re + o.im * o.im
        if n == 0:
            raise ZeroDivisionError("division by zero coefficient")
        return ExactComplex((self.re * o.re + self.im * o.im) / n,
                            (self.im * o.re - self.re * o.im) / n)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def to_complex(self) -> complex:
        return complex(self.re) + 1j * complex(self.im)

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"({self.im}i)" if self.im >= 0 else f"(0-{-self.im}i)"
        sign = "+" if self.im >= 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}i)"


_ZERO = ExactComplex(Fraction(0))
_ONE = ExactComplex(Fraction(1))


# ---------------------------------------------------------------------------
# homogeneous polynomials
# ---------------------------------------------------------------------------

_SYMS = sympy.symbols("z0 z1 z2 z3")


class HomogeneousPolynomial:
    """A homogeneous polynomial in nvars variables, sparse monomial dict."""

    __slots__ = ("degree", "nvars", "coeffs")

    def __init__(self, degree: int, nvars: int, coeffs: dict | None = None):
        self.degree = int(degree)
        self.nvars = int(nvars)
        clean = {}
        for exp, c in (coeffs or {}).items():
            c = ExactComplex.of(c)
            if c.is_zero():
                continue
            exp = tuple(int(e) for e in exp)
            if len(exp) != nvars or any(e < 0 for e in exp):
                raise ValueError(f"bad exponent {exp}")
            if sum(exp) != degree:
                raise ValueError(
                    f"exponent {exp} has total degree {sum(exp)}, expected {degree}")
            clean[exp] = clean.get(exp, _ZERO) + c
        self.coeffs = {e: c for e, c in clean.items() if not c.is_zero()}

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int, degree: int = 0):
        return cls(degree, nvars, {})

    @classmethod
    def variable(cls, i: int, nvars: int):
        exp = tuple(1 if j == i else 0 for j in range(nvars))
        return cls(1, nvars, {exp: _ONE})

    @classmethod
    def constant(cls, value, nvars: int):
        return cls(0, nvars, {(0,) * nvars: ExactComplex.of(value)})

    # -- structure ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        if not isinstance(other, HomogeneousPolynomial):
            return NotImplemented
        return (self.nvars == other.nvars and self.coeffs == other.coeffs
                and (self.is_zero() or self.degree == other.degree))

    def __hash__(self):
        return hash((self.degree, self.nvars, frozenset(self.coeffs.items())))

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "HomogeneousPolynomial"):
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.degree != other.degree or self.nvars != other.nvars:
            raise ValueError("can only add homogeneous polynomials of one degree")
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, _ZERO) + c
        return HomogeneousPolynomial(self.degree, self.nvars, out)

    def __sub__(self, other):
        return self + (other * ExactComplex.of(-1))

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, complex, ExactComplex)):
            c = ExactComplex.of(other)
            return HomogeneousPolynomial(
                self.degree, self.nvars,
                {e: v * c for e, v in self.coeffs.items()})
        if self.is_zero() or other.is_zero():
            return HomogeneousPolynomial.zero(self.nvars)
        out = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, _ZERO) + c1 * c2
        return HomogeneousPolynomial(self.degree + other.degree, self.nvars, out)

    __rmul__ = __mul__

    def partial(self, i: int) -> "HomogeneousPolynomial":
        out = {}
        for e, c in self.coeffs.items():
            if e[i] == 0:
                continue
            e2 = tuple(v - 1 if j == i else v for j, v in enumerate(e))
            out[e2] = out.get(e2, _ZERO) + c * e[i]
        return HomogeneousPolynomial(max(self.degree - 1, 0), self.nvars, out)

    def substitute(self, polys) -> "HomogeneousPolynomial":
        """Value of self at (P_0, ..., P_{n-1}), all of one degree."""
        if len(polys) != self.nvars:
            raise ValueError("need one polynomial per variable")
        d_in = polys[0].degree
        nv = polys[0].nvars
        if self.is_zero():
            return HomogeneousPolynomial.zero(nv)
        # memoized power ladders
        powers = [[HomogeneousPolynomial.constant(1, nv)] for _ in polys]
        def pw(i, e):
            while len(powers[i]) <= e:
                powers[i].append(powers[i][-1] * polys[i])
            return powers[i][e]
        total = HomogeneousPolynomial.zero(nv)
        for e, c in self.coeffs.items():
            term = HomogeneousPolynomial.constant(c, nv)
            for i, ei in enumerate(e):
                if ei:
                    term = term * pw(i, ei)
            if total.is_zero():
                total = term
            else:
                total = total + term
        if total.is_zero():
            return HomogeneousPolynomial.zero(nv)
        assert total.degree == self.degree * d_in
        return total

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, coords) -> np.ndarray:
        """Value on homogeneous coordinate arrays (tuple of nvars arrays)."""
        coords = [np.asarray(c, dtype=complex) for c in coords]
        out = np.zeros(np.broadcast_shapes(*(c.shape for c in coords)),
                       dtype=complex)
        for e, c in self.coeffs.items():
            term = np.full(out.shape, c.to_complex())
            for x, ei in zip(coords, e):
                if ei:
                    term = term * x ** ei
            out += term
        return out

    def dehomogenize(self, chart: int = 0) -> "HomogeneousPolynomial":
        """P(1 at chart slot) as a (generally inhomogeneous) sympy expr."""
        return self.to_sympy().subs(_SYMS[chart], 1)

    # -- sympy bridge ---------------------------------------------------------

    def to_sympy(self):
        expr = sympy.Integer(0)
        for e, c in self.coeffs.items():
            coeff = sympy.Rational(c.re) + sympy.I * sympy.Rational(c.im)
            mon = sympy.Integer(1)
            for i, ei in enumerate(e):
                if ei:
                    mon *= _SYMS[i] ** ei
            expr += coeff * mon
        return expr

    @classmethod
    def from_sympy(cls, expr, nvars: int) -> "HomogeneousPolynomial":
        syms = _SYMS[:nvars]
        poly = sympy.Poly(sympy.expand(expr), *syms, domain="QQ_I")
        coeffs = {}
        degree = None
        for exp, c in poly.terms():
            re_, im_ = c.as_real_imag() if c.is_number else (c, 0)
            coeffs[tuple(exp)] = ExactComplex(Fraction(sympy.nsimplify(re_)),
                                              Fraction(sympy.nsimplify(im_)))
            d = sum(exp)
            if degree is None:
                degree = d
            elif degree != d:
                raise ValueError("sympy expression is not homogeneous")
        if degree is None:
            return cls.zero(nvars)
        return cls(degree, nvars, coeffs)

    def square_free(self) -> bool:
        """True when gcd(P, dP/dx_0, ..., dP/dx_n) is constant."""
        if self.is_zero() or self.degree == 0:
            return True
        partials = [self.partial(i) for i in range(self.nvars)]
        g = gcd_polynomials([self] + [d for d in partials if not d.is_zero()])
        return g.degree == 0

    # -- printing -------------------------------------------------------------

    def __str__(self):
        if self.is_zero():
            return "0"
        parts = []
        for e in sorted(self.coeffs, reverse=True):
            c = self.coeffs[e]
            mon = "*".join(f"z{i}^{ei}" if ei > 1 else f"z{i}"
                           for i, ei in enumerate(e) if ei)
            cs = str(c)
            if mon:
                parts.append(f"{cs}*{mon}" if cs != "1" else mon)
            else:
                parts.append(cs)
        return " + ".join(parts)

    __repr__ = __str__


def gcd_polynomials(polys) -> HomogeneousPolynomial:
    """gcd of homogeneous polynomials, exact over the Gaussian rationals."""
    polys = [p for p in polys if not p.is_zero()]
    if not polys:
        return HomogeneousPolynomial.zero(1)
    nvars = polys[0].nvars
    g = polys[0].to_sympy()
    for p in polys[1:]:
        g = sympy.gcd(g, p.to_sympy())
        if g.is_number:
            return HomogeneousPolynomial.constant(1, nvars)
    return HomogeneousPolynomial.from_sympy(g, nvars)


def polynomial_division(p: HomogeneousPolynomial, q: HomogeneousPolynomial):
    """Exact quotient p / q (q must divide p)."""
    quo = sympy.div(p.to_sympy(), q.to_sympy(), *_SYMS[:p.nvars])[0]
    return HomogeneousPolynomial.from_sympy(quo, p.nvars)


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------

class HomogeneousMap:
    """k+1 homogeneous polynomials of one degree, no common factor."""

    __slots__ = ("components", "degree", "k")

    def __init__(self, components, reduce: bool = True):
        components = list(components)
        if all(p.is_zero() for p in components):
            raise ValueError("all map components are zero")
        nvars = components[0].nvars
        degs = {p.degree for p in components if not p.is_zero()}
        if len(degs) != 1:
            raise ValueError(f"components have mismatched degrees {sorted(degs)}")
        if reduce:
            g = gcd_polynomials(components)
            if g.degree > 0:
                components = [p if p.is_zero() else polynomial_division(p, g)
                              for p in components]
        deg = next(p.degree for p in components if not p.is_zero())
        zero = HomogeneousPolynomial.zero(nvars, deg)
        self.components = [zero if p.is_zero() else p for p in components]
        self.degree = deg
        self.k = nvars - 1

    @classmethod
    def identity(cls, k: int) -> "HomogeneousMap":
        return cls([HomogeneousPolynomial.variable(i, k + 1)
                    for i in range(k + 1)])

    def evaluate(self, coords, normalize: bool = True):
        """Apply the lifted map to homogeneous coordinate arrays."""
        vals = [p.evaluate(coords) for p in self.components]
        if not normalize:
            return vals
        nrm = np.sqrt(sum(np.abs(v) ** 2 for v in vals))
        safe = np.where(nrm > 0, nrm, 1.0)
        return [v / safe for v in vals]

    def apply_point(self, p: ProjectivePoint) -> ProjectivePoint:
        vals = [comp.evaluate(tuple(p.homogeneous)) for comp in self.components]
        return ProjectivePoint(np.array(vals, dtype=complex))

    def apply_chart(self, pts, chart: int = 0):
        """Chart coordinates of f(points); inf where the image leaves the chart."""
        if self.k == 1:
            z = np.asarray(pts, dtype=complex)
            coords = (np.ones_like(z), z)
        else:
            z, w = pts
            z = np.asarray(z, dtype=complex)
            w = np.asarray(w, dtype=complex)
            one = np.ones(np.broadcast_shapes(z.shape, w.shape), dtype=complex)
            coords = (one, z + 0 * one, w + 0 * one)
        vals = [p.evaluate(coords) for p in self.components]
        h0 = vals[chart]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = [np.where(np.abs(h0) > 0, v / h0, np.inf)
                   for i, v in enumerate(vals) if i != chart]
        return out[0] if self.k == 1 else tuple(out)

    def __str__(self):
        return "[" + " : ".join(str(p) for p in self.components) + "]"

    __repr__ = __str__

    def __eq__(self, other):
        if not isinstance(other, HomogeneousMap):
            return NotImplemented
        if self.k != other.k or self.degree != other.degree:
            return False
        # projective equality: components proportional by one scalar
        for p, q in zip(self.components, other.components):
            if p.is_zero() != q.is_zero():
                return False
        pairs = [(p, q) for p, q in zip(self.components, other.components)
                 if not p.is_zero()]
        p0, q0 = pairs[0]
        e0 = next(iter(sorted(p0.coeffs)))
        if e0 not in q0.coeffs:
            return False
        lam = q0.coeffs[e0] / p0.coeffs[e0]
        return all(q == p * lam for p, q in pairs)


def compose(f: HomogeneousMap, g: HomogeneousMap) -> HomogeneousMap:
    """f o g with the common polynomial factor of the components cancelled."""
    if f.k != g.k:
        raise ValueError("maps act on different projective spaces")
    comps = [p.substitute(g.components) for p in f.components]
    return HomogeneousMap(comps, reduce=True)


def iterate_map(f: HomogeneousMap, n: int) -> HomogeneousMap:
    out = HomogeneousMap.identity(f.k)
    for _ in range(n):
        out = compose(f, out)
    return out


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class MapSyntaxError(ValueError):
    """Parse failure with the offending position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


_TOKEN_RE = re.compile(r"""
    (?P<complex>\(\s*[+-]?(?:\d+(?:\.\d+)?|\.\d+)(?:/\d+)?\s*[+-]\s*
        (?:\d+(?:\.\d+)?|\.\d+)(?:/\d+)?\s*i\s*\))
  | (?P<number>\d+(?:\.\d+)?(?:/\d+)?|\.\d+)
  | (?P<var>z[0-3])
  | (?P<op>[+\-*^():\[\]])
""", re.VERBOSE)

_COMPLEX_RE = re.compile(
    r"\(\s*(?P<re>[+-]?(?:\d+(?:\.\d+)?|\.\d+)(?:/\d+)?)\s*"
    r"(?P<sign>[+-])\s*(?P<im>(?:\d+(?:\.\d+)?|\.\d+)(?:/\d+)?)\s*i\s*\)")


def _fraction_of_literal(text: str) -> Fraction:
    if "/" in text:
        num, den = text.split("/")
        return Fraction(num) / Fraction(den)
    return Fraction(text)


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items = []
        pos = 0
        while pos < len(text):
            if text[pos].isspace():
                pos += 1
                continue
            m = _TOKEN_RE.match(text, pos)
            if not m:
                raise MapSyntaxError(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            self.items.append((kind, m.group(), pos))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.items[self.i] if self.i < len(self.items) else (None, "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, tok, pos = self.next()
        if tok != value:
            raise MapSyntaxError(f"expected {value!r}, found {tok!r}", pos)


class _ExprParser:
    """expr := term (('+'|'-') term)*; term := factor ('*' factor)*;
    factor := atom ('^' integer)?; atom := number | complex | var | '(' expr ')'.

    Values are (ExactComplex constant, monomial-dict) pairs encoded directly
    as inhomogeneous polynomial dicts over nvars variables.
    """

    def __init__(self, tokens: _Tokens, nvars: int):
        self.t = tokens
        self.nvars = nvars

    def parse_expr(self) -> dict:
        acc = self.parse_term()
        while True:
            kind, tok, pos = self.t.peek()
            if tok in ("+", "-"):
                self.t.next()
                term = self.parse_term()
                sign = _ONE if tok == "+" else ExactComplex.of(-1)
                for e, c in term.items():
                    acc[e] = acc.get(e, _ZERO) + c * sign
            else:
                return {e: c for e, c in acc.items() if not c.is_zero()}

    def parse_term(self) -> dict:
        acc = self.parse_factor()
        while True:
            kind, tok, pos = self.t.peek()
            if tok == "*":
                self.t.next()
                rhs = self.parse_factor()
                out = {}
                for e1, c1 in acc.items():
                    for e2, c2 in rhs.items():
                        e = tuple(a + b for a, b in zip(e1, e2))
                        out[e] = out.get(e, _ZERO) + c1 * c2
                acc = out
            else:
                return acc

    def parse_factor(self) -> dict:
        base = self.parse_atom()
        kind, tok, pos = self.t.peek()
        if tok == "^":
            self.t.next()
            kind, tok, pos = self.t.next()
            if kind != "number" or not tok.isdigit():
                raise MapSyntaxError("exponent must be a nonnegative integer", pos)
            power = int(tok)
            out = {(0,) * self.nvars: _ONE}
            for _ in range(power):
                nxt = {}
                for e1, c1 in out.items():
                    for e2, c2 in base.items():
                        e = tuple(a + b for a, b in zip(e1, e2))
                        nxt[e] = nxt.get(e, _ZERO) + c1 * c2
                out = nxt
            return out
        return base

    def parse_atom(self) -> dict:
        kind, tok, pos = self.t.next()
        zero_exp = (0,) * self.nvars
        if kind == "number":
            return {zero_exp: ExactComplex(_fraction_of_literal(tok))}
        if kind == "complex":
            m = _COMPLEX_RE.match(tok)
            re_ = _fraction_of_literal(m.group("re"))
            im_ = _fraction_of_literal(m.group("im"))
            if m.group("sign") == "-":
                im_ = -im_
            return {zero_exp: ExactComplex(re_, im_)}
        if kind == "var":
            i = int(tok[1])
            if i >= self.nvars:
                raise MapSyntaxError(
                    f"variable {tok} out of range for {self.nvars} variables", pos)
            e = tuple(1 if j == i else 0 for j in range(self.nvars))
            return {e: _ONE}
        if tok == "-":
            inner = self.parse_factor()
            return {e: c * ExactComplex.of(-1) for e, c in inner.items()}
        if tok == "(":
            inner = self.parse_expr()
            self.t.expect(")")
            return inner
        raise MapSyntaxError(f"unexpected token {tok!r}", pos)


def parse_map(text: str) -> HomogeneousMap:
    """Parse `[ expr : expr (: expr)* ]` into a reduced HomogeneousMap.

    Variables z0..z3 fix the ambient dimension: the highest variable present
    must be z_k for a map of P^k, and all k+1 slots must appear as components.
    """
    tokens = _Tokens(text)
    tokens.expect("[")
    # discover the variable count from the token stream
    var_ids = [int(tok[1]) for kind, tok, _ in tokens.items if kind == "var"]
    if not var_ids:
        raise MapSyntaxError("no variables found", 0)
    nvars = max(var_ids) + 1
    exprs = []
    positions = []
    while True:
        positions.append(tokens.peek()[2])
        parser = _ExprParser(tokens, nvars)
        exprs.append(parser.parse_expr())
        kind, tok, pos = tokens.next()
        if tok == "]":
            break
        if tok != ":":
            raise MapSyntaxError(f"expected ':' or ']', found {tok!r}", pos)
    kind, tok, pos = tokens.peek()
    if kind is not None:
        raise MapSyntaxError(f"trailing input {tok!r}", pos)
    if len(exprs) != nvars:
        raise MapSyntaxError(
            f"map of P^{nvars - 1} needs {nvars} components, found {len(exprs)}",
            len(text) - 1)
    polys = []
    for expr, pos in zip(exprs, positions):
        if not expr:
            polys.append(None)
            continue
        degs = {sum(e) for e in expr}
        if len(degs) != 1:
            raise MapSyntaxError(
                f"component is not homogeneous (degrees {sorted(degs)})", pos)
        polys.append(HomogeneousPolynomial(degs.pop(), nvars, expr))
    live = [p for p in polys if p is not None]
    if not live:
        raise MapSyntaxError("all map components are zero", 0)
    degs = {p.degree for p in live}
    if len(degs) != 1:
        raise MapSyntaxError(
            f"components have mismatched degrees {sorted(degs)}", 0)
    deg = degs.pop()
    polys = [p if p is not None else HomogeneousPolynomial.zero(nvars, deg)
             for p in polys]
    return HomogeneousMap(polys, reduce=True)


# ---------------------------------------------------------------------------
# indeterminacy and degrees
# ---------------------------------------------------------------------------

def indeterminacy_points(f: HomogeneousMap, tol: float = 1e-8):
    """Approximate common zeros of the components (k <= 2).

    Returns [] for k = 1 (a reduced pair has no common zero).  For k = 2 the
    zeros are located by resultant elimination plus a residual filter.
    A map whose components share a positive-dimensional zero set is reported
    degenerate.
    """
    if f.k == 1:
        return []
    g = gcd_polynomials(f.components)
    if g.degree > 0:
        raise ValueError(
            "degenerate map: components share a positive-dimensional zero set")
    p0, p1, p2 = [p.to_sympy() for p in f.components]
    z0, z1, z2 = _SYMS[:3]
    candidates = set()

    pairs = [(p0, p1), (p0, p2), (p1, p2)]
    lines = set()
    got_nonzero_resultant = False
    for a, b in pairs:
        if a == 0 or b == 0:
            continue
        res = sympy.resultant(a, b, z2)
        if res == 0:
            continue
        got_nonzero_resultant = True
        # res is homogeneous in (z0, z1); its zero lines carry all common roots
        poly_t = sympy.Poly(res.subs({z0: 1}), z1)
        if poly_t.degree() and poly_t.degree() > 0:
            for r in np.roots([complex(c) for c in poly_t.all_coeffs()]):
                lines.add((1.0, complex(r)))
        rp = sympy.Poly(res, z0, z1)
        if rp.degree(z1) < rp.total_degree():
            lines.add((0.0, 1.0))  # the pure z1-power coefficient vanishes
    if not got_nonzero_resultant:
        raise ValueError(
            "degenerate map: components share a positive-dimensional zero set")

    candidates.add((0.0, 0.0, 1.0))
    for (a0, a1) in lines:
        # points on the pencil line {[a0 : a1 : u]}: collect z2-roots of every
        # nonvanishing restricted component; the residual filter keeps only
        # genuine common zeros
        for comp in (p0, p1, p2):
            q = sympy.Poly(comp.subs({z0: complex(a0), z1: complex(a1)}), z2)
            if q.degree() is None or q.degree() <= 0 or q.is_zero:
                continue
            for r in np.roots([complex(c) for c in q.all_coeffs()]):
                candidates.add((complex(a0), complex(a1), complex(r)))

    pts = []
    for cand in candidates:
        v = np.array(cand, dtype=complex)
        n = np.linalg.norm(v)
        if n == 0:
            continue
        v = v / n
        resid = sum(abs(p.evaluate(tuple(v))) for p in f.components)
        if resid < tol:
            pt = ProjectivePoint(v)
            if not any(fs_distance(pt, q) < 1e-6 for q in pts):
                pts.append(pt)
    return pts


def _newton_fiber_count(f: HomogeneousMap, target: ProjectivePoint,
                        starts: int, rng: np.random.Generator,
                        newton_steps: int = 60) -> int:
    """Count chart solutions of f(x) = target by multi-start Newton (k = 2)."""
    b = target.homogeneous
    # cross equations G_i = F_i * b_j - F_j * b_i chosen for conditioning
    j = int(np.argmax(np.abs(b)))
    eqs = []
    for i in range(3):
        if i == j:
            continue
        eqs.append(f.components[i] * ExactComplex.of(complex(b[j]))
                   - f.components[j] * ExactComplex.of(complex(b[i])))
    g1, g2 = eqs
    d1 = [g1.partial(1), g1.partial(2)]
    d2 = [g2.partial(1), g2.partial(2)]

    # heavy-tailed start cloud: scale mixture reaches far-out roots
    scales = np.exp(rng.uniform(np.log(0.2), np.log(20.0), starts))
    z = scales * (rng.standard_normal(starts) + 1j * rng.standard_normal(starts))
    w = scales * (rng.standard_normal(starts) + 1j * rng.standard_normal(starts))
    one = np.ones_like(z)
    for _ in range(newton_steps):
        coords = (one, z, w)
        v1 = g1.evaluate(coords)
        v2 = g2.evaluate(coords)
        a11 = d1[0].evaluate(coords)
        a12 = d1[1].evaluate(coords)
        a21 = d2[0].evaluate(coords)
        a22 = d2[1].evaluate(coords)
        det = a11 * a22 - a12 * a21
        det = np.where(np.abs(det) > 1e-300, det, 1.0)
        dz = (v1 * a22 - v2 * a12) / det
        dw = (v2 * a11 - v1 * a21) / det
        step = np.sqrt(np.abs(dz) ** 2 + np.abs(dw) ** 2)
        cap = 1.0 + 0.2 * np.sqrt(np.abs(z) ** 2 + np.abs(w) ** 2)
        damp = np.where(step > cap, cap / np.maximum(step, 1e-300), 1.0)
        z = z - damp * dz
        w = w - damp * dw
        bad = ~np.isfinite(z) | ~np.isfinite(w)
        if np.any(bad):
            z[bad] = rng.standard_normal(bad.sum()) + 1j * rng.standard_normal(bad.sum())
            w[bad] = rng.standard_normal(bad.sum()) + 1j * rng.standard_normal(bad.sum())
    coords = (one, z, w)
    resid = np.abs(g1.evaluate(coords)) + np.abs(g2.evaluate(coords))
    scale = (1.0 + np.abs(z) + np.abs(w)) ** f.degree
    ok = np.isfinite(resid) & (resid < 1e-8 * scale)
    # drop indeterminacy points (where the full lift vanishes) and points
    # that do not actually map to the target
    sols = []
    fvals = f.evaluate((one, z, w), normalize=False)
    fnorm = np.sqrt(sum(np.abs(v) ** 2 for v in fvals))
    pnorm = np.sqrt(1.0 + np.abs(z) ** 2 + np.abs(w) ** 2) ** f.degree
    ok &= fnorm > 1e-10 * pnorm
    for idx in np.nonzero(ok)[0]:
        pt = ProjectivePoint([1.0, z[idx], w[idx]])
        img = np.array([v[idx] for v in fvals])
        if np.linalg.norm(img) == 0:
            continue
        if fs_distance(ProjectivePoint(img), target) > 1e-6:
            continue
        if not any(fs_distance(pt, q) < 1e-6 for q in sols):
            sols.append(pt)
    return len(sols)


def topological_degree(f: HomogeneousMap, trials: int = 5,
                       starts: int = 256, seed: int = 0) -> int:
    """Number of preimages of a generic point, the modal count over trials."""
    rng = np.random.default_rng(seed)
    counts = []
    if f.k == 1:
        for _ in range(trials):
            b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            q = (f.components[1] * ExactComplex.of(complex(b[0]))
                 - f.components[0] * ExactComplex.of(complex(b[1])))
            # roots of q(1, z) plus a root at infinity if the degree drops
            cs = np.zeros(f.degree + 1, dtype=complex)
            for e, c in q.coeffs.items():
                cs[f.degree - e[1]] = c.to_complex()
            lead = np.nonzero(np.abs(cs) > 1e-12)[0]
            n_inf = lead[0] if len(lead) else 0
            roots = np.roots(cs[lead[0]:]) if len(lead) else []
            distinct = []
            for r in roots:
                if not any(abs(r - s) < 1e-8 * (1 + abs(r)) for s in distinct):
                    distinct.append(r)
            counts.append(len(distinct) + (1 if n_inf > 0 else 0))
    else:
        for t in range(trials):
            b = ProjectivePoint(rng.standard_normal(3) + 1j * rng.standard_normal(3))
            counts.append(_newton_fiber_count(f, b, starts, rng))
    vals, freq = np.unique(counts, return_counts=True)
    order = np.argsort(freq)[::-1]
    if len(vals) > 1 and freq[order[0]] == freq[order[1]]:
        raise RuntimeError(
            f"fiber counts disagree {dict(zip(vals.tolist(), freq.tolist()))}; "
            "rerun with more starts")
    return int(vals[order[0]])


@dataclass(frozen=True)
class DegreeReport:
    """One row of an intermediate-degree table."""

    p: int
    n: int
    value: int
    method: str

    @property
    def root(self) -> float:
        """value^(1/n), the quantity whose limit is the dynamical degree."""
        return self.value ** (1.0 / self.n)


def dynamical_degree_estimate(f: HomogeneousMap, p: int, N: int = 8,
                              monomial_budget: int = 200000,
                              seed: int = 0):
    """Degrees of the iterates: lambda_p(f^n) for n = 1..N.

    p = 1 uses the gcd-reduced algebraic degree of the composed iterate;
    p = k uses the generic fiber count.  Stops early (with the rows obtained
    so far) when the exact composition outgrows the monomial budget.
    """
    if p not in (1, f.k):
        raise ValueError("only p = 1 and p = k are supported")
    reports = []
    g = HomogeneousMap.identity(f.k)
    for n in range(1, N + 1):
        try:
            g = compose(f, g)
        except MemoryError:
            break
        if sum(len(c.coeffs) for c in g.components) > monomial_budget:
            break
        if p == 1:
            reports.append(DegreeReport(1, n, g.degree, "exact-gcd"))
        else:
            cnt = topological_degree(g, trials=3, starts=max(512, 64 * g.degree ** 2),
                                     seed=seed + n)
            reports.append(DegreeReport(p, n, cnt, "preimage-count"))
    return reports
