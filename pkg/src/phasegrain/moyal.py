"""Exact phase-space calculus on polynomial symbols.

Commutative polynomials in (q, p) and normal-ordered noncommutative
polynomials in (qhat, phat) with [qhat, phat] = i*hbar share one coefficient
type: Gaussian rationals graded by powers of hbar.  All products, brackets
and the symmetric (Weyl) ordering map are computed with exact arithmetic, so
algebraic identities can be asserted as equalities rather than tolerances.

Conventions: the star product carries exp((i hbar / 2)(dq_left dp_right -
dp_left dq_right)), which fixes {q, p} = +1 for both brackets and makes
q * p = qp + i hbar / 2.
"""

from __future__ import annotations

import re
from fractions import Fraction
from itertools import combinations
from math import comb, factorial

_ZERO = Fraction(0)
_ONE = Fraction(1)


class CRat:
    """Gaussian rational: exact complex number with Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def coerce(cls, x):
        if isinstance(x, CRat):
            return x
        if isinstance(x, complex):
            raise TypeError("use exact rationals, not floats")
        return cls(x)

    def __add__(self, other):
        other = CRat.coerce(other)
        return CRat(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        other = CRat.coerce(other)
        return CRat(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return CRat(-self.re, -self.im)

    def __mul__(self, other):
        other = CRat.coerce(other)
        return CRat(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __radd__ = __add__
    __rmul__ = __mul__

    def __truediv__(self, other):
        other = CRat.coerce(other)
        d = other.re * other.re + other.im * other.im
        if d == 0:
            raise ZeroDivisionError("division by zero coefficient")
        return CRat(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def __eq__(self, other):
        other = CRat.coerce(other)
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return self.re != 0 or self.im != 0

    def conjugate(self):
        return CRat(self.re, -self.im)

    def to_complex(self):
        return complex(self.re) + 1j * complex(self.im)

    def __repr__(self):
        return f"CRat({self.re}, {self.im})"


I = CRat(0, 1)


def _trim(terms):
    return {key: c for key, c in terms.items() if c}


class _GradedPoly:
    """Shared dict-of-terms machinery; keys are (q_deg, p_deg, hbar_pow)."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = _trim(terms or {})

    @classmethod
    def monomial(cls, m, n, hpow=0, coeff=1):
        if m < 0 or n < 0 or hpow < 0:
            raise ValueError("degrees must be nonnegative")
        return cls({(m, n, hpow): CRat.coerce(coeff)})

    @classmethod
    def zero(cls):
        return cls({})

    @classmethod
    def one(cls):
        return cls.monomial(0, 0)

    def __add__(self, other):
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, CRat()) + c
        return type(self)(out)

    def __sub__(self, other):
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, CRat()) - c
        return type(self)(out)

    def __neg__(self):
        return type(self)({key: -c for key, c in self.terms.items()})

    def scaled(self, factor):
        factor = CRat.coerce(factor)
        return type(self)({key: c * factor for key, c in self.terms.items()})

    def __eq__(self, other):
        return type(self) is type(other) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def total_degree(self):
        return max((m + n for m, n, _ in self.terms), default=0)

    def lowest_hbar_power(self):
        """Smallest hbar power carrying a nonzero coefficient; None if zero."""
        return min((k for _, _, k in self.terms), default=None)

    def is_real(self):
        return all(c.im == 0 for c in self.terms.values())


class PolySymbol(_GradedPoly):
    """Commutative polynomial in (q, p) with a graded hbar parameter."""

    def __mul__(self, other):
        if not isinstance(other, PolySymbol):
            return self.scaled(other)
        out = {}
        for (m1, n1, k1), c1 in self.terms.items():
            for (m2, n2, k2), c2 in other.terms.items():
                key = (m1 + m2, n1 + n2, k1 + k2)
                out[key] = out.get(key, CRat()) + c1 * c2
        return PolySymbol(out)

    __rmul__ = __mul__

    def diff_q(self):
        return PolySymbol(
            {(m - 1, n, k): c * m for (m, n, k), c in self.terms.items() if m > 0}
        )

    def diff_p(self):
        return PolySymbol(
            {(m, n - 1, k): c * n for (m, n, k), c in self.terms.items() if n > 0}
        )

    def evaluate(self, q, p, hbar):
        """Numeric value; complex in general."""
        total = 0j
        for (m, n, k), c in self.terms.items():
            total += c.to_complex() * q**m * p**n * hbar**k
        return total

    def __str__(self):
        return format_symbol(self)

    def __repr__(self):
        return f"PolySymbol({format_symbol(self)!r})"


class NCPoly(_GradedPoly):
    """Normal-ordered polynomial in (qhat, phat): every stored word has all
    qhat factors left of all phat factors; products rewrite through
    phat qhat = qhat phat - i hbar."""

    def __mul__(self, other):
        if not isinstance(other, NCPoly):
            return self.scaled(other)
        out = {}
        for (a, b, j), c1 in self.terms.items():
            for (cdeg, d, l), c2 in other.terms.items():
                base = c1 * c2
                # p^b q^c = sum_r r! C(b,r) C(c,r) (-i hbar)^r q^(c-r) p^(b-r)
                for r in range(min(b, cdeg) + 1):
                    coeff = base * (factorial(r) * comb(b, r) * comb(cdeg, r))
                    if r % 2:
                        coeff = coeff * CRat(0, -1)
                    if r % 4 in (2, 3):
                        coeff = -coeff
                    key = (a + cdeg - r, b + d - r, j + l + r)
                    out[key] = out.get(key, CRat()) + coeff
        return NCPoly(out)

    __rmul__ = __mul__

    @classmethod
    def from_word(cls, word, coeff=1, hpow=0):
        """Normal-order a product of letters, e.g. "qppq" or ["q", "p"]."""
        acc = cls.monomial(0, 0, hpow, coeff)
        for letter in word:
            if letter == "q":
                acc = acc * cls.monomial(1, 0)
            elif letter == "p":
                acc = acc * cls.monomial(0, 1)
            else:
                raise ValueError(f"unknown operator letter {letter!r}")
        return acc

    def dagger(self):
        """Hermitian adjoint: reverse each word and conjugate coefficients."""
        out = NCPoly.zero()
        for (m, n, k), c in self.terms.items():
            # (q^m p^n)^dagger = p^n q^m, re-normal-ordered
            word = NCPoly.monomial(0, n) * NCPoly.monomial(m, 0, k)
            out = out + word.scaled(c.conjugate())
        return out

    def __repr__(self):
        body = " + ".join(
            f"({c.re}{'+' if c.im >= 0 else ''}{c.im}i) h^{k} q^{m} p^{n}"
            for (m, n, k), c in sorted(self.terms.items())
        )
        return f"NCPoly({body or '0'})"


# convenient atoms
Q = PolySymbol.monomial(1, 0)
P = PolySymbol.monomial(0, 1)
HBAR = PolySymbol.monomial(0, 0, 1)
QHAT = NCPoly.monomial(1, 0)
PHAT = NCPoly.monomial(0, 1)


def _sign(r, s):
    return -1 if s % 2 else 1


def star(f: PolySymbol, g: PolySymbol) -> PolySymbol:
    """Noncommutative symbol product: the image of operator multiplication.

    The bidifferential series terminates at the smaller total degree, and the
    r-th order carries (i hbar / 2)^r / r!.
    """
    rmax = min(f.total_degree(), g.total_degree())
    out = f * g
    i_pow = CRat(1)
    for r in range(1, rmax + 1):
        i_pow = i_pow * I
        term = PolySymbol.zero()
        for s in range(r + 1):
            df = f
            for _ in range(r - s):
                df = df.diff_q()
            for _ in range(s):
                df = df.diff_p()
            if not df:
                continue
            dg = g
            for _ in range(r - s):
                dg = dg.diff_p()
            for _ in range(s):
                dg = dg.diff_q()
            if not dg:
                continue
            piece = (df * dg).scaled(Fraction(_sign(r, s) * comb(r, s)))
            term = term + piece
        if term:
            factor = i_pow * Fraction(1, 2**r * factorial(r))
            shifted = PolySymbol(
                {(m, n, k + r): c * factor for (m, n, k), c in term.terms.items()}
            )
            out = out + shifted
    return out


def poisson_bracket(f: PolySymbol, g: PolySymbol) -> PolySymbol:
    return f.diff_q() * g.diff_p() - f.diff_p() * g.diff_q()


def moyal_bracket(f: PolySymbol, g: PolySymbol) -> PolySymbol:
    """(f * g - g * f) / (i hbar); exact, polynomial in hbar^2."""
    diff = star(f, g) - star(g, f)
    out = {}
    for (m, n, k), c in diff.terms.items():
        if k < 1:
            raise AssertionError("star antisymmetrization left an hbar^0 term")
        out[(m, n, k - 1)] = c * CRat(0, -1)
    return PolySymbol(out)


_WEYL_CACHE = {}


def _weyl_monomial(m: int, n: int) -> NCPoly:
    """Average of all distinct interleavings of m qhats and n phats."""
    key = (m, n)
    if key in _WEYL_CACHE:
        return _WEYL_CACHE[key]
    total = NCPoly.zero()
    count = 0
    for q_slots in combinations(range(m + n), m):
        word = ["p"] * (m + n)
        for pos in q_slots:
            word[pos] = "q"
        total = total + NCPoly.from_word(word)
        count += 1
    result = total.scaled(Fraction(1, count)) if count else NCPoly.one()
    _WEYL_CACHE[key] = result
    return result


def weyl_quantize(f: PolySymbol) -> NCPoly:
    """Symmetric-ordering quantization of a polynomial symbol."""
    out = NCPoly.zero()
    for (m, n, k), c in f.terms.items():
        w = _weyl_monomial(m, n)
        out = out + NCPoly({(a, b, j + k): cc * c for (a, b, j), cc in w.terms.items()})
    return out


def symb(a: NCPoly) -> PolySymbol:
    """Inverse of weyl_quantize, by peeling leading words.

    The symmetrization of q^m p^n normal-orders to qhat^m phat^n plus terms
    of strictly lower total degree, so eliminating words from the top degree
    downward inverts it exactly.
    """
    work = dict(a.terms)
    out = {}
    while work:
        m, n, k = max(work, key=lambda key: (key[0] + key[1], key))
        c = work.pop((m, n, k))
        if not c:
            continue
        out[(m, n, k)] = out.get((m, n, k), CRat()) + c
        w = _weyl_monomial(m, n)
        for (a2, b2, j2), cc in w.terms.items():
            if (a2, b2, j2) == (m, n, 0):
                continue
            key2 = (a2, b2, j2 + k)
            work[key2] = work.get(key2, CRat()) - c * cc
            if not work[key2]:
                del work[key2]
    return PolySymbol(out)


def commutator(a: NCPoly, b: NCPoly) -> NCPoly:
    return a * b - b * a


def commutator_over_ihbar(a: NCPoly, b: NCPoly) -> NCPoly:
    """[a, b] / (i hbar), exact; defined because the hbar^0 part cancels."""
    diff = commutator(a, b)
    out = {}
    for (m, n, k), c in diff.terms.items():
        if k < 1:
            raise AssertionError("commutator left an hbar^0 term")
        out[(m, n, k - 1)] = c * CRat(0, -1)
    return NCPoly(out)


# ---------------------------------------------------------------------------
# text form: "3/2 q^2 p - 1/24 hbar^2 p^3 + 1/2 i hbar"
# ---------------------------------------------------------------------------

_FACTOR = re.compile(r"^(?:(?P<num>\d+(?:/\d+)?)|(?P<i>i)|(?P<var>q|p|hbar)(?:\^(?P<exp>\d+))?)$")


def parse_symbol(text: str) -> PolySymbol:
    """Parse the textual term form into an exact symbol."""
    s = text.strip()
    if not s:
        raise ValueError("empty symbol text")
    chunks = [c.strip() for c in re.findall(r"[+-]?[^+-]+", s)]
    out = PolySymbol.zero()
    for chunk in chunks:
        if not chunk:
            continue
        coeff = CRat(1)
        if chunk[0] in "+-":
            if chunk[0] == "-":
                coeff = -coeff
            chunk = chunk[1:].strip()
        m = n = k = 0
        factors = chunk.replace("*", " ").split()
        if not factors:
            raise ValueError(f"dangling sign in {text!r}")
        for factor in factors:
            mt = _FACTOR.match(factor)
            if not mt:
                raise ValueError(f"cannot parse factor {factor!r} in {text!r}")
            if mt["num"]:
                coeff = coeff * Fraction(mt["num"])
            elif mt["i"]:
                coeff = coeff * I
            else:
                exp = int(mt["exp"] or 1)
                if mt["var"] == "q":
                    m += exp
                elif mt["var"] == "p":
                    n += exp
                else:
                    k += exp
        out = out + PolySymbol.monomial(m, n, k, coeff)
    return out


def _format_rational(x: Fraction) -> str:
    return str(x)


def format_symbol(f: PolySymbol) -> str:
    """Canonical text form; complex coefficients emit separate i-terms."""
    if not f.terms:
        return "0"
    key_order = sorted(f.terms, key=lambda key: (-(key[0] + key[1]), key))
    pieces = []
    for m, n, k in key_order:
        c = f.terms[(m, n, k)]
        for part, is_imag in ((c.re, False), (c.im, True)):
            if part == 0:
                continue
            mono = []
            if is_imag:
                mono.append("i")
            if k:
                mono.append("hbar" + (f"^{k}" if k > 1 else ""))
            if m:
                mono.append("q" + (f"^{m}" if m > 1 else ""))
            if n:
                mono.append("p" + (f"^{n}" if n > 1 else ""))
            if abs(part) != 1 or not mono:
                mono.insert(0, _format_rational(abs(part)))
            pieces.append((part < 0, " ".join(mono)))
    text = ""
    for neg, body in pieces:
        if not text:
            text = ("-" if neg else "") + body
        else:
            text += (" - " if neg else " + ") + body
    return text
