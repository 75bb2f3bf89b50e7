"""Exact finite-precision arithmetic on Z_p and Q_p.

Values are digit vectors in base p.  A ``ZpApprox`` stores the coefficients
of p^0 .. p^(N-1) and represents an element of Z_p known modulo p^N.  A
``QpApprox`` stores a digit window [v, v+N) and represents an element of
Q_p known up to O(p^(v+N)); digits below the window start are exactly zero.
Every operation returns exactly the digits determined by its inputs, never
a padded or heuristically rounded value.

Norms and distances are powers of p and are reported as a :class:`PNorm`,
which distinguishes the exactly known value p^-e from the certified bound
"<= p^-e" that is all one can say when two values agree on every digit in
the window.  Finite precision can never certify equality, so there is no
"zero" norm.

All value types are immutable; operations are pure functions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class PadicError(Exception):
    """Base class for all errors raised by this package."""


class PrimeMismatch(PadicError):
    """Two values with different primes were combined."""


class PrecisionError(PadicError):
    """An operation cannot determine even one digit of its result."""


class ZeroAtPrecision(PadicError):
    """A value indistinguishable from zero was used where a unit is needed."""


class Prime(int):
    """A prime base, validated by deterministic trial division."""

    def __new__(cls, p: int) -> "Prime":
        p = int(p)
        if p < 2:
            raise ValueError(f"not a prime: {p}")
        d = 2
        while d * d <= p:
            if p % d == 0:
                raise ValueError(f"not a prime: {p}")
            d += 1
        return super().__new__(cls, p)


@dataclass(frozen=True, slots=True)
class PNorm:
    """A p-adic norm or distance, exact or bounded.

    ``PNorm(e)`` is the exact value p^-e; ``PNorm(e, exact=False)`` is the
    certified bound <= p^-e (all compared digits agreed, so only the window
    end is known).  A bound never compares equal to an exact value.
    """

    exponent: int
    exact: bool = True

    def leq_pow(self, e: int) -> bool:
        """Certified ``value <= p^-e``.  Holds for exact values and bounds alike."""
        return self.exponent >= e

    def gt_pow(self, e: int) -> bool:
        """Certified ``value > p^-e``.  Only an exact norm can certify this."""
        return self.exact and self.exponent < e

    def describe(self, p: int) -> str:
        if self.exact:
            return f"{p}^-{self.exponent}" if self.exponent >= 0 else f"{p}^{-self.exponent}"
        return f"<={p}^-{self.exponent}" if self.exponent >= 0 else f"<={p}^{-self.exponent}"


def pnorm_max(norms) -> PNorm:
    """Largest of several norms, honestly.

    If the largest exact value dominates every bound it is returned exactly;
    otherwise only the weakest bound can be certified and a bound is returned.
    """
    norms = list(norms)
    if not norms:
        raise ValueError("pnorm_max of empty sequence")
    exacts = [n.exponent for n in norms if n.exact]
    bounds = [n.exponent for n in norms if not n.exact]
    if not bounds:
        return PNorm(min(exacts))
    if not exacts:
        return PNorm(min(bounds), exact=False)
    ee, eb = min(exacts), min(bounds)
    if ee <= eb:
        return PNorm(ee)
    return PNorm(eb, exact=False)


def _check_digits(digits, p):
    for d in digits:
        if not 0 <= d < p:
            raise ValueError(f"digit {d} out of range [0, {p})")


def _int_from_digits(digits, p: int) -> int:
    value = 0
    for d in reversed(digits):
        value = value * p + d
    return value


def _digits_from_int(value: int, p: int, length: int) -> tuple:
    out = []
    for _ in range(length):
        value, d = divmod(value, p)
        out.append(d)
    return tuple(out)


@dataclass(frozen=True, slots=True)
class ZpApprox:
    """An element of Z_p known to ``len(digits)`` base-p digits.

    ``digits[i]`` is the coefficient of p^i.  Two values are
    equal-at-precision iff primes, lengths and all digits agree
    (dataclass equality).  Negative integers embed via their p-adic
    complement, e.g. -1 becomes all digits p-1.
    """

    prime: Prime
    digits: tuple

    def __post_init__(self):
        if not isinstance(self.prime, Prime):
            object.__setattr__(self, "prime", Prime(self.prime))
        if not isinstance(self.digits, tuple):
            object.__setattr__(self, "digits", tuple(self.digits))
        if len(self.digits) < 1:
            raise PrecisionError("a ZpApprox needs at least one digit")
        _check_digits(self.digits, self.prime)

    @classmethod
    def from_int(cls, value: int, prime: int, precision: int) -> "ZpApprox":
        p = Prime(prime)
        return cls(p, _digits_from_int(value % p**precision, p, precision))

    @property
    def precision(self) -> int:
        return len(self.digits)

    def to_int(self) -> int:
        return _int_from_digits(self.digits, self.prime)

    def truncate(self, n: int) -> "ZpApprox":
        if not 1 <= n <= len(self.digits):
            raise PrecisionError(f"cannot truncate precision {len(self.digits)} to {n}")
        return ZpApprox(self.prime, self.digits[:n])

    def norm(self) -> PNorm:
        for i, d in enumerate(self.digits):
            if d:
                return PNorm(i)
        return PNorm(self.precision, exact=False)

    def _combine(self, other, op):
        if not isinstance(other, ZpApprox):
            return NotImplemented
        if self.prime != other.prime:
            raise PrimeMismatch(f"primes {self.prime} and {other.prime}")
        n = min(self.precision, other.precision)
        p = self.prime
        value = op(_int_from_digits(self.digits[:n], p), _int_from_digits(other.digits[:n], p))
        return ZpApprox(p, _digits_from_int(value % p**n, p, n))

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __mul__(self, other):
        # a factor of valuation v determines v extra digits of the product:
        # the error is x*O(p^Ny) + y*O(p^Nx), of norm <= p^-min(vx+Ny, vy+Nx)
        if not isinstance(other, ZpApprox):
            return NotImplemented
        if self.prime != other.prime:
            raise PrimeMismatch(f"primes {self.prime} and {other.prime}")
        p = self.prime
        vx = next((i for i, d in enumerate(self.digits) if d), self.precision)
        vy = next((i for i, d in enumerate(other.digits) if d), other.precision)
        n = min(vx + other.precision, vy + self.precision)
        value = self.to_int() * other.to_int()
        return ZpApprox(p, _digits_from_int(value % p**n, p, n))

    def __neg__(self):
        p = self.prime
        n = self.precision
        return ZpApprox(p, _digits_from_int(-self.to_int() % p**n, p, n))

    def __str__(self):
        return encode_value(self)


@dataclass(frozen=True, slots=True)
class QpApprox:
    """An element of Q_p known on the digit window [v, v+N).

    ``digits[i]`` is the coefficient of p^(v+i).  Digits below the window
    are exactly zero; nothing is known from p^(v+N) on.  Canonical form has
    a nonzero leading digit (or an all-zero window, which represents a value
    of norm <= p^-(v+N)); :meth:`normalize` shifts the window start forward
    past leading zeros.
    """

    prime: Prime
    valuation_offset: int
    digits: tuple

    def __post_init__(self):
        if not isinstance(self.prime, Prime):
            object.__setattr__(self, "prime", Prime(self.prime))
        if not isinstance(self.digits, tuple):
            object.__setattr__(self, "digits", tuple(self.digits))
        if len(self.digits) < 1:
            raise PrecisionError("a QpApprox needs a nonempty window")
        _check_digits(self.digits, self.prime)

    @classmethod
    def from_zp(cls, x: ZpApprox) -> "QpApprox":
        return cls(x.prime, 0, x.digits)

    @classmethod
    def from_int(cls, value: int, prime: int, precision: int, v: int = 0) -> "QpApprox":
        p = Prime(prime)
        return cls(p, v, _digits_from_int(value % p**precision, p, precision))

    @property
    def window_end(self) -> int:
        return self.valuation_offset + len(self.digits)

    @property
    def width(self) -> int:
        return len(self.digits)

    @property
    def is_canonical(self) -> bool:
        return self.digits[0] != 0 or not any(self.digits)

    def normalize(self) -> "QpApprox":
        """Drop leading zero digits, shifting the window start forward."""
        if self.is_canonical:
            return self
        i = 0
        while i < len(self.digits) and self.digits[i] == 0:
            i += 1
        return QpApprox(self.prime, self.valuation_offset + i, self.digits[i:])

    def digit_at(self, i: int) -> int:
        """Digit of p^i; exactly zero below the window, an error above it."""
        if i < self.valuation_offset:
            return 0
        if i >= self.window_end:
            raise PrecisionError(f"digit p^{i} is beyond the window end {self.window_end}")
        return self.digits[i - self.valuation_offset]

    def shift(self, j: int) -> "QpApprox":
        """Multiply by p^j (an exact window shift)."""
        return QpApprox(self.prime, self.valuation_offset + j, self.digits)

    def norm(self) -> PNorm:
        for i, d in enumerate(self.digits):
            if d:
                return PNorm(self.valuation_offset + i)
        return PNorm(self.window_end, exact=False)

    def _addsub(self, other, sign):
        if not isinstance(other, QpApprox):
            return NotImplemented
        if self.prime != other.prime:
            raise PrimeMismatch(f"primes {self.prime} and {other.prime}")
        p = self.prime
        v = min(self.valuation_offset, other.valuation_offset)
        end = min(self.window_end, other.window_end)
        if end <= v:
            raise PrecisionError("empty overlap of Q_p windows")
        a = _int_from_digits([self.digit_at(i) for i in range(v, end)], p)
        b = _int_from_digits([other.digit_at(i) for i in range(v, end)], p)
        n = end - v
        return QpApprox(p, v, _digits_from_int((a + sign * b) % p**n, p, n))

    def __add__(self, other):
        return self._addsub(other, 1)

    def __sub__(self, other):
        return self._addsub(other, -1)

    def __neg__(self):
        p = self.prime
        n = len(self.digits)
        value = -_int_from_digits(self.digits, p) % p**n
        return QpApprox(p, self.valuation_offset, _digits_from_int(value, p, n))

    def __mul__(self, other):
        if not isinstance(other, QpApprox):
            return NotImplemented
        if self.prime != other.prime:
            raise PrimeMismatch(f"primes {self.prime} and {other.prime}")
        # leading zeros carry no information; normalizing first keeps every
        # digit the factors determine
        a, b = self.normalize(), other.normalize()
        p = a.prime
        n = min(len(a.digits), len(b.digits))
        value = _int_from_digits(a.digits, p) * _int_from_digits(b.digits, p)
        return QpApprox(
            p,
            a.valuation_offset + b.valuation_offset,
            _digits_from_int(value % p**n, p, n),
        )

    def __str__(self):
        return encode_value(self)


def norm(x) -> PNorm:
    return x.norm()


def distance(x, y) -> PNorm:
    """Ultrametric distance, i.e. the norm of the difference.

    For digit vectors this is p^-j with j the first index where the digits
    differ, or the bound <= p^-(window end) when every compared digit agrees.
    """
    return (x - y).norm()


def mod_zp(x: QpApprox) -> ZpApprox:
    """Drop all digits at negative indices (the map z -> z mod Z_p).

    The result keeps every nonnegative-index digit the input determines;
    digits between index 0 and a positive window start are exactly zero.
    """
    end = x.window_end
    if end <= 0:
        raise PrecisionError("no nonnegative digits are determined")
    return ZpApprox(x.prime, tuple(x.digit_at(i) for i in range(end)))


def _invmod_prime_power(u: int, p: int, n: int) -> int:
    # Hensel lifting: double the number of correct digits per step.
    inv = pow(u % p, -1, p)
    q = p
    while q < p**n:
        q = q * q
        inv = inv * (2 - u * inv) % q
    return inv % p**n


def inverse_unit(a) -> QpApprox:
    """Invert a nonzero value: factor out p^val(a), Hensel-invert the unit.

    Accepts a ZpApprox or QpApprox; the result is a QpApprox whose width
    equals the number of digits of ``a`` from its leading nonzero digit on.
    Raises :class:`ZeroAtPrecision` if ``a`` has no nonzero digit.
    """
    if isinstance(a, ZpApprox):
        a = QpApprox.from_zp(a)
    a = a.normalize()
    if a.digits[0] == 0:
        raise ZeroAtPrecision("cannot invert a value indistinguishable from zero")
    p = a.prime
    n = len(a.digits)
    inv = _invmod_prime_power(_int_from_digits(a.digits, p), p, n)
    return QpApprox(p, -a.valuation_offset, _digits_from_int(inv, p, n))


_VALUE_RE = re.compile(r"^\s*(\d+)\^(-?\d+)\s*\*\s*\[([0-9 ]*)\]\s*$")


def encode_value(x) -> str:
    """Textual encoding ``p^v * [d0 d1 ...]``, digits little-endian from the window start."""
    if isinstance(x, ZpApprox):
        v, digits = 0, x.digits
    else:
        v, digits = x.valuation_offset, x.digits
    return f"{x.prime}^{v} * [{' '.join(str(d) for d in digits)}]"


def parse_value(text: str, domain: str | None = None):
    """Parse the ``p^v * [d0 d1 ...]`` encoding.

    ``domain`` may be "zp" (requires v = 0) or "qp"; by default v = 0 parses
    to a ZpApprox and anything else to a QpApprox.  Round-trips with
    :func:`encode_value` digit for digit.
    """
    m = _VALUE_RE.match(text)
    if m is None:
        raise ValueError(f"not a p-adic value encoding: {text!r}")
    p = Prime(int(m.group(1)))
    v = int(m.group(2))
    digits = tuple(int(t) for t in m.group(3).split())
    if domain is None:
        domain = "zp" if v == 0 else "qp"
    if domain == "zp":
        if v != 0:
            raise ValueError(f"a Z_p value must have window start 0, got {v}")
        return ZpApprox(p, digits)
    if domain == "qp":
        return QpApprox(p, v, digits)
    raise ValueError(f"unknown domain {domain!r}")
