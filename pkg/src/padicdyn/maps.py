"""Dynamical systems on Z_p and Q_p and their digit-function representation.

A (p^-k, p^m) locally scaling map multiplies every distance <= p^-k by
exactly p^m.  Writing l = k - m, such a map is the same thing as a family
of digit functions: output digit i < l is a function of input digits
0..k-1, and output digit i >= l is a function of input digits 0..k-l+i
that is bijective in its last argument.  :class:`DigitFunctionTable` stores
these functions as dense lookup tables and verifies bijectivity eagerly at
construction; the m = k case (l = 0, every function bijective) runs through
the same code path with an empty head.

Tables may optionally extend past their stored depth with the canonical
projection f_i(x_0..x_{k-l+i}) = x_{k-l+i} (the digit functions of a shift
power).  This keeps deep orbit evaluation affordable -- dense tables grow
as p^arity -- while the extended family is still exactly locally scaling.

Map specifications (:class:`ShiftPower`, :class:`Tj`, :class:`Rmap`, affine
maps, substitutions, tables, Mahler series, compositions) share a uniform
``apply`` contract: the result carries exactly the digits determined by the
input, computed per variant.  Specs serialize to a stable JSON form, see
``docs/mapspec.md``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .core import (
    PadicError,
    PrecisionError,
    Prime,
    QpApprox,
    ZeroAtPrecision,
    ZpApprox,
    encode_value,
    inverse_unit,
    mod_zp,
    parse_value,
)
from .mahler import MahlerSeries, mahler_eval, legendre_valuation, series_from_values


class BijectivityViolation(PadicError):
    """A digit function that must be bijective on its last variable is not."""

    def __init__(self, digit_index: int, prefix: tuple):
        self.digit_index = digit_index
        self.prefix = prefix
        super().__init__(
            f"digit function {digit_index} is not bijective on the last variable "
            f"for prefix {prefix}"
        )


class InconsistentScaling(PadicError):
    """A map's output digit depends on input digits beyond the claimed arity."""

    def __init__(self, digit_index: int, truncation: tuple, extension: tuple):
        self.digit_index = digit_index
        self.truncation = truncation
        self.extension = extension
        super().__init__(
            f"output digit {digit_index} changes when digits beyond the arity change: "
            f"truncation {truncation}, extension {extension}"
        )


class DepthExhausted(PadicError):
    """A table has no digit function at the requested output index."""


@dataclass(frozen=True, slots=True)
class ScalingClass:
    """The pair (k, m) of a (p^-k, p^m) locally scaling map, with l = k - m."""

    k: int
    m: int

    def __post_init__(self):
        if not (1 <= self.m <= self.k):
            raise ValueError(f"need 1 <= m <= k, got k={self.k}, m={self.m}")

    @property
    def l(self) -> int:
        return self.k - self.m


def _decode(idx: int, p: int, length: int) -> tuple:
    out = []
    for _ in range(length):
        idx, d = divmod(idx, p)
        out.append(d)
    return tuple(out)


def _encode(digits, p: int) -> int:
    idx = 0
    for d in reversed(digits):
        idx = idx * p + d
    return idx


@dataclass(frozen=True)
class DigitFunctionTable:
    """Dense digit-function tables for a (p^-k, p^m) locally scaling map.

    ``tables[i]`` is the function for output digit i, indexed by the
    mixed-radix encoding of its arguments (digit t contributes x_t * p^t);
    the last argument is the highest-order position.  Arity is k for i < l
    and k-l+i+1 for i >= l.  Construction verifies digit ranges, table
    sizes, and bijectivity on the last variable for every i >= l, aborting
    with a witness on failure.

    With ``tail_projection`` set, output digits at i >= len(tables) use the
    projection onto the last variable, so the map is defined at every depth.
    """

    prime: Prime
    klass: ScalingClass
    tables: tuple
    tail_projection: bool = False

    def __post_init__(self):
        if not isinstance(self.prime, Prime):
            object.__setattr__(self, "prime", Prime(self.prime))
        object.__setattr__(self, "tables", tuple(tuple(t) for t in self.tables))
        p = self.prime
        for i, table in enumerate(self.tables):
            a = self.arity(i)
            if len(table) != p**a:
                raise ValueError(
                    f"digit function {i} has {len(table)} entries, expected {p}**{a}"
                )
            for entry in table:
                if not 0 <= entry < p:
                    raise ValueError(f"digit function {i} has out-of-range entry {entry}")
            if i >= self.klass.l:
                P = p ** (a - 1)
                for prefix in range(P):
                    seen = {table[prefix + c * P] for c in range(p)}
                    if len(seen) != p:
                        raise BijectivityViolation(i, _decode(prefix, p, a - 1))

    @property
    def stored_depth(self) -> int:
        return len(self.tables)

    def arity(self, i: int) -> int:
        k, l = self.klass.k, self.klass.l
        return k if i < l else k - l + i + 1

    def has_digit(self, i: int) -> bool:
        return i < self.stored_depth or (self.tail_projection and i >= self.klass.l)

    def digit_value(self, i: int, idx: int) -> int:
        """Value of digit function i at the encoded argument tuple."""
        if i < self.stored_depth:
            return self.tables[i][idx]
        if self.tail_projection and i >= self.klass.l:
            return idx // self.prime ** (self.arity(i) - 1)
        raise DepthExhausted(f"no digit function at output index {i}")

    def eval(self, x: ZpApprox) -> ZpApprox:
        """Apply the map; the result has precision N - (k-l), capped by depth."""
        if x.prime != self.prime:
            raise PadicError(f"primes {x.prime} and {self.prime}")
        k, m, l = self.klass.k, self.klass.m, self.klass.l
        n_out = x.precision - m
        if x.precision < k or n_out < 1:
            raise PrecisionError(
                f"precision {x.precision} cannot determine any output digit of a "
                f"({self.prime}^-{k}, {self.prime}^{m}) table map"
            )
        if not self.tail_projection:
            n_out = min(n_out, self.stored_depth)
            if n_out < 1:
                raise DepthExhausted("table depth exhausted before the first digit")
        p = self.prime
        out = []
        acc = _encode(x.digits[:k], p)
        pw = p**k
        for i in range(min(l, n_out)):
            out.append(self.digit_value(i, acc))
        for i in range(l, n_out):
            acc += x.digits[k - l + i] * pw
            pw *= p
            out.append(self.digit_value(i, acc))
        return ZpApprox(p, tuple(out))


def random_table(rng, prime: int, klass: ScalingClass, depth: int, *,
                 tail_projection: bool = True) -> DigitFunctionTable:
    """A uniformly random valid table: arbitrary heads, a random permutation of
    the alphabet per prefix for every tail function."""
    p = Prime(prime)
    tables = []
    for i in range(depth):
        a = klass.k if i < klass.l else klass.k - klass.l + i + 1
        if i < klass.l:
            tables.append(tuple(rng.randrange(p) for _ in range(p**a)))
        else:
            P = p ** (a - 1)
            entries = [0] * p**a
            for prefix in range(P):
                perm = list(range(p))
                rng.shuffle(perm)
                for c in range(p):
                    entries[prefix + c * P] = perm[c]
            tables.append(tuple(entries))
    return DigitFunctionTable(p, klass, tuple(tables), tail_projection=tail_projection)


def materialize_table(table: DigitFunctionTable, depth: int) -> DigitFunctionTable:
    """Densify a table's digit functions up to the given depth."""
    p = table.prime
    tables = []
    for i in range(depth):
        a = table.arity(i)
        tables.append(tuple(table.digit_value(i, idx) for idx in range(p**a)))
    return DigitFunctionTable(p, table.klass, tuple(tables),
                              tail_projection=table.tail_projection)


def perturb_table(rng, base: DigitFunctionTable, first_digit: int, depth: int) -> DigitFunctionTable:
    """Replace the digit functions at indices >= first_digit by random ones.

    The result agrees with ``base`` on every output digit below
    ``first_digit``, so the sup-distance between the two maps is at most
    p^-first_digit, while both remain exactly locally scaling.
    """
    if first_digit < base.klass.l:
        raise ValueError("cannot perturb head digit functions below l")
    dense = materialize_table(base, first_digit)
    rand = random_table(rng, base.prime, base.klass, depth,
                        tail_projection=base.tail_projection)
    tables = dense.tables + rand.tables[first_digit:depth]
    return DigitFunctionTable(base.prime, base.klass, tables,
                              tail_projection=base.tail_projection)


def table_sup_distance_exponent(f: DigitFunctionTable, g: DigitFunctionTable,
                                depth: int) -> int | None:
    """Exact ||f - g||_inf as an exponent: the first output digit where the
    tables differ, by exhaustive comparison through ``depth``.  None means the
    maps agree on every compared digit (sup distance <= p^-depth)."""
    if f.prime != g.prime or f.klass != g.klass:
        raise PadicError("tables must share prime and scaling class")
    p = f.prime
    for i in range(depth):
        a = f.arity(i)
        for idx in range(p**a):
            if f.digit_value(i, idx) != g.digit_value(i, idx):
                return i
    return None


class MapSpec:
    """Base class for serializable map descriptions.  Subclasses set
    ``domain`` to "zp" or "qp" and implement ``apply``."""

    domain = "zp"

    def apply(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.apply(x)

    def _check_domain(self, x) -> None:
        want = QpApprox if self.domain == "qp" else ZpApprox
        if not isinstance(x, want):
            raise PadicError(
                f"domain mismatch: {type(self).__name__} acts on "
                f"{self.domain}, got {type(x).__name__}")
        if x.prime != self.prime:
            raise PadicError(f"primes {x.prime} and {self.prime}")

    def min_input_precision(self, n_out: int) -> int:
        """Input digits needed to determine n_out output digits."""
        raise NotImplementedError

    def spec_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ShiftPower(MapSpec):
    """S^m: drop the lowest m digits."""

    prime: Prime
    m: int

    def __post_init__(self):
        object.__setattr__(self, "prime", Prime(self.prime))
        if self.m < 1:
            raise ValueError("shift power must be >= 1")

    def apply(self, x: ZpApprox) -> ZpApprox:
        self._check_domain(x)
        if x.precision <= self.m:
            raise PrecisionError(f"need more than {self.m} digits to shift by {self.m}")
        return ZpApprox(x.prime, x.digits[self.m:])

    def min_input_precision(self, n_out: int) -> int:
        return n_out + self.m

    def spec_dict(self) -> dict:
        return {"type": "shift_power", "p": int(self.prime), "m": self.m}


@dataclass(frozen=True)
class Tj(MapSpec):
    """T_j: keep digits 0..j-1, then continue from digit m+j.

    T_0 is S^m.  T_j is (p^-(m+j), p^m) locally scaling and has p^(m+j)
    fixed points.
    """

    prime: Prime
    m: int
    j: int

    def __post_init__(self):
        object.__setattr__(self, "prime", Prime(self.prime))
        if self.m < 1 or self.j < 0:
            raise ValueError("need m >= 1 and j >= 0")

    def apply(self, x: ZpApprox) -> ZpApprox:
        self._check_domain(x)
        n = x.precision
        n_out = max(min(n, self.j), n - self.m)
        if n_out < 1:
            raise PrecisionError("not enough digits for T_j")
        out = [x.digits[i] if i < self.j else x.digits[self.m + i] for i in range(n_out)]
        return ZpApprox(x.prime, tuple(out))

    def min_input_precision(self, n_out: int) -> int:
        return n_out if n_out <= self.j else n_out + self.m

    def spec_dict(self) -> dict:
        return {"type": "tj", "p": int(self.prime), "m": self.m, "j": self.j}


@dataclass(frozen=True)
class Rmap(MapSpec):
    """S^m on inputs with x_0 != p-1, T_1 on inputs with x_0 = p-1.

    A (p^-(m+1), p^m) locally scaling map whose fixed-point count separates
    it from every T_j.
    """

    prime: Prime
    m: int

    def __post_init__(self):
        object.__setattr__(self, "prime", Prime(self.prime))
        if self.m < 1:
            raise ValueError("need m >= 1")

    def apply(self, x: ZpApprox) -> ZpApprox:
        self._check_domain(x)
        if x.precision <= self.m:
            raise PrecisionError("not enough digits for R")
        if x.digits[0] != self.prime - 1:
            return ZpApprox(x.prime, x.digits[self.m:])
        return Tj(self.prime, self.m, 1).apply(x)

    def min_input_precision(self, n_out: int) -> int:
        return n_out + self.m

    def spec_dict(self) -> dict:
        return {"type": "r_map", "p": int(self.prime), "m": self.m}


@dataclass(frozen=True)
class AffineZp(MapSpec):
    """z -> a z + b on Z_p; always 1-Lipschitz."""

    a: ZpApprox
    b: ZpApprox

    def __post_init__(self):
        if self.a.prime != self.b.prime:
            raise PadicError("a and b must share a prime")

    @property
    def prime(self) -> Prime:
        return self.a.prime

    def apply(self, x: ZpApprox) -> ZpApprox:
        self._check_domain(x)
        return self.a * x + self.b

    def min_input_precision(self, n_out: int) -> int:
        return n_out

    def spec_dict(self) -> dict:
        return {
            "type": "affine_zp",
            "p": int(self.prime),
            "a": encode_value(self.a),
            "b": encode_value(self.b),
        }


@dataclass(frozen=True)
class AffineQp(MapSpec):
    """z -> a z + b on Q_p, a homeomorphism for a != 0."""

    a: QpApprox
    b: QpApprox
    domain = "qp"

    def __post_init__(self):
        if self.a.prime != self.b.prime:
            raise PadicError("a and b must share a prime")
        if not any(self.a.digits):
            raise ZeroAtPrecision("a is indistinguishable from zero")

    @property
    def prime(self) -> Prime:
        return self.a.prime

    @property
    def scaling_exponent(self) -> int:
        """k with ||a||_p = p^k."""
        return -self.a.norm().exponent

    def apply(self, x: QpApprox) -> QpApprox:
        self._check_domain(x)
        return self.a * x + self.b

    def inverse_spec(self) -> "AffineQp":
        a_inv = inverse_unit(self.a)
        return AffineQp(a_inv, -(a_inv * self.b))

    def min_input_precision(self, n_out: int) -> int:
        return n_out

    def spec_dict(self) -> dict:
        return {
            "type": "affine_qp",
            "p": int(self.prime),
            "a": encode_value(self.a),
            "b": encode_value(self.b),
        }


@dataclass(frozen=True)
class GaModZp(MapSpec):
    """z -> (a z) mod Z_p on Z_p, for a in Q_p.

    For ||a||_p = p^k with k > 0 this is (p^-k, p^k) locally scaling; for
    a = 1/p it is the shift map itself.
    """

    a: QpApprox

    def __post_init__(self):
        if not any(self.a.digits):
            raise ZeroAtPrecision("a is indistinguishable from zero")

    @property
    def prime(self) -> Prime:
        return self.a.prime

    def apply(self, x: ZpApprox) -> ZpApprox:
        self._check_domain(x)
        return mod_zp(self.a * QpApprox.from_zp(x))

    def min_input_precision(self, n_out: int) -> int:
        va = self.a.normalize().valuation_offset
        return max(n_out - va, 1)

    def spec_dict(self) -> dict:
        return {"type": "ga_mod_zp", "p": int(self.prime), "a": encode_value(self.a)}


@dataclass(frozen=True)
class Substitution(MapSpec):
    """Digitwise concatenation map from letter-to-word rules; 1-Lipschitz by
    construction since a prefix of the input determines a prefix of the output."""

    prime: Prime
    rules: tuple

    def __post_init__(self):
        object.__setattr__(self, "prime", Prime(self.prime))
        object.__setattr__(self, "rules", tuple(tuple(w) for w in self.rules))
        if len(self.rules) != self.prime:
            raise ValueError(f"need one rule per letter, got {len(self.rules)}")
        for w in self.rules:
            if not w:
                raise ValueError("substitution images must be nonempty")
            for c in w:
                if not 0 <= c < self.prime:
                    raise ValueError(f"letter {c} out of range")

    def apply(self, x: ZpApprox) -> ZpApprox:
        self._check_domain(x)
        out = []
        for d in x.digits:
            out.extend(self.rules[d])
        return ZpApprox(x.prime, tuple(out))

    def min_input_precision(self, n_out: int) -> int:
        return n_out

    def spec_dict(self) -> dict:
        return {"type": "substitution", "p": int(self.prime),
                "rules": [list(w) for w in self.rules]}


@dataclass(frozen=True)
class TableMap(MapSpec):
    """A map given directly by a digit-function table."""

    table: DigitFunctionTable

    @property
    def prime(self) -> Prime:
        return self.table.prime

    def apply(self, x: ZpApprox) -> ZpApprox:
        return self.table.eval(x)

    def min_input_precision(self, n_out: int) -> int:
        k, l = self.table.klass.k, self.table.klass.l
        return k if n_out <= l else k - l + n_out

    def spec_dict(self) -> dict:
        t = self.table
        return {
            "type": "table",
            "p": int(t.prime),
            "k": t.klass.k,
            "m": t.klass.m,
            "tail_projection": t.tail_projection,
            "arities": [t.arity(i) for i in range(t.stored_depth)],
            "tables": [list(tt) for tt in t.tables],
        }


@dataclass(frozen=True)
class MahlerMap(MapSpec):
    """A map given by a truncated Mahler series."""

    series: MahlerSeries

    @property
    def prime(self) -> Prime:
        return self.series.prime

    def apply(self, x: ZpApprox) -> ZpApprox:
        self._check_domain(x)
        return mahler_eval(self.series, x)

    def min_input_precision(self, n_out: int) -> int:
        return n_out + legendre_valuation(max(self.series.terms - 1, 0), self.prime)

    def spec_dict(self) -> dict:
        return {
            "type": "mahler",
            "p": int(self.prime),
            "coefficients": [encode_value(a) for a in self.series.coefficients],
        }


@dataclass(frozen=True)
class Compose(MapSpec):
    """Apply ``parts`` in listed order: Compose([f, g]) maps x to g(f(x))."""

    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("Compose needs at least one part")
        primes = {part.prime for part in self.parts}
        if len(primes) != 1:
            raise PadicError("all parts must share a prime")

    @property
    def prime(self) -> Prime:
        return self.parts[0].prime

    @property
    def domain(self):  # type: ignore[override]
        return self.parts[0].domain

    def apply(self, x):
        for part in self.parts:
            x = part.apply(x)
        return x

    def min_input_precision(self, n_out: int) -> int:
        need = n_out
        for part in reversed(self.parts):
            need = part.min_input_precision(need)
        return need

    def spec_dict(self) -> dict:
        return {"type": "compose", "p": int(self.prime),
                "parts": [part.spec_dict() for part in self.parts]}


def scaling_class_of(spec: MapSpec) -> ScalingClass | None:
    """The known scaling class of the classical specs, None otherwise."""
    if isinstance(spec, ShiftPower):
        return ScalingClass(spec.m, spec.m)
    if isinstance(spec, Tj):
        return ScalingClass(spec.m + spec.j, spec.m)
    if isinstance(spec, Rmap):
        return ScalingClass(spec.m + 1, spec.m)
    if isinstance(spec, TableMap):
        return spec.table.klass
    if isinstance(spec, GaModZp):
        k = -spec.a.norm().exponent
        return ScalingClass(k, k) if k >= 1 else None
    return None


def table_from_spec(spec: MapSpec, depth: int | None = None) -> DigitFunctionTable:
    """Exact structural tables for the classical maps.

    Shift powers, T_j and R have projection tails, so only the l head
    functions are stored and ``tail_projection`` covers every depth.  Other
    specs go through :func:`extract_table`, which needs an explicit depth.
    """
    if isinstance(spec, TableMap):
        return spec.table
    p = spec.prime
    if isinstance(spec, ShiftPower):
        return DigitFunctionTable(p, ScalingClass(spec.m, spec.m), (), tail_projection=True)
    if isinstance(spec, Tj):
        if spec.j == 0:
            return DigitFunctionTable(p, ScalingClass(spec.m, spec.m), (), tail_projection=True)
        k = spec.m + spec.j
        heads = []
        for i in range(spec.j):
            heads.append(tuple(_decode(idx, p, k)[i] for idx in range(p**k)))
        return DigitFunctionTable(p, ScalingClass(k, spec.m), tuple(heads), tail_projection=True)
    if isinstance(spec, Rmap):
        k = spec.m + 1
        head = []
        for idx in range(p**k):
            digs = _decode(idx, p, k)
            head.append(digs[spec.m] if digs[0] != p - 1 else p - 1)
        return DigitFunctionTable(p, ScalingClass(k, spec.m), (tuple(head),), tail_projection=True)
    klass = scaling_class_of(spec)
    if klass is None or depth is None:
        raise ValueError("no structural table; use extract_table with an explicit class")
    return extract_table(spec, klass, depth)


def _eval_prefix(spec: MapSpec, prefix, n_out: int) -> ZpApprox:
    """Evaluate a Z_p spec at the exact point given by a digit prefix padded
    with zeros, with enough padding to determine n_out output digits."""
    need = max(spec.min_input_precision(n_out), len(prefix), 1)
    for attempt in range(3):
        digits = tuple(prefix) + (0,) * (need - len(prefix))
        y = spec.apply(ZpApprox(spec.prime, digits))
        if y.precision >= n_out:
            return y
        need += n_out - y.precision
    raise PrecisionError(f"cannot reach {n_out} output digits for {spec!r}")


def extract_table(spec: MapSpec, klass: ScalingClass, depth: int, *,
                  verify: bool = True, rng=None) -> DigitFunctionTable:
    """Tabulate a map's digit functions for a claimed scaling class.

    Digit function i is read off as the p^i coefficient of the map's value
    at each truncated point.  Construction verifies bijectivity on the last
    variable (aborting with a witness); with ``verify`` the tables are also
    replayed against direct evaluation on every truncation of full depth,
    plus one run with the truncations extended by nonzero padding, so a map
    whose digit i depends on digits beyond the declared arity is rejected with
    an :class:`InconsistentScaling` witness.
    """
    p = spec.prime
    k, l = klass.k, klass.l
    tables = []
    for i in range(depth):
        a = k if i < l else k - l + i + 1
        entries = []
        for idx in range(p**a):
            y = _eval_prefix(spec, _decode(idx, p, a), i + 1)
            entries.append(y.digits[i])
        tables.append(tuple(entries))
    table = DigitFunctionTable(p, klass, tuple(tables))
    if verify:
        L = max(k, k - l + depth)
        pad_width = max(spec.min_input_precision(depth) - L, 1)
        for idx in range(p**L):
            digs = _decode(idx, p, L)
            predicted = table.eval(ZpApprox(p, digs)).digits[:depth]
            for padding in ((0,) * pad_width, (p - 1,) * pad_width):
                y = spec.apply(ZpApprox(p, digs + padding))
                got = y.digits[:depth]
                if tuple(got) != tuple(predicted[:len(got)]):
                    bad = next(t for t in range(len(got)) if got[t] != predicted[t])
                    raise InconsistentScaling(bad, digs, padding)
    return table


@dataclass(frozen=True)
class IterateTable:
    """Realized digit functions of the n-th iterate of a table map.

    The iterate of a (p^-k, p^m) map is (p^-(nm+l), p^(nm)) locally scaling
    with the same head count l; ``table`` holds its digit functions.
    """

    base: DigitFunctionTable
    n: int
    table: DigitFunctionTable


def iterate_table(base: DigitFunctionTable, n: int, depth: int) -> IterateTable:
    """Materialize the digit functions of the n-th iterate.

    Built level by level: the digit functions of f^(j+1) are the base
    functions applied to the realized functions of f^j, evaluated on exactly
    the digits the composed arity provides.  Bijectivity on the last variable
    is re-verified by construction of each level's table.
    """
    if n < 1:
        raise ValueError("iterate count must be >= 1")
    k, m, l = base.klass.k, base.klass.m, base.klass.l
    p = base.prime
    cur = base
    for step in range(2, n + 1):
        K = step * m + l
        want = depth + (n - step) * m
        if base.tail_projection and want >= base.stored_depth:
            # the composed tail is a projection exactly where the base tail is
            stored, proj = max(base.stored_depth, l), True
        else:
            stored, proj = want, False
            if not base.tail_projection and base.stored_depth < stored:
                raise DepthExhausted(
                    f"base depth {base.stored_depth} cannot support iterate depth {depth}"
                )
        tables = []
        for i in range(stored):
            a = K if i < l else K - l + i + 1
            base_arity = k if i < l else k - l + i + 1
            entries = []
            for idx in range(p**a):
                z = cur.eval(ZpApprox(p, _decode(idx, p, a)))
                if z.precision < base_arity:
                    raise DepthExhausted(
                        f"iterate level {step} needs {base_arity} digits of the previous "
                        f"level, got {z.precision}"
                    )
                entries.append(base.digit_value(i, _encode(z.digits[:base_arity], p)))
            tables.append(tuple(entries))
        cur = DigitFunctionTable(p, ScalingClass(K, step * m), tuple(tables),
                                 tail_projection=proj)
    return IterateTable(base, n, cur)


def iterate(map_like, n: int, x: ZpApprox) -> ZpApprox:
    """n-fold application; precision shrinks by m per step for table maps."""
    if n < 1:
        raise ValueError("iterate count must be >= 1")
    f = map_like.eval if isinstance(map_like, DigitFunctionTable) else map_like.apply
    for _ in range(n):
        x = f(x)
    return x


def mahler_coefficients(spec: MapSpec, terms: int, precision: int) -> MahlerSeries:
    """Mahler coefficients a_0..a_terms of a Z_p spec, exactly mod p^precision."""
    p = spec.prime
    values = []
    for j in range(terms + 1):
        prefix = []
        v = j
        while v:
            v, d = divmod(v, p)
            prefix.append(d)
        y = _eval_prefix(spec, tuple(prefix), precision)
        values.append(y.truncate(precision).to_int())
    return series_from_values(p, values, precision)


_SPEC_TYPES = {}


def _register(name):
    def deco(builder):
        _SPEC_TYPES[name] = builder
        return builder

    return deco


@_register("shift_power")
def _build_shift(d):
    return ShiftPower(Prime(d["p"]), int(d["m"]))


@_register("tj")
def _build_tj(d):
    return Tj(Prime(d["p"]), int(d["m"]), int(d["j"]))


@_register("r_map")
def _build_rmap(d):
    return Rmap(Prime(d["p"]), int(d["m"]))


@_register("affine_zp")
def _build_affine_zp(d):
    return AffineZp(parse_value(d["a"], "zp"), parse_value(d["b"], "zp"))


@_register("affine_qp")
def _build_affine_qp(d):
    return AffineQp(parse_value(d["a"], "qp"), parse_value(d["b"], "qp"))


@_register("ga_mod_zp")
def _build_ga(d):
    return GaModZp(parse_value(d["a"], "qp"))


@_register("substitution")
def _build_subst(d):
    return Substitution(Prime(d["p"]), tuple(tuple(w) for w in d["rules"]))


@_register("table")
def _build_table(d):
    table = DigitFunctionTable(
        Prime(d["p"]),
        ScalingClass(int(d["k"]), int(d["m"])),
        tuple(tuple(t) for t in d["tables"]),
        tail_projection=bool(d.get("tail_projection", False)),
    )
    return TableMap(table)


@_register("mahler")
def _build_mahler(d):
    p = Prime(d["p"])
    coeffs = tuple(parse_value(a, "zp") for a in d["coefficients"])
    return MahlerMap(MahlerSeries(p, coeffs))


@_register("compose")
def _build_compose(d):
    return Compose(tuple(spec_from_dict(part) for part in d["parts"]))


def spec_from_dict(d: dict) -> MapSpec:
    try:
        builder = _SPEC_TYPES[d["type"]]
    except KeyError:
        raise ValueError(f"unknown map spec type {d.get('type')!r}") from None
    return builder(d)


def dumps_spec(spec: MapSpec) -> str:
    """Byte-stable JSON encoding (sorted keys, compact separators)."""
    return json.dumps(spec.spec_dict(), sort_keys=True, separators=(",", ":"))


def loads_spec(text: str) -> MapSpec:
    return spec_from_dict(json.loads(text))


def save_spec(spec: MapSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_spec(spec) + "\n")


def load_spec(path) -> MapSpec:
    with open(path, encoding="utf-8") as fh:
        return loads_spec(fh.read())
