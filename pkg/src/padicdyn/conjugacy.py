"""Constructive topological conjugacies on Z_p and Q_p.

Four constructions, each returning a :class:`ConjugacyMap` whose claims are
recomputable:

* ``shift_conjugacy`` -- for a (p^-k, p^k) map f, the isometry h onto S^k:
  digit qk+r of h(x) is digit r of f^q(x).  Since digit j of h(x) depends
  only on digits 0..j of x, h preserves precision exactly, and the inverse
  recovers x block by block through bijectivity on the last variable.

* ``nearby_conjugacy`` -- two locally scaling maps within the shadowing
  modulus of each other are conjugate: h(x) is the f-shadow of the g-orbit
  of x.  A finite horizon yields the digits expansivity pins down, honestly
  truncated, never completed by guesswork.

* ``affine_shell_conjugacy`` -- for a contraction z -> az on Z_p perturbed
  by a small-Lipschitz psi with psi(0) = 0, h is the shell recursion
  h(az) = a h(z) + psi(h(z)) with h = id on the unit shell; each shell maps
  onto itself, which is asserted per call.

* ``qp_affine_conjugacy`` -- a map with certified exact dilation p^k on Q_p
  is conjugate to f_{1/p^k, 0} by the isometry whose digit block j is the
  first k digits of g^j(x); backward blocks vanish because the backward
  orbit contracts to the fixed point, whose low digits are zero.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .core import (
    PadicError,
    PNorm,
    PrecisionError,
    QpApprox,
    ZeroAtPrecision,
    ZpApprox,
    distance,
    encode_value,
    inverse_unit,
    mod_zp,
    pnorm_max,
)
from .maps import (
    AffineQp,
    AffineZp,
    Compose,
    DigitFunctionTable,
    MapSpec,
    Substitution,
    table_sup_distance_exponent,
)
from .shadowing import (
    CertificationError,
    PseudoOrbit,
    _DigitStream,
    _extend_stream,
    certify_expansion,
    invert_spec,
    shadow_locally_scaling,
)


def _apply(map_like, x):
    if isinstance(map_like, DigitFunctionTable):
        return map_like.eval(x)
    return map_like.apply(x)


@dataclass(frozen=True)
class ConjugacyMap:
    """A computable conjugation h with verification metadata.

    ``isometry`` is one of "proven-by-construction", "sample-verified(n)"
    or "not-claimed"; ``details`` records the construction's certificates
    (hypothesis exponents, recorded translations, horizons).
    """

    forward: object
    tag: str
    inverse: object = None
    isometry: str = "not-claimed"
    details: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.forward(x)

    def invert(self, y):
        if self.inverse is None:
            raise PadicError(f"{self.tag}: no inverse evaluator")
        return self.inverse(y)


def conjugate_to_shift(table: DigitFunctionTable, x: ZpApprox) -> ZpApprox:
    """h(x) for a class-(k,k) table map: blocks of f-iterate digits.

    Digit qk+r of h(x) is digit r of f^q(x), which depends only on digits
    0..qk+r of x, so the result has x's full precision.
    """
    if table.klass.m != table.klass.k:
        raise PadicError(f"shift conjugation needs class (k,k), got {table.klass}")
    k = table.klass.k
    out = []
    z = x
    while True:
        out.extend(z.digits[: min(k, x.precision - len(out))])
        if len(out) >= x.precision:
            break
        z = table.eval(z)
    return ZpApprox(x.prime, tuple(out))


def invert_shift_conjugacy(table: DigitFunctionTable, y: ZpApprox) -> ZpApprox:
    """Recover x with h(x) = y, block by block.

    Block 0 of y is x's first k digits; digit nk+r of y equals the realized
    digit function g_r^(n) at x's prefix, whose last variable is solved by
    trying the p candidates against the lazily maintained iterate streams.
    """
    if table.klass.m != table.klass.k:
        raise PadicError(f"shift conjugation needs class (k,k), got {table.klass}")
    k = table.klass.k
    p = table.prime
    N = y.precision
    xs = _DigitStream(p, y.digits[: min(k, N)])
    levels = [xs]
    while len(xs) < N:
        u = len(xs)
        n_block = u // k
        while len(levels) <= n_block:
            levels.append(_DigitStream(p))
            for j in range(1, len(levels)):
                _extend_stream(table, levels[j - 1], levels[j])
        found = None
        for c in range(p):
            d = c
            for j in range(1, n_block + 1):
                prev = levels[j - 1]
                idx = prev.prefix_index(len(prev)) + d * prev.pw[len(prev)]
                d = table.digit_value(len(levels[j]), idx)
            if d == y.digits[u]:
                if found is not None:
                    raise PadicError(
                        f"invert: two candidates at digit {u} (corrupt table)")
                found = c
        if found is None:
            raise PadicError(f"invert: no candidate at digit {u} (corrupt table)")
        xs.append(found)
        for j in range(1, len(levels)):
            _extend_stream(table, levels[j - 1], levels[j])
    return ZpApprox(p, tuple(xs.digits))


def shift_conjugacy(table: DigitFunctionTable) -> ConjugacyMap:
    """The isometry conjugating a class-(k,k) table map to S^k."""
    return ConjugacyMap(
        forward=lambda x: conjugate_to_shift(table, x),
        inverse=lambda y: invert_shift_conjugacy(table, y),
        tag="to-shift-power",
        isometry="proven-by-construction",
        details={"k": table.klass.k},
    )


def conjugate_nearby(f_table: DigitFunctionTable, g_map, x: ZpApprox,
                     horizon: int, s: int = 0) -> ZpApprox:
    """h(x): the f-shadow of the g-orbit of x.

    Valid when ||f - g||_inf is within the shadowing modulus of f; the
    g-orbit of x is then a certified pseudo-orbit of f and the digit solver
    produces the unique shadow.  The returned value carries exactly the
    digits the horizon determines (k + s + horizon*m of them).
    """
    k, m, l = f_table.klass.k, f_table.klass.m, f_table.klass.l
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    need = k + s + horizon * m
    if x.precision < need:
        raise PrecisionError(
            f"horizon {horizon} needs {need} digits of x, got {x.precision}")
    points = [x]
    for _ in range(horizon):
        points.append(_apply(g_map, points[-1]))
    orbit = PseudoOrbit.from_map(f_table, points)
    delta_exp = (l + s) if m < k else (k + s)
    if not orbit.certified_delta.leq_pow(delta_exp):
        raise CertificationError(
            f"||f-g|| hypothesis violated along the orbit: residuals reach "
            f"{orbit.certified_delta.describe(f_table.prime)}, need <= "
            f"p^-{delta_exp}")
    return shadow_locally_scaling(f_table, orbit, s).point


def nearby_conjugacy(f_table: DigitFunctionTable, g_table: DigitFunctionTable,
                     horizon: int, s: int = 0, *,
                     hypothesis_depth: int | None = None) -> ConjugacyMap:
    """The conjugation h of two nearby locally scaling maps, plus its inverse
    built with the roles of f and g swapped.

    The hypothesis ||f-g||_inf <= p^-(l+s) (p^-(k+s) for m = k) is checked
    exactly by exhaustive table comparison through ``hypothesis_depth``.
    """
    k, m, l = f_table.klass.k, f_table.klass.m, f_table.klass.l
    delta_exp = (l + s) if m < k else (k + s)
    depth = hypothesis_depth if hypothesis_depth is not None else delta_exp
    i0 = table_sup_distance_exponent(f_table, g_table, depth)
    if i0 is not None and i0 < delta_exp:
        raise CertificationError(
            f"||f-g||_inf = p^-{i0} exceeds the shadowing modulus p^-{delta_exp}")
    return ConjugacyMap(
        forward=lambda x: conjugate_nearby(f_table, g_table, x, horizon, s),
        inverse=lambda y: conjugate_nearby(g_table, f_table, y, horizon, s),
        tag="nearby",
        isometry="not-claimed",
        details={"horizon": horizon, "s": s,
                 "sup_distance_exponent": i0, "delta_exponent": delta_exp},
    )


def certify_contraction_factor(psi: MapSpec, min_exponent: int, *,
                               samples: int = 256, precision: int = 12,
                               seed: int = 0) -> str:
    """Certify ||psi(x)-psi(y)|| <= p^-min_exponent * ||x-y||.

    Affine maps and compositions carry the bound structurally; otherwise
    seeded sample pairs are checked and the method is recorded as sampled.
    """
    if isinstance(psi, AffineZp):
        va = psi.a.norm()
        if va.leq_pow(min_exponent):
            return "structural:affine"
        raise CertificationError(
            f"Lipschitz factor ||a|| = {va.describe(psi.prime)} exceeds "
            f"p^-{min_exponent}")
    if isinstance(psi, Compose):
        # a composition is as contracting as its parts' exponents sum to
        total = 0
        for part in psi.parts:
            if isinstance(part, AffineZp):
                na = part.a.norm()
                if not na.exact:
                    raise CertificationError("affine factor has no exact norm")
                total += na.exponent
            elif isinstance(part, Substitution):
                total += 0  # 1-Lipschitz
            else:
                return _sampled_contraction(psi, min_exponent, samples, precision, seed)
        if total >= min_exponent:
            return "structural:composition"
        raise CertificationError(
            f"composition contracts by p^-{total}, need p^-{min_exponent}")
    return _sampled_contraction(psi, min_exponent, samples, precision, seed)


def _sampled_contraction(psi, min_exponent, samples, precision, seed):
    rng = random.Random(seed)
    p = psi.prime
    for _ in range(samples):
        x = ZpApprox(p, tuple(rng.randrange(p) for _ in range(precision)))
        y = ZpApprox(p, tuple(rng.randrange(p) for _ in range(precision)))
        din = distance(x, y)
        if not din.exact:
            continue
        dout = distance(psi.apply(x), psi.apply(y))
        if dout.gt_pow(din.exponent + min_exponent):
            raise CertificationError(
                f"pair contracts by only {dout.describe(p)} at distance "
                f"{din.describe(p)}: x={encode_value(x)}, y={encode_value(y)}")
    return f"sampled:{samples}"


def _zp_scale(a: ZpApprox, x: ZpApprox) -> ZpApprox:
    return a * x


def _fixed_point_of_contraction(a: ZpApprox, psi: MapSpec, precision: int,
                                budget: int = 64) -> ZpApprox:
    """The unique fixed point of z -> a z + psi(z) on Z_p, by iteration."""
    p = a.prime
    z = ZpApprox.from_int(0, p, precision)
    for _ in range(budget):
        nxt = _zp_scale(a, z) + psi.apply(z)
        if nxt.digits == z.digits[: nxt.precision]:
            return nxt
        z = nxt
    raise CertificationError("fixed-point iteration did not stabilize in budget")


def affine_shell_conjugacy(a: ZpApprox, psi: MapSpec, z: ZpApprox) -> ZpApprox:
    """Evaluate the shell-recursion conjugation h at z.

    Requires ||a|| = p^-K < 1 and psi with psi(0) = 0 and Lipschitz factor
    <= p^-(K+1) (certified by the builder).  z's shell index n comes from
    its exact norm; h is the n-fold application of u -> a u + psi(u) to the
    unit-shell representative z / a^n, and the result is asserted to land
    back in z's shell.
    """
    nz = z.norm()
    if not nz.exact:
        return z  # zero at precision: h(0) = 0
    na = a.norm()
    if not na.exact or na.exponent < 1:
        raise ZeroAtPrecision("need ||a|| < 1 with an exact norm")
    K = na.exponent
    n = nz.exponent // K
    p = a.prime
    if n == 0:
        return z
    a_inv_pow = inverse_unit(a)
    w_q = QpApprox.from_zp(z)
    for _ in range(n):
        w_q = w_q * a_inv_pow
    w = mod_zp(w_q)
    cur = w
    for _ in range(n):
        cur = _zp_scale(a, cur) + psi.apply(cur)
    got = cur.norm()
    if not (got.exact and got.exponent == nz.exponent):
        raise CertificationError(
            f"shell assertion failed: ||z|| = {nz.describe(p)} but "
            f"||h(z)|| = {got.describe(p)} (bad psi certificate)")
    return cur


def affine_shell_conjugacy_map(a: ZpApprox, psi: MapSpec, *,
                               precision: int | None = None) -> ConjugacyMap:
    """The conjugation between z -> az and z -> az + psi(z) on Z_p.

    If psi(0) != 0 at the working precision, the perturbed map is first
    translated to its fixed point so the normalized psi vanishes at 0; the
    translation is recorded and composed into the returned evaluators.
    """
    na = a.norm()
    if not na.exact or na.exponent < 1:
        raise ZeroAtPrecision("need ||a|| < 1 with an exact norm")
    K = na.exponent
    method = certify_contraction_factor(psi, K + 1)
    p = a.prime
    work = precision if precision is not None else a.precision
    psi0 = psi.apply(ZpApprox.from_int(0, p, work))
    translation = None
    psi_eff = psi
    if any(psi0.digits):
        z_g = _fixed_point_of_contraction(a, psi, work)
        translation = z_g

        class _Normalized(MapSpec):
            prime = p

            def apply(self, u):
                zg = z_g if z_g.precision <= u.precision else z_g.truncate(u.precision)
                return psi.apply(u + zg) - psi.apply(zg)

            def min_input_precision(self, n_out):
                return psi.min_input_precision(n_out)

        psi_eff = _Normalized()

    def forward(z):
        h = affine_shell_conjugacy(a, psi_eff, z)
        if translation is not None:
            zg = translation if translation.precision <= h.precision \
                else translation.truncate(h.precision)
            return h + zg
        return h

    def inverse(y):
        if translation is not None:
            zg = translation if translation.precision <= y.precision \
                else translation.truncate(y.precision)
            y = y - zg
        return _invert_shell(a, psi_eff, y)

    return ConjugacyMap(
        forward=forward,
        inverse=inverse,
        tag="affine-shell",
        isometry="proven-by-construction",  # shell-preserving: ||h(z)|| = ||z||
        details={
            "contraction_exponent": K,
            "lipschitz_certificate": method,
            "translation": None if translation is None else encode_value(translation),
        },
    )


def _invert_shell(a: ZpApprox, psi: MapSpec, y: ZpApprox, budget: int = 64) -> ZpApprox:
    """Invert the shell recursion: peel one shell at a time via the
    contraction t -> (y - psi(t)) / a, then scale the unit-shell
    representative back up by a^n."""
    ny = y.norm()
    if not ny.exact:
        return y
    K = a.norm().exponent
    n = ny.exponent // K
    if n == 0:
        return y
    a_inv = inverse_unit(a)
    cur = y
    for _ in range(n):
        t = cur
        for _ in range(budget):
            w_q = QpApprox.from_zp(cur - psi.apply(t)) * a_inv
            nxt = mod_zp(w_q)
            if nxt.digits == t.digits[: nxt.precision]:
                t = nxt
                break
            t = nxt
        cur = t
    for _ in range(n):
        cur = a * cur
    return cur


def _affine_translation(g: AffineQp) -> QpApprox:
    """b / (1 - a), the fixed point of z -> az + b (needs ||a|| != 1)."""
    p = g.prime
    one = QpApprox.from_int(1, p, max(len(g.a.digits), len(g.b.digits)))
    return inverse_unit(one - g.a) * g.b


def qp_affine_conjugacy(g: MapSpec, x: QpApprox, horizon: int) -> QpApprox:
    """h(x) for a certified exact dilation or contraction on Q_p.

    For dilation constant p^k (k > 0), digit block j of h(x) holds digits
    0..k-1 of g^j(x); backward blocks are filled through the inverse until
    the backward orbit's valuation certifies that every remaining block is
    zero.  For k < 0 the same construction runs on g^-1, which conjugates g
    to f_{1/p^k, 0} with k's original sign.  Affine g with b != 0 is first
    translated by its fixed point b/(1-a) (so the orbit iteration is a pure
    scalar multiplication and the backward fixed point is 0).
    """
    k = certify_expansion(g)
    if k == 0:
        raise CertificationError("||a|| = 1 is not an exact dilation or contraction")
    K = abs(k)
    p = g.prime
    if isinstance(g, AffineQp):
        if any(g.b.digits):
            x = x - _affine_translation(g)
        a, a_inv = g.a, inverse_unit(g.a)
        if k > 0:
            fwd_step, bwd_step = (lambda z: a * z), (lambda z: a_inv * z)
        else:
            fwd_step, bwd_step = (lambda z: a_inv * z), (lambda z: a * z)
    else:
        g_inv = invert_spec(g)
        fwd, bwd = (g, g_inv) if k > 0 else (g_inv, g)
        fwd_step, bwd_step = fwd.apply, bwd.apply

    blocks: dict[int, tuple] = {}
    cur = x
    j = 0
    while j <= horizon and cur.window_end >= K:
        blocks[j] = tuple(cur.digit_at(i) for i in range(K))
        cur = fwd_step(cur)
        j += 1
    if not blocks:
        raise PrecisionError("window too short to read even the 0-th block")
    j_max = max(blocks)

    cur = x
    j = 0
    while True:
        cur = bwd_step(cur)
        j -= 1
        if cur.norm().leq_pow(K):
            # contracted into p^K Z_p: this and every earlier block is zero
            break
        if j < -horizon:
            raise CertificationError(
                "backward blocks did not vanish within the horizon budget")
        if cur.window_end < K:
            raise PrecisionError("window too short to read a backward block")
        blocks[j] = tuple(cur.digit_at(i) for i in range(K))
    j_min = min(blocks)

    digits = []
    for jj in range(j_min, j_max + 1):
        digits.extend(blocks[jj])
    return QpApprox(p, j_min * K, tuple(digits)).normalize()


def qp_affine_conjugacy_map(g: MapSpec, horizon: int) -> ConjugacyMap:
    """The isometry conjugating a certified ||a|| != 1 map to f_{1/p^k, 0}."""
    k = certify_expansion(g)
    translation = None
    if isinstance(g, AffineQp) and any(g.b.digits):
        translation = _affine_translation(g)
    return ConjugacyMap(
        forward=lambda x: qp_affine_conjugacy(g, x, horizon),
        tag="qp-affine",
        isometry="proven-by-construction",
        details={
            "dilation_exponent": k,
            "horizon": horizon,
            "translation": None if translation is None else encode_value(translation),
        },
    )


@dataclass(frozen=True)
class ConjugacyReport:
    samples_checked: int
    semiconjugacy_ok: bool
    max_semiconjugacy_residual: PNorm | None
    isometry_deviations: tuple
    injectivity_collisions: tuple

    def as_dict(self, p: int) -> dict:
        return {
            "samples_checked": self.samples_checked,
            "semiconjugacy_ok": self.semiconjugacy_ok,
            "max_semiconjugacy_residual": (
                None if self.max_semiconjugacy_residual is None
                else self.max_semiconjugacy_residual.describe(p)),
            "isometry_deviations": [
                [encode_value(x), encode_value(y)] for x, y in self.isometry_deviations],
            "injectivity_collisions": [
                [encode_value(x), encode_value(y)] for x, y in self.injectivity_collisions],
        }


def verify_conjugacy(h, f_map, g_map, samples) -> ConjugacyReport:
    """Measure the defining identities of a conjugation on sample points.

    Semiconjugacy residuals d(f(h(x)), h(g(x))) must all be below precision
    on the determined overlap; isometry deviations and injectivity
    collisions among the samples are collected as witnesses.  This is pure
    measurement: nothing is asserted, everything is reported.
    """
    hf = h.forward if isinstance(h, ConjugacyMap) else h
    samples = list(samples)
    residuals = []
    for x in samples:
        lhs = _apply(f_map, hf(x))
        rhs = hf(_apply(g_map, x))
        residuals.append(distance(lhs, rhs))
    bad = [r for r in residuals if r.exact]
    deviations = []
    collisions = []
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            din = distance(samples[i], samples[j])
            dout = distance(hf(samples[i]), hf(samples[j]))
            if din.exact and not dout.exact:
                collisions.append((samples[i], samples[j]))
            elif din.exact and dout.exact and din.exponent != dout.exponent:
                deviations.append((samples[i], samples[j]))
    return ConjugacyReport(
        samples_checked=len(samples),
        semiconjugacy_ok=not bad,
        max_semiconjugacy_residual=pnorm_max(residuals) if residuals else None,
        isometry_deviations=tuple(deviations),
        injectivity_collisions=tuple(collisions),
    )
