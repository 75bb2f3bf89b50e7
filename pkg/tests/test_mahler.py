"""Mahler coefficients by finite differences, binomial evaluation, 1-Lipschitz criterion."""

import math

import pytest

from padicdyn.core import PrecisionError, Prime, ZpApprox
from padicdyn.mahler import (
    MahlerSeries,
    binomial_value,
    legendre_valuation,
    mahler_eval,
    one_lipschitz_report,
    series_from_values,
)
from padicdyn.maps import AffineZp, ShiftPower, Substitution, Tj, mahler_coefficients


def test_legendre_valuation():
    for n in range(1, 60):
        for p in (2, 3, 5):
            v = 0
            f = math.factorial(n)
            while f % p == 0:
                f //= p
                v += 1
            assert legendre_valuation(n, p) == v


def test_identity_series():
    # x = C(x,1): a_0 = 0, a_1 = 1, the rest vanish
    spec = AffineZp(ZpApprox.from_int(1, 3, 10), ZpApprox.from_int(0, 3, 10))
    series = mahler_coefficients(spec, 5, 8)
    ints = [a.to_int() for a in series.coefficients]
    assert ints == [0, 1, 0, 0, 0, 0]


def test_a0_is_f_at_zero():
    for spec in [ShiftPower(Prime(2), 1), Tj(Prime(3), 1, 1),
                 Substitution(Prime(2), ((1, 0), (0,)))]:
        series = mahler_coefficients(spec, 3, 8)
        p = spec.prime
        fzero = spec.apply(ZpApprox.from_int(0, p, 16))
        assert series.coefficients[0].digits[:8] == fzero.digits[:8]


def test_shift_power_coefficient_facts():
    # a_n = 0 for n < p^k and a_{p^k} = 1, checked mod p^8
    for p in (2, 3):
        for k in (1, 2):
            M = p**k + 2
            series = mahler_coefficients(ShiftPower(Prime(p), k), M, 8)
            ints = [a.to_int() for a in series.coefficients]
            assert all(c == 0 for c in ints[: p**k])
            assert ints[p**k] == 1


def test_binomial_value_at_integers():
    p, n_prec = 3, 10
    for v in range(20):
        x = ZpApprox.from_int(v, p, n_prec)
        for n in range(5):
            got = binomial_value(x, n)
            assert got.to_int() % p**got.precision == math.comb(v, n) % p**got.precision


def test_binomial_precision_underflow_reported():
    x = ZpApprox.from_int(7, 2, 10)
    # v_2(16!) = 15 >= 10: the denominator valuation eats the precision
    with pytest.raises(PrecisionError):
        binomial_value(x, 16)


def test_mahler_round_trip_tj():
    # mahler_eval(mahler_coefficients(f)) reproduces f at integer points
    spec = Tj(Prime(2), 1, 1)
    series = mahler_coefficients(spec, 16, 8)
    for v in range(2**4):
        x = ZpApprox.from_int(v, 2, 24)
        got = mahler_eval(series, x)
        want = spec.apply(ZpApprox.from_int(v, 2, 25))
        n = min(got.precision, want.precision)
        assert got.digits[:n] == want.digits[:n]
        # the binding term: coefficients known mod 2^8, binomials to 24 - v(16!)
        assert got.precision == min(8, 24 - legendre_valuation(16, 2))


def test_one_lipschitz_substitution_passes():
    sub = Substitution(Prime(2), ((0, 1), (0,)))
    series = mahler_coefficients(sub, 12, 8)
    report = one_lipschitz_report(series)
    assert report.passed
    assert report.first_violation is None


def test_one_lipschitz_shift_fails_at_p_to_k():
    for p in (2, 3):
        for k in (1, 2):
            series = mahler_coefficients(ShiftPower(Prime(p), k), p**k + 2, 8)
            report = one_lipschitz_report(series)
            assert not report.passed
            assert report.first_violation == p**k


def test_one_lipschitz_scaled_violation_witness():
    # take a passing series and scale one coefficient up to a unit
    sub = Substitution(Prime(3), ((0, 1), (1,), (2, 0)))
    series = mahler_coefficients(sub, 9, 8)
    assert one_lipschitz_report(series).passed
    coeffs = list(series.coefficients)
    coeffs[9] = ZpApprox.from_int(1, 3, 8)   # bound at n=9 is 3^-2
    bad = MahlerSeries(Prime(3), tuple(coeffs))
    report = one_lipschitz_report(bad)
    assert not report.passed
    assert report.first_violation == 9
    entry = report.entries[8]
    assert entry.n == 9 and entry.status == "violation"
    # the witness coefficient really violates its bound
    assert bad.coefficients[9].norm().gt_pow(entry.bound_exponent)


def test_series_from_values_matches_direct_definition():
    p, N = 3, 6
    values = [(v * v + 2 * v + 1) % 3**N for v in range(6)]
    series = series_from_values(p, values, N)
    # finite differences invert binomial sums: reconstruct the values
    for v in range(6):
        acc = 0
        for n in range(len(values)):
            acc += series.coefficients[n].to_int() * math.comb(v, n)
        assert acc % 3**N == values[v]
