"""Special-function kernel vs independent oracles (mpmath extended
precision, direct defining-series summation, quadrature of defining
integrals)."""

import math

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from vblastperf import specfun

mp.mp.dps = 40


# ---------------------------------------------------------------------------
# ln_gamma
# ---------------------------------------------------------------------------

def test_ln_gamma_factorial():
    assert math.isclose(specfun.ln_gamma(5.0), math.log(24.0), rel_tol=1e-13)


def test_ln_gamma_one():
    assert specfun.ln_gamma(1.0) == 0.0


def test_ln_gamma_half():
    assert math.isclose(specfun.ln_gamma(0.5), math.log(math.sqrt(math.pi)), rel_tol=1e-13)


def test_ln_gamma_domain():
    with pytest.raises(ValueError):
        specfun.ln_gamma(0.0)
    with pytest.raises(ValueError):
        specfun.ln_gamma(-2.5)


# ---------------------------------------------------------------------------
# incomplete gammas
# ---------------------------------------------------------------------------

def _lower_series_oracle(a, z, terms=500):
    """Term-by-term summation of gamma(a,z) = z^a e^-z sum z^k / (a)_{k+1},
    in extended precision."""
    a, z = mp.mpf(a), mp.mpf(z)
    s = mp.mpf(0)
    t = 1 / a
    for k in range(terms):
        s += t
        t *= z / (a + k + 1)
    return s * mp.e ** (-z) * z ** a


def test_reg_lower_exponential():
    assert math.isclose(specfun.reg_lower_gamma(1.0, 1.0), 1.0 - math.exp(-1.0),
                        rel_tol=1e-12)


def test_reg_lower_at_zero():
    for a in (0.5, 1.0, 7.3):
        assert specfun.reg_lower_gamma(a, 0.0) == 0.0


def test_reg_lower_series_oracle():
    a, z = 2.5, 3.0
    expected = float(_lower_series_oracle(a, z) / mp.gamma(a))
    assert math.isclose(specfun.reg_lower_gamma(a, z), expected, rel_tol=1e-12)


def test_reg_lower_monotone_in_z():
    vals = [specfun.reg_lower_gamma(3.3, z) for z in [0.0, 0.5, 1.0, 2.0, 5.0, 20.0]]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert all(0.0 <= v <= 1.0 for v in vals)


def test_upper_gamma_exponential():
    assert math.isclose(specfun.upper_gamma(1.0, 2.0), math.exp(-2.0), rel_tol=1e-12)


def test_upper_gamma_at_zero():
    assert math.isclose(specfun.upper_gamma(3.0, 0.0), 2.0, rel_tol=1e-13)


def test_upper_gamma_quadrature_oracle():
    # adaptive quadrature of the defining integral int_z^inf t^(a-1) e^-t dt
    a, z = 4.5, 10.0
    expected = float(mp.quad(lambda t: t ** (a - 1) * mp.e ** (-t), [z, mp.inf]))
    assert math.isclose(specfun.upper_gamma(a, z), expected, rel_tol=1e-10)


def test_ln_upper_gamma_deep_tail():
    # far past the overflow point of exp; oracle in extended precision
    a, z = 3.0, 800.0
    expected = float(mp.log(mp.gammainc(mp.mpf(a), mp.mpf(z))))
    assert math.isclose(specfun.ln_upper_gamma(a, z), expected, rel_tol=1e-12)


@settings(max_examples=200, deadline=None)
@given(a=st.floats(0.05, 60.0), z=st.floats(0.0, 200.0))
def test_lower_plus_upper_is_one(a, z):
    p = specfun.reg_lower_gamma(a, z)
    q = specfun.upper_gamma(a, z) / math.exp(specfun.ln_gamma(a))
    assert abs(p + q - 1.0) <= 1e-11


def test_reg_upper_matches_complement():
    for a in (0.5, 2.0, 16.0):
        for z in (0.3, 5.0, 40.0):
            q = specfun.reg_upper_gamma(a, z)
            expected = float(mp.gammainc(mp.mpf(a), mp.mpf(z), regularized=True))
            assert math.isclose(q, expected, rel_tol=1e-12)


# ---------------------------------------------------------------------------
# digamma
# ---------------------------------------------------------------------------

def test_digamma_euler_mascheroni():
    assert math.isclose(specfun.digamma(1.0), -0.5772156649015329, abs_tol=1e-12)


def test_digamma_two():
    assert math.isclose(specfun.digamma(2.0), 1.0 - 0.5772156649015329, abs_tol=1e-12)


def test_digamma_extended_precision_oracle():
    expected = float(mp.digamma(mp.mpf("7.5")))
    assert math.isclose(specfun.digamma(7.5), expected, abs_tol=1e-13)


@settings(max_examples=200, deadline=None)
@given(a=st.floats(0.1, 50.0))
def test_digamma_recurrence(a):
    assert abs(specfun.digamma(a + 1.0) - specfun.digamma(a) - 1.0 / a) <= 1e-11


# ---------------------------------------------------------------------------
# erfc
# ---------------------------------------------------------------------------

def test_erfc_zero():
    assert specfun.erfc(0.0) == 1.0


def test_erfc_large_limit():
    assert specfun.erfc(30.0) < 1e-300


def test_erfc_quadrature_oracle():
    expected = float(2 / mp.sqrt(mp.pi) * mp.quad(lambda t: mp.e ** (-t * t), [1, mp.inf]))
    assert math.isclose(specfun.erfc(1.0), expected, rel_tol=1e-12)


def test_erfc_reflection():
    for x in (0.1, 0.7, 2.0, 5.0):
        assert abs(specfun.erfc(x) + specfun.erfc(-x) - 2.0) < 1e-14


# ---------------------------------------------------------------------------
# Bessel I and K0
# ---------------------------------------------------------------------------

def _bessel_i_series_oracle(nu, z, terms=300):
    nu, z = mp.mpf(nu), mp.mpf(z)
    s = mp.mpf(0)
    for k in range(terms):
        s += (z / 2) ** (nu + 2 * k) / (mp.factorial(k) * mp.gamma(nu + k + 1))
    return s


def test_bessel_i_at_origin():
    assert specfun.bessel_i(0.0, 0.0) == 1.0
    assert specfun.bessel_i(1.0, 0.0) == 0.0


def test_bessel_i_series_oracle():
    expected = float(_bessel_i_series_oracle(1.5, 2.0))
    assert math.isclose(specfun.bessel_i(1.5, 2.0), expected, rel_tol=1e-13)


def test_bessel_i_wide_range_vs_mpmath():
    for nu in (0.0, 1.0, 3.0, 15.0):
        for z in (0.01, 1.0, 20.0, 150.0, 690.0):
            expected = float(mp.besseli(nu, z))
            assert math.isclose(specfun.bessel_i(nu, z), expected, rel_tol=1e-11), (nu, z)


def test_bessel_i_log_domain_region():
    # above the series cutoff the log-domain branch takes over
    expected = float(mp.log(mp.besseli(2.0, 705.0)))
    assert math.isclose(specfun.ln_bessel_i(2.0, 705.0), expected, rel_tol=1e-12)


def test_bessel_i_overflow_error():
    with pytest.raises(OverflowError):
        specfun.bessel_i(0.0, 1500.0)
    # but the log variant is fine there
    expected = float(mp.log(mp.besseli(0.0, 1500.0)))
    assert math.isclose(specfun.ln_bessel_i(0.0, 1500.0), expected, rel_tol=1e-12)


def test_bessel_k0_quadrature_oracle():
    # K0(z) = int_0^inf exp(-z cosh t) dt; the tail beyond t = 30 is
    # e^(-cosh 30) ~ 10^(-2.3e12), so a finite window loses nothing
    expected = float(mp.quad(lambda t: mp.e ** (-1.0 * mp.cosh(t)), [0, 5, 30]))
    assert math.isclose(specfun.bessel_k0(1.0), expected, rel_tol=1e-11)


def test_bessel_k0_monotone_positive():
    vals = [specfun.bessel_k0(z) for z in (0.05, 0.5, 1.0, 3.0, 10.0)]
    assert all(v > 0.0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert specfun.bessel_k0(10.0) < specfun.bessel_k0(1.0)


def test_bessel_k0_small_z_log_behaviour():
    z = 1e-8
    approx = -math.log(z / 2.0) - 0.5772156649015329
    assert math.isclose(specfun.bessel_k0(z), approx, rel_tol=1e-8)


def test_bessel_k0_wide_range_vs_mpmath():
    for z in (0.01, 0.5, 1.9, 2.1, 5.0, 30.0, 120.0, 600.0):
        expected = float(mp.besselk(0, z))
        assert math.isclose(specfun.bessel_k0(z), expected, rel_tol=1e-11), z


def test_ln_bessel_k0_deep_tail():
    expected = float(mp.log(mp.besselk(0, 2000.0)))
    assert math.isclose(specfun.ln_bessel_k0(2000.0), expected, rel_tol=1e-12)


def test_bessel_positivity_pair():
    # both kinds strictly positive on z > 0 (sanity relation used by the
    # product density)
    for z in (0.2, 1.0, 7.0):
        assert specfun.bessel_i(3.0, z) > 0.0
        assert specfun.bessel_k0(z) > 0.0


# ---------------------------------------------------------------------------
# 2F1
# ---------------------------------------------------------------------------

def test_hyp2f1_at_zero():
    res = specfun.hyp2f1(0.7, 2.2, 3.3, 0.0)
    assert res.value == 1.0 and res.converged


def test_hyp2f1_log_identity():
    # 2F1(1,1;2;z) = -ln(1-z)/z
    res = specfun.hyp2f1(1.0, 1.0, 2.0, -1.0)
    assert math.isclose(res.value, math.log(2.0), rel_tol=1e-12)
    assert res.converged


def test_hyp2f1_euler_integral_oracle():
    # Gamma(c)/(Gamma(b)Gamma(c-b)) int_0^1 t^(b-1)(1-t)^(c-b-1)(1-zt)^-a dt
    # with the (a,b) roles swapped so that c > b > 0
    a, b, c, z = 2.5, 0.5, 1.5, -40.0
    coeff = mp.gamma(c) / (mp.gamma(b) * mp.gamma(c - b))
    expected = float(coeff * mp.quad(
        lambda t: t ** (b - 1) * (1 - t) ** (c - b - 1) * (1 - z * t) ** (-a), [0, 1]))
    res = specfun.hyp2f1(0.5, 2.5, 1.5, z)
    assert math.isclose(res.value, expected, rel_tol=1e-9)
    assert res.converged


def test_hyp2f1_pfaff_overlap():
    # direct series vs Pfaff-transformed evaluation where both converge
    z = -0.4
    a, b, c = 0.8, 2.3, 3.1
    direct, _, _, ok = specfun._hyp2f1_series(a, b, c, z, 1e-15, 10000)
    assert ok
    res = specfun.hyp2f1(a, b, c, z)
    assert abs(direct - res.value) <= 1e-10 * abs(direct)


def test_hyp2f1_slow_pfaff_tail():
    # transformed argument 12/13: the geometric-tail stop rule must still
    # deliver the requested tolerance
    res = specfun.hyp2f1(0.5, 6.0, 1.5, -12.0)
    expected = float(mp.hyp2f1(0.5, 6.0, 1.5, -12.0))
    assert math.isclose(res.value, expected, rel_tol=1e-11)


def test_hyp2f1_terminating_arrangement():
    # c - a = -1: after the parameter swap the Pfaff-transformed series is
    # an exact two-term polynomial
    res = specfun.hyp2f1(2.5, 0.5, 1.5, -7.0)
    expected = float(mp.hyp2f1(2.5, 0.5, 1.5, -7.0))
    assert math.isclose(res.value, expected, rel_tol=1e-12)
    assert res.terms_used <= 4


def test_hyp2f1_domain_errors():
    with pytest.raises(ValueError):
        specfun.hyp2f1(1.0, 1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        specfun.hyp2f1(1.0, 1.0, 2.0, 1.0)


def test_hyp2f1_bit_identical():
    a = specfun.hyp2f1(0.5, 8.5, 1.5, -12.5)
    b = specfun.hyp2f1(0.5, 8.5, 1.5, -12.5)
    assert a == b


# ---------------------------------------------------------------------------
# 3F2
# ---------------------------------------------------------------------------

def _hyp3f2_series_oracle(a_s, b_s, z, tol=None):
    """Brute-force partial summation in 50-digit arithmetic; valid (and
    used) only inside the unit disk where the defining series converges."""
    with mp.workdps(50):
        s = mp.mpf(0)
        t = mp.mpf(1)
        for k in range(2000):
            s += t
            t *= ((a_s[0] + k) * (a_s[1] + k) * (a_s[2] + k)
                  / ((b_s[0] + k) * (b_s[1] + k) * (k + 1)) * z)
            if abs(t) < mp.mpf(10) ** -30 * abs(s):
                break
        return float(s)


def test_hyp3f2_at_zero():
    res = specfun.hyp3f2(2.0, 0.5, 3.0, 1.5, 4.0, 0.0)
    assert res.value == 1.0 and res.converged


def test_hyp3f2_reduction_to_2f1():
    # a3 = b2 cancels: 3F2(a1,a2,x; b1,x; z) = 2F1(a1,a2;b1;z)
    r3 = specfun.hyp3f2(1.0, 1.0, 5.5, 2.0, 5.5, -1.0)
    r2 = specfun.hyp2f1(1.0, 1.0, 2.0, -1.0)
    assert math.isclose(r3.value, r2.value, rel_tol=1e-13)


def test_hyp3f2_series_oracle_inside_disk():
    a_s, b_s, z = (2.0, 0.5, 3.0), (1.5, 4.0), -0.5
    expected = _hyp3f2_series_oracle(a_s, b_s, z)
    res = specfun.hyp3f2(*a_s, *b_s, z)
    assert res.converged
    assert math.isclose(res.value, expected, rel_tol=1e-9)


def test_hyp3f2_continuation_oracle():
    # outside the unit disk the defining series diverges; the continuation
    # must match the Euler-integral oracle evaluated in mpmath
    a_s, b_s, z = (2.0, 0.5, 3.0), (1.5, 4.0), -5.0
    coeff = mp.gamma(b_s[1]) / (mp.gamma(a_s[0]) * mp.gamma(b_s[1] - a_s[0]))
    expected = float(coeff * mp.quad(
        lambda t: t ** (a_s[0] - 1) * (1 - t) ** (b_s[1] - a_s[0] - 1)
        * mp.hyp2f1(a_s[1], a_s[2], b_s[0], z * t), [0, 1]))
    res = specfun.hyp3f2(*a_s, *b_s, z)
    assert res.converged
    assert math.isclose(res.value, expected, rel_tol=1e-9)


def test_hyp3f2_flags_beyond_cutoff():
    res = specfun.hyp3f2(2.5, 0.5, 3.5, 1.5, 4.5, -50.0, z_series_max=30.0)
    assert not res.converged


def test_hyp3f2_domain_errors():
    with pytest.raises(ValueError):
        specfun.hyp3f2(1.0, 1.0, 1.0, -2.0, 3.0, -0.5)
    with pytest.raises(ValueError):
        specfun.hyp3f2(1.0, 1.0, 1.0, 2.0, 3.0, 0.5)


def test_hyp3f2_bit_identical():
    a = specfun.hyp3f2(2.0, 0.5, 3.0, 1.5, 4.0, -5.0)
    b = specfun.hyp3f2(2.0, 0.5, 3.0, 1.5, 4.0, -5.0)
    assert a == b
