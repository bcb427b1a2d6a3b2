"""Post-processing SNR statistics of the two ZF-SIC detection stages.

The per-branch instantaneous SNR x is modeled as Gamma-distributed with
normalized shape m = 2 n m_N (n receive antennas, per-link Nakagami shape
m_N, the factor 2 counting the transmit antennas) and mean omega.  On top
of that marginal this module builds:

* the closed-form upper bound on the first-stage (highest post-SNR) CDF
  and its density;
* the "actual" first-stage CDF, which has no closed form and is always
  evaluated by quadrature;
* the second-stage CDF (noise power doubles once the first stream is
  cancelled), its high-SNR approximation and the density of that
  approximation;
* the correlated bivariate SNR density of the two stages and the density
  of their product, used by the error-propagation cross term;
* the generalized first-stage CDF for l <= n transmit antennas
  (quadrature only).

Everything here takes linear SNR; dB conversion lives in the CLI.
Expressions containing Gamma(m), omega^(m+1), 4^m or Bessel-I are
assembled in log domain: m reaches 16 for n = 4, m_N = 2 and the naive
products overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import specfun
from .numerics import QuadratureControl, integrate_finite

__all__ = [
    "SystemModel",
    "CorrelationModel",
    "pdf_snr",
    "cdf_snr",
    "cdf_stage1_bound",
    "cdf_stage1_actual",
    "pdf_stage1",
    "cdf_pair_min",
    "cdf_stage2_exact",
    "cdf_stage2_approx",
    "cdf_stage2_approx_unclamped",
    "pdf_stage2",
    "pdf_stage2_normalized",
    "pdf_bivariate",
    "pdf_product",
    "pdf_product_legacy",
    "cdf_stage1_general",
    "cdf_stage1_general_bound",
]


@dataclass(frozen=True)
class SystemModel:
    """Antenna configuration and average-SNR operating point.

    n       -- receive antennas (>= 2)
    m_n     -- per-link Nakagami shape m_N (>= 0.5; 1 is Rayleigh)
    omega   -- average per-branch SNR, linear scale
    l       -- transmit antennas; all closed forms assume l = 2, the
               generalized first-stage CDF accepts 2 <= l <= n
    """

    n: int
    m_n: float
    omega: float
    l: int = 2

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 2):
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        if not (isinstance(self.l, int) and 2 <= self.l <= self.n):
            raise ValueError(f"l must be an integer with 2 <= l <= n, got l={self.l}, n={self.n}")
        if not self.m_n >= 0.5:
            raise ValueError(f"m_n must be >= 0.5, got {self.m_n}")
        if not self.omega > 0.0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        # follows from m_n >= 0.5, n >= 2; the first-stage density needs it
        assert self.m - self.n + 1 >= 1.0

    @property
    def m(self) -> float:
        """Normalized shape 2 n m_N; always recomputed, never stored."""
        return 2.0 * self.n * self.m_n


@dataclass(frozen=True)
class CorrelationModel:
    """Correlation coefficient of the stage-1/stage-2 SNR pair.

    rho = 1 makes the bivariate density degenerate and is rejected; how to
    pick rho for a physical channel is not prescribed here -- estimate it
    with mcsim.estimate_rho if in doubt.
    """

    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")


# ---------------------------------------------------------------------------
# per-branch marginal
# ---------------------------------------------------------------------------

def pdf_snr(x: float, m: float, omega: float) -> float:
    """Gamma SNR density f(x) = (m/omega)^m / Gamma(m) x^(m-1) e^(-m x/omega)."""
    if x < 0.0:
        raise ValueError(f"pdf_snr requires x >= 0, got {x}")
    if x == 0.0:
        if m > 1.0:
            return 0.0
        if m == 1.0:
            return 1.0 / omega
        return math.inf
    ln_v = m * math.log(m / omega) - specfun.ln_gamma(m) + (m - 1.0) * math.log(x) \
        - m * x / omega
    return math.exp(ln_v)


def cdf_snr(x: float, m: float, omega: float) -> float:
    """Gamma SNR CDF F(x) = P(m, m x / omega), in [0, 1]."""
    if x < 0.0:
        raise ValueError(f"cdf_snr requires x >= 0, got {x}")
    return specfun.reg_lower_gamma(m, m * x / omega)


# ---------------------------------------------------------------------------
# first SIC stage (stream detected first, highest post-processing SNR)
# ---------------------------------------------------------------------------

def cdf_stage1_bound(x: float, sys: SystemModel) -> float:
    """Closed-form upper bound on the first-stage SNR CDF.

    F1(x) = [ z^(n-1) Gamma(m-n+1, z) + gamma(m, z) ] / Gamma(m),  z = m x / omega.

    This is the exact antiderivative of pdf_stage1 and replaces the
    Meijer-G representation of the same bound; the quadrature
    cross-check against (n-1) * int_0^1 F(x/t) t^(n-2) dt is a mandatory
    test, not an optional one.
    """
    if x < 0.0:
        raise ValueError(f"cdf_stage1_bound requires x >= 0, got {x}")
    if sys.l != 2:
        raise ValueError("cdf_stage1_bound is defined for l = 2 transmit antennas")
    if x == 0.0:
        return 0.0
    m, n = sys.m, sys.n
    z = m * x / sys.omega
    ln_t1 = (n - 1.0) * math.log(z) + specfun.ln_upper_gamma(m - n + 1.0, z) \
        - specfun.ln_gamma(m)
    t1 = math.exp(ln_t1) if ln_t1 > -745.0 else 0.0
    return min(t1 + specfun.reg_lower_gamma(m, z), 1.0)


def cdf_stage1_actual(x: float, sys: SystemModel,
                      ctl: QuadratureControl = QuadratureControl()) -> float:
    """First-stage SNR CDF itself: (n-1) int_0^1 F(x/t)^2 t^(n-2) dt.

    The squared incomplete gamma admits no closed form, so this is always
    a quadrature value; it is dominated by cdf_stage1_bound everywhere.
    """
    if x < 0.0:
        raise ValueError(f"cdf_stage1_actual requires x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    m, n, om = sys.m, sys.n, sys.omega

    def integrand(t: float) -> float:
        f = cdf_snr(x / t, m, om)
        return f * f * t ** (n - 2.0)

    res = integrate_finite(integrand, 0.0, 1.0, ctl)
    if not res.converged:
        raise ArithmeticError(
            f"cdf_stage1_actual quadrature did not converge at x={x} (err {res.abs_error_estimate:.2e})")
    return min((n - 1.0) * res.value, 1.0)


def pdf_stage1(x: float, sys: SystemModel) -> float:
    """First-stage SNR density (derivative of the CDF bound):

    f1(x) = (n-1) (m/omega)^(n-1) / Gamma(m) x^(n-2) Gamma(m-n+1, m x/omega).
    """
    if x < 0.0:
        raise ValueError(f"pdf_stage1 requires x >= 0, got {x}")
    if sys.l != 2:
        raise ValueError("pdf_stage1 is defined for l = 2 transmit antennas")
    m, n, om = sys.m, sys.n, sys.omega
    if x == 0.0:
        if sys.n == 2:
            # finite positive edge: (m/omega) Gamma(m-1) / Gamma(m)
            return (m / om) / (m - 1.0)
        return 0.0
    ln_v = math.log(n - 1.0) + (n - 1.0) * math.log(m / om) - specfun.ln_gamma(m) \
        + (n - 2.0) * math.log(x) + specfun.ln_upper_gamma(m - n + 1.0, m * x / om)
    return math.exp(ln_v) if ln_v > -745.0 else 0.0


# ---------------------------------------------------------------------------
# second SIC stage
# ---------------------------------------------------------------------------

def cdf_pair_min(x: float, m: float, omega: float) -> float:
    """CDF of the weaker of two independent branches at the same argument:
    2 F(x) - F(x)^2 = 1 - (1 - F(x))^2.  No noise-doubling applied."""
    if x < 0.0:
        raise ValueError(f"cdf_pair_min requires x >= 0, got {x}")
    f = cdf_snr(x, m, omega)
    return 2.0 * f - f * f


def cdf_stage2_exact(x: float, sys: SystemModel) -> float:
    """Second-stage SNR CDF with the post-cancellation noise doubling:
    2 F(2x) - F(2x)^2.  The residual stream sees twice the branch noise
    power, hence the argument 2x rather than x."""
    if x < 0.0:
        raise ValueError(f"cdf_stage2_exact requires x >= 0, got {x}")
    return cdf_pair_min(2.0 * x, sys.m, sys.omega)


def cdf_stage2_approx_unclamped(x: float, sys: SystemModel) -> float:
    """High-SNR approximation 2 F(2x) = 2 P(m, 2 m x/omega) of the
    second-stage CDF.  Converges to cdf_stage2_exact as omega grows but
    saturates at 2 (not 1) for x large at finite omega."""
    if x < 0.0:
        raise ValueError(f"cdf_stage2_approx requires x >= 0, got {x}")
    return 2.0 * cdf_snr(2.0 * x, sys.m, sys.omega)


def cdf_stage2_approx(x: float, sys: SystemModel) -> float:
    """Clamped-to-[0,1] version of cdf_stage2_approx_unclamped, suitable
    for reporting as a probability."""
    return min(cdf_stage2_approx_unclamped(x, sys), 1.0)


def pdf_stage2(x: float, sys: SystemModel) -> float:
    """Derivative of the unclamped second-stage CDF approximation:

    f2(x) = 2^(m+1) (m/omega)^m / Gamma(m) x^(m-1) e^(-2 m x/omega).

    Total mass is exactly 2 (the approximate CDF saturates at 2); this is
    the weight against which the second-stage error-rate closed forms
    average.  Use pdf_stage2_normalized for a proper density.
    """
    if x < 0.0:
        raise ValueError(f"pdf_stage2 requires x >= 0, got {x}")
    m, om = sys.m, sys.omega
    if x == 0.0:
        return 0.0 if m > 1.0 else 2.0 ** (m + 1.0) * (m / om) ** m / math.exp(specfun.ln_gamma(m))
    ln_v = (m + 1.0) * math.log(2.0) + m * math.log(m / om) - specfun.ln_gamma(m) \
        + (m - 1.0) * math.log(x) - 2.0 * m * x / om
    return math.exp(ln_v) if ln_v > -745.0 else 0.0


def pdf_stage2_normalized(x: float, sys: SystemModel) -> float:
    """pdf_stage2 rescaled to unit mass; equals the Gamma(m, omega/(2m))
    density, i.e. the per-branch density with the mean halved."""
    return 0.5 * pdf_stage2(x, sys)


# ---------------------------------------------------------------------------
# correlated stage-1/stage-2 pair and its product
# ---------------------------------------------------------------------------

def pdf_bivariate(x1: float, x2: float, sys: SystemModel, corr: CorrelationModel) -> float:
    """Bivariate Gamma density of the two stage SNRs with identical means
    and correlation rho:

        f(x1,x2) = (m/omega)^(m+1) (x1 x2)^((m-1)/2)
                   / (Gamma(m) (1-rho) rho^((m-1)/2))
                   * exp(-m (x1+x2) / (omega (1-rho)))
                   * I_(m-1)(2 m sqrt(rho x1 x2) / (omega (1-rho)))

    Marginals integrate back to pdf_snr and the Pearson correlation of the
    pair equals rho.  rho = 0 short-circuits to the independent product
    (the rho^((m-1)/2) denominator is a removable limit).  Evaluated in
    log domain so the Bessel factor cannot overflow.
    """
    if x1 < 0.0 or x2 < 0.0:
        raise ValueError(f"pdf_bivariate requires x1, x2 >= 0, got ({x1}, {x2})")
    m, om, rho = sys.m, sys.omega, corr.rho
    if rho == 0.0:
        return pdf_snr(x1, m, om) * pdf_snr(x2, m, om)
    if x1 == 0.0 or x2 == 0.0:
        return 0.0  # m > 1 always holds here
    c = m / (om * (1.0 - rho))
    ln_v = ((m + 1.0) * math.log(m / om)
            + 0.5 * (m - 1.0) * (math.log(x1) + math.log(x2))
            - specfun.ln_gamma(m) - math.log(1.0 - rho)
            - 0.5 * (m - 1.0) * math.log(rho)
            - c * (x1 + x2)
            + specfun.ln_bessel_i(m - 1.0, 2.0 * c * math.sqrt(rho * (x1 * x2))))
    return math.exp(ln_v) if ln_v > -745.0 else 0.0


def pdf_product(y: float, sys: SystemModel, corr: CorrelationModel) -> float:
    """Density of the product y = x1 x2 of the correlated stage SNRs:

        f_y(y) = 2 (m/omega)^(m+1) y^((m-1)/2)
                 / (Gamma(m) (1-rho) rho^((m-1)/2))
                 * I_(m-1)(2 m sqrt(rho y) / (omega (1-rho)))
                 * K_0(2 m sqrt(y) / (omega (1-rho)))

    This is the closed form of int_0^inf (1/x) f_biv(x, y/x) dx; the
    package treats that integral identity (checked in the test suite) as
    the ground truth for the cross-product statistics, and the density
    integrates to one.  K_0 is log-singular as y -> 0, so y must be
    strictly positive.
    """
    if not y > 0.0:
        raise ValueError(f"pdf_product requires y > 0, got {y}")
    m, om, rho = sys.m, sys.omega, corr.rho
    if not 0.0 < rho < 1.0:
        raise ValueError(f"pdf_product requires 0 < rho < 1, got {rho}")
    c = m / (om * (1.0 - rho))
    sy = math.sqrt(y)
    ln_v = (math.log(2.0) + (m + 1.0) * math.log(m / om)
            + 0.5 * (m - 1.0) * math.log(y)
            - specfun.ln_gamma(m) - math.log(1.0 - rho)
            - 0.5 * (m - 1.0) * math.log(rho)
            + specfun.ln_bessel_i(m - 1.0, 2.0 * c * math.sqrt(rho) * sy)
            + specfun.ln_bessel_k0(2.0 * c * sy))
    return math.exp(ln_v) if ln_v > -745.0 else 0.0


def pdf_product_legacy(y: float, sys: SystemModel, corr: CorrelationModel) -> float:
    """Superseded cross-product density variant, kept only so the
    validation report can quantify how far it sits from the integral
    identity that pdf_product satisfies.  Do not use for new work."""
    if not y > 0.0:
        raise ValueError(f"pdf_product_legacy requires y > 0, got {y}")
    m, om, rho = sys.m, sys.omega, corr.rho
    if not 0.0 < rho < 1.0:
        raise ValueError(f"pdf_product_legacy requires 0 < rho < 1, got {rho}")
    sy = math.sqrt(y)
    ln_v = (0.5 * m * math.log(y) - m * math.log(4.0) - specfun.ln_gamma(m)
            - (m + 1.0) * math.log(om) - math.log(1.0 - rho)
            - 0.5 * (m - 1.0) * math.log(rho)
            + specfun.ln_bessel_i(m - 1.0, math.sqrt(rho * y) / (om * (1.0 - rho)))
            + specfun.ln_bessel_k0(sy / (om * (1.0 - rho) ** 2)))
    return math.exp(ln_v) if ln_v > -745.0 else 0.0


# ---------------------------------------------------------------------------
# generalized l x n first stage
# ---------------------------------------------------------------------------

def _cdf_stage1_general(x: float, sys: SystemModel, power: int,
                        ctl: QuadratureControl) -> float:
    if x < 0.0:
        raise ValueError(f"cdf_stage1_general requires x >= 0, got {x}")
    n, l = sys.n, sys.l
    if l > n:
        raise ValueError(f"cdf_stage1_general requires l <= n, got l={l}, n={n}")
    if x == 0.0:
        return 0.0
    m, om = sys.m, sys.omega

    def integrand(t: float) -> float:
        return cdf_snr(x / t, m, om) ** power * t ** (n - l) * (1.0 - t) ** (l - 2)

    res = integrate_finite(integrand, 0.0, 1.0, ctl)
    if not res.converged:
        raise ArithmeticError(
            f"generalized stage-1 CDF quadrature did not converge at x={x}")
    return min(math.comb(n - 1, l - 1) * (l - 1) * res.value, 1.0)


def cdf_stage1_general(x: float, sys: SystemModel,
                       ctl: QuadratureControl = QuadratureControl()) -> float:
    """First-stage SNR CDF of an l x n receiver, integrand power l:

        C(n-1, l-1) (l-1) int_0^1 F(x/t)^l t^(n-l) (1-t)^(l-2) dt.

    No closed form exists for any l.  At l = 2 this reduces to
    cdf_stage1_actual; the power-(l-1) companion below reduces to the
    closed-form bound instead, and both families are nondecreasing in l.
    """
    return _cdf_stage1_general(x, sys, sys.l, ctl)


def cdf_stage1_general_bound(x: float, sys: SystemModel,
                             ctl: QuadratureControl = QuadratureControl()) -> float:
    """Bounding variant of cdf_stage1_general with the integrand power
    lowered to l-1; at l = 2 it coincides with cdf_stage1_bound."""
    return _cdf_stage1_general(x, sys, sys.l - 1, ctl)
