"""Conditional error probability models, per-stage ASER closed forms, the
correlated error-propagation cross term, total ASER and outage probabilities.

Every closed form here has a quadrature twin (average the CEP against the
matching stage density with numerics.integrate_semi_infinite); the twins
are exposed as *_quadrature functions and double as the fallback path
whenever a hypergeometric series refuses to converge.  Results carry a
method tag so downstream consumers can tell which route produced a number
-- there is no silent switching.

Conventions: the stage-2 ASER closed forms average against the raw
(mass-2) stage-2 density fading.pdf_stage2, matching the saturating CDF
approximation they derive from; they are therefore accurate in the
medium/high-SNR regime and overshoot as omega -> 0.  Binary CEP is exact
at all SNR; the rectangular M-ary CEP is a high-SNR approximation whose
value at x = 0 is alpha (1.5 for 16-QAM) and is reported as-is, never
clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import specfun
from .fading import (
    CorrelationModel,
    SystemModel,
    cdf_stage1_bound,
    cdf_stage2_approx,
    pdf_product,
    pdf_stage1,
    pdf_stage2,
)
from .numerics import QuadratureControl, SeriesControl, integrate_semi_infinite

__all__ = [
    "ModulationScheme",
    "NumericControls",
    "AserResult",
    "AserBreakdown",
    "cep",
    "cep_binary",
    "cep_mary",
    "aser_stage1",
    "aser_stage1_quadrature",
    "aser_stage2",
    "aser_stage2_quadrature",
    "aser_cross",
    "aser_cross_series",
    "aser_cross_series_legacy",
    "aser_cross_quadrature",
    "aser_total",
    "outage_stage1",
    "outage_stage2_conditional",
    "outage_stage2_unconditional",
    "ber_from_ser",
]

BINARY = "binary"
RECT_MARY = "mary"

# method tags
CLOSED_FORM = "closed_form"
SERIES = "series"
QUADRATURE_FALLBACK = "quadrature_fallback"
INDEPENDENT = "independent"


@dataclass(frozen=True)
class ModulationScheme:
    """CEP constants (alpha, beta) plus the family they belong to.

    Binary family: CEP(x) = Gamma(beta, alpha x) / (2 Gamma(beta)), exact,
    CEP(0) = 1/2.  Presets: BPSK (1, 0.5), coherent BFSK (0.5, 0.5),
    DPSK (1, 1).

    Rectangular M-ary family: CEP(x) = alpha erfc(sqrt(beta x)) with
    alpha = 2 (1 - 1/sqrt(M)), beta = 3 / (2 (M - 1)); the standard
    high-SNR square-QAM symbol-error approximation.
    """

    kind: str
    alpha: float
    beta: float
    mary_order: int | None = None

    def __post_init__(self):
        if self.kind not in (BINARY, RECT_MARY):
            raise ValueError(f"unknown modulation kind {self.kind!r}")
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise ValueError("alpha and beta must be strictly positive")
        if self.kind == RECT_MARY and self.mary_order is not None:
            M = self.mary_order
            r = int(round(math.sqrt(M)))
            if M < 4 or r * r != M:
                raise ValueError(f"square constellations need M in {{4, 16, 64, ...}}, got {M}")

    @classmethod
    def bpsk(cls) -> "ModulationScheme":
        return cls(BINARY, 1.0, 0.5)

    @classmethod
    def bfsk(cls) -> "ModulationScheme":
        return cls(BINARY, 0.5, 0.5)

    @classmethod
    def dpsk(cls) -> "ModulationScheme":
        return cls(BINARY, 1.0, 1.0)

    @classmethod
    def qam(cls, M: int) -> "ModulationScheme":
        a = 2.0 * (1.0 - 1.0 / math.sqrt(M))
        b = 1.5 / (M - 1.0)
        return cls(RECT_MARY, a, b, mary_order=M)

    @classmethod
    def parse(cls, spec: str) -> "ModulationScheme":
        """Parse a CLI-style name: bpsk | bfsk | dpsk | qam:M."""
        s = spec.strip().lower()
        table = {"bpsk": cls.bpsk, "bfsk": cls.bfsk, "dpsk": cls.dpsk}
        if s in table:
            return table[s]()
        if s.startswith("qam:"):
            return cls.qam(int(s.split(":", 1)[1]))
        raise ValueError(f"unknown modulation {spec!r} (expected bpsk|bfsk|dpsk|qam:M)")

    @property
    def label(self) -> str:
        if self.kind == RECT_MARY and self.mary_order:
            return f"{self.mary_order}-QAM"
        names = {(1.0, 0.5): "BPSK", (0.5, 0.5): "BFSK", (1.0, 1.0): "DPSK"}
        return names.get((self.alpha, self.beta), f"{self.kind}({self.alpha},{self.beta})")


@dataclass(frozen=True)
class NumericControls:
    """Bundle of the tunables every analytic evaluation consults."""

    quadrature: QuadratureControl = field(default_factory=QuadratureControl)
    series: SeriesControl = field(default_factory=SeriesControl)
    hyp_rel_tol: float = 1e-12
    hyp_max_terms: int = 10000
    hyp3f2_series_max: float = 30.0


@dataclass(frozen=True)
class AserResult:
    value: float
    method: str
    terms_used: int = 0


@dataclass(frozen=True)
class AserBreakdown:
    """Total ASER split into its stage and cross-product parts;
    total = stage1 + stage2 - cross by construction."""

    stage1: float
    stage2: float
    cross: float
    total: float
    method_tags: dict


# ---------------------------------------------------------------------------
# conditional error probability
# ---------------------------------------------------------------------------

def cep_binary(x: float, mod: ModulationScheme) -> float:
    """Binary CEP Gamma(beta, alpha x) / (2 Gamma(beta)), in (0, 1/2]."""
    if mod.kind != BINARY:
        raise ValueError("cep_binary needs a binary modulation scheme")
    if x < 0.0:
        raise ValueError(f"cep_binary requires x >= 0, got {x}")
    return 0.5 * specfun.reg_upper_gamma(mod.beta, mod.alpha * x)


def cep_mary(x: float, mod: ModulationScheme) -> float:
    """Rectangular M-ary CEP alpha erfc(sqrt(beta x)); high-SNR
    approximation, exceeds 1 near x = 0 whenever alpha > 1."""
    if mod.kind != RECT_MARY:
        raise ValueError("cep_mary needs a rectangular M-ary modulation scheme")
    if x < 0.0:
        raise ValueError(f"cep_mary requires x >= 0, got {x}")
    return mod.alpha * specfun.erfc(math.sqrt(mod.beta * x))


def cep(x: float, mod: ModulationScheme) -> float:
    return cep_binary(x, mod) if mod.kind == BINARY else cep_mary(x, mod)


# ---------------------------------------------------------------------------
# stage-1 ASER
# ---------------------------------------------------------------------------

def aser_stage1_quadrature(sys: SystemModel, mod: ModulationScheme,
                           ctl: NumericControls = NumericControls()) -> float:
    """Average CEP against the stage-1 density by adaptive quadrature; the
    independent oracle for (and fallback of) the closed forms."""
    res = integrate_semi_infinite(lambda x: cep(x, mod) * pdf_stage1(x, sys),
                                  0.0, ctl.quadrature)
    if not res.converged:
        raise ArithmeticError(
            f"stage-1 ASER quadrature did not converge (err {res.abs_error_estimate:.2e})")
    return res.value


def _aser_stage1_binary(sys: SystemModel, mod: ModulationScheme,
                        ctl: NumericControls) -> AserResult:
    """1/2 - (n-1) a^b G(b+m) / (2 b (b+n-1) G(b) G(m) (m/om)^b)
           * 3F2(m+b, b, n+b-1; b+1, n+b; -om a / m)."""
    m, n, om = sys.m, sys.n, sys.omega
    a, b = mod.alpha, mod.beta
    hyp = specfun.hyp3f2(m + b, b, n + b - 1.0, b + 1.0, n + b, -om * a / m,
                         tol=ctl.hyp_rel_tol, max_terms=ctl.hyp_max_terms,
                         z_series_max=ctl.hyp3f2_series_max)
    if not hyp.converged:
        return AserResult(aser_stage1_quadrature(sys, mod, ctl), QUADRATURE_FALLBACK)
    ln_pref = (math.log(n - 1.0) + b * math.log(a * om / m)
               + specfun.ln_gamma(b + m) - specfun.ln_gamma(b) - specfun.ln_gamma(m)
               - math.log(2.0 * b * (b + n - 1.0)))
    value = 0.5 - math.exp(ln_pref) * hyp.value
    if not 0.0 <= value <= 0.5 + 1e-9:
        return AserResult(aser_stage1_quadrature(sys, mod, ctl), QUADRATURE_FALLBACK)
    return AserResult(value, CLOSED_FORM, hyp.terms_used)


def _aser_stage1_mary(sys: SystemModel, mod: ModulationScheme,
                      ctl: NumericControls) -> AserResult:
    """a (m/(b om))^(n-1) G(m-n+1) G(n-1/2) / (sqrt(pi) G(m))
       - a (n-1) (m/(b om))^m G(m+1/2) / (sqrt(pi) G(m) m (m-n+1))
         * 3F2(m-n+1, m, m+1/2; m-n+2, m+1; -m/(b om))."""
    m, n, om = sys.m, sys.n, sys.omega
    a, b = mod.alpha, mod.beta
    hyp = specfun.hyp3f2(m - n + 1.0, m, m + 0.5, m - n + 2.0, m + 1.0, -m / (b * om),
                         tol=ctl.hyp_rel_tol, max_terms=ctl.hyp_max_terms,
                         z_series_max=ctl.hyp3f2_series_max)
    if not hyp.converged:
        return AserResult(aser_stage1_quadrature(sys, mod, ctl), QUADRATURE_FALLBACK)
    ln_half_pi = 0.5 * math.log(math.pi)
    term_a = math.exp(math.log(a) + (n - 1.0) * math.log(m / (b * om))
                      + specfun.ln_gamma(m - n + 1.0) + specfun.ln_gamma(n - 0.5)
                      - ln_half_pi - specfun.ln_gamma(m))
    ln_b = (math.log(a) + math.log(n - 1.0) + m * math.log(m / (b * om))
            + specfun.ln_gamma(m + 0.5) - ln_half_pi - specfun.ln_gamma(m)
            - math.log(m * (m - n + 1.0)))
    term_b = math.exp(ln_b) * hyp.value
    value = term_a - term_b
    # the two terms grow together at low SNR; bail out before cancellation
    # can eat into the 1e-8 closed-form/oracle agreement budget
    if value <= 0.0 or max(term_a, abs(term_b)) > 1e4 * value:
        return AserResult(aser_stage1_quadrature(sys, mod, ctl), QUADRATURE_FALLBACK)
    return AserResult(value, CLOSED_FORM, hyp.terms_used)


def _aser_stage1_mary_legacy(sys: SystemModel, mod: ModulationScheme,
                             ctl: NumericControls = NumericControls()) -> float:
    """Superseded sign/argument arrangement of the M-ary stage-1 closed
    form, retained only for the validation report (it goes negative);
    see docs/validation_report.md."""
    m, n, om = sys.m, sys.n, sys.omega
    a, b = mod.alpha, mod.beta
    hyp = specfun.hyp3f2(m - n + 1.0, m, m + 0.5, m - n + 2.0, m + 1.0, -m / (b * om),
                         tol=ctl.hyp_rel_tol, max_terms=ctl.hyp_max_terms,
                         z_series_max=ctl.hyp3f2_series_max)
    sp = math.sqrt(math.pi)
    g = math.exp(specfun.ln_gamma(m))
    t1 = (a * (n - 1.0) * (m / (b * om)) ** m * math.exp(specfun.ln_gamma(m + 0.5))
          / (sp * g * m * (m - n + 1.0))) * hyp.value
    t2 = (a * (m / (b * om)) ** (n - 1.0) * math.exp(specfun.ln_gamma(m + n - 1.0))
          * math.exp(specfun.ln_gamma(n - 0.5)) / (sp * g))
    return t1 - t2


def aser_stage1(sys: SystemModel, mod: ModulationScheme,
                ctl: NumericControls = NumericControls()) -> AserResult:
    """First-stage ASER (upper bound, via the stage-1 CDF bound).

    Closed form where the 3F2 evaluation converges, tagged quadrature
    fallback otherwise; either way the value is the same quantity and
    lies in [0, 1].
    """
    if sys.l != 2:
        raise ValueError("aser_stage1 closed forms assume l = 2 transmit antennas")
    if mod.kind == BINARY:
        return _aser_stage1_binary(sys, mod, ctl)
    return _aser_stage1_mary(sys, mod, ctl)


# ---------------------------------------------------------------------------
# stage-2 ASER
# ---------------------------------------------------------------------------

def aser_stage2_quadrature(sys: SystemModel, mod: ModulationScheme,
                           ctl: NumericControls = NumericControls()) -> float:
    """Average CEP against the raw stage-2 density by adaptive quadrature."""
    res = integrate_semi_infinite(lambda x: cep(x, mod) * pdf_stage2(x, sys),
                                  0.0, ctl.quadrature)
    if not res.converged:
        raise ArithmeticError(
            f"stage-2 ASER quadrature did not converge (err {res.abs_error_estimate:.2e})")
    return res.value


def _aser_stage2_binary(sys: SystemModel, mod: ModulationScheme,
                        ctl: NumericControls) -> AserResult:
    """1 - a^b G(m+b) / (b G(b) G(m) (2m/om)^b) * 2F1(b, m+b; b+1; -a om/(2m)).

    At high SNR that difference cancels catastrophically, so the
    equivalent positive arrangement

        a^b G(m+b) p^m / (G(b) G(m) m (a+p)^(m+b))
            * 2F1(1, m+b; m+1; p/(a+p)),   p = 2m/om,

    is used once p <= a (same closed form, one Pfaff step apart).
    """
    m, om = sys.m, sys.omega
    a, b = mod.alpha, mod.beta
    p = 2.0 * m / om
    if p <= a:
        hyp = specfun.hyp2f1(1.0, m + b, m + 1.0, p / (a + p),
                             tol=ctl.hyp_rel_tol, max_terms=ctl.hyp_max_terms)
        if hyp.converged:
            ln_v = (b * math.log(a) + specfun.ln_gamma(m + b) + m * math.log(p)
                    - specfun.ln_gamma(b) - specfun.ln_gamma(m) - math.log(m)
                    - (m + b) * math.log(a + p))
            return AserResult(math.exp(ln_v) * hyp.value, CLOSED_FORM, hyp.terms_used)
    else:
        hyp = specfun.hyp2f1(b, m + b, b + 1.0, -a * om / (2.0 * m),
                             tol=ctl.hyp_rel_tol, max_terms=ctl.hyp_max_terms)
        if hyp.converged:
            ln_pref = (b * math.log(a * om / (2.0 * m)) + specfun.ln_gamma(m + b)
                       - specfun.ln_gamma(b) - specfun.ln_gamma(m) - math.log(b))
            value = 1.0 - math.exp(ln_pref) * hyp.value
            if 0.0 <= value <= 1.0 + 1e-9:
                return AserResult(value, CLOSED_FORM, hyp.terms_used)
    return AserResult(aser_stage2_quadrature(sys, mod, ctl), QUADRATURE_FALLBACK)


def _aser_stage2_mary(sys: SystemModel, mod: ModulationScheme,
                      ctl: NumericControls) -> AserResult:
    """2a - 4 a sqrt(b) G(m+1/2) / (G(m) sqrt(2m/om) sqrt(pi))
           * 2F1(1/2, m+1/2; 3/2; -b om/(2m)),

    switching to the cancellation-free positive arrangement

        2a sqrt(b) p^m G(m+1/2) / (sqrt(pi) G(m) m (b+p)^(m+1/2))
            * 2F1(1, m+1/2; m+1; p/(b+p)),   p = 2m/om,

    once p <= b (high SNR)."""
    m, om = sys.m, sys.omega
    a, b = mod.alpha, mod.beta
    p = 2.0 * m / om
    if p <= b:
        hyp = specfun.hyp2f1(1.0, m + 0.5, m + 1.0, p / (b + p),
                             tol=ctl.hyp_rel_tol, max_terms=ctl.hyp_max_terms)
        if hyp.converged:
            ln_v = (math.log(2.0 * a) + 0.5 * math.log(b) + m * math.log(p)
                    + specfun.ln_gamma(m + 0.5) - 0.5 * math.log(math.pi)
                    - specfun.ln_gamma(m) - math.log(m)
                    - (m + 0.5) * math.log(b + p))
            return AserResult(math.exp(ln_v) * hyp.value, CLOSED_FORM, hyp.terms_used)
    else:
        hyp = specfun.hyp2f1(0.5, m + 0.5, 1.5, -b * om / (2.0 * m),
                             tol=ctl.hyp_rel_tol, max_terms=ctl.hyp_max_terms)
        if hyp.converged:
            ln_pref = (math.log(4.0 * a) + 0.5 * math.log(b) + specfun.ln_gamma(m + 0.5)
                       - specfun.ln_gamma(m) - 0.5 * math.log(2.0 * m / om)
                       - 0.5 * math.log(math.pi))
            value = 2.0 * a - math.exp(ln_pref) * hyp.value
            if value >= 0.0:
                return AserResult(value, CLOSED_FORM, hyp.terms_used)
    return AserResult(aser_stage2_quadrature(sys, mod, ctl), QUADRATURE_FALLBACK)


def aser_stage2(sys: SystemModel, mod: ModulationScheme,
                ctl: NumericControls = NumericControls()) -> AserResult:
    """Second-stage ASER, averaged against the raw (mass-2) stage-2
    density; accurate at medium/high SNR, tends to 2 * CEP(0) as
    omega -> 0."""
    if sys.l != 2:
        raise ValueError("aser_stage2 closed forms assume l = 2 transmit antennas")
    if mod.kind == BINARY:
        return _aser_stage2_binary(sys, mod, ctl)
    return _aser_stage2_mary(sys, mod, ctl)


# ---------------------------------------------------------------------------
# correlated cross-product term
# ---------------------------------------------------------------------------

def aser_cross_quadrature(sys: SystemModel, mod: ModulationScheme, corr: CorrelationModel,
                          ctl: NumericControls = NumericControls()) -> float:
    """Average CEP against the product density by adaptive quadrature; the
    authoritative value for the cross term."""
    res = integrate_semi_infinite(lambda y: cep(y, mod) * pdf_product(y, sys, corr),
                                  0.0, ctl.quadrature)
    if not res.converged:
        raise ArithmeticError(
            f"cross-term quadrature did not converge (err {res.abs_error_estimate:.2e})")
    return res.value


def _cross_series(m: float, om: float, rho: float, base: float, shift: float,
                  ln_pref: float, ctl: SeriesControl, cap: float) -> specfun.EvalResult:
    """Shared double-series evaluator.

    Terms are computed one at a time in log magnitude (they overflow in
    linear arithmetic at low SNR) and summed with compensation; the error
    estimate tracks both the truncation tail and the cancellation floor
    max|term| * eps * nterms, and ``converged`` is only set when that
    floor sits at least 1e-8 below the sum AND the sum lands inside the
    physically possible range [0, cap] (cap = CEP(0) since the product
    density has unit mass).  terms_used counts OUTER indices, the
    quantity whose rapid convergence matters in practice.
    """
    mu = (m / (om * (1.0 - rho))) ** 2
    ln_rho_mu = math.log(rho * mu)
    ln_mu = math.log(mu)
    ln_base = math.log(base)
    d_const = math.log(mu / base)
    tol = ctl.rel_term_tol
    acc = specfun._Kahan()
    n_terms = 0
    outer_used = 0
    outer_small = 0
    ok = False
    overflowed = False
    last_sub = 0.0
    for k in range(ctl.max_outer_terms):
        outer_used = k + 1
        ln_k = ln_pref + k * ln_rho_mu - specfun.ln_gamma(k + 1.0) - specfun.ln_gamma(m + k)
        sub = specfun._Kahan()
        inner_small = 0
        for j in range(ctl.max_inner_terms):
            s = m + k + j
            ln_t = (ln_k + j * ln_mu - 2.0 * specfun.ln_gamma(j + 1.0)
                    + specfun.ln_gamma(shift + s) - math.log(s) - s * ln_base)
            if ln_t > 690.0:
                overflowed = True
                break
            d = 2.0 * specfun.digamma(j + 1.0) + 1.0 / s - specfun.digamma(shift + s) - d_const
            t = math.exp(ln_t) * d
            sub.add(t)
            n_terms += 1
            scale = max(abs(acc.total), abs(sub.total), 1e-300)
            if abs(t) <= tol * scale:
                inner_small += 1
                if inner_small >= 2:
                    break
            else:
                inner_small = 0
        if overflowed:
            break
        acc.add(sub.total)
        acc.max_abs_term = max(acc.max_abs_term, sub.max_abs_term)
        last_sub = abs(sub.total)
        if last_sub <= tol * max(abs(acc.total), 1e-300):
            outer_small += 1
            if outer_small >= 2:
                ok = True
                break
        else:
            outer_small = 0
    cancel_err = acc.max_abs_term * 2e-16 * max(n_terms, 1)
    err = cancel_err + 2.0 * last_sub
    converged = (ok and not overflowed and err <= 1e-8 * max(abs(acc.total), 1e-300))
    return specfun.EvalResult(acc.total, err, outer_used, converged)


def aser_cross_series(sys: SystemModel, mod: ModulationScheme, corr: CorrelationModel,
                      ctl: SeriesControl = SeriesControl()) -> specfun.EvalResult:
    """Double-series closed form of the cross term, derived by expanding
    the Bessel-I factor of the product density and integrating the CEP
    against each term:

      binary:  (1-rho)^m / (2 G(m) G(b)) * sum_k sum_j (rho mu)^k mu^j
               G(b+s) D_kj / (k! G(m+k) (j!)^2 s a^s)
      M-ary:   a (1-rho)^m / (sqrt(pi) G(m)) * sum_k sum_j (rho mu)^k mu^j
               G(s+1/2) D_kj / (k! G(m+k) (j!)^2 s b^s)

    with s = m+k+j, mu = (m/(om(1-rho)))^2 and the bracket
    D_kj = 2 psi(j+1) + 1/s - psi(shift+s) - ln(mu/c), shift = b or 1/2,
    c = a or b.  Validated against aser_cross_quadrature; at low SNR
    (mu large) the terms cancel catastrophically in float64 and the
    result is flagged not-converged instead of being trusted.
    """
    m, om, rho = sys.m, sys.omega, corr.rho
    if not 0.0 < rho < 1.0:
        raise ValueError(f"cross series requires 0 < rho < 1, got {rho}")
    mu = (m / (om * (1.0 - rho))) ** 2
    if mod.kind == BINARY:
        ln_pref = (m * math.log(mu) + m * math.log(1.0 - rho) - math.log(2.0)
                   - specfun.ln_gamma(m) - specfun.ln_gamma(mod.beta))
        return _cross_series(m, om, rho, mod.alpha, mod.beta, ln_pref, ctl)
    ln_pref = (math.log(mod.alpha) + m * math.log(mu) + m * math.log(1.0 - rho)
               - 0.5 * math.log(math.pi) - specfun.ln_gamma(m))
    return _cross_series(m, om, rho, mod.beta, 0.5, ln_pref, ctl)


def aser_cross_series_legacy(sys: SystemModel, mod: ModulationScheme, corr: CorrelationModel,
                             ctl: SeriesControl = SeriesControl()) -> specfun.EvalResult:
    """Superseded double-series variant retained verbatim for the
    validation report: it converges but disagrees with the quadrature
    cross-check by orders of magnitude (see docs/validation_report.md).
    Do not use for new work."""
    m, om, rho = sys.m, sys.omega, corr.rho
    if not 0.0 < rho < 1.0:
        raise ValueError(f"cross series requires 0 < rho < 1, got {rho}")
    acc = specfun._Kahan()
    n_terms = 0
    outer_used = 0
    outer_small = 0
    ok = False
    if mod.kind == BINARY:
        a, b = mod.alpha, mod.beta
        ln_pref = (-(m + 0.5) * math.log(4.0) - specfun.ln_gamma(m) - (m + 1.0) * math.log(om)
                   - math.log(1.0 - rho) - 0.5 * (m - 1.0) * math.log(rho)
                   - specfun.ln_gamma(b))
        ln_q = 2.0 * math.log(1.0 / (2.0 * math.sqrt(a) * om * (1.0 - rho)))
        br_const = 2.0 * math.log(1.0 / (2.0 * math.sqrt(a) * (1.0 - rho) * om))
        shift = b
        ln_c = math.log(a)
    else:
        a, b = mod.alpha, mod.beta
        ln_pref = (math.log(a) - m * math.log(4.0) - specfun.ln_gamma(m)
                   - (m + 1.0) * math.log(om) - math.log(1.0 - rho)
                   - 0.5 * (m - 1.0) * math.log(rho))
        ln_q = 2.0 * math.log(1.0 / (2.0 * math.sqrt(b) * om * (1.0 - rho)))
        br_const = 2.0 * math.log(1.0 / (2.0 * math.sqrt(b) * (1.0 - rho) * om))
        shift = 0.5
        ln_c = math.log(b)
    for k in range(ctl.max_outer_terms):
        outer_used = k + 1
        if mod.kind == BINARY:
            ln_k = (ln_pref + 0.5 * math.log(rho) - math.log(4.0) - (k + m) * ln_c
                    - math.log(1.0 - rho) - math.log(om)
                    - specfun.ln_gamma(k + m) - specfun.ln_gamma(k + 1.0))
        else:
            ln_k = (ln_pref + 0.5 * math.log(rho) - math.log(2.0) - (k + m) * ln_c
                    - 0.5 * math.log(math.pi) - math.log(1.0 - rho) - math.log(om)
                    - specfun.ln_gamma(k + m) - specfun.ln_gamma(k + 1.0))
        sub = specfun._Kahan()
        inner_small = 0
        for j in range(ctl.max_inner_terms):
            s = m + k + j
            ln_t = (ln_k + specfun.ln_gamma(shift + s) - 2.0 * specfun.ln_gamma(j + 1.0)
                    - math.log(2.0 * s) + j * ln_q)
            if ln_t > 690.0:
                return specfun.EvalResult(acc.total, math.inf, outer_used, False)
            br = (2.0 * specfun.digamma(j + 1.0) + 1.0 / s
                  - specfun.digamma(shift + s) - br_const)
            t = math.exp(ln_t) * br
            sub.add(t)
            n_terms += 1
            scale = max(abs(acc.total), abs(sub.total), 1e-300)
            if abs(t) <= ctl.rel_term_tol * scale:
                inner_small += 1
                if inner_small >= 2:
                    break
            else:
                inner_small = 0
        acc.add(sub.total)
        acc.max_abs_term = max(acc.max_abs_term, sub.max_abs_term)
        if abs(sub.total) <= ctl.rel_term_tol * max(abs(acc.total), 1e-300):
            outer_small += 1
            if outer_small >= 2:
                ok = True
                break
        else:
            outer_small = 0
    err = acc.max_abs_term * 2e-16 * max(n_terms, 1)
    return specfun.EvalResult(acc.total, err, outer_used, ok)


def aser_cross(sys: SystemModel, mod: ModulationScheme, corr: CorrelationModel,
               ctl: NumericControls = NumericControls()) -> AserResult:
    """Correlated cross-product ASER term.

    The validated double series is used where it converges (it does so
    within a handful of outer terms at medium/high SNR); otherwise the
    quadrature of CEP against the product density ships, tagged as such.
    Always nonnegative.
    """
    res = aser_cross_series(sys, mod, corr, ctl.series)
    if res.converged and res.value >= 0.0:
        return AserResult(res.value, SERIES, res.terms_used)
    return AserResult(aser_cross_quadrature(sys, mod, corr, ctl), QUADRATURE_FALLBACK)


# ---------------------------------------------------------------------------
# total ASER and outage
# ---------------------------------------------------------------------------

def aser_total(sys: SystemModel, mod: ModulationScheme,
               corr: CorrelationModel | None = None,
               ctl: NumericControls = NumericControls()) -> AserBreakdown:
    """Total ASER stage1 + stage2 - cross.

    With no correlation model the cross term defaults to the independence
    product stage1 * stage2 (total = stage1 + stage2 (1 - stage1));
    with one, the correlated cross term is used and tagged accordingly.
    """
    s1 = aser_stage1(sys, mod, ctl)
    s2 = aser_stage2(sys, mod, ctl)
    if corr is None:
        cross_value = s1.value * s2.value
        cross_method = INDEPENDENT
    else:
        cr = aser_cross(sys, mod, corr, ctl)
        cross_value = cr.value
        cross_method = cr.method
    if cross_value < 0.0:
        raise ArithmeticError(f"cross term came out negative: {cross_value}")
    total = s1.value + s2.value - cross_value
    return AserBreakdown(
        stage1=s1.value, stage2=s2.value, cross=cross_value, total=total,
        method_tags={"stage1": s1.method, "stage2": s2.method, "cross": cross_method},
    )


def outage_stage1(x_th: float, sys: SystemModel) -> float:
    """Stage-1 outage: the CDF bound at the threshold.  Independent of any
    error propagation."""
    if x_th < 0.0:
        raise ValueError(f"outage_stage1 requires x_th >= 0, got {x_th}")
    return cdf_stage1_bound(x_th, sys)


def outage_stage2_conditional(x_th: float, sys: SystemModel) -> float:
    """Stage-2 outage given an error-free first stage (clamped CDF
    approximation at the threshold)."""
    if x_th < 0.0:
        raise ValueError(f"outage_stage2_conditional requires x_th >= 0, got {x_th}")
    return cdf_stage2_approx(x_th, sys)


def outage_stage2_unconditional(x_th: float, sys: SystemModel, mod: ModulationScheme,
                                ctl: NumericControls = NumericControls()) -> float:
    """Stage-2 outage accounting for a possibly wrong first-stage
    decision: F2(x_th) (1 - Ps1) + Ps1.  Never falls below Ps1 and equals
    it exactly at x_th = 0."""
    if x_th < 0.0:
        raise ValueError(f"outage_stage2_unconditional requires x_th >= 0, got {x_th}")
    p1 = aser_stage1(sys, mod, ctl).value
    return cdf_stage2_approx(x_th, sys) * (1.0 - p1) + p1


def ber_from_ser(ser: float, mod: ModulationScheme) -> float:
    """Gray-mapping bit-error approximation SER / log2(M); identity for
    binary schemes."""
    M = mod.mary_order if (mod.kind == RECT_MARY and mod.mary_order) else 2
    return ser / math.log2(M)
