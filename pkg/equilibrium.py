"""
Second-order (Heims) equilibrium of the coupled qubit.

P_Eq(eps) = (P0 + I+ - I-) / (1 + I+ + I-),  I+- = int dw G_T(w) P+-_Eq K+-(w)
<H_SB>    = -omega_a * (int G_T [P+ Kt+ - P- Kt-]) / (1 + I+ + I-)

K+-  = beta^2 phi2(+-beta(omega_a -+ w)),  phi2(y) = (e^y - 1 - y)/y^2
Kt+- = +-beta phi1(+-beta(omega_a -+ w)),  phi1(y) = (e^y - 1)/y

All integrals run over w > 0 with the w and -w halves of G_T folded
together; the products G_T P K are built in log space because the single
factors overflow at large beta while their products stay finite.

T = 0 is the beta -> oo limit of the first-order expansion of the quotient:
    P_Eq(eps) = -1 + 2 int G_0(w) omega_a^2/(omega_a + w)^2 dw
    <H_SB>    = -2 int G_0(w) omega_a/(omega_a + w) dw
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.integrate import quad_vec

from errors import DomainError, QuadratureError, StrongCouplingError
from spectrum import BathSpectrumSpec, InverseTemperature, frequency_breakpoints, g0

logger = logging.getLogger(__name__)

# ---------------------------- Config ---------------------------------
SERIES_SWITCH = 1e-2        # |beta * Delta| below which K, Kt use their Taylor series
STRONG_COUPLING_LIMIT = 0.5
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10
FORMS = ("ratio", "linear")


@dataclass(frozen=True)
class EquilibriumReport:
    alpha: float
    p_eq_bare: float
    p_eq_corrected: float
    rho_ee: float
    rho_gg: float
    mean_hsb: float
    lamb_shift_t0: float

    def as_row(self) -> Tuple[float, ...]:
        return (
            self.alpha,
            self.p_eq_bare,
            self.p_eq_corrected,
            self.rho_ee,
            self.rho_gg,
            self.mean_hsb,
            self.lamb_shift_t0,
        )


# ---------------------------- Coefficients ---------------------------
def _k_series(y):
    """(e^y - 1 - y)/y^2 to fourth order in y."""
    y = np.asarray(y, dtype=float)
    return 0.5 + y * (1 / 6 + y * (1 / 24 + y * (1 / 120 + y / 720)))


def _k_formula(y):
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return (np.expm1(y) - y) / y ** 2


def _kt_series(y):
    """(e^y - 1)/y to fourth order in y."""
    y = np.asarray(y, dtype=float)
    return 1.0 + y * (0.5 + y * (1 / 6 + y * (1 / 24 + y / 120)))


def _kt_formula(y):
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return np.expm1(y) / y


def _switch(y, series, formula):
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < SERIES_SWITCH
    return np.where(small, series(np.where(small, y, 0.0)), formula(np.where(small, 1.0, y)))


def _finite_beta(beta: InverseTemperature) -> float:
    if beta.is_zero:
        raise DomainError("finite beta required; T = 0 has its own branch")
    return beta.beta


def _sign(sign) -> int:
    if sign in ("+", 1, +1):
        return 1
    if sign in ("-", -1):
        return -1
    raise DomainError(f"sign must be '+' or '-', got {sign!r}")


def kcoeff(omega, beta: InverseTemperature, sign="+"):
    """K+-(omega); the removable singularity at omega = +-omega_a uses the series."""
    b = _finite_beta(beta)
    s = _sign(sign)
    w = np.asarray(omega, dtype=float)
    y = s * b * (1.0 - s * w)
    out = b ** 2 * _switch(y, _k_series, _k_formula)
    return float(out) if np.ndim(omega) == 0 else out


def ktilde(omega, beta: InverseTemperature, sign="+"):
    b = _finite_beta(beta)
    s = _sign(sign)
    w = np.asarray(omega, dtype=float)
    y = s * b * (1.0 - s * w)
    out = s * b * _switch(y, _kt_series, _kt_formula)
    return float(out) if np.ndim(omega) == 0 else out


def bare_purity(beta: InverseTemperature) -> float:
    if beta.is_zero:
        return -1.0
    return math.tanh(-beta.beta / 2)


# ---------------------------- Integrands -----------------------------
def _scaled_phi2(y, log_pref):
    """exp(log_pref) * phi2(y) without forming e^y on its own."""
    small = np.abs(y) < SERIES_SWITCH
    ys = np.where(small, 1.0, y)
    pref = np.exp(log_pref)
    with np.errstate(over="ignore", invalid="ignore"):
        moderate = pref * (np.expm1(np.minimum(ys, 30.0)) - ys) / ys ** 2
        large = (np.exp(log_pref + ys) - pref * (1.0 + ys)) / ys ** 2
    direct = np.where(ys > 30.0, large, moderate)
    return np.where(small, pref * _k_series(np.where(small, y, 0.0)), direct)


def _scaled_phi1(y, log_pref):
    small = np.abs(y) < SERIES_SWITCH
    ys = np.where(small, 1.0, y)
    pref = np.exp(log_pref)
    with np.errstate(over="ignore", invalid="ignore"):
        moderate = pref * np.expm1(np.minimum(ys, 30.0)) / ys
        large = (np.exp(log_pref + ys) - pref) / ys
    direct = np.where(ys > 30.0, large, moderate)
    return np.where(small, pref * _kt_series(np.where(small, y, 0.0)), direct)


def _finite_beta_integrand(spec: BathSpectrumSpec, b: float):
    log_p_plus = -np.logaddexp(0.0, b)
    log_p_minus = -np.logaddexp(0.0, -b)

    def integrand(w):
        g = g0(w, spec)
        log_np1 = -math.log(-math.expm1(-b * w))       # omega = +w carries n + 1
        log_n = log_np1 - b * w                         # omega = -w carries n
        a_plus = b ** 2 * (
            _scaled_phi2(b * (1 - w), log_np1 + log_p_plus)
            + _scaled_phi2(b * (1 + w), log_n + log_p_plus)
        )
        a_minus = b ** 2 * (
            _scaled_phi2(-b * (1 + w), log_np1 + log_p_minus)
            + _scaled_phi2(-b * (1 - w), log_n + log_p_minus)
        )
        t_plus = b * (
            _scaled_phi1(b * (1 - w), log_np1 + log_p_plus)
            + _scaled_phi1(b * (1 + w), log_n + log_p_plus)
        )
        t_minus = -b * (
            _scaled_phi1(-b * (1 + w), log_np1 + log_p_minus)
            + _scaled_phi1(-b * (1 - w), log_n + log_p_minus)
        )
        return g * np.array([a_plus, a_minus, t_plus, t_minus], dtype=float)

    return integrand


def _integrate(func, spec: BathSpectrumSpec, size: int, extra: Sequence[float] = ()) -> np.ndarray:
    edges = frequency_breakpoints(spec, extra)
    total = np.zeros(size)
    error = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        value, err = quad_vec(func, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=400)
        total += value
        error += float(err)
    if not np.isfinite(total).all() or error > 1e3 * QUAD_EPSABS + 1e-8 * float(np.max(np.abs(total))):
        raise QuadratureError("equilibrium integral did not converge", achieved=error)
    return total


# ---------------------------- Equilibrium ----------------------------
def _zero_temperature(spec: BathSpectrumSpec) -> Tuple[float, float]:
    def integrand(w):
        g = g0(w, spec)
        return np.array([g / (1.0 + w) ** 2, g / (1.0 + w)])

    excited, shift = _integrate(integrand, spec, 2)
    if 2 * excited > STRONG_COUPLING_LIMIT:
        raise StrongCouplingError(f"ground-state admixture {excited:.3g} is not perturbative")
    return -1.0 + 2.0 * excited, -2.0 * shift


def _finite_temperature(spec: BathSpectrumSpec, b: float, form: str) -> Tuple[float, float]:
    i_plus, i_minus, t_plus, t_minus = _integrate(
        _finite_beta_integrand(spec, b), spec, 4, extra=(1.0 / b,)
    )
    correction = i_plus + i_minus
    if correction > STRONG_COUPLING_LIMIT:
        raise StrongCouplingError(
            f"second-order correction {correction:.3g} exceeds {STRONG_COUPLING_LIMIT} at alpha={b:g}"
        )
    p0 = math.tanh(-b / 2)
    if form == "ratio":
        denom = 1.0 + correction
        purity = (p0 + i_plus - i_minus) / denom
        hsb = -(t_plus - t_minus) / denom
    else:
        purity = p0 + i_plus * (1 - p0) - i_minus * (1 + p0)
        hsb = -(t_plus - t_minus)
    return purity, hsb


def _solve(spec: BathSpectrumSpec, beta: InverseTemperature, form: str) -> Tuple[float, float]:
    if form not in FORMS:
        raise DomainError(f"form must be one of {FORMS}, got {form!r}")
    if spec.eta_max == 0:
        return bare_purity(beta), 0.0
    if beta.is_zero:
        return _zero_temperature(spec)
    if beta.beta == 0:
        # infinite temperature: both populations 1/2 and no system-bath correlation
        return 0.0, 0.0
    return _finite_temperature(spec, beta.beta, form)


def corrected_purity(spec: BathSpectrumSpec, beta: InverseTemperature, form: str = "ratio") -> float:
    return _solve(spec, beta, form)[0]


def mean_interaction_energy(spec: BathSpectrumSpec, beta: InverseTemperature, form: str = "ratio") -> float:
    return _solve(spec, beta, form)[1]


def lamb_shift_t0(spec: BathSpectrumSpec) -> float:
    """-2 int G_0(w)/(omega_a + w) dw over the band, in closed form."""
    g, w0 = spec.gamma, spec.omega0
    d = (1.0 + w0) ** 2 + g ** 2

    def antiderivative(w):
        if math.isinf(w):
            return (1.0 + w0) / g * math.pi / 2
        return (
            math.log1p(w)
            - 0.5 * math.log((w - w0) ** 2 + g ** 2)
            + (1.0 + w0) / g * math.atan((w - w0) / g)
        )

    lo, hi = max(spec.band[0], 0.0), spec.band[1]
    integral = spec.eta_max_sq * g ** 2 / d * (antiderivative(hi) - antiderivative(lo))
    return -2.0 * integral


def equilibrium_report(spec: BathSpectrumSpec, beta: InverseTemperature, form: str = "ratio") -> EquilibriumReport:
    purity, hsb = _solve(spec, beta, form)
    rho_ee = (1.0 + purity) / 2
    logger.debug(f"alpha={beta.alpha:g}: P_eq={purity:.9g}, <H_SB>={hsb:.6g}")
    return EquilibriumReport(
        alpha=beta.alpha,
        p_eq_bare=bare_purity(beta),
        p_eq_corrected=purity,
        rho_ee=rho_ee,
        rho_gg=1.0 - rho_ee,
        mean_hsb=hsb,
        lamb_shift_t0=lamb_shift_t0(spec),
    )


@dataclass(frozen=True, eq=False)
class PurityScan:
    alphas: np.ndarray
    bare: np.ndarray
    corrected: np.ndarray
    mean_hsb: np.ndarray

    @property
    def relative_change(self) -> np.ndarray:
        return (self.corrected - self.bare) / np.abs(self.bare)

    @property
    def excited_bare(self) -> np.ndarray:
        return (1.0 + self.bare) / 2

    @property
    def excited_corrected(self) -> np.ndarray:
        return (1.0 + self.corrected) / 2


def purity_scan(spec: BathSpectrumSpec, alphas: Sequence[float], form: str = "ratio") -> PurityScan:
    reports = [equilibrium_report(spec, InverseTemperature.from_alpha(a), form) for a in alphas]
    return PurityScan(
        alphas=np.array([r.alpha for r in reports]),
        bare=np.array([r.p_eq_bare for r in reports]),
        corrected=np.array([r.p_eq_corrected for r in reports]),
        mean_hsb=np.array([r.mean_hsb for r in reports]),
    )
