"""Coverage probability and ergodic rate for the Poisson downlink.

Interference-limited coverage has the uniform shape

    Pcov(gamma) = 1 / (1 - B(gamma) * p_active),

where B is the MGF exponent bracket (exact Kummer form or the two-piece
approximation) and p_active is the idle-mode thinning factor (1 = fully
loaded). Ergodic peak rate is int_0^inf Pcov(w)/(1+w) dw, evaluated by
quadrature (the authority) and by closed forms: a general-beta expression
for the fully loaded case and tabulated expressions for beta = 3, 4 under
partial load. The tabulated forms are audited against quadrature on first
use and quarantined wholesale if any grid point deviates beyond 1e-4.

Rates are in nats/s/Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from scipy.integrate import quad

from .mgf import (
    IntersectionConstant,
    MgfMode,
    MgfQuery,
    NetworkParams,
    mgf_thinned,
    solve_c,
    two_piece_bracket,
)
from .specfun import (
    DEFAULT_POLICY,
    FnEvalPolicy,
    NonConvergenceError,
    gamma_fn,
    gauss_2f1,
    kummer_1f1_neg,
)

__all__ = [
    "CoverageCurve",
    "LoadModel",
    "PathLossPdf",
    "PcovKind",
    "RateMethod",
    "RateResult",
    "TabulatedRateAudit",
    "coverage_curve",
    "load_model",
    "pathloss_cdf",
    "pathloss_pdf",
    "pcov_approx_full",
    "pcov_exact_full",
    "pcov_general",
    "pcov_partial_load",
    "rate_actual",
    "rate_closed_general",
    "rate_peak_partial_load",
    "rate_quadrature",
    "table1_audit",
]

# shape constant of the gamma approximation to Voronoi cell areas; fixed by
# the load model, not a tunable
_LOAD_SHAPE = 3.5

# rate integral: truncate where the provable tail bound drops below this
_TAIL_BUDGET = 1e-10
# reported absolute quadrature error beyond this is treated as failure
_QUAD_ERR_LIMIT = 1e-8

# interference-free regime guard: coverage -> 1 makes the rate integral diverge
_MIN_P_ACTIVE = 1e-6

# the general closed form divides by 2*beta^2 - 11*beta + 10; this root is in range
_SINGULAR_BETA = (11.0 + math.sqrt(41.0)) / 4.0
_SINGULAR_HALFWIDTH = 0.02

# branch constants the tabulated peak-rate forms were derived with (4 digits,
# the fitted values); the audit quadrature must use these same constants
_TABULATED_C = {3.0: 1.2528, 4.0: 1.2873}

_AUDIT_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
_AUDIT_MISMATCH_LIMIT = 1e-4


class PcovKind(Enum):
    EXACT = "Exact"
    APPROX = "Approx"


class RateMethod(Enum):
    CLOSED_FORM_GENERAL = "ClosedFormGeneral"
    CLOSED_FORM_TABLE1 = "ClosedFormTable1"
    QUADRATURE = "Quadrature"
    MONTE_CARLO = "MonteCarlo"


@dataclass(frozen=True)
class RateResult:
    """Ergodic rate value (nats/s/Hz) with provenance.

    stderr is meaningful for Monte Carlo estimates only and stays 0
    otherwise. no_interference flags the degenerate vanishing-load regime
    where the value is a sentinel, not a rate.
    """

    value: float
    method: RateMethod
    stderr: float = 0.0
    no_interference: bool = False

    def __post_init__(self) -> None:
        if self.stderr < 0.0:
            raise ValueError(f"stderr must be nonnegative, got {self.stderr}")
        if not self.no_interference and self.value < 0.0:
            raise ValueError(f"rate must be nonnegative, got {self.value}")


@dataclass(frozen=True)
class LoadModel:
    """Idle-mode load probabilities for a UE/BS density ratio."""

    ratio: float
    p_inactive: float
    p_active: float
    p_selection: float


@dataclass(frozen=True)
class CoverageCurve:
    """Coverage sampled on a gamma grid (linear thresholds)."""

    gamma_grid: tuple[float, ...]
    pcov_exact: tuple[float, ...]
    pcov_approx: tuple[float, ...]
    p_active: float

    def __post_init__(self) -> None:
        for name, series in (("pcov_exact", self.pcov_exact), ("pcov_approx", self.pcov_approx)):
            if len(series) != len(self.gamma_grid):
                raise ValueError(f"{name} length {len(series)} != grid length {len(self.gamma_grid)}")
            for v in series:
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name} value {v} outside [0, 1]")
            for a, b in zip(series, series[1:]):
                if b > a + 1e-12:
                    raise ValueError(f"{name} is not nonincreasing along the grid")


@dataclass(frozen=True)
class PathLossPdf:
    """Distribution of the serving-link (nearest-BS) path loss."""

    lambda_bs: float
    beta: float
    kappa: float = 1.0

    def __post_init__(self) -> None:
        if not self.lambda_bs > 0.0:
            raise ValueError(f"lambda_bs must be positive, got {self.lambda_bs}")
        if not 2.0 < self.beta <= 5.0:
            raise ValueError(f"beta must lie in (2, 5], got {self.beta}")
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @classmethod
    def from_params(cls, p: NetworkParams) -> "PathLossPdf":
        return cls(lambda_bs=p.lambda_bs, beta=p.beta, kappa=p.kappa)

    def pdf(self, y: float) -> float:
        if not y > 0.0:
            raise ValueError(f"path loss must be positive, got {y}")
        d = 2.0 / self.beta
        scale = math.pi * self.lambda_bs * (y / self.kappa) ** d
        return (2.0 * math.pi * self.lambda_bs / self.beta) * (1.0 / self.kappa) ** d * y ** (d - 1.0) * math.exp(-scale)

    def cdf(self, y: float) -> float:
        if y <= 0.0:
            return 0.0
        d = 2.0 / self.beta
        return 1.0 - math.exp(-math.pi * self.lambda_bs * (y / self.kappa) ** d)


def pathloss_pdf(y: float, p: NetworkParams) -> float:
    """Density of the nearest-BS path loss at y."""
    return PathLossPdf.from_params(p).pdf(y)


def pathloss_cdf(y: float, p: NetworkParams) -> float:
    return PathLossPdf.from_params(p).cdf(y)


def _check_beta(beta: float) -> None:
    if not 2.0 < beta <= 5.0:
        raise ValueError(f"beta must lie in (2, 5], got {beta}")


def _check_gamma(gamma: float) -> None:
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")


def pcov_exact_full(gamma: float, beta: float, policy: FnEvalPolicy = DEFAULT_POLICY) -> float:
    """Fully loaded interference-limited coverage, exact Kummer form.

    Independent of density, transmit power, and path-loss prefactor; those
    all cancel between signal and interference.
    """
    _check_beta(beta)
    _check_gamma(gamma)
    return 1.0 / kummer_1f1_neg(2.0 / beta, gamma, policy)


def pcov_approx_full(gamma: float, beta: float, c: IntersectionConstant | None = None) -> float:
    """Fully loaded coverage through the two-piece bracket approximation."""
    _check_beta(beta)
    _check_gamma(gamma)
    if c is None:
        c = solve_c(beta)
    return 1.0 / (1.0 - two_piece_bracket(beta, gamma, c.c_exact))


def pcov_partial_load(
    gamma: float,
    beta: float,
    p_active: float,
    c: IntersectionConstant | None = None,
    policy: FnEvalPolicy = DEFAULT_POLICY,
) -> tuple[float, float]:
    """Idle-mode coverage (exact, approx) with interferers thinned by p_active."""
    _check_beta(beta)
    _check_gamma(gamma)
    if not 0.0 < p_active <= 1.0:
        raise ValueError(f"p_active must lie in (0, 1], got {p_active}")
    if c is None:
        c = solve_c(beta)
    d = 2.0 / beta
    exact = 1.0 / (1.0 + (kummer_1f1_neg(d, gamma, policy) - 1.0) * p_active)
    approx = 1.0 / (1.0 - two_piece_bracket(beta, gamma, c.c_exact) * p_active)
    return exact, approx


def pcov_general(gamma: float, p: NetworkParams, p_active: float = 1.0) -> float:
    """Coverage by direct integration over the serving path-loss density.

    Slower route kept for two jobs the closed forms cannot do: checking that
    the density really cancels out (evaluate at two lambda_bs and compare),
    and the noise-included case sigma_n2 > 0, which has no closed form here.
    """
    _check_gamma(gamma)
    if not 0.0 < p_active <= 1.0:
        raise ValueError(f"p_active must lie in (0, 1], got {p_active}")
    if gamma == 0.0:
        return 1.0
    dist = PathLossPdf.from_params(p)
    d = p.delta
    # the interference MGF argument x = gamma at every l0, so the exponent
    # bracket is one fixed number; used only to size the integration window
    denom = 1.0 + (kummer_1f1_neg(d, gamma) - 1.0) * p_active
    # integrand decays like exp(-pi lambda (l0/kappa)^d * denom); cut at 40 e-folds
    l0_max = p.kappa * (40.0 / (math.pi * p.lambda_bs * denom)) ** (1.0 / d)

    def integrand(l0: float) -> float:
        q = MgfQuery(s=gamma * l0 / p.p_tx, l0=l0, mode=MgfMode.THINNED, p_active=p_active)
        mgf_val = mgf_thinned(q, p, base_mode=MgfMode.EXACT)
        noise = math.exp(-gamma * l0 * p.sigma_n2 / p.p_tx) if p.sigma_n2 > 0.0 else 1.0
        return noise * mgf_val * dist.pdf(l0)

    val, err = quad(integrand, 0.0, l0_max, epsabs=1e-10, epsrel=1e-10, limit=200)
    if err > _QUAD_ERR_LIMIT:
        raise NonConvergenceError(f"coverage quadrature achieved only {err:.2e} absolute error")
    return val


def coverage_curve(
    beta: float,
    gamma_grid: tuple[float, ...] | list[float],
    p_active: float = 1.0,
    c: IntersectionConstant | None = None,
) -> CoverageCurve:
    """Sample exact and approximate coverage along a linear gamma grid."""
    if c is None:
        c = solve_c(beta)
    exact = []
    approx = []
    for g in gamma_grid:
        e, a = pcov_partial_load(g, beta, p_active, c)
        exact.append(e)
        approx.append(a)
    return CoverageCurve(
        gamma_grid=tuple(float(g) for g in gamma_grid),
        pcov_exact=tuple(exact),
        pcov_approx=tuple(approx),
        p_active=p_active,
    )


def load_model(lambda_ue: float, lambda_bs: float) -> LoadModel:
    """Idle-mode probabilities from the gamma cell-area model.

    p_inactive = (1 + ratio/3.5)^(-3.5); p_selection is the chance a UE owns
    a resource block, (1/ratio) * p_active, continued to 1 at ratio = 0.
    """
    if not lambda_bs > 0.0:
        raise ValueError(f"lambda_bs must be positive, got {lambda_bs}")
    if lambda_ue < 0.0:
        raise ValueError(f"lambda_ue must be nonnegative, got {lambda_ue}")
    if lambda_ue == 0.0:
        return LoadModel(ratio=0.0, p_inactive=1.0, p_active=0.0, p_selection=1.0)
    ratio = lambda_ue / lambda_bs
    p_inactive = (1.0 + ratio / _LOAD_SHAPE) ** (-_LOAD_SHAPE)
    p_active = 1.0 - p_inactive
    p_selection = p_active / ratio
    return LoadModel(ratio=ratio, p_inactive=p_inactive, p_active=p_active, p_selection=min(p_selection, 1.0))


def _w_max(beta: float, p_active: float) -> float:
    # tail of the rate integrand is bounded by 1/(p_active Gamma(1-d) w^d (1+w));
    # beyond W the remaining mass is <= W^(-d) / (p_active Gamma(1-d) d)
    d = 2.0 / beta
    return (1.0 / (_TAIL_BUDGET * p_active * gamma_fn(1.0 - d) * d)) ** (1.0 / d)


def _rate_integral(
    beta: float,
    p_active: float,
    pcov_kind: PcovKind,
    c_value: float,
    policy: FnEvalPolicy = DEFAULT_POLICY,
) -> tuple[float, float]:
    """Peak-rate integral int_0^W Pcov(w)/(1+w) dw with provable tail cutoff."""
    d = 2.0 / beta

    if pcov_kind is PcovKind.EXACT:
        def cov(w: float) -> float:
            return 1.0 / (1.0 + (kummer_1f1_neg(d, w, policy) - 1.0) * p_active)
    else:
        def cov(w: float) -> float:
            return 1.0 / (1.0 - two_piece_bracket(beta, w, c_value) * p_active)

    def integrand(w: float) -> float:
        return cov(w) / (1.0 + w)

    w_hi = _w_max(beta, p_active)
    low, err_low = quad(integrand, 0.0, c_value, epsabs=1e-11, epsrel=1e-11, limit=200)
    # the upper piece spans many decades (W can reach ~1e28); integrate in log space
    high, err_high = quad(
        lambda v: integrand(math.exp(v)) * math.exp(v),
        math.log(c_value),
        math.log(w_hi),
        epsabs=1e-10,
        epsrel=1e-10,
        limit=400,
    )
    err = err_low + err_high + _TAIL_BUDGET
    if err > _QUAD_ERR_LIMIT:
        raise NonConvergenceError(
            f"rate quadrature achieved only {err:.2e} absolute error (target {_QUAD_ERR_LIMIT:g})"
        )
    return low + high, err


def rate_quadrature(
    beta: float,
    p_active: float = 1.0,
    pcov_kind: PcovKind = PcovKind.EXACT,
    c: IntersectionConstant | None = None,
    policy: FnEvalPolicy = DEFAULT_POLICY,
) -> RateResult:
    """Ergodic peak rate by adaptive quadrature. Authority for all closed forms."""
    _check_beta(beta)
    if p_active < _MIN_P_ACTIVE:
        raise ValueError(
            f"p_active={p_active} below {_MIN_P_ACTIVE}: coverage tends to 1 and the "
            "rate integral diverges (no-interference regime)"
        )
    if p_active > 1.0:
        raise ValueError(f"p_active must lie in [{_MIN_P_ACTIVE}, 1], got {p_active}")
    if c is None:
        c = solve_c(beta)
    value, _ = _rate_integral(beta, p_active, pcov_kind, c.c_exact, policy)
    return RateResult(value=value, method=RateMethod.QUADRATURE)


def rate_closed_general(beta: float, c: IntersectionConstant | None = None) -> RateResult:
    """Fully loaded peak rate in closed form, valid for any beta in (2, 5].

    The expression integrates the two-piece coverage exactly; it shares a
    removable singularity with its own partial fractions where
    2*beta^2 - 11*beta + 10 = 0 (beta ~ 4.3508). Inside a small window
    around that root the quadrature value is substituted instead, which the
    method field of the result reports.
    """
    _check_beta(beta)
    if c is None:
        c = solve_c(beta)
    if abs(beta - _SINGULAR_BETA) < _SINGULAR_HALFWIDTH:
        value, _ = _rate_integral(beta, 1.0, PcovKind.APPROX, c.c_exact)
        return RateResult(value=value, method=RateMethod.QUADRATURE)
    cv = c.c_exact
    d = 2.0 / beta
    big_a = 2.0 * beta - 2.0
    ratio_ab = big_a / (beta - 2.0)
    alpha = math.sqrt(ratio_ab * ratio_ab + big_a)
    quad_factor = 10.0 - 11.0 * beta + 2.0 * beta * beta
    t1 = (4.0 + 2.0 * alpha - 3.0 * beta - alpha * beta) / (2.0 * alpha * quad_factor) * math.log(
        (cv + alpha - ratio_ab) / (alpha - ratio_ab)
    )
    t2 = (-4.0 + 2.0 * alpha + 3.0 * beta - alpha * beta) / (2.0 * alpha * quad_factor) * math.log(
        (cv - alpha - ratio_ab) / (-alpha - ratio_ab)
    )
    t3 = (beta - 2.0) / quad_factor * math.log(cv + 1.0)
    tail = beta * cv ** (-d) / (2.0 * gamma_fn(1.0 - d)) * gauss_2f1(1.0, d, 1.0 + d, -1.0 / cv)
    return RateResult(value=big_a * (t1 + t2 + t3) + tail, method=RateMethod.CLOSED_FORM_GENERAL)


def _tabulated_peak_rate_beta4(pa: float) -> float:
    # transcribed verbatim; the audit decides whether it is ever served
    c = _TABULATED_C[4.0]
    b = math.sqrt(9.0 + 6.0 / pa)
    den = 1.0 + pa * (-2.0 + pa * (1.0 + math.pi))
    t1 = (-6.0 / pa) * (
        math.log((c - 3.0 + b) / (-3.0 + b)) / (2.0 * b * (-4.0 + b))
        + math.log((c - 3.0 - b) / (-3.0 - b)) / (2.0 * b * (4.0 + b))
        - math.log(c + 1.0) / ((-4.0 + b) * (4.0 + b))
    )
    t2 = (-2.0 * math.log(pa) * (1.0 + pa) + (pa - 1.0) * math.log((1.0 + c) * math.pi)) / den
    t3 = (
        math.pi**1.5 * pa
        - 2.0 * math.sqrt(math.pi) * pa * math.atan(math.sqrt(c))
        - 2.0 * (pa - 1.0) * math.log(1.0 - pa + math.sqrt(math.pi * c) * pa)
    ) / den
    return t1 + t2 + t3


def _tabulated_peak_rate_beta3(pa: float) -> float:
    c = _TABULATED_C[3.0]
    g3 = gamma_fn(1.0 / 3.0)
    b = 2.0 * math.sqrt(4.0 + 1.0 / pa)
    cr = c ** (1.0 / 3.0)
    t1 = (-4.0 / pa) * (
        math.log((c - 4.0 + b) / (-4.0 + b)) / (2.0 * b * (-5.0 + b))
        + math.log((c - 4.0 - b) / (-4.0 - b)) / (2.0 * b * (5.0 + b))
        - math.log(c + 1.0) / ((-5.0 + b) * (5.0 + b))
    )
    den2 = 1.0 + pa * (-2.0 + pa + (pa - 1.0) * g3 + pa * g3 * g3)
    t2 = -math.sqrt(3.0) * pa * math.atan((-1.0 + 2.0 * cr) / math.sqrt(3.0)) * g3 / den2
    num3 = (
        -((1.0 - pa) ** 1.5) * pa * math.pi * (-math.sqrt(3.0) + 3.0 * math.sqrt(-pa * g3 / (pa - 1.0))) * g3
        - 6.0 * (pa - 1.0) * (pa * g3) ** 1.5 * math.atan(math.sqrt(pa * g3 / (1.0 - pa)) * cr)
        + math.sqrt(1.0 - pa)
        * (
            math.sqrt(3.0) * (pa * g3) ** 2 * math.pi
            - 2.0 * pa * g3 * (-1.0 + pa * (1.0 + g3)) * math.log(1.0 + cr)
            + pa * g3 * (-1.0 + pa * (1.0 + g3)) * math.log(1.0 - cr + cr * cr)
            + (pa - 1.0) ** 2
            * (
                -2.0 * math.log(1.0 + c)
                - 3.0 * math.log(pa * g3)
                + 3.0 * math.log(1.0 - pa * (-1.0 + cr * cr * g3))
            )
        )
    )
    den3 = 2.0 * math.sqrt(1.0 - pa) * (-((pa - 1.0) ** 3) + (pa * g3) ** 3)
    return t1 + t2 + num3 / den3


_TABULATED_FORMS = {3.0: _tabulated_peak_rate_beta3, 4.0: _tabulated_peak_rate_beta4}


@dataclass(frozen=True)
class TabulatedRateAudit:
    """Outcome of checking a tabulated closed form against quadrature."""

    beta: float
    quarantined: bool
    max_abs_mismatch: float
    worst_p_active: float | None
    checked: tuple[float, ...]
    skipped: tuple[float, ...]
    message: str


@lru_cache(maxsize=None)
def table1_audit(beta: float) -> TabulatedRateAudit:
    """Audit the tabulated partial-load peak-rate form for one beta.

    Every p_active grid point inside the form's log domain is compared with
    quadrature of the same integrand. The quadrature here deliberately uses
    the 4-digit branch constant the tabulated form was derived with, so a
    faithful transcription would match at antiderivative accuracy (~1e-9);
    any point off by more than 1e-4 quarantines the form and all calls are
    served by quadrature instead. Cached per beta.
    """
    beta = float(beta)
    if beta not in _TABULATED_FORMS:
        raise ValueError(f"tabulated closed forms exist for beta in {{3, 4}}, got {beta}")
    form = _TABULATED_FORMS[beta]
    c_tab = _TABULATED_C[beta]
    checked: list[float] = []
    skipped: list[float] = []
    max_mismatch = 0.0
    worst: float | None = None
    for pa in _AUDIT_GRID:
        try:
            closed = form(pa)
        except (ValueError, ZeroDivisionError):
            skipped.append(pa)
            continue
        reference, _ = _rate_integral(beta, pa, PcovKind.APPROX, c_tab)
        mismatch = abs(closed - reference)
        checked.append(pa)
        if mismatch > max_mismatch:
            max_mismatch = mismatch
            worst = pa
    quarantined = (not checked) or max_mismatch > _AUDIT_MISMATCH_LIMIT
    if quarantined:
        message = (
            f"beta={beta:g} tabulated form QUARANTINED: deviates from quadrature by up to "
            f"{max_mismatch:.6g} nats/s/Hz at p_active={worst} "
            f"(limit {_AUDIT_MISMATCH_LIMIT:g}); quadrature values are served instead"
        )
    else:
        message = (
            f"beta={beta:g} tabulated form verified: max deviation {max_mismatch:.3g} over "
            f"{len(checked)} grid points"
        )
    if skipped:
        message += f"; {len(skipped)} grid points outside the form's log domain: {tuple(skipped)}"
    return TabulatedRateAudit(
        beta=beta,
        quarantined=quarantined,
        max_abs_mismatch=max_mismatch,
        worst_p_active=worst,
        checked=tuple(checked),
        skipped=tuple(skipped),
        message=message,
    )


def rate_peak_partial_load(
    beta: float,
    p_active: float,
    c: IntersectionConstant | None = None,
) -> RateResult:
    """Idle-mode peak rate for beta in {3, 4} via the tabulated closed forms.

    Falls back to quadrature when the form is quarantined by its audit, when
    p_active leaves the form's log domain, or at p_active=1 where the general
    closed form takes over.
    """
    beta = float(beta)
    if beta not in _TABULATED_FORMS:
        raise ValueError(f"tabulated closed forms exist for beta in {{3, 4}}, got {beta}")
    if not _MIN_P_ACTIVE <= p_active <= 1.0:
        raise ValueError(f"p_active must lie in [{_MIN_P_ACTIVE}, 1], got {p_active}")
    if p_active >= 1.0 - 1e-9:
        return rate_closed_general(beta, c)
    audit = table1_audit(beta)
    if audit.quarantined:
        return rate_quadrature(beta, p_active, PcovKind.APPROX, c)
    try:
        return RateResult(value=_TABULATED_FORMS[beta](p_active), method=RateMethod.CLOSED_FORM_TABLE1)
    except (ValueError, ZeroDivisionError):
        # log argument crossed zero (or a partial-fraction pole); per-point fallback
        return rate_quadrature(beta, p_active, PcovKind.APPROX, c)


def rate_actual(beta: float, lambda_ue: float, lambda_bs: float) -> RateResult:
    """Per-UE rate: peak rate times the resource-selection probability.

    The vanishing-load limit would multiply a divergent peak rate by a
    selection probability of 1; that regime is reported as an explicit
    no-interference sentinel instead of a number.
    """
    _check_beta(beta)
    lm = load_model(lambda_ue, lambda_bs)
    if lm.p_active < _MIN_P_ACTIVE:
        return RateResult(
            value=math.inf,
            method=RateMethod.QUADRATURE,
            no_interference=True,
        )
    if beta in _TABULATED_FORMS:
        peak = rate_peak_partial_load(beta, lm.p_active)
    else:
        peak = rate_quadrature(beta, lm.p_active, PcovKind.APPROX)
    return RateResult(value=peak.value * lm.p_selection, method=peak.method)
