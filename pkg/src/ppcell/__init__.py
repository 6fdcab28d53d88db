"""Coverage and ergodic-rate analytics for Poisson cellular downlinks.

The library evaluates the interference MGF of a nearest-BS Poisson downlink
(exact and piecewise-approximate forms), turns it into coverage probability
and ergodic rate (fully loaded and idle-mode-thinned), and ships a Monte
Carlo simulator that every analytical expression is validated against.

All internal quantities are linear (no dB) and rates are in nats/s/Hz.
"""

from .specfun import (
    DEFAULT_POLICY,
    FnEvalPolicy,
    NonConvergenceError,
    gamma_fn,
    gauss_2f1,
    kummer_1f1_neg,
    kummer_1f1_neg_series,
    lower_inc_gamma,
)
from .mgf import (
    IntersectionConstant,
    MgfMode,
    MgfQuery,
    NetworkParams,
    mgf_approx,
    mgf_exact,
    mgf_fixed_mark,
    mgf_rayleigh_marked,
    mgf_taylor_full,
    mgf_thinned,
    solve_c,
)
from .analytics import (
    CoverageCurve,
    LoadModel,
    PathLossPdf,
    PcovKind,
    RateMethod,
    RateResult,
    TabulatedRateAudit,
    coverage_curve,
    load_model,
    pathloss_cdf,
    pathloss_pdf,
    pcov_approx_full,
    pcov_exact_full,
    pcov_general,
    pcov_partial_load,
    rate_actual,
    rate_closed_general,
    rate_peak_partial_load,
    rate_quadrature,
    table1_audit,
)
from .simulator import (
    Deployment,
    SimConfig,
    SirSampleSet,
    apply_idle_mode,
    estimate_coverage,
    estimate_rates,
    inactive_fraction_interior,
    run_simulation,
    sample_deployment,
    sample_sir,
)

__version__ = "0.1.0"
