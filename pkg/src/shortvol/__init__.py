"""Short-maturity asymptotics for local volatility models at fixed carry ``rho = (r - q) T``."""

from .cev import (
    cev_atm_skew,
    cev_atm_vol,
    cev_bbf_vol,
    cev_optimal_path,
    cev_rate_closed,
    novikov_horizon,
)
from .errors import DomainError, NoTurningSolution, NumericError, ShortVolError, SolverError
from .model import (
    CevSpec,
    Market,
    Region,
    VolatilityModel,
    classify_region,
    constant_model,
    make_cev_model,
)
from .pricers import (
    PriceResult,
    bs_implied_vol,
    bs_price,
    cev_exact_price,
    ld_limit_check,
    mc_price,
    noncentral_chi2_cdf,
    noncentral_chi2_sf,
)
from .ratefn import (
    PathSample,
    RateResult,
    optimal_path,
    rate_expansion_small_rho,
    rate_function,
    rate_function_rho0,
    solve_C_monotone,
    solve_C_turning,
)
from .smile import (
    SmilePoint,
    atm_skew_rho,
    atm_vol_rho,
    bbf_vol,
    implied_vol_asymptotic,
    sigma1_from_expansion,
    sigma1_rho_coefficient,
    smile_curve,
)

__version__ = "0.1.0"
