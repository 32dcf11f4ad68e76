"""CDS valuation under trilateral default risk and collateralization."""

from .contracts import CDSContract, CollateralSpec, DefaultPayment, RecoverySpec, standard_cds
from .hazard import (
    CIRParams,
    CalibrationResult,
    HazardPathSet,
    SurvivalSchedule,
    calibrate_cir,
    cir_expected_survival,
    period_survival,
    riskfree_breakeven_spread,
    riskfree_pathset,
    simulate_paths,
)
from .joint import (
    AdmissibilityReport,
    DependenceSpec,
    PeriodDependence,
    PeriodMarginals,
    TrivariateDistribution,
    admissibility_region,
    comvariance_from_comrelation,
    covariance_from_correlation,
    nvariate_joint,
    sample_comrelation,
    trivariate_joint,
)
from .market import (
    Curve,
    CurvePoint,
    MarketSnapshot,
    build_curve,
    discount_factor,
    emit_snapshot,
    load_bundled_snapshot,
    load_snapshot,
    spread_at,
)
from .pricer import (
    RiskyPeriodFactors,
    TrilateralPricer,
    ValuationResult,
    breakeven_spread,
    period_factors,
    price_collateralized,
    price_riskfree,
    price_trilateral,
    regression_continuation,
)

__version__ = "0.1.0"
