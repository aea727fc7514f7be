"""Optimal timing of credit-derivative liquidation under premium disagreement.

Markets and investors priced off the same default intensity can disagree on
risk premia; the gap makes immediate liquidation suboptimal. This package
prices the claims in closed form, quantifies the disagreement through a
drift function, solves the optimal-stopping problems for the delayed
liquidation/purchase premia, extracts the critical boundaries, and verifies
everything against an independent Monte Carlo engine.
"""

from .boundary import (
    Boundary,
    bond_price_inverse,
    cds_price_inverse,
    cds_price_map,
    cdx_price_inverse,
    cdx_price_map,
    extract_boundary,
)
from .drift import (
    DeterministicInputs,
    DriftFn,
    drift_grid,
    g_bond_cir,
    g_bond_ou,
    g_cds,
    g_cdx,
    g_deterministic,
    g_general,
    g_rmv,
    g_rt,
)
from .mc_oracle import (
    McEstimate,
    PathBatch,
    estimate_price,
    evaluate_strategy,
    simulate_default,
    simulate_paths,
    simulate_topdown,
)
from .models import (
    Cds,
    Cdx,
    CirParams,
    ForwardCds,
    LossDist,
    MeasurePair,
    OuParams,
    RmvBond,
    RtBond,
    TopDownParams,
    ValidationReport,
    ZeroRecoveryBond,
    cir_state_from_lambda,
    constant_rate,
    relative_mtm_premium,
    validate,
)
from .pricers import (
    PriceFn,
    PriceSurface,
    cds_price_cir,
    cds_price_ou,
    cdx_coefficients,
    cdx_moments,
    cdx_value,
    cir_bond_price,
    claim_price_fn,
    default_free_bond,
    forward_cds_price,
    ou_bond_price,
    pde_price,
    rmv_bond_price,
    rt_bond_price,
)
from .vi_solver import (
    Grid,
    PremiumSurface,
    PsorError,
    SolverConfig,
    default_lambda_bounds,
    deterministic_premium,
    solve_cdx_vi,
    solve_liquidation_vi,
    solve_purchase_vi,
    solve_sequential_vi,
)

__version__ = "0.1.0"

__all__ = [
    "Boundary",
    "Cds",
    "Cdx",
    "CirParams",
    "DeterministicInputs",
    "DriftFn",
    "ForwardCds",
    "Grid",
    "LossDist",
    "McEstimate",
    "MeasurePair",
    "OuParams",
    "PathBatch",
    "PremiumSurface",
    "PriceFn",
    "PriceSurface",
    "PsorError",
    "RmvBond",
    "RtBond",
    "SolverConfig",
    "TopDownParams",
    "ValidationReport",
    "ZeroRecoveryBond",
    "bond_price_inverse",
    "cds_price_cir",
    "cds_price_inverse",
    "cds_price_map",
    "cds_price_ou",
    "cdx_coefficients",
    "cdx_moments",
    "cdx_price_inverse",
    "cdx_price_map",
    "cdx_value",
    "cir_bond_price",
    "cir_state_from_lambda",
    "claim_price_fn",
    "constant_rate",
    "default_free_bond",
    "default_lambda_bounds",
    "deterministic_premium",
    "drift_grid",
    "estimate_price",
    "evaluate_strategy",
    "extract_boundary",
    "forward_cds_price",
    "g_bond_cir",
    "g_bond_ou",
    "g_cds",
    "g_cdx",
    "g_deterministic",
    "g_general",
    "g_rmv",
    "g_rt",
    "ou_bond_price",
    "pde_price",
    "relative_mtm_premium",
    "rmv_bond_price",
    "rt_bond_price",
    "simulate_default",
    "simulate_paths",
    "simulate_topdown",
    "solve_cdx_vi",
    "solve_liquidation_vi",
    "solve_purchase_vi",
    "solve_sequential_vi",
    "validate",
]
