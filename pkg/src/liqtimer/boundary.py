"""Region extraction and price-coordinate maps for premium surfaces.

The stop region of a premium surface is the set where the premium has
collapsed to its obstacle within a tolerance. Its edge in the intensity
coordinate is located to sub-cell accuracy, then pushed through the claim's
price map so boundaries can be reported against observable market values.
The stopping rule the boundary encodes is tau* = min(first entry into the
region, default time, maturity).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import pricers
from .models import CirParams, OuParams, TopDownParams

STOPPING_RULE = "tau* = min(first entry into the stop region, default time, maturity)"
INTERPOLATION_RULE = (
    "boundary placed by linear interpolation of the premium between the last "
    "node above eps and the first node at or below eps"
)


@dataclass
class Boundary:
    """Critical intensity per time node with its price-coordinate image.

    side 'sell_above' means the stop region is {lambda >= lambda_star};
    'sell_below' means {lambda <= lambda_star}. lambda_star is NaN at times
    with no stop region; it sits at the domain edge when the region covers
    the whole grid. For purchase surfaces the same geometry applies to the
    buy region.
    """

    t_nodes: np.ndarray
    lambda_star: np.ndarray
    price_star: np.ndarray
    side: str
    stop_region: np.ndarray  # bool, shape (M+1, K+1)
    multi_interval: bool
    metadata: dict = field(default_factory=dict)


def _row_intervals(region_row: np.ndarray) -> list:
    """Contiguous index runs [start, stop] of True cells."""
    idx = np.nonzero(region_row)[0]
    if idx.size == 0:
        return []
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    stops = np.concatenate([idx[breaks], [idx[-1]]])
    return list(zip(starts.tolist(), stops.tolist()))


def _interp_edge(lam, vals, inside: int, outside: int, eps: float) -> float:
    """Sub-cell crossing of vals = eps between an inside and outside node."""
    v_in, v_out = vals[inside], vals[outside]
    if v_out <= v_in:  # flat or inverted; snap to the inside node
        return float(lam[inside])
    frac = (eps - v_in) / (v_out - v_in)
    return float(lam[inside] + frac * (lam[outside] - lam[inside]))


def detect_side(drift_vals: np.ndarray) -> str:
    """sell_above when G < 0 toward the top of the intensity grid.

    The premium source is +G for liquidation; its stop region forms where
    the source is negative. The sign is polled at the top node over all
    pre-terminal times.
    """
    top = np.asarray(drift_vals)[:-1, -1]
    n_neg = int(np.sum(top < 0.0))
    return "sell_above" if 2 * n_neg >= len(top) else "sell_below"


def extract_boundary(
    surface,
    drift_vals: np.ndarray,
    eps: Optional[float] = None,
    side: Optional[str] = None,
    price_map: Optional[Callable] = None,
) -> Boundary:
    """Locate the stop-region edge of a premium surface.

    drift_vals is the source grid the surface was solved with (shape
    (M+1, K+1)); it fixes the side unless one is passed explicitly. eps
    defaults to 10x the solver tolerance. price_map(t, lam) -> price fills
    price_star where it evaluates; NaN elsewhere.
    """
    vals = surface.values - _obstacle_of(surface)
    lam = surface.lambda_nodes
    ts = surface.t_nodes
    if eps is None:
        eps = 10.0 * float(surface.metadata.get("tol", 1e-9))
    if side is None:
        side = detect_side(drift_vals)
    if side not in ("sell_above", "sell_below"):
        raise ValueError(f"unknown side {side!r}")
    region = vals <= eps
    M = len(ts) - 1
    lambda_star = np.full(M + 1, np.nan)
    multi = False
    multi_rows = []
    for m in range(M + 1):
        runs = _row_intervals(region[m])
        if not runs:
            continue
        if len(runs) > 1:
            multi = True
            multi_rows.append(m)
        if side == "sell_above":
            start, stop = runs[-1]
            if stop != len(lam) - 1 and m < M:
                # detached run not touching the cap; report its lower edge
                multi = True
                if m not in multi_rows:
                    multi_rows.append(m)
            if start == 0:
                lambda_star[m] = lam[0]
            else:
                lambda_star[m] = _interp_edge(lam, vals[m], start, start - 1, eps)
        else:
            start, stop = runs[0]
            if start != 0 and m < M:
                multi = True
                if m not in multi_rows:
                    multi_rows.append(m)
            if stop == len(lam) - 1:
                lambda_star[m] = lam[-1]
            else:
                lambda_star[m] = _interp_edge(lam, vals[m], stop, stop + 1, eps)
    price_star = np.full(M + 1, np.nan)
    if price_map is not None:
        for m in range(M + 1):
            if np.isnan(lambda_star[m]):
                continue
            try:
                price_star[m] = float(price_map(ts[m], lambda_star[m]))
            except (ValueError, ZeroDivisionError, FloatingPointError):
                pass
    meta = {
        "eps": eps,
        "stopping_rule": STOPPING_RULE,
        "interpolation": INTERPOLATION_RULE,
        "surface_kind": surface.kind,
        "multi_interval_rows": multi_rows,
        "lambda_step": float(lam[1] - lam[0]),
    }
    return Boundary(
        t_nodes=ts,
        lambda_star=lambda_star,
        price_star=price_star,
        side=side,
        stop_region=region,
        multi_interval=multi,
        metadata=meta,
    )


def _obstacle_of(surface) -> np.ndarray:
    """Obstacle the surface was projected onto (nonzero for sequential)."""
    obstacle = surface.metadata.get("obstacle")
    if obstacle is None:
        return np.zeros_like(surface.values)
    return np.asarray(obstacle)


# ---------------------------------------------------------------------------
# Price maps and inverses.
# ---------------------------------------------------------------------------


def bond_price_inverse(model, t, T, price, rec: float = 0.0, min_tau: float = 1e-10):
    """Intensity with zero-recovery bond price `price` at time t.

    Exact log-linear inverse: the curve is base * exp(-coef * lambda) for
    both model families here (one stochastic intensity factor). Inversion
    degenerates as t -> T (coef -> 0), hence the min_tau guard.
    """
    tau = T - t
    if tau < min_tau:
        raise ValueError(f"price map not invertible within {min_tau} of maturity")
    base, coef = pricers._bond_curve(model, tau, rec)
    # price = base at lambda = 0; the figures live on the lambda > 0 branch
    if not 0.0 < price < base:
        raise ValueError(f"price {price} outside invertible range (0, {base})")
    lam = (np.log(base) - np.log(price)) / coef
    if isinstance(model, CirParams):
        # one Newton polish on the exact inverse (guards rounding)
        f = base * np.exp(-coef * lam) - price
        lam += f / (coef * base * np.exp(-coef * lam))
    return float(lam)


def cds_price_map(model, t, T, lam, p0):
    """Market pre-default swap value at (t, lam) on the intensity grid."""
    pf = _cds_price_fn(model, T, p0)
    return pf.value(t, np.asarray(lam, dtype=float))


def _cds_price_fn(model, T, p0):
    from .models import Cds

    return pricers.claim_price_fn(Cds(T=T, p0=p0), model)


def cds_price_inverse(
    model,
    t,
    T,
    price,
    p0,
    lam_lo: float = 0.0,
    lam_hi: Optional[float] = None,
    n_check: int = 64,
):
    """Bisection inverse of the swap value map to 1e-10 in lambda.

    The sampled map must be strictly monotone on [lam_lo, lam_hi]; a
    non-monotone sample raises.
    """
    pf = _cds_price_fn(model, T, p0)
    if lam_hi is None:
        lam_hi = 10.0 * _lambda_mean(model)
    sample = pf.value(t, np.linspace(lam_lo, lam_hi, n_check))
    d = np.diff(sample)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("swap value map is not monotone on the sampled range")
    f_lo = float(pf.value(t, lam_lo)) - price
    f_hi = float(pf.value(t, lam_hi)) - price
    if f_lo * f_hi > 0:
        raise ValueError(
            f"price {price} outside map range [{sample[0]}, {sample[-1]}]"
        )
    return float(
        brentq(lambda u: float(pf.value(t, u)) - price, lam_lo, lam_hi, xtol=1e-10)
    )


def _lambda_mean(model) -> float:
    if isinstance(model, (OuParams, CirParams, TopDownParams)):
        return model.lambda_mean
    raise TypeError(f"unsupported model type {type(model)}")


def cdx_price_map(p: TopDownParams, p0, t, T, n, lam):
    """Index swap value k2*lam + k1*n + k0 (affine in both arguments)."""
    return pricers.cdx_value(p, p0, t, T, lam, n)


def cdx_price_inverse(p: TopDownParams, p0, t, T, n, price):
    """Exact affine inverse lambda = (price - k1*n - k0)/k2; fails at t = T."""
    k2, k1, k0 = pricers.cdx_coefficients(p, p0, t, T)
    if abs(k2) < 1e-300:
        raise ValueError("price map degenerate at maturity (k2 = 0)")
    return float((price - k1 * n - k0) / k2)


def claim_price_map(claim, model) -> Callable:
    """(t, lam) -> market price callable for boundary reporting."""
    from .models import Cdx

    if isinstance(claim, Cdx):

        def _map(t, lam, n=0):
            return cdx_price_map(model, claim.p0, t, claim.T, n, lam)

        return _map
    pf = pricers.claim_price_fn(claim, model)

    def _map(t, lam):
        return pf.value(t, np.asarray(lam, dtype=float))

    return _map
