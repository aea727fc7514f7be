"""Drift function G(t, x): the wait-vs-act criterion.

G has two parts: the gradient of the pre-default price against the
investor-minus-market state drift gap, and an event term
(R - C)(mu_tilde - mu) lambda_hat from the intensity disagreement. When
the two measures coincide both parts vanish identically. The sell region
of the liquidation problem always lies inside {G <= 0}; the purchase
problem mirrors the sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import pricers
from .models import (
    Cds,
    Cdx,
    CirParams,
    ClaimSpec,
    ForwardCds,
    MeasurePair,
    OuParams,
    RmvBond,
    RtBond,
    TopDownParams,
    ZeroRecoveryBond,
    constant_rate,
    lambda_sde_pair,
)
from .pricers import PriceFn, PriceSurface


# ---------------------------------------------------------------------------
# Closed-form drift functions.
# ---------------------------------------------------------------------------


def _ou_grad_gap(pair: MeasurePair, s, r, lam, rec: float):
    """<grad C, b_tilde - b> for the rec-scaled OU bond exponential."""
    m, inv = pair.market, pair.investor
    A, B, D = pricers.ou_loadings(m, s, rec=rec)
    C = np.exp(A - B * r - D * lam)
    bracket = (
        B * (inv.kappa_r - m.kappa_r) * r
        + B * (m.kappa_r * m.theta_r - inv.kappa_r * inv.theta_r)
        + D * (inv.kappa_l - m.kappa_l) * lam
        + D * m.mu * (m.kappa_l * m.theta_l - inv.kappa_l * inv.theta_l)
    )
    return C, C * bracket


def g_bond_ou(pair: MeasurePair, t, T, r, lam):
    """Drift of the zero-recovery OU bond: C0 times an affine bracket."""
    m, inv = pair.market, pair.investor
    lam = np.asarray(lam, dtype=float)
    C, grad_term = _ou_grad_gap(pair, T - t, r, lam, rec=0.0)
    return grad_term - C * (inv.mu / m.mu - 1.0) * lam


def _cir_grad_gap(pair: MeasurePair, s, x, rec: float):
    """(C, <grad C, b_tilde - b>) for the rec-scaled CIR bond product."""
    m, inv = pair.market, pair.investor
    A_list, B_list = pricers.cir_loadings(m, s, rec=rec)
    x = np.asarray(x, dtype=float)
    C = 1.0
    bracket = 0.0
    for i in range(m.n_factors):
        C = C * A_list[i] * np.exp(-B_list[i] * x[i])
        bracket = bracket + (
            B_list[i] * (inv.kappa[i] - m.kappa[i]) * x[i]
            + B_list[i] * (m.kappa[i] * m.theta[i] - inv.kappa[i] * inv.theta[i])
        )
    return C, C * bracket


def g_bond_cir(pair: MeasurePair, t, T, x):
    """Drift of the zero-recovery CIR bond: C0 times an affine bracket."""
    m, inv = pair.market, pair.investor
    x = np.asarray(x, dtype=float)
    C, grad_term = _cir_grad_gap(pair, T - t, x, rec=0.0)
    lam_hat = sum(m.w_l[i] * x[i] for i in range(m.n_factors))
    return grad_term - C * (inv.mu - m.mu) * lam_hat


def _lambda_hat_term(pair: MeasurePair, x) -> float:
    """(mu_tilde - mu) lambda_hat at the state x."""
    m, inv = pair.market, pair.investor
    if isinstance(m, OuParams):
        x = np.asarray(x, dtype=float)
        return (inv.mu / m.mu - 1.0) * x[1]
    if isinstance(m, CirParams):
        x = np.asarray(x, dtype=float)
        return (inv.mu - m.mu) * sum(
            m.w_l[i] * x[i] for i in range(m.n_factors)
        )
    raise TypeError(f"unsupported params type {type(m)}")


def g_rt(pair: MeasurePair, t, T, x, c):
    """Drift of the recovery-of-treasury bond.

    Recovery R = c beta, so R - C^{RT} = (c-1) C0 and the gradient splits
    into the (1-c)-weighted bond part plus the c-weighted default-free part.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"recovery fraction c = {c} outside [0, 1]")
    m, inv = pair.market, pair.investor
    s = T - t
    if isinstance(m, OuParams):
        x = np.asarray(x, dtype=float)
        r, lam = x[0], x[1]
        C0, grad0 = _ou_grad_gap(pair, s, r, lam, rec=0.0)
        _, grad_beta = _ou_grad_gap(pair, s, r, 0.0 * lam, rec=1.0)
    else:
        C0, grad0 = _cir_grad_gap(pair, s, x, rec=0.0)
        _, grad_beta = _cir_grad_gap(pair, s, x, rec=1.0)
    return (1.0 - c) * grad0 + c * grad_beta + (c - 1.0) * C0 * _lambda_hat_term(
        pair, x
    )


def g_rmv(pair: MeasurePair, t, T, x, c):
    """Drift of the recovery-of-market-value bond (R = c C^{RMV})."""
    if not 0.0 <= c < 1.0:
        raise ValueError(f"recovery fraction c = {c} outside [0, 1)")
    m = pair.market
    s = T - t
    if isinstance(m, OuParams):
        x = np.asarray(x, dtype=float)
        C, grad = _ou_grad_gap(pair, s, x[0], x[1], rec=c)
    else:
        C, grad = _cir_grad_gap(pair, s, x, rec=c)
    return grad + (c - 1.0) * C * _lambda_hat_term(pair, x)


def g_cds(pair: MeasurePair, t, T, x, p0, recovery: float = 1.0):
    """Drift of the CDS (protection buyer, unit default payment).

    The default payment R is fixed at 1; the optional `recovery` hook
    admits a different constant without changing the structure.
    """
    m, inv = pair.market, pair.investor
    s_len = T - t
    x = np.asarray(x, dtype=float)
    if s_len <= 0.0:
        return recovery * _lambda_hat_term(pair, x)
    s, w = pricers._simpson_nodes(s_len, pricers._SIMPSON_PANELS)
    if isinstance(m, OuParams):
        r, lam = x[0], x[1]
        A, B, D = pricers.ou_loadings(m, s)
        c0 = np.exp(A - B * r - D * lam)
        mean = pricers._ou_twisted_mean(m, s, lam)
        f = c0 * (mean - p0)
        # gradient integrands in (r, lambda)
        dr = -B * f
        dl = c0 * (-D * (mean - p0) + np.exp(-m.kappa_l * s))
        val, e0 = pricers._simpson_reduce(w, f)
        gr, e1_ = pricers._simpson_reduce(w, dr)
        gl, e2_ = pricers._simpson_reduce(w, dl)
        pricers._require_quadrature(max(e0, e1_, e2_))
        gap_r = (inv.kappa_r * inv.theta_r - m.kappa_r * m.theta_r) - (
            inv.kappa_r - m.kappa_r
        ) * r
        gap_l = m.mu * (
            inv.kappa_l * inv.theta_l - m.kappa_l * m.theta_l
        ) - (inv.kappa_l - m.kappa_l) * lam
        grad_term = gr * gap_r + gl * gap_l
    elif isinstance(m, CirParams):
        pricers.check_feller(m)
        A_list, B_list, Bp_list, mean = pricers._cir_cds_parts(m, s)
        c0 = np.ones_like(s)
        for i in range(m.n_factors):
            c0 = c0 * A_list[i] * np.exp(-B_list[i] * x[i])
            if m.w_l[i] > 0.0:
                mean = mean + m.mu * m.w_l[i] * Bp_list[i] * x[i] / m.c(i)
        f = c0 * (mean - p0)
        val, e0 = pricers._simpson_reduce(w, f)
        errs = [e0]
        grad_term = 0.0
        for j in range(m.n_factors):
            dj = -B_list[j] * f
            if m.w_l[j] > 0.0:
                dj = dj + c0 * (m.mu * m.w_l[j] * Bp_list[j] / m.c(j))
            gj, ej = pricers._simpson_reduce(w, dj)
            errs.append(ej)
            gap_j = (
                pair.investor.kappa[j] * pair.investor.theta[j]
                - m.kappa[j] * m.theta[j]
            ) - (pair.investor.kappa[j] - m.kappa[j]) * x[j]
            grad_term = grad_term + gj * gap_j
        pricers._require_quadrature(max(errs))
    else:
        raise TypeError(f"unsupported params type {type(m)}")
    return grad_term + (recovery - val) * _lambda_hat_term(pair, x)


def g_cdx(pair: MeasurePair, p0, t, T, lam):
    """Drift of the index swap: affine in lambda and independent of n."""
    m, inv = pair.market, pair.investor
    if not isinstance(m, TopDownParams):
        raise TypeError("g_cdx needs a top-down measure pair")
    k2, k1, _ = pricers.cdx_coefficients(m, p0, t, T)
    c = m.loss_dist.mean
    c_til = inv.loss_dist.mean
    slope = (
        (m.mu * m.eta * k2 + 1.0) * (inv.mu * c_til / m.mu - c)
        + k1 * (inv.mu / m.mu - 1.0)
        - k2 * (inv.kappa - m.kappa)
    )
    intercept = k2 * m.mu * (inv.kappa * inv.theta - m.kappa * m.theta)
    return slope * np.asarray(lam, dtype=float) + intercept


# ---------------------------------------------------------------------------
# Generic two-term drift from a price function or surface.
# ---------------------------------------------------------------------------


def _surface_value_slope(surface: PriceSurface, t, lam):
    """Value and centered-difference lambda-slope, interpolated to (t, lam)."""
    lam_nodes = surface.lambda_nodes
    if len(lam_nodes) < 3:
        raise ValueError("surface too coarse for a gradient: fewer than 3 nodes")
    h = lam_nodes[1] - lam_nodes[0]
    vals = surface.values
    slopes = np.empty_like(vals)
    slopes[:, 1:-1] = (vals[:, 2:] - vals[:, :-2]) / (2 * h)
    slopes[:, 0] = (vals[:, 1] - vals[:, 0]) / h
    slopes[:, -1] = (vals[:, -1] - vals[:, -2]) / h
    t_nodes = surface.t_nodes
    mi = int(np.argmin(np.abs(t_nodes - t)))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    v = np.interp(lam, lam_nodes, vals[mi])
    g = np.interp(lam, lam_nodes, slopes[mi])
    return v, g


def g_general(
    C: Union[PriceFn, PriceSurface],
    R: Optional[Callable],
    pair: MeasurePair,
    t,
    x,
):
    """Two-term drift from any price representation.

    C is a closed-form PriceFn (analytic lambda-slope) or a PriceSurface
    (centered differences, one-sided at the edges). R is the recovery as a
    callable R(t, lambda) or None for zero recovery. The state x is the
    market intensity scalar, or the (r, lambda) pair for a degenerate-rate
    OU model.
    """
    m, inv = pair.market, pair.investor
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(m, OuParams) and x_arr.shape[0] == 2 and x_arr.ndim == 1:
        lam = x_arr[1:]
    else:
        lam = x_arr
    if isinstance(C, PriceFn):
        v = C.value(t, lam)
        g = C.slope(t, lam)
    else:
        v, g = _surface_value_slope(C, t, lam)
    sde_m, sde_i = lambda_sde_pair(pair)
    gap = sde_i.drift(lam) - sde_m.drift(lam)
    rec = R(t, lam) if R is not None else 0.0
    if isinstance(m, (OuParams, TopDownParams)):
        event = (inv.mu / m.mu - 1.0) * lam
    else:
        event = (inv.mu - m.mu) * (lam / m.mu)
    out = g * gap + (rec - v) * event
    return float(out[0]) if out.size == 1 else out


def recovery_fn(claim: ClaimSpec, model) -> Optional[Callable]:
    """Recovery R(t, lambda) entering the drift's event term."""
    if isinstance(claim, ZeroRecoveryBond):
        return None
    if isinstance(claim, RtBond):
        c, T = claim.c, claim.T
        r = constant_rate(model)
        return lambda t, lam: c * np.exp(-r * (T - t)) * np.ones_like(lam)
    if isinstance(claim, RmvBond):
        pf = pricers.claim_price_fn(claim, model)
        c = claim.c
        return lambda t, lam: c * pf.value(t, lam)
    if isinstance(claim, (Cds, ForwardCds)):
        return lambda t, lam: np.ones_like(np.asarray(lam, dtype=float))
    raise TypeError(f"no recovery map for claim type {type(claim)}")


# ---------------------------------------------------------------------------
# Claim-dispatched drift on (t, lambda) with a constant short rate.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftFn:
    """G(t, lambda) for one claim under one measure pair.

    method 'closed_form' uses the per-claim formulas above; 'from_surface'
    differentiates the supplied price surface via g_general.
    """

    claim: ClaimSpec
    pair: MeasurePair
    method: str = "closed_form"
    surface: Optional[PriceSurface] = None

    def __call__(self, t, lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        claim, pair = self.claim, self.pair
        m = pair.market
        if self.method == "from_surface":
            if self.surface is None:
                raise ValueError("from_surface drift needs a surface")
            return g_general(
                self.surface, recovery_fn(claim, m), pair, t, lam
            )
        if isinstance(claim, Cdx):
            return g_cdx(pair, claim.p0, t, claim.T, lam)
        if isinstance(claim, ZeroRecoveryBond):
            if isinstance(m, OuParams):
                return g_bond_ou(pair, t, claim.T, constant_rate(m), lam)
            return self._cir_lambda(g_bond_cir, t, claim.T, lam)
        if isinstance(claim, RtBond):
            if isinstance(m, OuParams):
                x = self._ou_states(lam)
                return g_rt(pair, t, claim.T, x, claim.c)
            return self._cir_lambda(
                lambda p, t_, T_, x: g_rt(p, t_, T_, x, claim.c),
                t,
                claim.T,
                lam,
            )
        if isinstance(claim, RmvBond):
            if isinstance(m, OuParams):
                x = self._ou_states(lam)
                return g_rmv(pair, t, claim.T, x, claim.c)
            return self._cir_lambda(
                lambda p, t_, T_, x: g_rmv(p, t_, T_, x, claim.c),
                t,
                claim.T,
                lam,
            )
        if isinstance(claim, Cds):
            return self._cds_grid(t, claim.T, lam, claim.p0)
        raise TypeError(f"no drift for claim type {type(claim).__name__}")

    def _ou_states(self, lam):
        r = constant_rate(self.pair.market)
        return np.stack([np.full_like(lam, r), lam])

    def _cir_lambda(self, fn, t, T, lam):
        p = self.pair.market
        il = [i for i in range(p.n_factors) if p.w_l[i] > 0.0]
        if len(il) != 1:
            raise ValueError("lambda-grid drift needs one intensity factor")
        il = il[0]
        x = np.stack(
            [
                lam / (p.mu * p.w_l[i]) if i == il else np.full_like(lam, p.theta[i])
                for i in range(p.n_factors)
            ]
        )
        return fn(self.pair, t, T, x)

    def _cds_grid(self, t, T, lam, p0):
        """Vectorized CDS drift over lambda with a constant rate."""
        pair = self.pair
        m, inv = pair.market, pair.investor
        pf = pricers.claim_price_fn(Cds(T=T, p0=p0), m)
        val = pf.value(t, lam)
        slope = pf.slope(t, lam)
        sde_m, sde_i = lambda_sde_pair(pair)
        gap = sde_i.drift(lam) - sde_m.drift(lam)
        return slope * gap + (1.0 - val) * (inv.mu / m.mu - 1.0) * lam


def drift_grid(claim: ClaimSpec, pair: MeasurePair, grid) -> np.ndarray:
    """G evaluated on a solver grid, shape (M+1, K+1)."""
    fn = DriftFn(claim=claim, pair=pair)
    lam = np.asarray(grid.lambda_nodes, dtype=float)
    out = np.empty((len(grid.t_nodes), len(lam)))
    for mi, t in enumerate(grid.t_nodes):
        out[mi] = fn(t, lam)
    return out


# ---------------------------------------------------------------------------
# Deterministic special case.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeterministicInputs:
    """Piecewise-linear schedules for the deterministic market."""

    ts: np.ndarray
    r: np.ndarray
    lam_hat: np.ndarray
    mu: np.ndarray
    mu_tilde: np.ndarray
    recovery: np.ndarray
    price: np.ndarray

    def at(self, name, t):
        return np.interp(t, self.ts, getattr(self, name))


def g_deterministic(schedule: DeterministicInputs, t):
    """G(t) = (R(t) - C(t)) (mu_tilde(t) - mu(t)) lambda_hat(t)."""
    t = np.asarray(t, dtype=float)
    return (
        (schedule.at("recovery", t) - schedule.at("price", t))
        * (schedule.at("mu_tilde", t) - schedule.at("mu", t))
        * schedule.at("lam_hat", t)
    )
