"""Monte Carlo oracle: path simulation, default sampling, pricing, strategy runs.

Estimates are built from fixed 4096-path chunks, each owning a counter-based
RNG stream keyed by (seed, chunk index), reduced in chunk order, so results
are reproducible regardless of how chunks are scheduled. Pricing conditions
the default indicator out analytically (survival weighting); explicit default
draws appear only where a strategy's stopping rule depends on the default
time itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from . import pricers
from ._affine import e1
from .boundary import Boundary
from .models import (
    Cds,
    Cdx,
    CirParams,
    ClaimSpec,
    ForwardCds,
    MeasurePair,
    ModelParams,
    OuParams,
    RmvBond,
    RtBond,
    TopDownParams,
    ZeroRecoveryBond,
    lambda_sde,
)

_CHUNK = 4096
_STEPS_PER_YEAR = 500
_EVENT_POOL = 256
_LAMBDA_CAP = 1e6


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int
    metadata: dict = field(default_factory=dict)


@dataclass
class PathBatch:
    """Simulated trajectories with the measure-consistent hazard integral."""

    model_kind: str  # ou | cir | topdown
    measure: str  # market | investor
    n_paths: int
    n_steps: int
    seed: int
    t_nodes: np.ndarray  # (n_steps+1,), absolute times
    states: np.ndarray  # (n_paths, n_steps+1, dim)
    intensity: np.ndarray  # (n_paths, n_steps+1), hazard under `measure`
    cum_intensity: np.ndarray  # trapezoid integral, nondecreasing
    metadata: dict = field(default_factory=dict)
    counts: Optional[np.ndarray] = None  # topdown: N on t_nodes
    cum_loss: Optional[np.ndarray] = None  # topdown: Upsilon on t_nodes
    event_times: Optional[np.ndarray] = None  # (n_paths, pool)
    event_losses: Optional[np.ndarray] = None
    event_counts: Optional[np.ndarray] = None


def _gen(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, chunk]))


def _chunks(n_paths: int):
    ci = 0
    lo = 0
    while lo < n_paths:
        hi = min(lo + _CHUNK, n_paths)
        yield ci, lo, hi
        ci += 1
        lo = hi


def _resolve(model, measure: str):
    """(own-measure params, market params) for simulation coordinates."""
    if measure not in ("market", "investor"):
        raise ValueError(f"unknown measure tag {measure!r}")
    if isinstance(model, MeasurePair):
        market = model.market
        params = model.market if measure == "market" else model.investor
        return params, market
    if measure == "investor":
        raise TypeError("investor-measure simulation needs a MeasurePair")
    return model, model


def _model_kind(p: ModelParams) -> str:
    if isinstance(p, OuParams):
        return "ou"
    if isinstance(p, CirParams):
        return "cir"
    return "topdown"


def _default_state(p: ModelParams) -> np.ndarray:
    if isinstance(p, OuParams):
        return np.array([p.theta_r, p.lambda_mean])
    if isinstance(p, CirParams):
        return np.array(p.theta, dtype=float)
    return np.array([p.lambda_mean, 0.0, 0.0])


# ---------------------------------------------------------------------------
# Exact transitions.
# ---------------------------------------------------------------------------


def _ou_chunk(params: OuParams, market_mu, t_nodes, x0, gen, n):
    """Exact bivariate Gaussian transitions of (r, market-lambda)."""
    dt = float(t_nodes[1] - t_nodes[0])
    sde = lambda_sde(params, lam_scale=market_mu)
    er = np.exp(-params.kappa_r * dt)
    el = np.exp(-sde.kappa * dt)
    var_r = params.sigma_r**2 * e1(dt, 2.0 * params.kappa_r)
    var_l = sde.sigma_abs**2 * e1(dt, 2.0 * sde.kappa)
    cov = (
        params.rho
        * params.sigma_r
        * sde.sigma_abs
        * e1(dt, params.kappa_r + sde.kappa)
    )
    l11 = np.sqrt(var_r)
    l21 = cov / l11 if l11 > 0 else 0.0
    l22 = np.sqrt(max(var_l - l21**2, 0.0))
    K = len(t_nodes) - 1
    out = np.empty((n, K + 1, 2))
    out[:, 0, 0] = x0[0]
    out[:, 0, 1] = x0[1]
    z = gen.standard_normal((K, n, 2))
    for k in range(K):
        r = out[:, k, 0]
        lam = out[:, k, 1]
        out[:, k + 1, 0] = (
            params.theta_r + (r - params.theta_r) * er + l11 * z[k, :, 0]
        )
        out[:, k + 1, 1] = (
            sde.mean
            + (lam - sde.mean) * el
            + l21 * z[k, :, 0]
            + l22 * z[k, :, 1]
        )
    return out


def _cir_chunk(params: CirParams, t_nodes, x0, gen, n, meta):
    """Exact noncentral chi-square factor transitions (Euler fallback if
    the degrees of freedom vanish)."""
    dt = float(t_nodes[1] - t_nodes[0])
    K = len(t_nodes) - 1
    F = params.n_factors
    out = np.empty((n, K + 1, F))
    for j in range(F):
        out[:, 0, j] = x0[j]
    for j in range(F):
        kap, th, sig = params.kappa[j], params.theta[j], params.sigma[j]
        if sig == 0.0:
            ek = np.exp(-kap * dt)
            for k in range(K):
                out[:, k + 1, j] = th + (out[:, k, j] - th) * ek
            continue
        nu = 4.0 * kap * th / sig**2
        if nu <= 1e-12:
            # absorbing-at-zero regime: full-truncation Euler, 4x substeps
            meta.setdefault("euler_factors", []).append(j)
            sub = dt / 4.0
            z = gen.standard_normal((K, 4, n))
            for k in range(K):
                x = out[:, k, j].copy()
                for s in range(4):
                    xp = np.maximum(x, 0.0)
                    x = x + kap * (th - xp) * sub + sig * np.sqrt(xp * sub) * z[k, s]
                out[:, k + 1, j] = np.maximum(x, 0.0)
            continue
        cbar = sig**2 * e1(dt, kap) / 4.0
        ek = np.exp(-kap * dt)
        for k in range(K):
            zeta = out[:, k, j] * ek / cbar
            out[:, k + 1, j] = cbar * gen.noncentral_chisquare(nu, zeta)
    return out


def _chunk_states(params, market, t_nodes, x0, gen, n, meta):
    if isinstance(params, OuParams):
        return _ou_chunk(params, market.mu, t_nodes, x0, gen, n)
    if isinstance(params, CirParams):
        return _cir_chunk(params, t_nodes, x0, gen, n, meta)
    raise TypeError("diffusion chunk needs OU or CIR params")


def _intensity_paths(params, market, states):
    """Hazard under the params' own measure, from shared coordinates."""
    if isinstance(params, OuParams):
        # coordinate is the market intensity; own hazard rescales by mu ratio
        return (params.mu / market.mu) * states[:, :, 1]
    w = np.array(params.w_l)
    return params.mu * np.tensordot(states, w, axes=([2], [0]))


def _rate_paths(params, states):
    if isinstance(params, OuParams):
        return states[:, :, 0]
    w = np.array(params.w_r)
    return np.tensordot(states, w, axes=([2], [0]))


def _cum_trapz(vals, dt):
    inc = 0.5 * dt * (vals[:, 1:] + vals[:, :-1])
    out = np.zeros_like(vals)
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def simulate_paths(
    model,
    measure: str,
    horizon: float,
    n_paths: int,
    n_steps: int,
    seed: int,
    x0=None,
    t0: float = 0.0,
) -> PathBatch:
    """Exact-transition diffusion paths of (state, hazard integral).

    model may be bare params (market measure) or a MeasurePair; investor
    simulation requires the pair since the intensity coordinate is scaled
    by the market risk premium.
    """
    params, market = _resolve(model, measure)
    if isinstance(params, TopDownParams):
        x0 = _default_state(params) if x0 is None else np.asarray(x0, dtype=float).ravel()
        return simulate_topdown(
            model,
            measure,
            horizon,
            n_paths,
            seed,
            lam0=float(x0[0]),
            n0=float(x0[1]) if x0.size > 1 else 0.0,
            ups0=float(x0[2]) if x0.size > 2 else 0.0,
            t0=t0,
        )
    x0 = _default_state(params) if x0 is None else np.asarray(x0, dtype=float)
    t_nodes = t0 + np.linspace(0.0, horizon, n_steps + 1)
    dt = horizon / n_steps
    meta: dict = {}
    states = np.empty((n_paths, n_steps + 1, 2 if isinstance(params, OuParams) else params.n_factors))
    for ci, lo, hi in _chunks(n_paths):
        gen = _gen(seed, ci)
        states[lo:hi] = _chunk_states(params, market, t_nodes, x0, gen, hi - lo, meta)
    intensity = _intensity_paths(params, market, states)
    return PathBatch(
        model_kind=_model_kind(params),
        measure=measure,
        n_paths=n_paths,
        n_steps=n_steps,
        seed=seed,
        t_nodes=t_nodes,
        states=states,
        intensity=intensity,
        cum_intensity=_cum_trapz(intensity, dt),
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# Self-exciting portfolio intensity.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _topdown_kernel(
    lam0,
    n0,
    u0,
    z,
    exp_pool,
    loss_pool,
    kappa,
    level,
    volcoef,
    jump,
    rate_mult,
    h,
    save_every,
    lam_out,
    n_out,
    u_out,
    ev_t,
    ev_l,
    ev_n,
    status,
):
    """Events by exact piecewise-constant-rate time change: the intensity is
    frozen between diffusion substeps and events (the dominating rate then
    equals the true rate, so every candidate is accepted), refreshed after
    each event and each substep. Diffusion: full-truncation Euler."""
    n_sub = z.shape[0]
    npath = lam0.shape[0]
    sqh = np.sqrt(h)
    for i in range(npath):
        lam = lam0[i]
        N = n0[i]
        U = u0[i]
        acc = 0.0
        target = exp_pool[i, 0]
        ptr = 1
        nev = 0
        lam_out[i, 0] = lam if lam > 0.0 else 0.0
        n_out[i, 0] = N
        u_out[i, 0] = U
        si = 1
        ok = 0
        for k in range(n_sub):
            remaining = h
            lamp = lam if lam > 0.0 else 0.0
            rate = rate_mult * lamp
            while True:
                if rate <= 0.0:
                    break
                need = (target - acc) / rate
                if need >= remaining:
                    acc += rate * remaining
                    break
                # event at local offset h - remaining + need
                acc = target
                if ptr >= exp_pool.shape[1] or nev >= ev_t.shape[1]:
                    ok = 1
                    break
                target = acc + exp_pool[i, ptr]
                ptr += 1
                loss = loss_pool[i, nev]
                ev_t[i, nev] = k * h + (h - remaining) + need
                ev_l[i, nev] = loss
                nev += 1
                N += 1.0
                U += loss
                lam += jump * loss
                if lam > _LAMBDA_CAP:
                    ok = 2
                    break
                remaining -= need
                lamp = lam if lam > 0.0 else 0.0
                rate = rate_mult * lamp
            if ok != 0:
                break
            lamp = lam if lam > 0.0 else 0.0
            lam = (
                lam
                + kappa * (level - lamp) * h
                + volcoef * np.sqrt(lamp) * sqh * z[k, i]
            )
            if (k + 1) % save_every == 0:
                lam_out[i, si] = lam if lam > 0.0 else 0.0
                n_out[i, si] = N
                u_out[i, si] = U
                si += 1
        status[i] = ok
        ev_n[i] = nev
        while si < lam_out.shape[1]:
            lam_out[i, si] = lam if lam > 0.0 else 0.0
            n_out[i, si] = N
            u_out[i, si] = U
            si += 1


def _loss_pool(gen, law, n, size):
    if law.kind == "constant":
        return np.full((n, size), law.c)
    atoms = np.array(law.atoms)
    probs = np.array(law.probs)
    idx = gen.choice(len(atoms), size=(n, size), p=probs)
    return atoms[idx]


def simulate_topdown(
    model,
    measure: str,
    horizon: float,
    n_paths: int,
    seed: int,
    lam0: Optional[float] = None,
    n0: float = 0.0,
    ups0: float = 0.0,
    t0: float = 0.0,
    substeps_per_year: int = _STEPS_PER_YEAR,
    save_every: int = 1,
) -> PathBatch:
    """Portfolio intensity, counting and loss processes under one measure."""
    params, market = _resolve(model, measure)
    if not isinstance(params, TopDownParams):
        raise TypeError("simulate_topdown needs top-down params")
    sde = lambda_sde(params, lam_scale=market.mu)
    rate_mult = params.mu / market.mu
    jump = market.mu * market.eta
    lam0 = market.lambda_mean if lam0 is None else float(lam0)
    n_sub = max(1, int(round(substeps_per_year * horizon)))
    if n_sub % save_every != 0:
        raise ValueError("save_every must divide the substep count")
    n_save = n_sub // save_every
    h = horizon / n_sub
    t_nodes = t0 + np.linspace(0.0, horizon, n_save + 1)
    lam_all = np.empty((n_paths, n_save + 1))
    n_all = np.empty((n_paths, n_save + 1))
    u_all = np.empty((n_paths, n_save + 1))
    ev_t = np.full((n_paths, _EVENT_POOL), np.nan)
    ev_l = np.zeros((n_paths, _EVENT_POOL))
    ev_n = np.zeros(n_paths, dtype=np.int64)
    worst = 0
    for ci, lo, hi in _chunks(n_paths):
        gen = _gen(seed, ci)
        n = hi - lo
        z = gen.standard_normal((n_sub, n))
        exp_pool = gen.standard_exponential((n, _EVENT_POOL))
        pool = _loss_pool(gen, params.loss_dist, n, _EVENT_POOL)
        status = np.zeros(n, dtype=np.int64)
        _topdown_kernel(
            np.full(n, lam0),
            np.full(n, float(n0)),
            np.full(n, float(ups0)),
            z,
            exp_pool,
            pool,
            sde.kappa,
            sde.mean,
            sde.volcoef,
            jump,
            rate_mult,
            h,
            save_every,
            lam_all[lo:hi],
            n_all[lo:hi],
            u_all[lo:hi],
            ev_t[lo:hi],
            ev_l[lo:hi],
            ev_n[lo:hi],
            status,
        )
        worst = max(worst, int(status.max()) if n else 0)
    if worst != 0:
        rho = market.rho_eff
        raise RuntimeError(
            "event cascade overflow while sampling jump times: intensity "
            f"feedback kappa - mu*eta*E[loss] = {rho:.6g} "
            f"({'subcritical; raise the event pool' if rho > 0 else 'supercritical, explosive'})"
        )
    ev_t_abs = ev_t + t0
    intensity = rate_mult * lam_all
    return PathBatch(
        model_kind="topdown",
        measure=measure,
        n_paths=n_paths,
        n_steps=n_save,
        seed=seed,
        t_nodes=t_nodes,
        states=lam_all[:, :, None],
        intensity=intensity,
        cum_intensity=_cum_trapz(intensity, horizon / n_save),
        metadata={"substeps": n_sub, "save_every": save_every},
        counts=n_all,
        cum_loss=u_all,
        event_times=ev_t_abs,
        event_losses=ev_l,
        event_counts=ev_n,
    )


# ---------------------------------------------------------------------------
# Default sampling by inverting the hazard integral.
# ---------------------------------------------------------------------------


def simulate_default(batch: PathBatch, seed: int) -> np.ndarray:
    """Per-path default time: first passage of the hazard integral over an
    independent unit exponential; +inf when the integral never reaches it."""
    gen = _gen(seed, 0)
    E = gen.standard_exponential(batch.n_paths)
    return _invert_hazard(batch.t_nodes, batch.cum_intensity, E)


def _invert_hazard(t_nodes, cum, E):
    n = cum.shape[0]
    hit = cum[:, -1] >= E
    idx = np.argmax(cum >= E[:, None], axis=1)
    tau = np.full(n, np.inf)
    rows = np.nonzero(hit)[0]
    for i in rows:
        k = idx[i]
        if k == 0:
            tau[i] = t_nodes[0]
            continue
        c0, c1 = cum[i, k - 1], cum[i, k]
        w = 0.0 if c1 <= c0 else (E[i] - c0) / (c1 - c0)
        tau[i] = t_nodes[k - 1] + w * (t_nodes[k] - t_nodes[k - 1])
    return tau


# ---------------------------------------------------------------------------
# Pricing (market measure, survival weighted).
# ---------------------------------------------------------------------------


def _beta_grid(model, s_nodes, states):
    """Default-free bond beta(u, T) along paths; s_nodes = T - t_u."""
    if isinstance(model, OuParams):
        A, B, _ = pricers.ou_loadings(model, s_nodes, rec=1.0)
        return np.exp(A[None, :] - B[None, :] * states[:, :, 0])
    A_list, B_list = pricers.cir_loadings(model, s_nodes, rec=1.0)
    out = np.ones((states.shape[0], states.shape[1]))
    for j in range(model.n_factors):
        out *= A_list[j][None, :] * np.exp(-B_list[j][None, :] * states[:, :, j])
    return out


def _accumulate(mean_sq_state, pv):
    s, s2, n = mean_sq_state
    return s + float(np.sum(pv)), s2 + float(np.sum(pv * pv)), n + len(pv)


def _finish(s, s2, n, seed, meta=None) -> McEstimate:
    mean = s / n
    var = max(s2 - n * mean * mean, 0.0) / max(n - 1, 1)
    return McEstimate(
        mean=mean,
        std_error=float(np.sqrt(var / n)),
        n_paths=n,
        seed=seed,
        metadata=meta or {},
    )


def estimate_price(
    claim: ClaimSpec,
    model,
    t0: float,
    state0,
    n_paths: int,
    seed: int,
) -> McEstimate:
    """Market-measure pre-default price estimate with analytic survival."""
    params = model.market if isinstance(model, MeasurePair) else model
    if isinstance(claim, Cdx):
        return _estimate_cdx(claim, params, t0, state0, n_paths, seed)
    T = pricers.claim_maturity(claim)
    horizon = T - t0
    if horizon <= 0:
        raise ValueError("claim already matured at t0")
    n_steps = max(2, int(round(_STEPS_PER_YEAR * horizon)))
    t_nodes = t0 + np.linspace(0.0, horizon, n_steps + 1)
    dt = horizon / n_steps
    x0 = np.asarray(state0, dtype=float)
    acc = (0.0, 0.0, 0)
    meta: dict = {}
    for ci, lo, hi in _chunks(n_paths):
        gen = _gen(seed, ci)
        states = _chunk_states(params, params, t_nodes, x0, gen, hi - lo, meta)
        lam = _intensity_paths(params, params, states)
        r = _rate_paths(params, states)
        cum_l = _cum_trapz(lam, dt)
        cum_r = _cum_trapz(r, dt)
        pv = _claim_pv(claim, params, t_nodes, states, lam, cum_l, cum_r)
        acc = _accumulate(acc, pv)
    return _finish(*acc, seed, meta)


def _claim_pv(claim, params, t_nodes, states, lam, cum_l, cum_r):
    DF = np.exp(-cum_r)
    S = np.exp(-cum_l)
    T = pricers.claim_maturity(claim)
    if isinstance(claim, ZeroRecoveryBond):
        return DF[:, -1] * S[:, -1]
    if isinstance(claim, RtBond):
        beta = _beta_grid(params, T - t_nodes, states)
        flow = DF * S * lam * beta
        return DF[:, -1] * S[:, -1] + claim.c * np.trapz(flow, t_nodes, axis=1)
    if isinstance(claim, RmvBond):
        return np.exp(-cum_r[:, -1] - (1.0 - claim.c) * cum_l[:, -1])
    if isinstance(claim, Cds):
        flow = DF * S * (lam - claim.p0)
        return np.trapz(flow, t_nodes, axis=1)
    if isinstance(claim, ForwardCds):
        active = (t_nodes >= claim.Ta).astype(float)
        flow = DF * S * (lam - claim.p_a) * active[None, :]
        return np.trapz(flow, t_nodes, axis=1)
    raise TypeError(f"unsupported claim {type(claim).__name__}")


def _estimate_cdx(claim: Cdx, params: TopDownParams, t0, state0, n_paths, seed):
    """Protection leg minus premium leg from simulated event lists."""
    state0 = np.asarray(state0, dtype=float).ravel()
    lam0 = float(state0[0])
    n0 = float(state0[1]) if state0.size > 1 else 0.0
    T = claim.T
    horizon = T - t0
    r = params.r
    acc = (0.0, 0.0, 0)
    for ci, lo, hi in _chunks(n_paths):
        batch = _topdown_chunk(params, params, horizon, hi - lo, seed, ci, lam0, n0)
        pv = _cdx_pv(claim, batch, np.full(hi - lo, horizon), n0, r)
        acc = _accumulate(acc, pv)
    return _finish(*acc, seed)


def _topdown_chunk(params, market, horizon, n, seed, chunk, lam0, n0, save_every=None):
    """One chunk of top-down paths with the chunk's own RNG stream."""
    sde = lambda_sde(params, lam_scale=market.mu)
    rate_mult = params.mu / market.mu
    jump = market.mu * market.eta
    n_sub = max(1, int(round(_STEPS_PER_YEAR * horizon)))
    if save_every is None:
        save_every = n_sub  # endpoints only unless paths are needed
    h = horizon / n_sub
    n_save = n_sub // save_every
    gen = _gen(seed, chunk)
    z = gen.standard_normal((n_sub, n))
    exp_pool = gen.standard_exponential((n, _EVENT_POOL))
    pool = _loss_pool(gen, params.loss_dist, n, _EVENT_POOL)
    lam_out = np.empty((n, n_save + 1))
    n_out = np.empty((n, n_save + 1))
    u_out = np.empty((n, n_save + 1))
    ev_t = np.full((n, _EVENT_POOL), np.nan)
    ev_l = np.zeros((n, _EVENT_POOL))
    ev_n = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    _topdown_kernel(
        np.full(n, lam0),
        np.full(n, n0),
        np.zeros(n),
        z,
        exp_pool,
        pool,
        sde.kappa,
        sde.mean,
        sde.volcoef,
        jump,
        rate_mult,
        h,
        save_every,
        lam_out,
        n_out,
        u_out,
        ev_t,
        ev_l,
        ev_n,
        status,
    )
    if status.max() != 0:
        rho = market.rho_eff
        raise RuntimeError(
            "event cascade overflow while sampling jump times: intensity "
            f"feedback kappa - mu*eta*E[loss] = {rho:.6g}"
        )
    return {
        "t_local": np.linspace(0.0, horizon, n_save + 1),
        "lam": lam_out,
        "N": n_out,
        "U": u_out,
        "ev_t": ev_t,  # local times from 0
        "ev_l": ev_l,
        "ev_n": ev_n,
        "h": h,
    }


def _cdx_pv(claim, chunk, tau_local, n0, r):
    """PV of protection minus premium flows up to tau plus nothing after.

    tau_local: per-path stopping offset from t0 (= horizon when held to
    maturity). Flat premium on the H - N outstanding names, integrated
    exactly between events.
    """
    ev_t = chunk["ev_t"]
    ev_l = chunk["ev_l"]
    mask = np.where(np.isnan(ev_t), False, ev_t <= tau_local[:, None])
    disc_ev = np.where(mask, np.exp(-r * np.where(np.isnan(ev_t), 0.0, ev_t)), 0.0)
    protection = np.sum(disc_ev * ev_l, axis=1)
    dft = np.exp(-r * tau_local)
    F = (1.0 - dft) / r
    per_event = np.sum(np.where(mask, disc_ev - dft[:, None], 0.0), axis=1) / r
    premium = claim.p0 * ((claim.H - n0) * F - per_event)
    return protection - premium


# ---------------------------------------------------------------------------
# Strategy evaluation under the investor measure.
# ---------------------------------------------------------------------------


def evaluate_strategy(
    claim: ClaimSpec,
    pair: MeasurePair,
    boundary: Boundary,
    t0: float,
    state0,
    n_paths: int,
    seed: int,
    shift_cells: int = 0,
) -> McEstimate:
    """E over investor paths of the discounted market value at the rule's
    stopping time min(first region entry, default, maturity).

    shift_cells moves the critical intensity by that many grid cells (same
    seed = same paths, so perturbation comparisons are paired).
    """
    T = pricers.claim_maturity(claim)
    if abs(float(boundary.t_nodes[-1]) - T) > 1e-9:
        raise ValueError("boundary horizon does not match the claim maturity")
    shift = shift_cells * float(boundary.metadata.get("lambda_step", 0.0))
    if shift_cells and "lambda_step" not in boundary.metadata:
        raise ValueError("boundary carries no lambda_step; cannot shift cells")
    lam_star = boundary.lambda_star + shift
    if isinstance(claim, Cdx):
        return _strategy_cdx(claim, pair, boundary, lam_star, t0, state0, n_paths, seed)
    horizon = T - t0
    n_steps = max(2, int(round(_STEPS_PER_YEAR * horizon)))
    t_nodes = t0 + np.linspace(0.0, horizon, n_steps + 1)
    dt = horizon / n_steps
    thresholds = _thresholds_on(t_nodes, boundary.t_nodes, lam_star)
    m, inv = pair.market, pair.investor
    x0 = np.asarray(state0, dtype=float)
    acc = (0.0, 0.0, 0)
    meta: dict = {"side": boundary.side, "shift_cells": shift_cells}
    for ci, lo, hi in _chunks(n_paths):
        gen = _gen(seed, ci)
        states = _chunk_states(inv, m, t_nodes, x0, gen, hi - lo, meta)
        lam = _market_lambda(m, states)
        tilde = _intensity_paths(inv, m, states)
        cum_t = _cum_trapz(tilde, dt)
        E = gen.standard_exponential(hi - lo)
        tau_d = _invert_hazard(t_nodes, cum_t, E)
        pv = _strategy_pv(
            claim, pair, t_nodes, states, lam, tau_d, thresholds, boundary.side
        )
        acc = _accumulate(acc, pv)
    return _finish(*acc, seed, meta)


def _market_lambda(market, states):
    if isinstance(market, OuParams):
        return states[:, :, 1]
    w = np.array(market.w_l)
    return market.mu * np.tensordot(states, w, axes=([2], [0]))


def _thresholds_on(t_nodes, b_nodes, lam_star):
    """Critical intensity at each simulation node (nearest boundary node)."""
    idx = np.clip(
        np.round(
            (t_nodes - b_nodes[0]) / (b_nodes[1] - b_nodes[0])
        ).astype(int),
        0,
        len(b_nodes) - 1,
    )
    return lam_star[idx]


def _first_stop(lam, thresholds, side):
    """Index of the first node inside the stop region (last node if none)."""
    if side == "sell_above":
        inside = lam >= thresholds[None, :]
    else:
        inside = lam <= thresholds[None, :]
    inside = np.where(np.isnan(thresholds)[None, :], False, inside)
    inside[:, -1] = True  # maturity always stops
    return np.argmax(inside, axis=1)


def _strategy_pv(claim, pair, t_nodes, states, lam, tau_d, thresholds, side):
    m = pair.market
    n, K1 = lam.shape
    dt = float(t_nodes[1] - t_nodes[0])
    r_path = _rate_paths_market(m, states)
    cum_r = _cum_trapz(r_path, dt)
    DF = np.exp(-cum_r)  # discount from t0 to each node
    k_stop = _first_stop(lam, thresholds, side)
    t_stop = t_nodes[k_stop]
    rows = np.arange(n)
    defaulted = tau_d < t_stop
    # discount and state at default (linear interpolation inside the cell)
    kd = np.searchsorted(t_nodes, np.where(defaulted, tau_d, t_nodes[0]), side="right") - 1
    kd = np.clip(kd, 0, K1 - 2)
    wd = np.where(
        defaulted, (tau_d - t_nodes[kd]) / dt, 0.0
    )
    cum_r_d = cum_r[rows, kd] * (1 - wd) + cum_r[rows, kd + 1] * wd
    DF_d = np.exp(-cum_r_d)
    lam_d = lam[rows, kd] * (1 - wd) + lam[rows, kd + 1] * wd
    # market value at the sale node
    sale_val = _sale_values(claim, m, t_nodes, lam, k_stop)
    pv = np.where(
        defaulted,
        DF_d * _recovery_values(claim, m, np.where(defaulted, tau_d, t_nodes[0]), lam_d),
        DF[rows, k_stop] * sale_val,
    )
    if isinstance(claim, (Cds, ForwardCds)):
        # premium paid while the position is alive (buyer pays p0)
        spread, start = (
            (claim.p0, t_nodes[0])
            if isinstance(claim, Cds)
            else (claim.p_a, claim.Ta)
        )
        alive_t = np.where(defaulted, tau_d, t_stop)
        dfint = _df_integral(t_nodes, DF, np.maximum(alive_t, start), start)
        pv = pv - spread * dfint
    return pv


def _rate_paths_market(m, states):
    if isinstance(m, OuParams):
        return states[:, :, 0]
    w = np.array(m.w_r)
    return np.tensordot(states, w, axes=([2], [0]))


def _df_integral(t_nodes, DF, upto, start):
    """int_start^upto e^{-int r} du per path, trapezoid with edge cells."""
    n = DF.shape[0]
    dt = float(t_nodes[1] - t_nodes[0])
    node_int = np.zeros_like(DF)
    node_int[:, 1:] = np.cumsum(0.5 * dt * (DF[:, 1:] + DF[:, :-1]), axis=1)
    ku = np.clip(np.searchsorted(t_nodes, upto, side="right") - 1, 0, len(t_nodes) - 2)
    rows = np.arange(n)
    wu = np.clip((upto - t_nodes[ku]) / dt, 0.0, 1.0)
    DF_u = DF[rows, ku] * (1 - wu) + DF[rows, ku + 1] * wu
    out = node_int[rows, ku] + 0.5 * (DF[rows, ku] + DF_u) * (upto - t_nodes[ku])
    if start > t_nodes[0] + 1e-15:
        ks = int(np.clip(np.searchsorted(t_nodes, start, side="right") - 1, 0, len(t_nodes) - 2))
        ws = float(np.clip((start - t_nodes[ks]) / dt, 0.0, 1.0))
        DF_s = DF[:, ks] * (1 - ws) + DF[:, ks + 1] * ws
        head = node_int[:, ks] + 0.5 * (DF[:, ks] + DF_s) * (start - t_nodes[ks])
        out = np.maximum(out - head, 0.0)
    return out


def _sale_values(claim, m, t_nodes, lam, k_stop):
    """Market price at each path's sale node, grouped by node."""
    n = lam.shape[0]
    out = np.empty(n)
    T = pricers.claim_maturity(claim)
    pf = pricers.claim_price_fn(claim, m)
    for k in np.unique(k_stop):
        sel = k_stop == k
        t = float(t_nodes[k])
        if T - t < 1e-12:
            out[sel] = pricers.terminal_payoff(claim)
        else:
            out[sel] = pf.value(t, lam[sel, k])
    return out


def _recovery_values(claim, m, tau_d, lam_d):
    """Market recovery received at default, per path."""
    T = pricers.claim_maturity(claim)
    s = np.maximum(T - tau_d, 0.0)
    if isinstance(claim, ZeroRecoveryBond):
        return np.zeros_like(tau_d)
    if isinstance(claim, RtBond):
        base, _ = pricers._bond_curve(m, s, rec=1.0)
        return claim.c * base
    if isinstance(claim, RmvBond):
        base, coef = pricers._bond_curve(m, s, rec=claim.c)
        return claim.c * base * np.exp(-coef * lam_d)
    if isinstance(claim, (Cds, ForwardCds)):
        return np.ones_like(tau_d)
    raise TypeError(f"unsupported claim {type(claim).__name__}")


def _strategy_cdx(claim, pair, boundary, lam_star, t0, state0, n_paths, seed):
    m, inv = pair.market, pair.investor
    state0 = np.asarray(state0, dtype=float).ravel()
    lam0 = float(state0[0])
    n0 = float(state0[1]) if state0.size > 1 else 0.0
    horizon = claim.T - t0
    r = m.r
    acc = (0.0, 0.0, 0)
    for ci, lo, hi in _chunks(n_paths):
        chunk = _topdown_chunk(inv, m, horizon, hi - lo, seed, ci, lam0, n0, save_every=1)
        t_loc = chunk["t_local"]
        thresholds = _thresholds_on(t0 + t_loc, boundary.t_nodes, lam_star)
        k_stop = _first_stop(chunk["lam"], thresholds, boundary.side)
        tau_loc = t_loc[k_stop]
        rows = np.arange(hi - lo)
        flows = _cdx_pv(claim, chunk, tau_loc, n0, r)
        n_at = chunk["N"][rows, k_stop]
        sale = np.empty(hi - lo)
        for k in np.unique(k_stop):
            sel = k_stop == k
            t_abs = t0 + float(t_loc[k])
            if claim.T - t_abs < 1e-12:
                sale[sel] = 0.0
            else:
                k2, k1, k0 = pricers.cdx_coefficients(m, claim.p0, t_abs, claim.T)
                sale[sel] = k2 * chunk["lam"][sel, k] + k1 * n_at[sel] + k0
        pv = flows + np.exp(-r * tau_loc) * sale
        acc = _accumulate(acc, pv)
    return _finish(*acc, seed, {"side": boundary.side})
