"""Obstacle-problem solvers for the delayed liquidation/purchase premia.

The premium L(t, lambda) solves min(-dL/dt - A L - G, L - obstacle) = 0
backward from L(T) = 0, where A is the investor-measure generator with
discount r + lambda_tilde (single-name) or r alone (index), and G is the
drift function of the claim. Discretization: fully implicit Euler, centered
space with Peclet-switched first-order upwinding, projected SOR on the
resulting M-matrix system at every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .drift import DeterministicInputs, drift_grid, g_cdx, g_deterministic
from .models import (
    Cdx,
    ClaimSpec,
    MeasurePair,
    OuParams,
    TopDownParams,
    constant_rate,
    lambda_sde_pair,
)


# ---------------------------------------------------------------------------
# Grid and configuration.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform (t, lambda) grid for the solvers and the PDE pricer."""

    t_nodes: np.ndarray
    lambda_nodes: np.ndarray
    lambda_max: float

    @staticmethod
    def make(T, M=50, K=100, lambda_max=1.0, lambda_min=0.0) -> "Grid":
        if T <= 0 or M < 1 or K < 2:
            raise ValueError("grid needs T > 0, M >= 1, K >= 2")
        if lambda_max <= lambda_min:
            raise ValueError("lambda_max must exceed lambda_min")
        return Grid(
            t_nodes=np.linspace(0.0, T, M + 1),
            lambda_nodes=np.linspace(lambda_min, lambda_max, K + 1),
            lambda_max=float(lambda_max),
        )

    @property
    def M(self) -> int:
        return len(self.t_nodes) - 1

    @property
    def K(self) -> int:
        return len(self.lambda_nodes) - 1

    @property
    def dt(self) -> float:
        return float(self.t_nodes[1] - self.t_nodes[0])

    @property
    def h(self) -> float:
        return float(self.lambda_nodes[1] - self.lambda_nodes[0])

    def matches(self, other: "Grid") -> bool:
        return (
            len(self.t_nodes) == len(other.t_nodes)
            and len(self.lambda_nodes) == len(other.lambda_nodes)
            and np.allclose(self.t_nodes, other.t_nodes)
            and np.allclose(self.lambda_nodes, other.lambda_nodes)
        )


def default_lambda_bounds(pair: MeasurePair, horizon: float):
    """(lambda_min, lambda_max): cap at 10x the larger long-run level.

    Gaussian intensity gets a negative floor six stationary standard
    deviations below the smaller long-run level; square-root models floor
    at zero.
    """
    m, inv = pair.market, pair.investor
    sde_m, sde_i = lambda_sde_pair(pair)
    lam_max = 10.0 * max(sde_m.mean, sde_i.mean)
    if isinstance(m, OuParams):
        floors = []
        for sde in (sde_m, sde_i):
            if sde.kappa > 1e-12:
                sd = sde.sigma_abs / np.sqrt(2.0 * sde.kappa)
            else:
                sd = sde.sigma_abs * np.sqrt(horizon)
            floors.append(sde.mean - 6.0 * sd)
        return min(floors), lam_max
    return 0.0, lam_max


def default_grid(pair: MeasurePair, T, M=200, K=400) -> Grid:
    lam_min, lam_max = default_lambda_bounds(pair, T)
    return Grid.make(T, M=M, K=K, lambda_max=lam_max, lambda_min=lam_min)


@dataclass(frozen=True)
class SolverConfig:
    omega: float = 1.5
    tol: float = 1e-9
    max_iter: int = 10_000
    jump_mode: str = "taylor2"

    def __post_init__(self):
        if not 0.0 < self.omega < 2.0:
            raise ValueError(f"omega = {self.omega} outside (0, 2)")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.jump_mode not in ("taylor2", "exact_interp"):
            raise ValueError(f"unknown jump_mode {self.jump_mode!r}")


@dataclass
class PremiumSurface:
    """Solution surface of one obstacle problem."""

    t_nodes: np.ndarray
    lambda_nodes: np.ndarray
    values: np.ndarray  # (M+1, K+1), nonnegative, zero at t = T
    kind: str  # liquidation | purchase | cdx | sequential
    iterations: np.ndarray  # PSOR iterations per time step (length M)
    residuals: np.ndarray  # final PSOR update norm per step
    comp_residuals: np.ndarray  # complementarity residual per step
    metadata: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return Grid(
            t_nodes=self.t_nodes,
            lambda_nodes=self.lambda_nodes,
            lambda_max=float(self.lambda_nodes[-1]),
        )


class PsorError(RuntimeError):
    """PSOR failed to converge; carries the worst residual seen."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# PSOR kernel.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _psor_iterate(lo, di, up, rhs, obstacle, x, omega, tol, max_iter):
    """Projected SOR sweeps in increasing lambda; returns (iters, delta, status).

    status: 0 converged, 1 max_iter reached, 2 diverging (update norm grew
    over a 50-iteration window).
    """
    n = x.shape[0]
    window = np.empty(50)
    delta = 0.0
    for it in range(max_iter):
        delta = 0.0
        for i in range(n):
            acc = rhs[i]
            if i > 0:
                acc -= lo[i] * x[i - 1]
            if i < n - 1:
                acc -= up[i] * x[i + 1]
            xn = (1.0 - omega) * x[i] + omega * acc / di[i]
            if xn < obstacle[i]:
                xn = obstacle[i]
            d = xn - x[i]
            if d < 0.0:
                d = -d
            if d > delta:
                delta = d
            x[i] = xn
        if delta <= tol:
            return it + 1, delta, 0
        if it >= 50 and delta > window[(it + 1) % 50] and delta > 100.0 * tol:
            return it + 1, delta, 2
        window[it % 50] = delta
    return max_iter, delta, 1


def _psor_step(lo, di, up, rhs, obstacle, x0, cfg: SolverConfig, step: int):
    """One obstacle solve with divergence-triggered relaxation halving."""
    omega = cfg.omega
    for _ in range(6):
        x = x0.copy()
        iters, delta, status = _psor_iterate(
            lo, di, up, rhs, obstacle, x, omega, cfg.tol, cfg.max_iter
        )
        if status == 0:
            return x, iters, delta, omega
        if status == 2:
            omega *= 0.5
            continue
        raise PsorError(
            f"PSOR did not converge within {cfg.max_iter} iterations at "
            f"time step {step}: worst residual {delta:.3e}",
            residual=delta,
        )
    raise PsorError(
        f"PSOR diverged at time step {step} even after relaxation halving: "
        f"worst residual {delta:.3e}",
        residual=delta,
    )


def _complementarity(lo, di, up, rhs, obstacle, x):
    """max_i |min((Mx - rhs)_i, (x - obstacle)_i)| for the LCP solution."""
    mx = di * x
    mx[1:] += lo[1:] * x[:-1]
    mx[:-1] += up[:-1] * x[1:]
    return float(np.max(np.abs(np.minimum(mx - rhs, x - obstacle))))


# ---------------------------------------------------------------------------
# Operator assembly: rows of M = I - dt (b d/dlam + alpha d2/dlam2 - kill).
# ---------------------------------------------------------------------------


def _assemble(lam, b, alpha, kill, dt, bottom: str):
    """(lo, di, up) tridiagonal bands; bottom is 'degenerate' or 'dirichlet'."""
    K = len(lam) - 1
    h = lam[1] - lam[0]
    lo = np.zeros(K + 1)
    di = np.zeros(K + 1)
    up = np.zeros(K + 1)
    i = np.arange(1, K)
    centered = np.abs(b[i]) * h <= 2.0 * alpha[i]
    conv_lo = np.where(
        centered, -b[i] / (2 * h), np.where(b[i] < 0, -b[i] / h, 0.0)
    )
    conv_up = np.where(
        centered, b[i] / (2 * h), np.where(b[i] > 0, b[i] / h, 0.0)
    )
    lo[i] = -dt * (alpha[i] / h**2 + conv_lo)
    up[i] = -dt * (alpha[i] / h**2 + conv_up)
    di[i] = 1.0 + dt * (
        2 * alpha[i] / h**2 + kill[i] + np.where(centered, 0.0, np.abs(b[i]) / h)
    )
    # top: zero-slope Neumann (ghost node mirrors, convection of a flat
    # function vanishes)
    di[K] = 1.0 + dt * (2 * alpha[K] / h**2 + kill[K])
    lo[K] = -dt * 2 * alpha[K] / h**2
    if bottom == "degenerate":
        # square-root noise at lambda = 0: no diffusion, inflow drift only
        b0 = max(b[0], 0.0)
        di[0] = 1.0 + dt * (kill[0] + b0 / h)
        up[0] = -dt * b0 / h
    elif bottom == "dirichlet":
        di[0] = 1.0
    else:
        raise ValueError(f"unknown bottom condition {bottom!r}")
    return lo, di, up


def _march(
    lam,
    t_nodes,
    lo,
    di,
    up,
    source,
    obstacle_rows,
    kill0,
    bottom,
    cfg,
    kind,
):
    """Backward induction over time steps with PSOR at each step.

    source and obstacle_rows have shape (M+1, K+1); the bottom Dirichlet
    value follows the frozen-state Bellman recursion
    v_m = max(obstacle, dt*G + e^{-kill dt} v_{m+1}).
    """
    M = len(t_nodes) - 1
    dt = t_nodes[1] - t_nodes[0]
    K = len(lam) - 1
    values = np.zeros((M + 1, K + 1))
    iterations = np.zeros(M, dtype=np.int64)
    residuals = np.zeros(M)
    comp = np.zeros(M)
    v_bottom = 0.0
    decay = np.exp(-kill0 * dt)
    for m in range(M - 1, -1, -1):
        rhs = values[m + 1] + dt * source[m]
        obstacle = obstacle_rows[m]
        if bottom == "dirichlet":
            v_bottom = max(
                obstacle[0], dt * source[m, 0] + decay * v_bottom
            )
            rhs = rhs.copy()
            rhs[0] = v_bottom
        x, iters, delta, _ = _psor_step(
            lo, di, up, rhs, obstacle, values[m + 1], cfg, m
        )
        values[m] = x
        iterations[m] = iters
        residuals[m] = delta
        comp[m] = _complementarity(lo, di, up, rhs, obstacle, x)
    return values, iterations, residuals, comp


def _single_name_parts(pair: MeasurePair, grid: Grid):
    """Investor-measure operator ingredients for the single-name VI."""
    m, inv = pair.market, pair.investor
    lam = grid.lambda_nodes
    r = constant_rate(m)
    _, sde_i = lambda_sde_pair(pair)
    b = sde_i.drift(lam)
    alpha = 0.5 * sde_i.variance_coef(lam)
    lam_tilde = (inv.mu / m.mu) * lam
    kill = r + lam_tilde
    bottom = "degenerate" if sde_i.sqrt_noise and abs(lam[0]) < 1e-14 else "dirichlet"
    return lam, b, alpha, kill, bottom


def _solve_obstacle(pair, grid, cfg, source, obstacle_rows, kind, claim=None):
    if isinstance(pair.market, TopDownParams):
        raise TypeError("top-down pairs route through the index solver")
    lam, b, alpha, kill, bottom = _single_name_parts(pair, grid)
    dt = grid.dt
    lo, di, up = _assemble(lam, b, alpha, kill, dt, bottom)
    values, iterations, residuals, comp = _march(
        lam,
        grid.t_nodes,
        lo,
        di,
        up,
        source,
        obstacle_rows,
        kill[0],
        bottom,
        cfg,
        kind,
    )
    meta = {
        "bottom_condition": bottom,
        "omega": cfg.omega,
        "tol": cfg.tol,
    }
    if claim is not None:
        meta["claim"] = type(claim).__name__
    return PremiumSurface(
        t_nodes=grid.t_nodes,
        lambda_nodes=grid.lambda_nodes,
        values=values,
        kind=kind,
        iterations=iterations,
        residuals=residuals,
        comp_residuals=comp,
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# Public solvers.
# ---------------------------------------------------------------------------


def _check_horizon(claim: ClaimSpec, grid: Grid):
    T = getattr(claim, "T", None)
    if T is not None and abs(grid.t_nodes[-1] - T) > 1e-12:
        raise ValueError(
            f"grid horizon {grid.t_nodes[-1]} does not match claim maturity {T}"
        )


def solve_liquidation_vi(
    claim: ClaimSpec,
    pair: MeasurePair,
    grid: Grid,
    cfg: Optional[SolverConfig] = None,
) -> PremiumSurface:
    """Delayed liquidation premium: source +G, obstacle 0."""
    cfg = cfg or SolverConfig()
    _check_horizon(claim, grid)
    if isinstance(claim, Cdx):
        return solve_cdx_vi(pair, claim.p0, grid, cfg)
    source = drift_grid(claim, pair, grid)
    zeros = np.zeros_like(source)
    return _solve_obstacle(pair, grid, cfg, source, zeros, "liquidation", claim)


def solve_purchase_vi(
    claim: ClaimSpec,
    pair: MeasurePair,
    grid: Grid,
    cfg: Optional[SolverConfig] = None,
) -> PremiumSurface:
    """Delayed purchase premium: the same problem with the source negated."""
    cfg = cfg or SolverConfig()
    _check_horizon(claim, grid)
    if isinstance(claim, Cdx):
        T = grid.t_nodes[-1]
        source = np.empty((grid.M + 1, grid.K + 1))
        for mi, t in enumerate(grid.t_nodes):
            source[mi] = -g_cdx(pair, claim.p0, t, T, grid.lambda_nodes)
        zeros = np.zeros_like(source)
        cfg_parts = _CdxCfg(pair, claim.p0, cfg)
        return _solve_cdx_with_source(cfg_parts, grid, source, zeros, "purchase")
    source = -drift_grid(claim, pair, grid)
    zeros = np.zeros_like(source)
    return _solve_obstacle(pair, grid, cfg, source, zeros, "purchase", claim)


def solve_sequential_vi(
    claim: ClaimSpec,
    pair: MeasurePair,
    grid: Grid,
    cfg: Optional[SolverConfig],
    Lhat: PremiumSurface,
) -> PremiumSurface:
    """Optimal buy-then-sell value: obstacle Lhat, zero source."""
    cfg = cfg or SolverConfig()
    _check_horizon(claim, grid)
    if not grid.matches(Lhat.grid):
        raise ValueError(
            "sequential solve needs the liquidation premium on the same grid"
        )
    source = np.zeros((grid.M + 1, grid.K + 1))
    if isinstance(claim, Cdx):
        cfg_parts = _CdxCfg(pair, claim.p0, cfg)
        out = _solve_cdx_with_source(
            cfg_parts, grid, source, Lhat.values, "sequential"
        )
    else:
        out = _solve_obstacle(
            pair, grid, cfg, source, Lhat.values, "sequential", claim
        )
    out.metadata["obstacle"] = Lhat.values
    return out


# ---------------------------------------------------------------------------
# Index swap VI. Jump expectation handled by a second-order Taylor fold
# (default) or by explicit interpolation of the lagged iterate.
# ---------------------------------------------------------------------------


class _CdxCfg:
    def __init__(self, pair: MeasurePair, p0: float, cfg: SolverConfig):
        self.pair = pair
        self.p0 = p0
        self.cfg = cfg


def _cdx_parts(pair: MeasurePair, grid: Grid, cfg: SolverConfig):
    """Operator ingredients for the index VI (taylor2 folding)."""
    m, inv = pair.market, pair.investor
    lam = grid.lambda_nodes
    jump_rate = inv.mu / m.mu  # arrival intensity multiplier times lambda
    mean_jump = m.mu * m.eta * inv.loss_dist.mean
    msq_jump = (m.mu * m.eta) ** 2 * inv.loss_dist.second_moment
    b = inv.kappa * (m.mu * inv.theta - lam)
    alpha = 0.5 * m.sigma**2 * m.mu * lam
    if cfg.jump_mode == "taylor2":
        b = b + jump_rate * lam * mean_jump
        alpha = alpha + 0.5 * jump_rate * lam * msq_jump
    kill = np.full_like(lam, m.r)
    if cfg.jump_mode == "exact_interp":
        # the -L(lambda) part of the jump integral enters the diagonal
        kill = kill + jump_rate * lam
    return lam, b, alpha, kill, "degenerate"


def solve_cdx_vi(
    pair: MeasurePair,
    p0: float,
    grid: Grid,
    cfg: Optional[SolverConfig] = None,
) -> PremiumSurface:
    """Delayed liquidation premium of the index swap (discount r only)."""
    cfg = cfg or SolverConfig()
    if not isinstance(pair.market, TopDownParams):
        raise TypeError("solve_cdx_vi needs a top-down measure pair")
    T = grid.t_nodes[-1]
    source = np.empty((grid.M + 1, grid.K + 1))
    for mi, t in enumerate(grid.t_nodes):
        source[mi] = g_cdx(pair, p0, t, T, grid.lambda_nodes)
    zeros = np.zeros_like(source)
    return _solve_cdx_with_source(
        _CdxCfg(pair, p0, cfg), grid, source, zeros, "cdx"
    )


def _solve_cdx_with_source(parts: _CdxCfg, grid, source, obstacle_rows, kind):
    pair, cfg = parts.pair, parts.cfg
    lam, b, alpha, kill, bottom = _cdx_parts(pair, grid, cfg)
    dt = grid.dt
    lo, di, up = _assemble(lam, b, alpha, kill, dt, bottom)
    if cfg.jump_mode == "taylor2":
        values, iterations, residuals, comp = _march(
            lam, grid.t_nodes, lo, di, up, source, obstacle_rows, kill[0],
            bottom, cfg, kind,
        )
    else:
        values, iterations, residuals, comp = _march_cdx_interp(
            pair, lam, grid.t_nodes, lo, di, up, source, obstacle_rows, cfg
        )
    return PremiumSurface(
        t_nodes=grid.t_nodes,
        lambda_nodes=grid.lambda_nodes,
        values=values,
        kind=kind,
        iterations=iterations,
        residuals=residuals,
        comp_residuals=comp,
        metadata={
            "bottom_condition": bottom,
            "omega": cfg.omega,
            "tol": cfg.tol,
            "jump_mode": cfg.jump_mode,
        },
    )


def _march_cdx_interp(pair, lam, t_nodes, lo, di, up, source, obstacle_rows, cfg):
    """Backward induction with the jump expectation interpolated explicitly.

    The gain part of the jump integral uses a monotone cubic interpolant of
    the previous sweep's iterate (constant extrapolation beyond the domain),
    lagged by one PSOR sweep; the loss part is already on the diagonal.
    """
    from scipy.interpolate import PchipInterpolator

    m, inv = pair.market, pair.investor
    if inv.loss_dist.kind == "constant":
        atoms = np.array([inv.loss_dist.c])
        probs = np.array([1.0])
    else:
        atoms = np.array(inv.loss_dist.atoms)
        probs = np.array(inv.loss_dist.probs)
    jump_rate = (inv.mu / m.mu) * lam
    shifted = np.clip(
        lam[None, :] + m.mu * m.eta * atoms[:, None], lam[0], lam[-1]
    )
    M = len(t_nodes) - 1
    dt = t_nodes[1] - t_nodes[0]
    K = len(lam) - 1
    values = np.zeros((M + 1, K + 1))
    iterations = np.zeros(M, dtype=np.int64)
    residuals = np.zeros(M)
    comp = np.zeros(M)
    for mstep in range(M - 1, -1, -1):
        base_rhs = values[mstep + 1] + dt * source[mstep]
        obstacle = obstacle_rows[mstep]
        x = values[mstep + 1].copy()
        delta = np.inf
        it = 0
        while delta > cfg.tol:
            if it >= cfg.max_iter:
                raise PsorError(
                    f"PSOR did not converge within {cfg.max_iter} iterations "
                    f"at time step {mstep}: worst residual {delta:.3e}",
                    residual=float(delta),
                )
            interp = PchipInterpolator(lam, x, extrapolate=False)
            gain = np.zeros_like(lam)
            for a, pz in zip(shifted, probs):
                gain += pz * interp(a)
            rhs = base_rhs + dt * jump_rate * gain
            _, delta, status = _psor_iterate(
                lo, di, up, rhs, obstacle, x, cfg.omega, cfg.tol, 1
            )
            it += 1
        values[mstep] = x
        iterations[mstep] = it
        residuals[mstep] = delta
        comp[mstep] = _complementarity(lo, di, up, rhs, obstacle, x)
    return values, iterations, residuals, comp


# ---------------------------------------------------------------------------
# Deterministic special case.
# ---------------------------------------------------------------------------


def deterministic_premium(schedule: DeterministicInputs, t, T):
    """(value, t_star) of sup over stopping times of int e^{-int(r+lt)} G.

    Candidate times are {t, T} and the sign changes of G; the discounting
    uses r + mu_tilde * lambda_hat from the schedules.
    """
    n = 4096
    u = np.linspace(t, T, n + 1)
    g = g_deterministic(schedule, u)
    rate = schedule.at("r", u) + schedule.at("mu_tilde", u) * schedule.at(
        "lam_hat", u
    )
    du = (T - t) / n
    cum_rate = np.concatenate([[0.0], np.cumsum((rate[1:] + rate[:-1]) * du / 2)])
    disc = np.exp(-cum_rate)
    integrand = disc * g
    cumval = np.concatenate(
        [[0.0], np.cumsum((integrand[1:] + integrand[:-1]) * du / 2)]
    )
    candidates = [0, n]
    sign_change = np.nonzero(np.diff(np.signbit(g)))[0]
    candidates.extend(int(i) for i in sign_change)
    best = max(candidates, key=lambda i: cumval[i])
    return float(cumval[best]), float(u[best])
