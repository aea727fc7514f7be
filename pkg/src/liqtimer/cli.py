"""Batch front end: config-driven price/drift/solve/boundary/simulate/verify.

Exit codes: 0 success, 2 configuration or validation error, 3 solver
failure, 4 verification failure. Every emitted CSV embeds the sha256 of the
config file and the seed, uses N17 significant digits and UNIX newlines, so
re-running a config reproduces files byte for byte.
"""

from __future__ import annotations

import hashlib
import os
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import boundary as boundary_mod
from . import drift as drift_mod
from . import mc_oracle, pricers, vi_solver
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
    ZeroRecoveryBond,
    cir_state_from_lambda,
    validate,
)

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config schema.
# ---------------------------------------------------------------------------

_MODEL_KEYS = {
    "ou": {"r", "kappa_r", "theta_r", "sigma_r", "kappa_l", "theta_l", "sigma_l", "rho", "mu"},
    "cir": {"r", "kappa", "theta", "sigma", "mu"},
    "topdown": {"r", "kappa", "theta", "sigma", "eta", "mu", "c", "H"},
}
_CLAIM_KEYS = {
    "zero_recovery_bond": {"T"},
    "rt_bond": {"T", "c"},
    "rmv_bond": {"T", "c"},
    "cds": {"T", "p0"},
    "forward_cds": {"T", "Ta", "p_a"},
    "cdx": {"T", "p0", "H"},
}
_TOP_KEYS = {"name", "model", "claim", "grid", "solver", "mc", "eval", "output"}
_GRID_KEYS = {"M", "K", "lambda_max", "lambda_min"}
_SOLVER_KEYS = {"omega", "tol", "max_iter", "jump_mode", "side", "eps", "problem"}
_MC_KEYS = {"paths", "seed"}
_EVAL_KEYS = {"t0", "lambda0", "r0", "n0"}


def _reject_unknown(block: dict, allowed: set, path: str):
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key {path}.{key}")


def _need(block: dict, key: str, path: str):
    if key not in block:
        raise ConfigError(f"missing key {path}.{key}")
    return block[key]


def load_config(path: str):
    """(config dict, sha256 of the file bytes)."""
    raw = Path(path).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        cfg = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    _reject_unknown(cfg, _TOP_KEYS, "config")
    model = _need(cfg, "model", "config")
    _reject_unknown(model, {"kind", "market", "investor"}, "model")
    kind = _need(model, "kind", "model")
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"model.kind must be one of {sorted(_MODEL_KEYS)}")
    _reject_unknown(_need(model, "market", "model"), _MODEL_KEYS[kind], "model.market")
    _reject_unknown(model.get("investor", {}), _MODEL_KEYS[kind], "model.investor")
    claim = _need(cfg, "claim", "config")
    ckind = _need(claim, "kind", "claim")
    if ckind not in _CLAIM_KEYS:
        raise ConfigError(f"claim.kind must be one of {sorted(_CLAIM_KEYS)}")
    _reject_unknown(
        {k: v for k, v in claim.items() if k != "kind"}, _CLAIM_KEYS[ckind], "claim"
    )
    _reject_unknown(cfg.get("grid", {}), _GRID_KEYS, "grid")
    _reject_unknown(cfg.get("solver", {}), _SOLVER_KEYS, "solver")
    _reject_unknown(cfg.get("mc", {}), _MC_KEYS, "mc")
    _reject_unknown(cfg.get("eval", {}), _EVAL_KEYS, "eval")
    return cfg, digest


def _build_ou(block: dict) -> OuParams:
    r = block.get("r")
    kw = dict(
        kappa_r=block.get("kappa_r", 0.0),
        theta_r=block.get("theta_r", r if r is not None else 0.0),
        sigma_r=block.get("sigma_r", 0.0),
        kappa_l=_need(block, "kappa_l", "model.*"),
        theta_l=_need(block, "theta_l", "model.*"),
        sigma_l=_need(block, "sigma_l", "model.*"),
        rho=block.get("rho", 0.0),
        mu=_need(block, "mu", "model.*"),
    )
    if r is not None and (block.get("kappa_r") or block.get("sigma_r")):
        raise ConfigError("model.*: give either r or explicit rate dynamics")
    return OuParams(**kw)


def _build_cir(block: dict, market_mu: float) -> CirParams:
    """Two factors: a degenerate rate factor pinned at r, and one intensity
    factor in coordinates where market lambda = mu * w_l * x."""
    mu = _need(block, "mu", "model.*")
    r = _need(block, "r", "model.*")
    theta_factor = market_mu * _need(block, "theta", "model.*")
    return CirParams(
        kappa=(0.0, _need(block, "kappa", "model.*")),
        theta=(r, theta_factor),
        sigma=(0.0, _need(block, "sigma", "model.*")),
        w_r=(1.0, 0.0),
        w_l=(0.0, 1.0 / market_mu),
        mu=mu,
    )


def _build_topdown(block: dict) -> TopDownParams:
    return TopDownParams(
        kappa=_need(block, "kappa", "model.*"),
        theta=_need(block, "theta", "model.*"),
        sigma=_need(block, "sigma", "model.*"),
        eta=_need(block, "eta", "model.*"),
        mu=_need(block, "mu", "model.*"),
        loss_dist=LossDist(kind="constant", c=_need(block, "c", "model.*")),
        H=int(_need(block, "H", "model.*")),
        r=_need(block, "r", "model.*"),
    )


def build_pair(cfg: dict) -> MeasurePair:
    model = cfg["model"]
    kind = model["kind"]
    market_block = model["market"]
    inv_block = {**market_block, **model.get("investor", {})}
    if kind == "ou":
        market = _build_ou(market_block)
        investor = _build_ou(inv_block)
    elif kind == "cir":
        market_mu = _need(market_block, "mu", "model.market")
        market = _build_cir(market_block, market_mu)
        investor = _build_cir(inv_block, market_mu)
    else:
        market = _build_topdown(market_block)
        investor = _build_topdown(inv_block)
    pair = MeasurePair(market=market, investor=investor)
    report = validate(pair)
    if not report.ok:
        raise ConfigError("model validation failed:\n" + str(report))
    return pair


def build_claim(cfg: dict, pair: MeasurePair):
    block = cfg["claim"]
    kind = block["kind"]
    T = float(_need(block, "T", "claim"))
    if kind == "zero_recovery_bond":
        return ZeroRecoveryBond(T=T)
    if kind == "rt_bond":
        return RtBond(T=T, c=float(_need(block, "c", "claim")))
    if kind == "rmv_bond":
        return RmvBond(T=T, c=float(_need(block, "c", "claim")))
    if kind == "cds":
        return Cds(T=T, p0=float(_need(block, "p0", "claim")))
    if kind == "forward_cds":
        return ForwardCds(
            Ta=float(_need(block, "Ta", "claim")),
            T=T,
            p_a=float(_need(block, "p_a", "claim")),
        )
    H = block.get("H", getattr(pair.market, "H", None))
    if H is None:
        raise ConfigError("claim.H required for cdx (or set model.market.H)")
    return Cdx(T=T, p0=float(_need(block, "p0", "claim")), H=int(H))


def build_grid(cfg: dict, pair: MeasurePair, claim) -> vi_solver.Grid:
    block = cfg.get("grid", {})
    T = pricers.claim_maturity(claim)
    auto_lo, auto_hi = vi_solver.default_lambda_bounds(pair, T)
    lam_max = float(block.get("lambda_max") or auto_hi)
    lam_min_raw = block.get("lambda_min")
    lam_min = auto_lo if lam_min_raw is None else float(lam_min_raw)
    return vi_solver.Grid.make(
        T,
        M=int(block.get("M", 200)),
        K=int(block.get("K", 400)),
        lambda_max=lam_max,
        lambda_min=lam_min,
    )


def build_solver_cfg(cfg: dict) -> vi_solver.SolverConfig:
    block = cfg.get("solver", {})
    return vi_solver.SolverConfig(
        omega=float(block.get("omega", 1.5)),
        tol=float(block.get("tol", 1e-9)),
        max_iter=int(block.get("max_iter", 10_000)),
        jump_mode=str(block.get("jump_mode", "taylor2")),
    )


def _eval_state(cfg: dict, pair: MeasurePair):
    """(t0, lambda0, model-space state0) for pricing and simulation."""
    block = cfg.get("eval", {})
    m = pair.market
    t0 = float(block.get("t0", 0.0))
    lam0 = float(block.get("lambda0", m.lambda_mean))
    if isinstance(m, OuParams):
        r0 = float(block.get("r0", m.theta_r))
        state0 = np.array([r0, lam0])
    elif isinstance(m, CirParams):
        state0 = cir_state_from_lambda(m, lam0)
    else:
        state0 = np.array([lam0, float(block.get("n0", 0.0)), 0.0])
    return t0, lam0, state0


def _out_dir(cfg: dict, out_flag) -> Path:
    out = out_flag or os.environ.get("LIQTIMER_OUT") or cfg.get("output") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _run_name(cfg: dict, config_path: str) -> str:
    return cfg.get("name") or Path(config_path).stem


def write_csv(path: Path, header, rows, digest: str, seed: int):
    """CSV with config hash + seed comment lines, %.17g, UNIX newlines."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# config_sha256={digest}\n")
        fh.write(f"# seed={seed}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    x if isinstance(x, str) else format(float(x), ".17g")
                    for x in row
                )
                + "\n"
            )


def _setup_threads():
    n = os.environ.get("LIQTIMER_THREADS")
    if n:
        try:
            import numba

            numba.set_num_threads(max(1, int(n)))
        except (ImportError, ValueError):
            pass


# ---------------------------------------------------------------------------
# Command bodies (exit-code aware wrappers live in the click layer).
# ---------------------------------------------------------------------------


def _investor_value(claim, pair: MeasurePair, t0, lam0, state0):
    """Claim value under the investor's own measure at the shared state."""
    m, inv = pair.market, pair.investor
    ratio = inv.mu / m.mu
    if isinstance(m, OuParams):
        own = OuParams(
            kappa_r=inv.kappa_r,
            theta_r=inv.theta_r,
            sigma_r=inv.sigma_r,
            kappa_l=inv.kappa_l,
            theta_l=inv.theta_l,
            sigma_l=inv.sigma_l * ratio,
            rho=inv.rho,
            mu=inv.mu,
        )
        pf = pricers.claim_price_fn(claim, own)
        if isinstance(claim, Cdx):
            raise ConfigError("cdx claims use topdown models")
        return float(pf.value(t0, ratio * lam0))
    if isinstance(m, CirParams):
        # factor coordinates are shared between measures
        pf = pricers.claim_price_fn(claim, inv)
        lam_tilde = ratio * lam0
        return float(pf.value(t0, lam_tilde))
    if isinstance(claim, Cdx):
        return float(
            pricers.cdx_value(inv, claim.p0, t0, claim.T, ratio * lam0, 0.0)
        )
    raise ConfigError("unsupported claim/model combination")


def cmd_price(cfg: dict, digest: str, out_dir: Path, name: str, seed: int):
    pair = build_pair(cfg)
    claim = build_claim(cfg, pair)
    t0, lam0, state0 = _eval_state(cfg, pair)
    m = pair.market
    T = pricers.claim_maturity(claim)
    if isinstance(m, TopDownParams):
        n0 = float(state0[1])
        market_val = (
            0.0
            if T - t0 < 1e-14
            else float(pricers.cdx_value(m, claim.p0, t0, T, lam0, n0))
        )
    else:
        pf = pricers.claim_price_fn(claim, m)
        market_val = (
            pricers.terminal_payoff(claim)
            if T - t0 < 1e-14
            else float(pf.value(t0, lam0))
        )
    if T - t0 < 1e-14:
        investor_val = market_val
    else:
        investor_val = _investor_value(claim, pair, t0, lam0, state0)
    rows = [
        ("market_price", market_val),
        ("investor_price", investor_val),
    ]
    if not isinstance(m, TopDownParams):
        beta = float(np.asarray(pricers.default_free_bond(m, t0, T, state0)))
        rows.append(("default_free_bond", beta))
    click.echo(f"claim {type(claim).__name__} at t0={t0}, lambda0={lam0}")
    for label, val in rows:
        click.echo(f"  {label} = {val:.10g}")
    write_csv(
        out_dir / f"{name}_price.csv",
        ["quantity", "value"],
        [(label, val) for label, val in rows],
        digest,
        seed,
    )
    return 0


def cmd_drift(cfg: dict, digest: str, out_dir: Path, name: str, seed: int):
    pair = build_pair(cfg)
    claim = build_claim(cfg, pair)
    grid = build_grid(cfg, pair, claim)
    G = drift_mod.drift_grid(claim, pair, grid)
    rows = []
    for mi, t in enumerate(grid.t_nodes):
        for ki, lam in enumerate(grid.lambda_nodes):
            rows.append((t, lam, G[mi, ki]))
    write_csv(out_dir / f"{name}_drift.csv", ["t", "lambda", "G"], rows, digest, seed)
    n_pos = int(np.sum(G > 0))
    n_neg = int(np.sum(G < 0))
    click.echo(
        f"drift grid {G.shape[0]}x{G.shape[1]}: {n_pos} positive nodes, "
        f"{n_neg} negative nodes, min {G.min():.6g}, max {G.max():.6g}"
    )
    return 0


def _solve_pipeline(cfg: dict, render: bool, out_dir: Path, name: str, digest: str, seed: int):
    pair = build_pair(cfg)
    claim = build_claim(cfg, pair)
    grid = build_grid(cfg, pair, claim)
    solver_cfg = build_solver_cfg(cfg)
    problem = cfg.get("solver", {}).get("problem", "liquidation")
    G = drift_mod.drift_grid(claim, pair, grid)
    if problem == "liquidation":
        surface = vi_solver.solve_liquidation_vi(claim, pair, grid, solver_cfg)
        source = G
    elif problem == "purchase":
        surface = vi_solver.solve_purchase_vi(claim, pair, grid, solver_cfg)
        source = -G
    elif problem == "sequential":
        lhat = vi_solver.solve_liquidation_vi(claim, pair, grid, solver_cfg)
        surface = vi_solver.solve_sequential_vi(claim, pair, grid, solver_cfg, lhat)
        source = G
    else:
        raise ConfigError(f"solver.problem must be liquidation/purchase/sequential, got {problem!r}")
    side = cfg.get("solver", {}).get("side")
    eps = cfg.get("solver", {}).get("eps")
    price_map = boundary_mod.claim_price_map(claim, pair.market)
    bdry = boundary_mod.extract_boundary(
        surface, source, eps=eps, side=side, price_map=price_map
    )
    # emit: surface, boundary, G-locus, delay-region intervals
    srows = []
    for mi, t in enumerate(grid.t_nodes):
        for ki, lam in enumerate(grid.lambda_nodes):
            srows.append((t, lam, surface.values[mi, ki]))
    write_csv(
        out_dir / f"{name}_surface.csv",
        ["t", "lambda", "premium"],
        srows,
        digest,
        seed,
    )
    brows = [
        (t, ls, ps, bdry.side)
        for t, ls, ps in zip(bdry.t_nodes, bdry.lambda_star, bdry.price_star)
    ]
    write_csv(
        out_dir / f"{name}_boundary.csv",
        ["t", "lambda_star", "price_star", "side"],
        brows,
        digest,
        seed,
    )
    lrows = []
    lam = grid.lambda_nodes
    for mi, t in enumerate(grid.t_nodes):
        g = G[mi]
        sign_change = np.nonzero(np.diff(np.signbit(g)))[0]
        for j in sign_change:
            den = g[j + 1] - g[j]
            root = lam[j] if den == 0 else lam[j] - g[j] * (lam[j + 1] - lam[j]) / den
            lrows.append((t, root))
    write_csv(out_dir / f"{name}_g_locus.csv", ["t", "lambda_root"], lrows, digest, seed)
    drows = []
    for mi, t in enumerate(grid.t_nodes):
        delay = ~bdry.stop_region[mi]
        idx = np.nonzero(delay)[0]
        if idx.size == 0:
            continue
        breaks = np.nonzero(np.diff(idx) > 1)[0]
        starts = np.concatenate([[idx[0]], idx[breaks + 1]])
        stops = np.concatenate([idx[breaks], [idx[-1]]])
        for j, (a, b) in enumerate(zip(starts, stops)):
            drows.append((t, j, lam[a], lam[b]))
    write_csv(
        out_dir / f"{name}_delay_region.csv",
        ["t", "interval", "lambda_lo", "lambda_hi"],
        drows,
        digest,
        seed,
    )
    worst_res = float(np.max(surface.residuals)) if len(surface.residuals) else 0.0
    click.echo(
        f"solved {problem} ({surface.values.shape[0]}x{surface.values.shape[1]}), "
        f"side {bdry.side}, worst PSOR update {worst_res:.3e}, "
        f"worst complementarity {float(np.max(surface.comp_residuals)):.3e}"
    )
    if not np.isnan(bdry.price_star[0]):
        click.echo(
            f"boundary at t=0: lambda*={bdry.lambda_star[0]:.6g}, "
            f"price*={bdry.price_star[0]:.6g}"
        )
    if render:
        from . import _report

        _report.render_boundary(bdry, out_dir / f"{name}_boundary.png", f"{name} boundary")
        _report.render_surface(surface, out_dir / f"{name}_surface.png", f"{name} premium")
        _report.render_drift(
            grid.t_nodes, grid.lambda_nodes, G, out_dir / f"{name}_drift.png", f"{name} drift"
        )
        click.echo(f"rendered PNGs alongside CSVs in {out_dir}")
    return surface, bdry, G, (pair, claim, grid)


def cmd_solve(cfg, digest, out_dir, name, seed, render=False):
    _solve_pipeline(cfg, render, out_dir, name, digest, seed)
    return 0


def cmd_boundary(cfg, digest, out_dir, name, seed):
    _, bdry, _, _ = _solve_pipeline(cfg, False, out_dir, name, digest, seed)
    ok = ~np.isnan(bdry.lambda_star)
    if np.any(ok):
        first = int(np.nonzero(ok)[0][0])
        click.echo(
            f"boundary rows {int(ok.sum())}/{len(ok)} defined; first at "
            f"t={bdry.t_nodes[first]:.6g}"
        )
    if bdry.multi_interval:
        click.echo("warning: stop region has multiple intervals at some times")
    return 0


def cmd_simulate(cfg, digest, out_dir, name, seed, paths):
    pair = build_pair(cfg)
    claim = build_claim(cfg, pair)
    t0, lam0, state0 = _eval_state(cfg, pair)
    if paths < 1:
        raise ConfigError("mc.paths must be at least 1")
    est = mc_oracle.estimate_price(claim, pair.market, t0, state0, paths, seed)
    m = pair.market
    if isinstance(m, TopDownParams):
        closed = float(pricers.cdx_value(m, claim.p0, t0, claim.T, lam0, state0[1]))
    else:
        closed = float(pricers.claim_price_fn(claim, m).value(t0, lam0))
    z = abs(est.mean - closed) / est.std_error if est.std_error > 0 else 0.0
    rows = [
        ("mc_price", est.mean),
        ("mc_std_error", est.std_error),
        ("closed_form", closed),
        ("z_score", z),
        ("n_paths", float(est.n_paths)),
    ]
    write_csv(out_dir / f"{name}_mc.csv", ["quantity", "value"], rows, digest, seed)
    click.echo(
        f"mc price {est.mean:.8g} +- {est.std_error:.3g} vs closed form "
        f"{closed:.8g} (z={z:.2f}, {est.n_paths} paths)"
    )
    return 0


def cmd_verify(cfg, digest, out_dir, name, seed, paths):
    if paths < 1:
        raise ConfigError("mc.paths must be at least 1 for verification")
    pair = build_pair(cfg)
    claim = build_claim(cfg, pair)
    t0, lam0, state0 = _eval_state(cfg, pair)
    m = pair.market
    checks = []
    # 1. closed form vs survival-weighted MC
    est = mc_oracle.estimate_price(claim, m, t0, state0, paths, seed)
    if isinstance(m, TopDownParams):
        closed = float(pricers.cdx_value(m, claim.p0, t0, claim.T, lam0, state0[1]))
    else:
        closed = float(pricers.claim_price_fn(claim, m).value(t0, lam0))
    z1 = abs(est.mean - closed) / max(est.std_error, 1e-300)
    checks.append(("price_vs_closed_form", z1 <= 3.0, z1))
    # 2. strategy value vs C + premium
    surface, bdry, G, built = _solve_pipeline(cfg, False, out_dir, name, digest, seed)
    _, _, grid = built
    prem = _surface_at(surface, t0, lam0)
    target = closed + prem
    strat = mc_oracle.evaluate_strategy(claim, pair, bdry, t0, state0, paths, seed + 1)
    z2 = abs(strat.mean - target) / max(strat.std_error, 1e-300)
    checks.append(("strategy_vs_value", z2 <= 3.0, z2))
    # 3. boundary perturbation never helps beyond one standard error
    worst = -np.inf
    for shift in (-2, 2):
        pert = mc_oracle.evaluate_strategy(
            claim, pair, bdry, t0, state0, paths, seed + 1, shift_cells=shift
        )
        worst = max(worst, (pert.mean - strat.mean) / max(strat.std_error, 1e-300))
    checks.append(("perturbation_no_gain", worst <= 1.0, worst))
    rows = []
    all_ok = True
    for label, ok, z in checks:
        rows.append((label, "PASS" if ok else "FAIL", z))
        click.echo(f"{'PASS' if ok else 'FAIL'} {label} (z={z:.3f})")
        all_ok = all_ok and ok
    write_csv(
        out_dir / f"{name}_verify.csv",
        ["check", "status", "z"],
        rows,
        digest,
        seed,
    )
    return 0 if all_ok else EXIT_VERIFY


def _surface_at(surface, t0, lam0) -> float:
    mi = int(np.argmin(np.abs(surface.t_nodes - t0)))
    return float(np.interp(lam0, surface.lambda_nodes, surface.values[mi]))


# ---------------------------------------------------------------------------
# Click layer.
# ---------------------------------------------------------------------------


def _dispatch(fn, config, out, seed_flag, paths_flag, needs_paths=False, **kw):
    _setup_threads()
    try:
        cfg, digest = load_config(config)
        name = _run_name(cfg, config)
        out_dir = _out_dir(cfg, out)
        mc_block = cfg.get("mc", {})
        seed = int(seed_flag if seed_flag is not None else mc_block.get("seed", 0))
        paths = int(paths_flag if paths_flag is not None else mc_block.get("paths", 0))
        if needs_paths:
            code = fn(cfg, digest, out_dir, name, seed, paths, **kw)
        else:
            code = fn(cfg, digest, out_dir, name, seed, **kw)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (ValueError, TypeError, FileNotFoundError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except vi_solver.PsorError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    except RuntimeError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    sys.exit(code)


@click.group()
def main():
    """Optimal liquidation timing toolkit."""


def _common_options(fn):
    fn = click.option("--config", required=True, type=click.Path(exists=False))(fn)
    fn = click.option("--out", default=None, type=click.Path())(fn)
    fn = click.option("--seed", default=None, type=int)(fn)
    fn = click.option("--paths", default=None, type=int)(fn)
    return fn


@main.command("price")
@_common_options
def _price(config, out, seed, paths):
    """Closed-form prices under both measures at the evaluation state."""
    _dispatch(cmd_price, config, out, seed, paths)


@main.command("drift")
@_common_options
def _drift(config, out, seed, paths):
    """Drift function G on the solver grid."""
    _dispatch(cmd_drift, config, out, seed, paths)


@main.command("solve")
@_common_options
def _solve(config, out, seed, paths):
    """Premium surface, boundary, G-locus and delay-region files."""
    _dispatch(cmd_solve, config, out, seed, paths)


@main.command("boundary")
@_common_options
def _boundary(config, out, seed, paths):
    """Boundary extraction summary (solves inline)."""
    _dispatch(cmd_boundary, config, out, seed, paths)


@main.command("simulate")
@_common_options
def _simulate(config, out, seed, paths):
    """Monte Carlo price estimate against the closed form."""
    _dispatch(cmd_simulate, config, out, seed, paths, needs_paths=True)


@main.command("verify")
@_common_options
def _verify(config, out, seed, paths):
    """Oracle suite: closed form, strategy value, boundary perturbation."""
    _dispatch(cmd_verify, config, out, seed, paths, needs_paths=True)


@main.command("report")
@_common_options
def _report_cmd(config, out, seed, paths):
    """Solve and render boundary/surface/drift figures to PNG files."""
    _dispatch(cmd_solve, config, out, seed, paths, render=True)


if __name__ == "__main__":
    main()
