"""Model dynamics, measure pairs, claim descriptions, and validation.

Three state models are supported, each under a market measure and an
investor measure that share volatility structure and differ in drift,
event-risk premium, and (top-down) loss law:

* OU: two correlated Gaussian factors (short rate r, default intensity).
  The market intensity is lambda = mu * lambda_hat where lambda_hat has
  long-run mean theta_l, so the market long-run mean is mu * theta_l;
  sigma_l is the volatility of lambda itself.
* CIR: n nonnegative square-root factors x_i; r = sum w_r[i] x_i and the
  historical intensity is lambda_hat = sum w_l[i] x_i, quoted market
  intensity lambda = mu * lambda_hat. The discount loading of factor i is
  c_i = w_r[i] + mu * w_l[i].
* TopDown: portfolio default-counting model; the market intensity lambda
  follows a square-root diffusion with self-exciting jumps mu*eta*loss at
  each default, counting intensity lambda under the market measure and
  (mu_tilde/mu) * lambda under the investor measure.

All solver-facing code uses the market intensity lambda as the state
coordinate; the investor intensity is lambda_tilde = (mu_tilde/mu) * lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np


@dataclass(frozen=True)
class OuParams:
    """Gaussian two-factor parameters (rate, intensity).

    theta_l is the long-run mean of the historical intensity; the market
    intensity lambda = mu * lambda_hat has long-run mean mu * theta_l.
    sigma_l is the volatility of lambda (not of lambda_hat). A constant
    short rate is represented by kappa_r = sigma_r = 0 with theta_r = r
    (a factor with zero speed and zero volatility sits at its level).
    """

    kappa_r: float
    theta_r: float
    sigma_r: float
    kappa_l: float
    theta_l: float
    sigma_l: float
    rho: float
    mu: float

    @property
    def lambda_mean(self) -> float:
        """Long-run mean of the market intensity lambda."""
        return self.mu * self.theta_l


@dataclass(frozen=True)
class CirParams:
    """Multifactor square-root parameters.

    kappa, theta, sigma are per-factor; w_r and w_l are the nonnegative
    loadings of the short rate and the historical intensity. A constant
    rate r is the degenerate factor (kappa=0, theta=r, sigma=0, w_r=1):
    a kappa = sigma = 0 factor sits at its theta.
    """

    kappa: Tuple[float, ...]
    theta: Tuple[float, ...]
    sigma: Tuple[float, ...]
    w_r: Tuple[float, ...]
    w_l: Tuple[float, ...]
    mu: float

    def __post_init__(self):
        n = len(self.kappa)
        for name in ("theta", "sigma", "w_r", "w_l"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"CirParams.{name} length != kappa length")

    @property
    def n_factors(self) -> int:
        return len(self.kappa)

    def c(self, i: int) -> float:
        """Discount loading c_i = w_r[i] + mu * w_l[i] of factor i."""
        return self.w_r[i] + self.mu * self.w_l[i]

    @property
    def lambda_mean(self) -> float:
        """Long-run mean of the market intensity lambda = mu * sum w_l x."""
        return self.mu * sum(w * th for w, th in zip(self.w_l, self.theta))


@dataclass(frozen=True)
class LossDist:
    """Per-default loss law: constant or finite discrete pmf.

    kind: 'constant' (single value c) or 'discrete' (atoms with probs).
    """

    kind: str
    c: float = 0.0
    atoms: Tuple[float, ...] = ()
    probs: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "discrete"):
            raise ValueError(f"unsupported loss kind {self.kind!r}")
        if self.kind == "discrete":
            if len(self.atoms) != len(self.probs) or not self.atoms:
                raise ValueError("discrete loss needs matching atoms/probs")
            if abs(sum(self.probs) - 1.0) > 1e-12:
                raise ValueError("discrete loss probs must sum to 1")

    @property
    def mean(self) -> float:
        if self.kind == "constant":
            return self.c
        return float(sum(a * p for a, p in zip(self.atoms, self.probs)))

    @property
    def second_moment(self) -> float:
        if self.kind == "constant":
            return self.c * self.c
        return float(sum(a * a * p for a, p in zip(self.atoms, self.probs)))


@dataclass(frozen=True)
class TopDownParams:
    """Self-exciting portfolio intensity parameters.

    Market intensity dynamics: d lambda = kappa (mu*theta - lambda) dt
    + sigma sqrt(mu * lambda) dW + mu * eta dUpsilon, with Upsilon the
    cumulative loss. The effective reversion rho_eff = kappa - mu*eta*c
    must be nonzero for the closed forms. H is the number of reference
    names and r the constant risk-free rate.
    """

    kappa: float
    theta: float
    sigma: float
    eta: float
    mu: float
    loss_dist: LossDist
    H: int
    r: float

    @property
    def rho_eff(self) -> float:
        return self.kappa - self.mu * self.eta * self.loss_dist.mean

    @property
    def lambda_mean(self) -> float:
        """Jump-free reversion level of the market intensity."""
        return self.mu * self.theta


ModelParams = Union[OuParams, CirParams, TopDownParams]


# ---------------------------------------------------------------------------
# Claims.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroRecoveryBond:
    T: float


@dataclass(frozen=True)
class RtBond:
    """Defaultable bond paying fraction c of an equivalent default-free bond."""

    T: float
    c: float


@dataclass(frozen=True)
class RmvBond:
    """Defaultable bond recovering fraction c of its own pre-default value."""

    T: float
    c: float


@dataclass(frozen=True)
class Cds:
    """Protection-buyer CDS: receives 1 at default, pays spread p0 while alive."""

    T: float
    p0: float


@dataclass(frozen=True)
class ForwardCds:
    """Forward-start CDS over [Ta, T] with spread p_a; knocks out before Ta."""

    Ta: float
    T: float
    p_a: float


@dataclass(frozen=True)
class Cdx:
    """Default index swap on H names: receives losses, pays p0 (H - N_t) dt."""

    T: float
    p0: float
    H: int


ClaimSpec = Union[ZeroRecoveryBond, RtBond, RmvBond, Cds, ForwardCds, Cdx]


# ---------------------------------------------------------------------------
# Measure pair.
# ---------------------------------------------------------------------------


def _same_kind(a: ModelParams, b: ModelParams) -> bool:
    return type(a) is type(b)


@dataclass(frozen=True)
class MeasurePair:
    """Market and investor dynamics of one model.

    Construction rejects pairs that differ in any field a measure change
    cannot alter: volatilities, correlation, self-excitation scale eta,
    factor weights, H, and r. Drift parameters (kappa, theta), the event
    risk premium mu, and the top-down loss law may differ.
    """

    market: ModelParams
    investor: ModelParams

    def __post_init__(self):
        m, i = self.market, self.investor
        if not _same_kind(m, i):
            raise ValueError("market and investor params must be the same kind")
        if isinstance(m, OuParams):
            if m.sigma_r != i.sigma_r or m.sigma_l != i.sigma_l:
                raise ValueError("volatilities must agree across the pair")
            if m.rho != i.rho:
                raise ValueError("correlation must agree across the pair")
        elif isinstance(m, CirParams):
            if m.sigma != i.sigma:
                raise ValueError("volatilities must agree across the pair")
            if m.w_r != i.w_r or m.w_l != i.w_l:
                raise ValueError("factor weights must agree across the pair")
        elif isinstance(m, TopDownParams):
            if m.sigma != i.sigma:
                raise ValueError("volatilities must agree across the pair")
            if m.eta != i.eta:
                raise ValueError("eta must agree across the pair")
            if m.H != i.H or m.r != i.r:
                raise ValueError("H and r must agree across the pair")

    @property
    def kind(self) -> str:
        return {OuParams: "ou", CirParams: "cir", TopDownParams: "topdown"}[
            type(self.market)
        ]

    def identical(self) -> bool:
        """True when investor parameters equal market parameters exactly."""
        return self.market == self.investor


# ---------------------------------------------------------------------------
# Validation.
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    """Report-style validation outcome: never raises, lists violations."""

    checks: list = field(default_factory=list)  # (name, passed, detail)

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    @property
    def failures(self) -> list:
        return [(n, d) for n, p, d in self.checks if not p]

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append((name, bool(passed), detail))

    def __str__(self) -> str:
        lines = []
        for name, passed, detail in self.checks:
            mark = "PASS" if passed else "FAIL"
            lines.append(f"{mark} {name}" + (f": {detail}" if detail else ""))
        return "\n".join(lines)


def _validate_params(p: ModelParams, tag: str, rep: ValidationReport) -> None:
    if isinstance(p, OuParams):
        rep.add(f"{tag}.sigma_r >= 0", p.sigma_r >= 0, f"sigma_r={p.sigma_r}")
        rep.add(f"{tag}.sigma_l >= 0", p.sigma_l >= 0, f"sigma_l={p.sigma_l}")
        rep.add(f"{tag}.|rho| <= 1", abs(p.rho) <= 1, f"rho={p.rho}")
        rep.add(f"{tag}.mu > 0", p.mu > 0, f"mu={p.mu}")
        rep.add(f"{tag}.kappa_r >= 0", p.kappa_r >= 0, f"kappa_r={p.kappa_r}")
        rep.add(f"{tag}.kappa_l >= 0", p.kappa_l >= 0, f"kappa_l={p.kappa_l}")
    elif isinstance(p, CirParams):
        rep.add(f"{tag}.mu > 0", p.mu > 0, f"mu={p.mu}")
        any_weight = any(w > 0 for w in p.w_r) or any(w > 0 for w in p.w_l)
        rep.add(f"{tag}.weights nonzero", any_weight, "all w_r and w_l are zero")
        for i in range(p.n_factors):
            rep.add(
                f"{tag}.w_r[{i}] >= 0", p.w_r[i] >= 0, f"w_r[{i}]={p.w_r[i]}"
            )
            rep.add(
                f"{tag}.w_l[{i}] >= 0", p.w_l[i] >= 0, f"w_l[{i}]={p.w_l[i]}"
            )
            if p.sigma[i] > 0:
                # Feller condition keeps a stochastic factor strictly positive.
                lhs = 2.0 * p.kappa[i] * p.theta[i]
                rhs = p.sigma[i] ** 2
                rep.add(
                    f"{tag}.feller[{i}]",
                    lhs > rhs,
                    f"2*kappa*theta={lhs:.6g} vs sigma^2={rhs:.6g}",
                )
            else:
                rep.add(
                    f"{tag}.degenerate[{i}] >= 0",
                    p.kappa[i] >= 0 and p.theta[i] >= 0,
                    f"kappa={p.kappa[i]}, theta={p.theta[i]}",
                )
    elif isinstance(p, TopDownParams):
        rep.add(f"{tag}.mu > 0", p.mu > 0, f"mu={p.mu}")
        rep.add(f"{tag}.eta >= 0", p.eta >= 0, f"eta={p.eta}")
        rep.add(f"{tag}.sigma >= 0", p.sigma >= 0, f"sigma={p.sigma}")
        rep.add(f"{tag}.H >= 1", p.H >= 1, f"H={p.H}")
        rep.add(
            f"{tag}.loss mean > 0", p.loss_dist.mean > 0, f"c={p.loss_dist.mean}"
        )
        rep.add(
            f"{tag}.rho_eff != 0",
            abs(p.rho_eff) > 1e-12,
            f"rho_eff={p.rho_eff:.6g}",
        )
    else:
        rep.add(f"{tag}.kind", False, f"unsupported params type {type(p)}")


def validate(spec) -> ValidationReport:
    """Validate a MeasurePair (or bare params); returns a report, never raises."""
    rep = ValidationReport()
    if isinstance(spec, MeasurePair):
        _validate_params(spec.market, "market", rep)
        _validate_params(spec.investor, "investor", rep)
    else:
        _validate_params(spec, "params", rep)
    return rep


# ---------------------------------------------------------------------------
# Drift vectors and the relative mark-to-market premium.
# ---------------------------------------------------------------------------


def drift_vector(p: ModelParams, t, x, lam_scale: float = None) -> np.ndarray:
    """State drift b(t, x) under the measure whose params are given.

    OU state is (r, lambda) with lambda the market intensity; CIR state is
    the factor vector x; top-down state is the scalar market intensity
    (continuous part only, jumps handled separately). The market intensity
    coordinate carries the market's premium as its scale, so the long-run
    level is lam_scale * theta under either measure; lam_scale defaults to
    p.mu, correct when p is the market half. Pass the market mu explicitly
    when p is an investor parameter set.
    """
    scale = p.mu if lam_scale is None else lam_scale
    if isinstance(p, OuParams):
        r, lam = float(x[0]), float(x[1])
        return np.array(
            [
                p.kappa_r * (p.theta_r - r),
                p.kappa_l * (scale * p.theta_l - lam),
            ]
        )
    if isinstance(p, CirParams):
        x = np.asarray(x, dtype=float)
        return np.array(
            [p.kappa[i] * (p.theta[i] - x[i]) for i in range(p.n_factors)]
        )
    if isinstance(p, TopDownParams):
        lam = float(np.atleast_1d(x)[0])
        return np.array([p.kappa * (scale * p.theta - lam)])
    raise TypeError(f"unsupported params type {type(p)}")


def diffusion_matrix(p: ModelParams, t, x) -> np.ndarray:
    """Diffusion matrix Sigma(t, x) of the state under either measure."""
    if isinstance(p, OuParams):
        rho = p.rho
        return np.array(
            [
                [p.sigma_r, 0.0],
                [rho * p.sigma_l, np.sqrt(max(0.0, 1.0 - rho * rho)) * p.sigma_l],
            ]
        )
    if isinstance(p, CirParams):
        x = np.asarray(x, dtype=float)
        return np.diag(
            [p.sigma[i] * np.sqrt(max(x[i], 0.0)) for i in range(p.n_factors)]
        )
    if isinstance(p, TopDownParams):
        lam = float(np.atleast_1d(x)[0])
        return np.array([[p.sigma * np.sqrt(max(p.mu * lam, 0.0))]])
    raise TypeError(f"unsupported params type {type(p)}")


def relative_mtm_premium(pair: MeasurePair, t, x) -> np.ndarray:
    """Relative mark-to-market risk premium phi(t, x) = Sigma^{-1} (b - b_tilde).

    By construction Sigma phi equals the market-minus-investor drift gap, so
    the decomposition against the historical measure cancels. Raises on a
    degenerate diffusion coefficient (CIR component at x[i] = 0 or any
    sigma = 0 paired with a nonzero drift gap): the premium is undefined
    even though the drift gap itself stays finite.
    """
    m, inv = pair.market, pair.investor
    gap = drift_vector(m, t, x) - drift_vector(inv, t, x, lam_scale=m.mu)
    if isinstance(m, OuParams):
        sig = diffusion_matrix(m, t, x)
        phi = np.zeros(2)
        # Lower-triangular solve; a zero diagonal is degenerate unless the
        # corresponding gap component is exactly zero.
        if sig[0, 0] == 0.0:
            if gap[0] != 0.0:
                raise ZeroDivisionError("degenerate diffusion coefficient")
        else:
            phi[0] = gap[0] / sig[0, 0]
        if sig[1, 1] == 0.0:
            if gap[1] - sig[1, 0] * phi[0] != 0.0:
                raise ZeroDivisionError("degenerate diffusion coefficient")
        else:
            phi[1] = (gap[1] - sig[1, 0] * phi[0]) / sig[1, 1]
        return phi
    if isinstance(m, CirParams):
        x = np.asarray(x, dtype=float)
        phi = np.zeros(m.n_factors)
        for i in range(m.n_factors):
            denom = m.sigma[i] * np.sqrt(max(x[i], 0.0))
            if denom == 0.0:
                if gap[i] != 0.0:
                    raise ZeroDivisionError("degenerate diffusion coefficient")
                phi[i] = 0.0
            else:
                phi[i] = gap[i] / denom
        return phi
    if isinstance(m, TopDownParams):
        lam = float(np.atleast_1d(x)[0])
        denom = m.sigma * np.sqrt(m.mu * lam)
        if denom == 0.0:
            if gap[0] != 0.0:
                raise ZeroDivisionError("degenerate diffusion coefficient")
            return np.zeros(1)
        return gap / denom
    raise TypeError(f"unsupported params type {type(m)}")


# ---------------------------------------------------------------------------
# Market-lambda coordinates for the 1-factor solvers.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaSde:
    """Affine-drift SDE of the market intensity: d lambda = kappa (mean - lambda) dt + vol dW.

    vol is sigma_abs for additive (OU) noise and volcoef * sqrt(lambda) for
    square-root (CIR / top-down) noise.
    """

    kappa: float
    mean: float
    sigma_abs: float
    volcoef: float
    sqrt_noise: bool

    def drift(self, lam):
        return self.kappa * (self.mean - np.asarray(lam, dtype=float))

    def variance_coef(self, lam):
        """Squared diffusion coefficient a(lambda) = sigma(lambda)^2."""
        lam = np.asarray(lam, dtype=float)
        if self.sqrt_noise:
            return self.volcoef**2 * np.maximum(lam, 0.0)
        return np.full_like(lam, self.sigma_abs**2)


def constant_rate(p: ModelParams) -> float:
    """Extract the constant short rate from a degenerate-rate model.

    OU: requires kappa_r = sigma_r = 0, rate = theta_r. CIR: rate is the sum
    of w_r * theta over degenerate (sigma = 0, kappa = 0) factors; any
    stochastic factor with w_r > 0 is rejected. TopDown: the explicit field.
    """
    if isinstance(p, OuParams):
        if p.kappa_r != 0.0 or p.sigma_r != 0.0:
            raise ValueError("solver requires a constant short rate (kappa_r = sigma_r = 0)")
        return p.theta_r
    if isinstance(p, CirParams):
        rate = 0.0
        for i in range(p.n_factors):
            if p.w_r[i] == 0.0:
                continue
            if p.sigma[i] != 0.0 or p.kappa[i] != 0.0:
                raise ValueError("solver requires a constant short rate (degenerate rate factor)")
            rate += p.w_r[i] * p.theta[i]
        return rate
    if isinstance(p, TopDownParams):
        return p.r
    raise TypeError(f"unsupported params type {type(p)}")


def lambda_sde(p: ModelParams, lam_scale: float = None) -> LambdaSde:
    """Market-intensity SDE coefficients under the measure whose params are given.

    The coordinate is the market intensity, whose scale is the market mu;
    lam_scale defaults to p.mu (correct for the market half). Pass the
    market mu when p is an investor parameter set, so the reversion level
    is lam_scale * theta_tilde as required by the shared coordinate.
    """
    scale_mu = p.mu if lam_scale is None else lam_scale
    if isinstance(p, OuParams):
        return LambdaSde(
            kappa=p.kappa_l,
            mean=scale_mu * p.theta_l,
            sigma_abs=p.sigma_l,
            volcoef=0.0,
            sqrt_noise=False,
        )
    if isinstance(p, CirParams):
        idx = [i for i in range(p.n_factors) if p.w_l[i] > 0.0]
        if len(idx) != 1 or p.sigma[idx[0]] <= 0.0:
            raise ValueError("1-factor intensity solver needs exactly one stochastic intensity factor")
        i = idx[0]
        scale = scale_mu * p.w_l[i]  # lambda = scale * x_i
        return LambdaSde(
            kappa=p.kappa[i],
            mean=scale * p.theta[i],
            sigma_abs=0.0,
            volcoef=p.sigma[i] * np.sqrt(scale),
            sqrt_noise=True,
        )
    if isinstance(p, TopDownParams):
        # Continuous part only; self-exciting jumps handled by the caller.
        return LambdaSde(
            kappa=p.kappa,
            mean=scale_mu * p.theta,
            sigma_abs=0.0,
            volcoef=p.sigma * np.sqrt(scale_mu),
            sqrt_noise=True,
        )
    raise TypeError(f"unsupported params type {type(p)}")


def lambda_sde_pair(pair: MeasurePair) -> Tuple[LambdaSde, LambdaSde]:
    """(market, investor) SDEs of the market-intensity coordinate."""
    return (
        lambda_sde(pair.market),
        lambda_sde(pair.investor, lam_scale=pair.market.mu),
    )


def cir_state_from_lambda(p: CirParams, lam: float) -> np.ndarray:
    """Factor vector consistent with market intensity lam (degenerate factors at theta)."""
    x = np.array(p.theta, dtype=float)
    idx = [i for i in range(p.n_factors) if p.w_l[i] > 0.0]
    if len(idx) != 1:
        raise ValueError("lambda -> state map needs exactly one intensity factor")
    i = idx[0]
    x[i] = lam / (p.mu * p.w_l[i])
    return x
