"""Known precision with a two-component normal mixture prior on the treatment effect.

The data enter only through ``U = xbar - ybar ~ N(delta, 1 / tau_n)`` with
``tau_n = n_E * n_C * tau / n``. The prior on ``delta`` mixes a skeptical
component ``N(0, 1/tau0)`` (weight ``rho``) with ``N(delta1, 1/tau1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .conjugate import KnownPrecisionDesign, Method, PstResult, TwoArmLayout, allocate, _check_eta
from .errors import DomainError, InfeasibleMomentsError, NumericDegeneracyError
from .numerics import RandomStream, run_bernoulli_mc, std_normal_cdf

__all__ = [
    "NormalMixturePrior",
    "MixtureDesign",
    "posterior_prob_positive",
    "posterior_skeptical_weight",
    "marginal_density",
    "prior_moments",
    "solve_mixture_hyperparams",
    "prior_prob_positive_mixture",
    "pst_monte_carlo_mixture",
    "from_conjugate",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NormalMixturePrior:
    rho: float
    tau0: float
    delta1: float
    tau1: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise DomainError(f"rho must lie in [0, 1], got {self.rho}")
        if not (self.tau0 > 0 and self.tau1 > 0):
            raise DomainError("component precisions tau0 and tau1 must be positive")
        if not math.isfinite(self.delta1):
            raise DomainError("delta1 must be finite")


@dataclass(frozen=True)
class MixtureDesign:
    prior: NormalMixturePrior
    tau: float
    eta: float
    layout: TwoArmLayout

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError(f"tau must be positive, got {self.tau}")
        _check_eta(self.eta)

    @property
    def tau_n_star(self) -> float:
        """Precision of U = xbar - ybar given delta."""
        lay = self.layout
        return lay.n_E * lay.n_C * self.tau / lay.n_total

    def with_n(self, n_total: int) -> "MixtureDesign":
        return replace(self, layout=allocate(n_total, self.layout.allocation_ratio))


def _marginal_variances(design: MixtureDesign):
    tn, pr = design.tau_n_star, design.prior
    return (tn + pr.tau0) / (tn * pr.tau0), (tn + pr.tau1) / (tn * pr.tau1)


def _log_normal_pdf(x, mean, var):
    return -0.5 * (_LOG_2PI + math.log(var) + (x - mean) ** 2 / var)


def _component_log_terms(design: MixtureDesign, u):
    """log(rho * N(u; 0, v0)) and log((1 - rho) * N(u; delta1, v1)), allowing -inf weights."""
    pr = design.prior
    v0, v1 = _marginal_variances(design)
    with np.errstate(divide="ignore"):
        log_rho, log_rho_c = np.log(pr.rho), np.log1p(-pr.rho)
    return log_rho + _log_normal_pdf(u, 0.0, v0), log_rho_c + _log_normal_pdf(u, pr.delta1, v1)


def marginal_density(design: MixtureDesign, u):
    """Density of U under the prior predictive: a two-component normal mixture."""
    a, b = _component_log_terms(design, np.asarray(u, dtype=float))
    out = np.exp(np.logaddexp(a, b))
    return float(out) if np.ndim(out) == 0 else out


def posterior_skeptical_weight(design: MixtureDesign, u):
    """Posterior probability that delta came from the N(0, 1/tau0) component, given U = u."""
    u = np.asarray(u, dtype=float)
    rho = design.prior.rho
    if rho == 0.0:
        w = np.zeros_like(u)
    elif rho == 1.0:
        w = np.ones_like(u)
    else:
        a, b = _component_log_terms(design, u)
        log_f = np.logaddexp(a, b)
        if not np.all(np.isfinite(log_f)):
            raise NumericDegeneracyError("marginal density of U is not representable")
        w = np.exp(a - log_f)
    return float(w) if np.ndim(w) == 0 else w


def posterior_prob_positive(design: MixtureDesign, u):
    """P(delta > 0 | U = u) under the mixture prior.

    Each component updates conjugately: the skeptical one to precision
    ``tau_n + tau0`` and mean ``tau_n * u / (tau_n + tau0)``, the other to
    precision ``tau_n + tau1`` and mean ``(tau_n * u + tau1 * delta1) / (tau_n + tau1)``.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("u must be finite")
    pr, tn = design.prior, design.tau_n_star
    w = posterior_skeptical_weight(design, u)
    p0 = std_normal_cdf(tn * u / math.sqrt(tn + pr.tau0))
    p1 = std_normal_cdf((tn * u + pr.tau1 * pr.delta1) / math.sqrt(tn + pr.tau1))
    out = w * p0 + (1.0 - w) * p1
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def prior_moments(prior: NormalMixturePrior) -> tuple[float, float]:
    """Mean and variance of the mixture prior on delta."""
    rho = prior.rho
    mean = (1.0 - rho) * prior.delta1
    var = rho * (1.0 - rho) * prior.delta1 ** 2 + rho / prior.tau0 + (1.0 - rho) / prior.tau1
    return mean, var


def solve_mixture_hyperparams(rho: float, tau0: float, target_mean: float, target_var: float) -> NormalMixturePrior:
    """Choose ``delta1`` and ``tau1`` so the mixture has the requested mean and variance.

    Raises InfeasibleMomentsError when the skeptical component alone already
    accounts for more than ``target_var``.
    """
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"rho must lie in [0, 1), got {rho}")
    if not tau0 > 0:
        raise DomainError(f"tau0 must be positive, got {tau0}")
    if not target_var > 0:
        raise DomainError(f"target variance must be positive, got {target_var}")
    delta1 = target_mean / (1.0 - rho)
    var1 = (target_var - rho * (1.0 - rho) * delta1 ** 2 - rho / tau0) / (1.0 - rho)
    if not var1 > 0:
        raise InfeasibleMomentsError(
            f"variance {target_var:g} is too small for rho={rho:g}, tau0={tau0:g} and mean {target_mean:g} "
            f"(second-component variance would be {var1:g})"
        )
    return NormalMixturePrior(rho=rho, tau0=tau0, delta1=delta1, tau1=1.0 / var1)


def prior_prob_positive_mixture(prior: NormalMixturePrior) -> float:
    """Prior P(delta > 0); also the limit of the PST as n grows."""
    return prior.rho * 0.5 + (1.0 - prior.rho) * std_normal_cdf(prior.delta1 * math.sqrt(prior.tau1))


def pst_monte_carlo_mixture(design: MixtureDesign, stream: RandomStream, reps: int, workers: int = 1) -> PstResult:
    pr = design.prior
    v0, v1 = _marginal_variances(design)
    sd0, sd1 = math.sqrt(v0), math.sqrt(v1)

    def kernel(rng, size):
        skeptical = rng.random(size) < pr.rho
        z = rng.standard_normal(size)
        u = np.where(skeptical, sd0 * z, pr.delta1 + sd1 * z)
        return np.count_nonzero(posterior_prob_positive(design, u) >= design.eta)

    mc = run_bernoulli_mc(kernel, stream, reps, workers=workers)
    prior = prior_prob_positive_mixture(pr)
    return PstResult(
        psi=mc.estimate, psi_star=mc.estimate / prior, prior_prob=prior, method=Method.MONTE_CARLO, mc=mc
    )


def from_conjugate(design: KnownPrecisionDesign, tau0: float = 1.0) -> MixtureDesign:
    """Degenerate (rho = 0) mixture design carrying the conjugate model's prior on delta.

    The two models give the same posterior exactly when the prior weights are
    in the same ratio as the arm sizes (for instance equal weights, R = 1).
    """
    prior = NormalMixturePrior(rho=0.0, tau0=tau0, delta1=design.delta, tau1=design.tau * design.d0)
    return MixtureDesign(prior=prior, tau=design.tau, eta=design.eta, layout=design.layout)
