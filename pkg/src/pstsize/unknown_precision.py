"""Unknown common precision: gamma prior on tau, conjugate normal priors on the arm means given tau.

The posterior of tau is gamma, the standardized posterior of delta is
Student-t with ``2 * alpha1`` degrees of freedom, and the PST has no closed
form, so it is simulated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .conjugate import (
    ArmPrior,
    KnownPrecisionDesign,
    Method,
    PosteriorDelta,
    PstResult,
    TwoArmLayout,
    _check_eta,
    _delta1_from_deviations,
    allocate,
)
from .errors import DomainError
from .numerics import RandomStream, run_bernoulli_mc, student_t_cdf, student_t_quantile

__all__ = [
    "GammaPrior",
    "UnknownPrecisionDesign",
    "PosteriorGamma",
    "IRLS_PRECISION_PRIOR",
    "h_statistic",
    "posterior_gamma",
    "success_indicator_t",
    "pst_simulation",
    "prior_prob_superiority_t",
    "fit_gamma_moments",
    "known_precision_equivalent",
]


@dataclass(frozen=True)
class GammaPrior:
    """Gamma(shape=alpha0, rate=beta0) prior on the precision."""

    alpha0: float
    beta0: float

    def __post_init__(self):
        if not (self.alpha0 > 0 and self.beta0 > 0):
            raise DomainError(f"gamma shape and rate must be positive, got {self.alpha0}, {self.beta0}")

    @property
    def mean(self) -> float:
        return self.alpha0 / self.beta0

    @property
    def variance(self) -> float:
        return self.alpha0 / self.beta0 ** 2

    @property
    def sd(self) -> float:
        return math.sqrt(self.alpha0) / self.beta0


# Fitted hyperparameters for the IRLS change-from-baseline precision (mean 0.015).
IRLS_PRECISION_PRIOR = GammaPrior(243.0, 16200.0)


@dataclass(frozen=True)
class UnknownPrecisionDesign:
    tau_prior: GammaPrior
    prior_E: ArmPrior
    prior_C: ArmPrior
    eta: float
    layout: TwoArmLayout

    def __post_init__(self):
        _check_eta(self.eta)
        if self.layout.n_total < 3:
            raise DomainError("the pooled variance needs n_total >= 3")

    @property
    def delta(self) -> float:
        return self.prior_E.prior_mean - self.prior_C.prior_mean

    @property
    def d0(self) -> float:
        w_E, w_C = self.prior_E.prior_weight, self.prior_C.prior_weight
        return w_E * w_C / (w_E + w_C)

    @property
    def d1(self) -> float:
        w_E = self.prior_E.prior_weight + self.layout.n_E
        w_C = self.prior_C.prior_weight + self.layout.n_C
        return w_E * w_C / (w_E + w_C)

    @property
    def alpha1(self) -> float:
        return self.tau_prior.alpha0 + 0.5 * self.layout.n_total

    def with_n(self, n_total: int) -> "UnknownPrecisionDesign":
        return replace(self, layout=allocate(n_total, self.layout.allocation_ratio))


@dataclass(frozen=True)
class PosteriorGamma:
    alpha1: float
    beta1: float
    h: float


def _h_from_deviations(design: UnknownPrecisionDesign, dev_E, dev_C, s2):
    e, c, lay = design.prior_E, design.prior_C, design.layout
    k_E = lay.n_E * e.prior_weight / (e.prior_weight + lay.n_E)
    k_C = lay.n_C * c.prior_weight / (c.prior_weight + lay.n_C)
    return (lay.n_total - 2) * s2 + k_E * dev_E ** 2 + k_C * dev_C ** 2


def h_statistic(design: UnknownPrecisionDesign, xbar, ybar, s2):
    """Within-arm plus prior-deviation sum of squares feeding the gamma rate update."""
    if design.layout.n_total < 3:
        raise DomainError("the pooled variance needs n_total >= 3")
    s2 = np.asarray(s2, dtype=float)
    if np.any(s2 < 0):
        raise DomainError("s2 must be nonnegative")
    h = _h_from_deviations(
        design,
        np.asarray(xbar, dtype=float) - design.prior_E.prior_mean,
        np.asarray(ybar, dtype=float) - design.prior_C.prior_mean,
        s2,
    )
    return float(h) if np.ndim(h) == 0 else h


def posterior_gamma(design: UnknownPrecisionDesign, xbar, ybar, s2) -> PosteriorGamma:
    h = h_statistic(design, xbar, ybar, s2)
    return PosteriorGamma(alpha1=design.alpha1, beta1=design.tau_prior.beta0 + 0.5 * h, h=h)


def success_indicator_t(design: UnknownPrecisionDesign, pd: PosteriorDelta, pg: PosteriorGamma):
    """True where the posterior probability of delta > 0 reaches eta.

    Equivalent to ``delta1 * sqrt(D1 * alpha1 / beta1) >= t_{2 alpha1, eta}``.
    """
    t_eta = student_t_quantile(2.0 * pg.alpha1, design.eta)
    out = pd.delta1 * np.sqrt(pd.D1 * pg.alpha1 / pg.beta1) >= t_eta
    return bool(out) if np.ndim(out) == 0 else out


def prior_prob_superiority_t(design: UnknownPrecisionDesign) -> float:
    """Prior P(delta > 0) with tau integrated out (a Student-t probability)."""
    g = design.tau_prior
    return student_t_cdf(2.0 * g.alpha0, design.delta * math.sqrt(design.d0 * g.alpha0 / g.beta0))


def pst_simulation(design: UnknownPrecisionDesign, stream: RandomStream, reps: int, workers: int = 1) -> PstResult:
    """Simulate tau, the arm means, then the sufficient statistics (xbar, ybar, S^2).

    Sample means are drawn as deviations from their prior means so each
    replication depends on the prior means only through their difference.
    """
    e, c, lay, g = design.prior_E, design.prior_C, design.layout, design.tau_prior
    df = lay.n_total - 2
    alpha1 = design.alpha1
    d1 = design.d1
    t_eta = student_t_quantile(2.0 * alpha1, design.eta)

    def kernel(rng, size):
        tau = rng.standard_gamma(g.alpha0, size) / g.beta0
        inv_root_tau = 1.0 / np.sqrt(tau)
        dev_E = inv_root_tau * (
            rng.standard_normal(size) / math.sqrt(e.prior_weight) + rng.standard_normal(size) / math.sqrt(lay.n_E)
        )
        dev_C = inv_root_tau * (
            rng.standard_normal(size) / math.sqrt(c.prior_weight) + rng.standard_normal(size) / math.sqrt(lay.n_C)
        )
        s2 = 2.0 * rng.standard_gamma(0.5 * df, size) / (df * tau)
        delta1 = _delta1_from_deviations(e, c, lay, dev_E, dev_C)
        beta1 = g.beta0 + 0.5 * _h_from_deviations(design, dev_E, dev_C, s2)
        return np.count_nonzero(delta1 * np.sqrt(d1 * alpha1 / beta1) >= t_eta)

    mc = run_bernoulli_mc(kernel, stream, reps, workers=workers)
    prior = prior_prob_superiority_t(design)
    return PstResult(
        psi=mc.estimate, psi_star=mc.estimate / prior, prior_prob=prior, method=Method.MONTE_CARLO, mc=mc
    )


def fit_gamma_moments(mean: float, sd: float) -> GammaPrior:
    """Method-of-moments gamma prior with the given mean and standard deviation."""
    if not (mean > 0 and sd > 0):
        raise DomainError(f"mean and sd must be positive, got {mean}, {sd}")
    return GammaPrior(alpha0=(mean / sd) ** 2, beta0=mean / sd ** 2)


def known_precision_equivalent(design: UnknownPrecisionDesign) -> KnownPrecisionDesign:
    """Known-precision design with tau fixed at the prior mean precision."""
    return KnownPrecisionDesign(
        tau=design.tau_prior.mean, prior_E=design.prior_E, prior_C=design.prior_C, eta=design.eta, layout=design.layout
    )
