"""Known common precision with independent conjugate normal priors on the arm means.

The posterior of the treatment effect ``delta = mu_E - mu_C`` is normal, the
success rule reduces to a threshold on the posterior mean, and the marginal
distribution of that posterior mean is normal too, so the PST has a closed
form.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DomainError, InfeasibleLayoutError
from .numerics import (
    McEstimate,
    RandomStream,
    run_bernoulli_mc,
    std_normal_cdf,
    std_normal_quantile,
)

__all__ = [
    "TwoArmLayout",
    "ArmPrior",
    "KnownPrecisionDesign",
    "PosteriorDelta",
    "Method",
    "PstResult",
    "allocate",
    "posterior_delta",
    "success_margin",
    "pst_closed_form",
    "prior_prob_superiority",
    "pst_monte_carlo",
    "limiting_pst",
]


@dataclass(frozen=True)
class TwoArmLayout:
    n_total: int
    allocation_ratio: float
    n_E: int
    n_C: int

    def __post_init__(self):
        if self.n_E < 1 or self.n_C < 1:
            raise InfeasibleLayoutError(f"both arms need at least one subject, got n_E={self.n_E}, n_C={self.n_C}")
        if self.n_E + self.n_C != self.n_total:
            raise DomainError("n_E + n_C must equal n_total")


def allocate(n_total: int, R: float = 1.0) -> TwoArmLayout:
    """Split ``n_total`` subjects so that ``n_E / n_C`` is as close to ``R`` as rounding allows.

    ``n_E`` is ``n_total * R / (1 + R)`` rounded half-up; control gets the rest.
    """
    if int(n_total) != n_total or n_total < 2:
        raise DomainError(f"n_total must be an integer >= 2, got {n_total}")
    if not (R > 0 and math.isfinite(R)):
        raise DomainError(f"allocation ratio must be positive, got {R}")
    n_total = int(n_total)
    n_E = int(math.floor(n_total * R / (1.0 + R) + 0.5))
    n_C = n_total - n_E
    if n_E < 1 or n_C < 1:
        raise InfeasibleLayoutError(
            f"n_total={n_total} with R={R} leaves an empty arm (n_E={n_E}, n_C={n_C})"
        )
    return TwoArmLayout(n_total, float(R), n_E, n_C)


@dataclass(frozen=True)
class ArmPrior:
    """Normal prior on one arm mean: N(prior_mean, 1 / (prior_weight * tau))."""

    prior_mean: float
    prior_weight: float

    def __post_init__(self):
        if not (self.prior_weight > 0 and math.isfinite(self.prior_weight)):
            raise DomainError(f"prior_weight must be positive, got {self.prior_weight}")
        if not math.isfinite(self.prior_mean):
            raise DomainError("prior_mean must be finite")


def _check_eta(eta):
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta must lie in (0, 1), got {eta}")


@dataclass(frozen=True)
class KnownPrecisionDesign:
    tau: float
    prior_E: ArmPrior
    prior_C: ArmPrior
    eta: float
    layout: TwoArmLayout

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError(f"tau must be positive, got {self.tau}")
        _check_eta(self.eta)

    @property
    def delta(self) -> float:
        """Difference of prior means, mu_E^(0) - mu_C^(0)."""
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

    def with_n(self, n_total: int) -> "KnownPrecisionDesign":
        return replace(self, layout=allocate(n_total, self.layout.allocation_ratio))


@dataclass(frozen=True)
class PosteriorDelta:
    """Posterior summaries of the treatment effect. Fields may be numpy arrays."""

    delta1: float
    D1: float
    mu_E1: float
    mu_C1: float
    n_E1: float
    n_C1: float


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class PstResult:
    psi: float
    psi_star: float
    prior_prob: float
    method: Method
    mc: Optional[McEstimate] = None

    @property
    def std_error(self) -> Optional[float]:
        return None if self.mc is None else self.mc.std_error


def _delta1_from_deviations(prior_E, prior_C, layout, dev_E, dev_C):
    """Posterior mean of delta written through the deviations xbar - mu_E^(0), ybar - mu_C^(0).

    Only the prior mean difference enters, which keeps simulations exactly
    invariant to a common shift of both prior means.
    """
    n_E1 = prior_E.prior_weight + layout.n_E
    n_C1 = prior_C.prior_weight + layout.n_C
    delta = prior_E.prior_mean - prior_C.prior_mean
    return delta + (layout.n_E / n_E1) * dev_E - (layout.n_C / n_C1) * dev_C


def posterior_delta(design: KnownPrecisionDesign, xbar, ybar) -> PosteriorDelta:
    e, c, lay = design.prior_E, design.prior_C, design.layout
    n_E1 = e.prior_weight + lay.n_E
    n_C1 = c.prior_weight + lay.n_C
    mu_E1 = (e.prior_weight * e.prior_mean + lay.n_E * np.asarray(xbar, dtype=float)) / n_E1
    mu_C1 = (c.prior_weight * c.prior_mean + lay.n_C * np.asarray(ybar, dtype=float)) / n_C1
    delta1 = _delta1_from_deviations(e, c, lay, np.asarray(xbar) - e.prior_mean, np.asarray(ybar) - c.prior_mean)
    return PosteriorDelta(
        delta1=_scalar(delta1),
        D1=n_E1 * n_C1 / (n_E1 + n_C1),
        mu_E1=_scalar(mu_E1),
        mu_C1=_scalar(mu_C1),
        n_E1=n_E1,
        n_C1=n_C1,
    )


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def success_margin(design: KnownPrecisionDesign, pd: PosteriorDelta):
    """``delta1 * sqrt(D1 * tau) - z_eta``; the trial succeeds iff this is >= 0."""
    return pd.delta1 * np.sqrt(pd.D1 * design.tau) - std_normal_quantile(design.eta)


def marginal_delta1_sd(design: KnownPrecisionDesign) -> float:
    """SD of the marginal distribution of the posterior mean of delta."""
    e, c, lay, tau = design.prior_E, design.prior_C, design.layout, design.tau
    n_E1 = e.prior_weight + lay.n_E
    n_C1 = c.prior_weight + lay.n_C
    var = lay.n_E / (tau * e.prior_weight * n_E1) + lay.n_C / (tau * c.prior_weight * n_C1)
    return math.sqrt(var)


def prior_prob_superiority(design: KnownPrecisionDesign) -> float:
    """Prior probability that delta > 0."""
    return std_normal_cdf(design.delta * math.sqrt(design.tau * design.d0))


def limiting_pst(design: KnownPrecisionDesign) -> float:
    """Supremum of the PST as the total sample size grows without bound.

    Equal to the prior probability of superiority for every eta.
    """
    return prior_prob_superiority(design)


def pst_closed_form(design: KnownPrecisionDesign) -> PstResult:
    z = std_normal_quantile(design.eta)
    threshold = z / math.sqrt(design.d1 * design.tau)
    psi = std_normal_cdf((design.delta - threshold) / marginal_delta1_sd(design))
    prior = prior_prob_superiority(design)
    return PstResult(psi=psi, psi_star=psi / prior, prior_prob=prior, method=Method.CLOSED_FORM)


def pst_monte_carlo(
    design: KnownPrecisionDesign, stream: RandomStream, reps: int, workers: int = 1
) -> PstResult:
    """Simulate the full hierarchy: arm means from the prior, sample means given the arm means.

    Each replication draws ``mu_E, mu_C`` from their priors, then ``xbar, ybar``
    given the means, forms the posterior and applies the success rule.
    """
    e, c, lay, tau = design.prior_E, design.prior_C, design.layout, design.tau
    sd_prior_E = 1.0 / math.sqrt(e.prior_weight * tau)
    sd_prior_C = 1.0 / math.sqrt(c.prior_weight * tau)
    sd_mean_E = 1.0 / math.sqrt(lay.n_E * tau)
    sd_mean_C = 1.0 / math.sqrt(lay.n_C * tau)
    root = math.sqrt(design.d1 * tau)
    z = std_normal_quantile(design.eta)

    def kernel(rng, size):
        dev_E = sd_prior_E * rng.standard_normal(size) + sd_mean_E * rng.standard_normal(size)
        dev_C = sd_prior_C * rng.standard_normal(size) + sd_mean_C * rng.standard_normal(size)
        delta1 = _delta1_from_deviations(e, c, lay, dev_E, dev_C)
        return np.count_nonzero(delta1 * root - z >= 0.0)

    mc = run_bernoulli_mc(kernel, stream, reps, workers=workers)
    prior = prior_prob_superiority(design)
    return PstResult(
        psi=mc.estimate, psi_star=mc.estimate / prior, prior_prob=prior, method=Method.MONTE_CARLO, mc=mc
    )
