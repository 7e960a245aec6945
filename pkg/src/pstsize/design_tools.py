"""Design utilities shared by all three models.

Flat parameter dictionaries (as found in config files) are turned into design
objects here, and the sample-size search and parameter sweeps work on any of
the three design types.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Sequence, Union

from .conjugate import (
    ArmPrior,
    KnownPrecisionDesign,
    PstResult,
    TwoArmLayout,
    allocate,
    prior_prob_superiority,
    pst_closed_form,
    pst_monte_carlo,
)
from .errors import ConfigurationError, DomainError, InfeasibleTargetError
from .mixture import (
    MixtureDesign,
    NormalMixturePrior,
    prior_prob_positive_mixture,
    pst_monte_carlo_mixture,
    solve_mixture_hyperparams,
)
from .numerics import RandomStream, std_normal_cdf, std_normal_quantile
from .unknown_precision import (
    GammaPrior,
    UnknownPrecisionDesign,
    fit_gamma_moments,
    prior_prob_superiority_t,
    pst_simulation,
)

log = logging.getLogger(__name__)

Design = Union[KnownPrecisionDesign, MixtureDesign, UnknownPrecisionDesign]

MODELS = ("known_precision", "mixture", "unknown_precision")

DEFAULT_REPS = 100_000
DEFAULT_N_MAX = 2000
DEFAULT_STEP = 2

# Setting a key (for example when sweeping it) drops the keys that would
# conflict with it.
_DISPLACES = {
    "sd": ("variance", "tau"),
    "variance": ("sd", "tau"),
    "tau": ("sd", "variance"),
    "delta": ("mu_E0", "mu_C0"),
    "mu_E0": ("delta",),
    "mu_C0": ("delta",),
    "prior_weight": ("n_E0", "n_C0"),
    "n_E0": ("prior_weight",),
    "n_C0": ("prior_weight",),
    "tau1": ("var1",),
    "var1": ("tau1",),
    "prior_var": ("prior_sd",),
    "prior_sd": ("prior_var",),
}

_COMMON_KEYS = {"eta", "R", "delta", "mu_E0", "mu_C0", "prior_weight", "n_E0", "n_C0"}
_PRECISION_KEYS = {"sd", "variance", "tau"}
_ALLOWED_KEYS = {
    "known_precision": _COMMON_KEYS | _PRECISION_KEYS,
    "mixture": {"eta", "R", "rho", "tau0", "delta1", "tau1", "var1", "prior_mean", "prior_var", "prior_sd"}
    | _PRECISION_KEYS,
    "unknown_precision": _COMMON_KEYS | {"alpha0", "beta0", "tau_mean", "tau_sd"},
}


def _num(params, key):
    try:
        value = float(params[key])
    except (TypeError, ValueError):
        raise ConfigurationError(f"parameter {key!r} must be a number, got {params[key]!r}", field=key)
    if not math.isfinite(value):
        raise ConfigurationError(f"parameter {key!r} must be finite", field=key)
    return value


def _exactly_one(params, keys, what):
    present = [k for k in keys if k in params]
    if len(present) != 1:
        raise ConfigurationError(
            f"exactly one of {', '.join(keys)} must be given for {what}, got {present or 'none'}",
            field=present[1] if len(present) > 1 else keys[0],
        )
    return present[0]


def _require(params, key):
    if key not in params:
        raise ConfigurationError(f"missing required parameter {key!r}", field=key)
    return _num(params, key)


def _precision(params):
    key = _exactly_one(params, ("sd", "variance", "tau"), "the data precision")
    value = _num(params, key)
    if value <= 0:
        raise ConfigurationError(f"parameter {key!r} must be positive", field=key)
    return {"sd": 1.0 / value ** 2, "variance": 1.0 / value, "tau": value}[key]


def _arm_priors(params):
    if "delta" in params:
        if "mu_E0" in params or "mu_C0" in params:
            raise ConfigurationError("give either delta or mu_E0/mu_C0, not both", field="delta")
        mu_E, mu_C = _num(params, "delta"), 0.0
    else:
        mu_E, mu_C = _require(params, "mu_E0"), _require(params, "mu_C0")
    if "prior_weight" in params:
        if "n_E0" in params or "n_C0" in params:
            raise ConfigurationError("give either prior_weight or n_E0/n_C0, not both", field="prior_weight")
        w_E = w_C = _num(params, "prior_weight")
    else:
        w_E, w_C = _require(params, "n_E0"), _require(params, "n_C0")
    for key, w in (("n_E0", w_E), ("n_C0", w_C)):
        if w <= 0:
            raise ConfigurationError(f"prior weight {key} must be positive", field=key)
    return ArmPrior(mu_E, w_E), ArmPrior(mu_C, w_C)


def _mixture_prior(params):
    rho, tau0 = _require(params, "rho"), _require(params, "tau0")
    if "prior_mean" in params:
        if "delta1" in params:
            raise ConfigurationError("give either prior moments or delta1/tau1, not both", field="delta1")
        key = _exactly_one(params, ("prior_var", "prior_sd"), "the prior variance")
        var = _num(params, key) ** (2 if key == "prior_sd" else 1)
        return solve_mixture_hyperparams(rho, tau0, _num(params, "prior_mean"), var)
    delta1 = _require(params, "delta1")
    key = _exactly_one(params, ("tau1", "var1"), "the second component precision")
    value = _num(params, key)
    if value <= 0:
        raise ConfigurationError(f"parameter {key!r} must be positive", field=key)
    return NormalMixturePrior(rho=rho, tau0=tau0, delta1=delta1, tau1=value if key == "tau1" else 1.0 / value)


def _gamma_prior(params):
    if "tau_mean" in params:
        return fit_gamma_moments(_require(params, "tau_mean"), _require(params, "tau_sd"))
    return GammaPrior(_require(params, "alpha0"), _require(params, "beta0"))


def build_design(model: str, params: Mapping[str, Any], n_total: int) -> Design:
    """Build a design from a flat parameter mapping.

    Raises ConfigurationError naming the offending field on unknown, missing,
    conflicting or out-of-range parameters.
    """
    if model not in MODELS:
        raise ConfigurationError(f"unknown model {model!r}; choose one of {', '.join(MODELS)}", field="model")
    unknown = set(params) - _ALLOWED_KEYS[model]
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigurationError(f"unknown parameter {key!r} for model {model}", field=key)
    eta = _require(params, "eta")
    R = _num(params, "R") if "R" in params else 1.0
    try:
        layout = allocate(n_total, R)
        if model == "known_precision":
            prior_E, prior_C = _arm_priors(params)
            return KnownPrecisionDesign(_precision(params), prior_E, prior_C, eta, layout)
        if model == "mixture":
            return MixtureDesign(_mixture_prior(params), _precision(params), eta, layout)
        prior_E, prior_C = _arm_priors(params)
        return UnknownPrecisionDesign(_gamma_prior(params), prior_E, prior_C, eta, layout)
    except ConfigurationError:
        raise
    except DomainError as exc:
        raise ConfigurationError(str(exc), field=_guess_field(str(exc))) from exc


def _layout_problem(model, params, n_total):
    if model == "unknown_precision" and n_total < 3:
        return "the pooled variance needs n_total >= 3"
    try:
        allocate(n_total, _num(params, "R") if "R" in params else 1.0)
    except DomainError as exc:
        return str(exc)
    return None


def _guess_field(message):
    for key in ("eta", "rho", "tau0", "n_total", "allocation ratio", "tau", "prior_weight"):
        if key in message:
            return {"allocation ratio": "R", "n_total": "n"}.get(key, key)
    return None


def with_param(params: Mapping[str, Any], key: str, value) -> dict:
    """Copy of ``params`` with ``key`` set and its alternative spellings removed."""
    out = dict(params)
    for other in _DISPLACES.get(key, ()):
        out.pop(other, None)
    out[key] = value
    return out


def model_of(design: Design) -> str:
    if isinstance(design, KnownPrecisionDesign):
        return "known_precision"
    if isinstance(design, MixtureDesign):
        return "mixture"
    if isinstance(design, UnknownPrecisionDesign):
        return "unknown_precision"
    raise TypeError(f"not a design: {type(design).__name__}")


def limiting_value(design: Design) -> float:
    """Prior probability of superiority: the large-n limit of the PST."""
    if isinstance(design, KnownPrecisionDesign):
        return prior_prob_superiority(design)
    if isinstance(design, MixtureDesign):
        return prior_prob_positive_mixture(design.prior)
    return prior_prob_superiority_t(design)


def is_monte_carlo(design: Design) -> bool:
    return not isinstance(design, KnownPrecisionDesign)


def evaluate_pst(design: Design, seed: int = 0, reps: int = DEFAULT_REPS, workers: int = 1) -> PstResult:
    """PST of one design with the model's primary method.

    Monte Carlo models draw from substream ``n_total`` of ``seed`` so any
    sweep or search point can be reproduced by a direct call.
    """
    if isinstance(design, KnownPrecisionDesign):
        return pst_closed_form(design)
    stream = RandomStream(seed, design.layout.n_total)
    if isinstance(design, MixtureDesign):
        return pst_monte_carlo_mixture(design, stream, reps, workers=workers)
    return pst_simulation(design, stream, reps, workers=workers)


# -- frequentist comparator -------------------------------------------------


def frequentist_power(sd: float, delta_star: float, alpha_one_sided: float, n_per_group: float, R: float = 1.0) -> float:
    """Power of the one-sided z-test with ``n_per_group`` controls and ``R * n_per_group`` treated."""
    se = sd * math.sqrt(1.0 / n_per_group + 1.0 / (R * n_per_group))
    return std_normal_cdf(delta_star / se - std_normal_quantile(1.0 - alpha_one_sided))


def frequentist_n_per_group(
    sd: float, delta_star: float, alpha_one_sided: float = 0.025, power: float = 0.80, R: float = 1.0
) -> int:
    """Smallest control-arm size giving the requested power at ``delta_star``.

    The experimental arm gets ``R`` times as many subjects. For ``R = 1`` this
    is ``ceil(2 * (z_{1-alpha} + z_power)^2 * sd^2 / delta_star^2)``.
    """
    if not (sd > 0 and delta_star > 0 and R > 0):
        raise DomainError("sd, delta_star and R must be positive")
    if not 0.0 < alpha_one_sided < 0.5 < power < 1.0:
        raise DomainError("need 0 < alpha < 0.5 < power < 1")
    z_sum = std_normal_quantile(1.0 - alpha_one_sided) + std_normal_quantile(power)
    m = max(1, math.ceil((1.0 + 1.0 / R) * (z_sum * sd / delta_star) ** 2))
    # guard the ceiling against rounding in the closed form
    while m > 1 and frequentist_power(sd, delta_star, alpha_one_sided, m - 1, R) >= power:
        m -= 1
    while frequentist_power(sd, delta_star, alpha_one_sided, m, R) < power:
        m += 1
    return m


# -- sample size search -----------------------------------------------------


@dataclass(frozen=True)
class SizeResult:
    """Outcome of :func:`find_min_n`. ``n`` is None when no grid point met the target."""

    target: float
    target_kind: str
    limit: float
    n: Optional[int] = None
    layout: Optional[TwoArmLayout] = None
    result: Optional[PstResult] = None
    n_max: int = DEFAULT_N_MAX

    @property
    def found(self) -> bool:
        return self.n is not None


def _min_n_for(design):
    return 3 if isinstance(design, UnknownPrecisionDesign) else 2


def find_min_n(
    design: Design,
    target: float,
    target_kind: str = "psi",
    n_max: int = DEFAULT_N_MAX,
    step: int = DEFAULT_STEP,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    workers: int = 1,
) -> SizeResult:
    """Smallest n on the grid ``step, 2*step, ...`` whose PST meets ``target``.

    For Monte Carlo models the criterion is applied to ``psi_hat - 2 * SE`` so
    that noise alone does not accept a sample size.
    """
    if target_kind not in ("psi", "psi_star"):
        raise ConfigurationError(f"target_kind must be 'psi' or 'psi_star', got {target_kind!r}", field="target_kind")
    if not 0.0 <= target < 1.0:
        raise ConfigurationError(f"target must lie in [0, 1), got {target}", field="target")
    if int(step) != step or step < 1:
        raise ConfigurationError("step must be a positive integer", field="step")
    limit = limiting_value(design)
    if target_kind == "psi" and target >= limit:
        raise InfeasibleTargetError(target, limit, kind=target_kind)

    mc = is_monte_carlo(design)
    for n in range(int(step), int(n_max) + 1, int(step)):
        if n < _min_n_for(design):
            continue
        try:
            candidate = design.with_n(n)
        except DomainError:
            continue
        res = evaluate_pst(candidate, seed=seed, reps=reps, workers=workers)
        psi = res.psi - 2.0 * res.std_error if mc else res.psi
        value = psi if target_kind == "psi" else psi / res.prior_prob
        if value >= target:
            return SizeResult(target, target_kind, limit, n, candidate.layout, res, n_max)
    return SizeResult(target, target_kind, limit, n_max=n_max)


# -- sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    model: str
    n_grid: Sequence[int]
    fixed: Mapping[str, Any]
    vary_name: Optional[str] = None
    vary_values: Sequence[float] = ()
    reps: int = DEFAULT_REPS
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown model {self.model!r}", field="model")
        grid = list(self.n_grid)
        if not grid:
            raise ConfigurationError("n_grid is empty", field="n_grid")
        if any(int(n) != n or n < 1 for n in grid):
            raise ConfigurationError("n_grid entries must be positive integers", field="n_grid")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError("n_grid must be strictly increasing", field="n_grid")
        if self.vary_name is not None and not list(self.vary_values):
            raise ConfigurationError(f"no values given for vary parameter {self.vary_name!r}", field="vary")


@dataclass(frozen=True)
class CurvePoint:
    n: int
    psi: float
    psi_star: float
    std_error: Optional[float] = None
    vary_value: float = math.nan
    skipped: Optional[str] = field(default=None, compare=False)


def sweep(spec: SweepSpec, workers: int = 1) -> list[CurvePoint]:
    """Evaluate the PST over ``n_grid`` for each value of the varied parameter.

    Points are returned sorted by ``(vary_value, n)``. Grid points whose
    layout is infeasible come back with NaN values and a ``skipped`` note.
    """
    values = sorted(spec.vary_values) if spec.vary_name is not None else [math.nan]
    points = []
    for value in values:
        params = dict(spec.fixed) if spec.vary_name is None else with_param(spec.fixed, spec.vary_name, value)
        for n in spec.n_grid:
            reason = _layout_problem(spec.model, params, int(n))
            if reason is not None:
                log.warning("skipping n=%s: %s", n, reason)
                points.append(CurvePoint(int(n), math.nan, math.nan, None, float(value), skipped=reason))
                continue
            design = build_design(spec.model, params, int(n))
            res = evaluate_pst(design, seed=spec.seed, reps=spec.reps, workers=workers)
            points.append(CurvePoint(int(n), res.psi, res.psi_star, res.std_error, float(value)))
    return points


# -- closed form versus simulation ------------------------------------------


@dataclass(frozen=True)
class VerifyRow:
    n: int
    closed_form: float
    monte_carlo: float
    std_error: float

    @property
    def z(self) -> float:
        """Discrepancy in units of the Monte Carlo standard error."""
        return abs(self.monte_carlo - self.closed_form) / self.std_error

    @property
    def ok(self) -> bool:
        return self.z <= 3.0


@dataclass(frozen=True)
class VerifyReport:
    model: str
    rows: list

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def max_z(self) -> float:
        return max(r.z for r in self.rows)


# coefficient of variation below which a gamma prior counts as a point mass
DEGENERATE_GAMMA_CV = 1e-3


def conjugate_equivalent(design: Design) -> KnownPrecisionDesign:
    """Known-precision design whose closed form should match ``design``'s simulation.

    Mixtures must have ``rho = 0``; their prior is carried by prior weights in
    the same ratio as the arm sizes. Gamma priors must be concentrated.
    """
    if isinstance(design, KnownPrecisionDesign):
        return design
    if isinstance(design, MixtureDesign):
        if design.prior.rho != 0.0:
            raise ConfigurationError("verify needs rho = 0 for the mixture model", field="rho")
        lay = design.layout
        ratio = lay.n_E / lay.n_C
        d0 = design.prior.tau1 / design.tau
        w_C = d0 * (ratio + 1.0) / ratio
        return KnownPrecisionDesign(
            design.tau, ArmPrior(design.prior.delta1, ratio * w_C), ArmPrior(0.0, w_C), design.eta, lay
        )
    cv = 1.0 / math.sqrt(design.tau_prior.alpha0)
    if cv > DEGENERATE_GAMMA_CV:
        raise ConfigurationError(
            f"verify needs a concentrated gamma prior (CV <= {DEGENERATE_GAMMA_CV:g}), got CV={cv:.3g}",
            field="alpha0",
        )
    return KnownPrecisionDesign(design.tau_prior.mean, design.prior_E, design.prior_C, design.eta, design.layout)


def _perturbed(design: Design, tau_scale: float) -> Design:
    if tau_scale == 1.0:
        return design
    if isinstance(design, UnknownPrecisionDesign):
        g = design.tau_prior
        return replace(design, tau_prior=GammaPrior(g.alpha0, g.beta0 / tau_scale))
    return replace(design, tau=design.tau * tau_scale)


def verify(
    model: str,
    params: Mapping[str, Any],
    n_grid: Sequence[int],
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    workers: int = 1,
    tau_scale: float = 1.0,
) -> VerifyReport:
    """Compare the known-precision closed form with a simulation over ``n_grid``.

    ``tau_scale`` multiplies the precision on the simulation side only, which
    lets the harness be checked against a deliberately wrong model.
    """
    rows = []
    for n in n_grid:
        design = build_design(model, params, int(n))
        cf = pst_closed_form(conjugate_equivalent(design))
        sim = _perturbed(design, tau_scale)
        stream = RandomStream(seed, int(n))
        if isinstance(sim, KnownPrecisionDesign):
            mc = pst_monte_carlo(sim, stream, reps, workers=workers)
        else:
            mc = evaluate_pst(sim, seed=seed, reps=reps, workers=workers)
        se = max(mc.std_error, 1.0 / reps)
        rows.append(VerifyRow(int(n), cf.psi, mc.psi, se))
    return VerifyReport(model, rows)
