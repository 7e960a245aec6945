"""Named run configurations reproducing the worked IRLS example.

Every preset is a plain dict in the JSON config layout accepted by
``pstsize --config``; ``pstsize --preset NAME --save-config FILE`` writes one out.
"""
from __future__ import annotations

import copy

SEED = 2012

# Endpoint SD 8, prior mean difference 4, one-sided 0.025 success threshold.
_IRLS_KNOWN = {"sd": 8.0, "delta": 4.0, "prior_weight": 2.0, "eta": 0.975, "R": 1.0}
_IRLS_MIXTURE = {"sd": 8.0, "rho": 0.1, "tau0": 100.0, "prior_mean": 4.0, "prior_var": 64.0, "eta": 0.975, "R": 1.0}
_IRLS_UNKNOWN = {"alpha0": 243.0, "beta0": 16200.0, "delta": 4.0, "prior_weight": 2.0, "eta": 0.975, "R": 1.0}

_TABLE_GRID = list(range(40, 141, 20))
_CURVE_GRID = list(range(4, 201, 2))
_MC_CURVE_GRID = list(range(10, 201, 10))
_DELTAS = [2.0, 4.0, 6.0, 8.0]

PRESETS = {
    "table1a": {"model": "known_precision", "known_precision": _IRLS_KNOWN, "n": 100, "n_grid": _TABLE_GRID},
    "table1b": {
        "model": "known_precision",
        "known_precision": {**_IRLS_KNOWN, "prior_weight": 30.0},
        "n": 60,
        "n_grid": _TABLE_GRID,
    },
    "table2": {
        "model": "mixture",
        "mixture": _IRLS_MIXTURE,
        "n": 100,
        "n_grid": list(range(20, 141, 20)),
        "reps": 1_000_000,
        "seed": SEED,
    },
    "fig1": {
        "model": "known_precision",
        "known_precision": _IRLS_KNOWN,
        "n": 100,
        "n_grid": _CURVE_GRID,
        "vary": {"name": "delta", "values": _DELTAS},
    },
    "fig2": {
        "model": "known_precision",
        "known_precision": _IRLS_KNOWN,
        "n": 100,
        "n_grid": _CURVE_GRID,
        "vary": {"name": "eta", "values": [0.8, 0.9, 0.95, 0.975]},
    },
    "fig3": {
        "model": "mixture",
        "mixture": _IRLS_MIXTURE,
        "n": 100,
        "n_grid": _MC_CURVE_GRID,
        "vary": {"name": "rho", "values": [0.0, 0.1, 0.25, 0.5]},
        "reps": 100_000,
        "seed": SEED,
    },
    "fig4": {
        "model": "unknown_precision",
        "unknown_precision": _IRLS_UNKNOWN,
        "n": 100,
        "n_grid": _MC_CURVE_GRID,
        "vary": {"name": "delta", "values": _DELTAS},
        "reps": 100_000,
        "seed": SEED,
    },
}


def get_preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
