"""JSON run configurations.

A config names its model with a top-level ``"model"`` key and carries the
design parameters in a block named after that model::

    {"model": "known_precision",
     "known_precision": {"sd": 8, "delta": 4, "prior_weight": 2, "eta": 0.975},
     "n": 100, "n_grid": [40, 60, 80], "seed": 1, "reps": 100000}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from .design_tools import DEFAULT_N_MAX, DEFAULT_REPS, DEFAULT_STEP, MODELS
from .errors import ConfigurationError


@dataclass
class RunConfig:
    model: str = "known_precision"
    params: dict = field(default_factory=dict)
    n: Optional[int] = None
    n_grid: Optional[list] = None
    vary_name: Optional[str] = None
    vary_values: Optional[list] = None
    target: Optional[float] = None
    target_kind: str = "psi_star"
    n_max: int = DEFAULT_N_MAX
    step: int = DEFAULT_STEP
    reps: int = DEFAULT_REPS
    seed: int = 0

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"model": self.model, self.model: dict(self.params)}
        for f in fields(self):
            if f.name in ("model", "params", "vary_name", "vary_values"):
                continue
            value = getattr(self, f.name)
            if value is not None:
                out[f.name] = value
        if self.vary_name is not None:
            out["vary"] = {"name": self.vary_name, "values": list(self.vary_values or [])}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object", field="config")
        data = dict(data)
        model = data.pop("model", None)
        if model not in MODELS:
            raise ConfigurationError(f"config 'model' must be one of {', '.join(MODELS)}, got {model!r}", field="model")
        params = data.pop(model, {})
        for other in MODELS:
            data.pop(other, None)
        if not isinstance(params, dict):
            raise ConfigurationError(f"the {model!r} block must be an object", field=model)
        vary = data.pop("vary", None)
        known = {f.name for f in fields(cls)} - {"model", "params", "vary_name", "vary_values"}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigurationError(f"unknown config field {extra[0]!r}", field=extra[0])
        cfg = cls(model=model, params=dict(params), **data)
        if vary is not None:
            if not isinstance(vary, dict) or "name" not in vary or "values" not in vary:
                raise ConfigurationError("'vary' must be {\"name\": ..., \"values\": [...]}", field="vary")
            cfg.vary_name, cfg.vary_values = vary["name"], list(vary["values"])
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}", field="config") from exc
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}", field="config") from exc

    def copy(self) -> "RunConfig":
        return RunConfig.from_dict(json.loads(json.dumps(self.to_dict())))

