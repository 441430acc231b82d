"""Risk-field coefficients and their JSON form."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class FieldParams:
    """Calibrated risk-field coefficients plus environment constants.

    Defaults are the stock calibration of the weaving-segment field.
    ``T_r`` and ``a_max`` (reaction time, braking capability used by the charge)
    and the environmental complexity ``G`` are not calibrated.
    """

    alpha: float = 1.72
    beta_1: float = 0.07
    beta_2: float = 0.25
    k: float = 0.56
    gamma_1: float = 0.09
    gamma_2: float = 0.97
    partial_1: float = 2.02
    partial_2: float = 1.06
    partial_3: float = 2.05
    sigma_1: float = 9.55
    sigma_2: float = -0.45
    R_max: float = 4.0
    R_min: float = 1.2
    T_r: float = 1.0
    a_max: float = 6.0
    G: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.a_max > 0:
            raise ValueError("a_max must be positive")
        if not self.T_r > 0:
            raise ValueError("T_r must be positive")
        if not self.G > 0:
            raise ValueError("G must be positive")
        if not self.R_max > self.R_min:
            raise ValueError(f"R_max ({self.R_max}) must exceed R_min ({self.R_min})")

    @property
    def R_best(self) -> float:
        return 0.5 * (self.R_max + self.R_min)

    def with_(self, **changes) -> "FieldParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FieldParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown field parameter(s): {', '.join(sorted(unknown))}")
        values = {}
        for key, val in data.items():
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ValueError(f"field parameter {key!r} must be a number, got {val!r}")
            values[key] = float(val)
        return cls(**values)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "FieldParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


# keys of the calibrated coefficients, in table order
CALIBRATED_KEYS = (
    "alpha", "beta_1", "beta_2", "k", "gamma_1", "gamma_2",
    "partial_1", "partial_2", "partial_3", "sigma_1", "sigma_2",
)
