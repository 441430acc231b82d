"""Planner knobs. Vehicle limits and the planning step follow the stock case-study settings."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class PlannerConfig:
    t_D: float = 0.5            # planning time domain per layer (s)
    h: float = 0.5              # STROM cell size (m)
    v_max: float = 22.0         # m/s
    acc_max: float = 4.0        # m/s^2
    dec_max: float = 6.0        # m/s^2
    kappa_max: float = 2.0      # 1/m
    a_d: float = 2.0            # lateral acceleration bound of the reach rectangles (m/s^2)
    a_lat_max: float = 2.0      # lateral acceleration limit of the smoothed path (m/s^2)
    K_s: int = 5
    K_d: int = 7
    M_max: int = 20
    max_heading: float = 0.35   # largest path heading relative to the lane (rad) between layers
    delta: float = 0.5          # lateral termination tolerance (m)
    eps_s: float = 0.25         # station band of the speed QP (m)
    w_eff: float = 1.0
    w_dyn: float = 0.5
    w_smo: float = 2.0
    w_dl: float = 1.0
    w_ddl: float = 10.0
    w_dddl: float = 100.0
    w_ds: float = 0.0
    w_dds: float = 10.0
    w_ddds: float = 100.0
    margin: float | None = None  # longitudinal STROM margin; None = ego length + h
    threads: int = 0            # 0 = auto (WEAVE_THREADS or cpu count), 1 = sequential
    resample_attempts: int = 6
    pred_noise_s: float = 0.0   # prediction-error injection (std, m)
    pred_noise_d: float = 0.0

    def __post_init__(self):
        positive = ("t_D", "h", "max_heading", "v_max", "acc_max", "dec_max", "kappa_max", "a_d", "a_lat_max",
                    "delta", "eps_s")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("K_s", "K_d", "M_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        for name in ("w_eff", "w_dyn", "w_smo", "w_dl", "w_ddl", "w_dddl", "w_ds", "w_dds", "w_ddds",
                     "pred_noise_s", "pred_noise_d"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.threads < 0:
            raise ValueError("threads must be nonnegative")

    def with_(self, **changes) -> "PlannerConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PlannerConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown planner setting(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def effective_threads(self) -> int:
        n = self.threads
        if n == 0:
            env = os.environ.get("WEAVE_THREADS", "0").strip() or "0"
            try:
                n = int(env)
            except ValueError:
                n = 0
            if n <= 0:
                n = os.cpu_count() or 1
        return n
