class PlanningError(Exception):
    """A plan could not be produced for the given scene (CLI exit code 3)."""


class NoFeasibleLaneChange(PlanningError):
    def __init__(self, msg="no feasible lane change", layers_attempted=0):
        super().__init__(msg)
        self.layers_attempted = layers_attempted


class LayerStarved(PlanningError):
    def __init__(self, layer):
        super().__init__(f"layer starved: no free sample survives at layer {layer}")
        self.layer = layer


class NoDynamicallyFeasiblePath(PlanningError):
    def __init__(self, msg="no dynamically feasible path"):
        super().__init__(msg)


class SmoothingCorridorEmpty(PlanningError):
    def __init__(self, msg="smoothing corridor empty"):
        super().__init__(msg)


class SpeedCorridorInfeasible(PlanningError):
    def __init__(self, msg="speed corridor infeasible"):
        super().__init__(msg)


class BlockedStation(PlanningError):
    def __init__(self, s, k):
        super().__init__(f"blocked station: no free lateral interval at s={s:.3f} in slice {k}")


class OutsideStrom(ValueError):
    def __init__(self, s, d, t):
        super().__init__(f"outside STROM: (s={s}, d={d}, t={t})")


class QpInfeasible(Exception):
    pass


class QpUnbounded(Exception):
    pass


class InsufficientData(ValueError):
    def __init__(self, msg="insufficient data"):
        super().__init__(msg)


class DegenerateBand(ValueError):
    def __init__(self, r_max, r_min):
        super().__init__(f"degenerate band: R_min={r_min:.6g} >= R_max={r_max:.6g}")
        self.r_max = r_max
        self.r_min = r_min


class ScenarioError(ValueError):
    """Malformed scenario or episode input (CLI exit code 2)."""
