"""Exception hierarchy shared by every module."""


class SimulationError(Exception):
    pass


class ParameterRangeError(SimulationError, ValueError):
    pass


class StructuralError(SimulationError):
    """A reference to a mode, slice or detector that does not exist."""


class NetworkValidationError(SimulationError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid network: {lines}")


class UndefinedConditionalError(SimulationError):
    pass


class IllConditionedPostselection(SimulationError):
    def __init__(self, amplitude: float, threshold: float):
        self.amplitude = amplitude
        self.threshold = threshold
        super().__init__(
            f"post-selection amplitude {amplitude:.3e} below threshold {threshold:.0e}"
        )


class CapExceededError(SimulationError):
    pass
