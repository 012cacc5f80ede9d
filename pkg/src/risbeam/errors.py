"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent system configuration."""


class StateError(ValueError):
    """An optimizer state object violates its invariants (e.g. nonpositive
    fixed points, division-by-zero guards)."""


class InfeasibleError(RuntimeError):
    """The first subproblem of an optimization run is infeasible, i.e. the
    QoS targets cannot be met for this channel realization."""


class SolverError(RuntimeError):
    """The conic backend failed in a way the calling algorithm cannot
    recover from."""


class StallError(RuntimeError):
    """The sequential rank-one relaxation stalled: the step size underflowed
    without further progress. Carries the best iterate found so far."""

    def __init__(self, message, best_v=None, best_chi=None, trace=None):
        super().__init__(message)
        self.best_v = best_v
        self.best_chi = best_chi
        self.trace = list(trace) if trace is not None else []
