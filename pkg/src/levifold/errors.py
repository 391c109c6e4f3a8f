"""Exception hierarchy.

Every error carries a machine-readable ``code`` so the command line front end
can serialize failures into ``report.json``.
"""


class LevifoldError(Exception):
    """Base class for all toolkit errors."""

    code = "error"
    #: numerical failures map to exit code 2 in the CLI
    numerical = False

    def to_dict(self):
        return {"code": self.code, "message": str(self)}


class DomainError(LevifoldError):
    code = "domain_error"


class UnknownSurface(LevifoldError):
    code = "unknown_surface"


class BadParams(LevifoldError):
    code = "bad_params"


class OffSurface(LevifoldError):
    code = "off_surface"


class SingularGradient(LevifoldError):
    code = "singular_gradient"


class ReconcileError(LevifoldError):
    code = "reconcile_error"
    numerical = True


class NotLeviFlat(LevifoldError):
    code = "not_levi_flat"


class NoConvergence(LevifoldError):
    code = "no_convergence"
    numerical = True


class DegenerateTangency(LevifoldError):
    code = "degenerate_tangency"


class LeftRegion(LevifoldError):
    code = "left_region"

    def __init__(self, message, point=None, steps_done=0):
        super().__init__(message)
        self.point = point
        self.steps_done = steps_done


class LiftEscaped(LevifoldError):
    code = "lift_escaped"


class ObstructionError(LevifoldError):
    """Raised when a leaf carries a generator loop with a non-zero period of alpha.

    This is the expected outcome on the worm's annulus leaf; it is a result,
    not a malfunction.
    """

    code = "obstruction"

    def __init__(self, loop, period):
        super().__init__(f"leaf has a generator loop with alpha period {period:.12g}")
        self.loop = loop
        self.period = period

    def to_dict(self):
        return {"code": self.code, "message": str(self), "period": float(self.period)}


class DisconnectedError(LevifoldError):
    code = "disconnected"


class PartitionError(LevifoldError):
    code = "partition_error"


class CoverageError(LevifoldError):
    code = "coverage_error"


class MinRadius(LevifoldError):
    code = "min_radius"


class NoChart(LevifoldError):
    code = "no_chart"


class SeamError(LevifoldError):
    code = "seam_error"


class IterationLimit(LevifoldError):
    code = "iteration_limit"
    numerical = True

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}

    def to_dict(self):
        return {"code": self.code, "message": str(self), "residuals": self.residuals}


class NonpositiveRatio(LevifoldError):
    code = "nonpositive_ratio"
