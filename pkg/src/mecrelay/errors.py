"""Exception types raised by the solver stack."""


class MecRelayError(Exception):
    """Base class for all package errors."""


class RelayPathDegenerate(MecRelayError):
    """The relay path SNR is zero, so no relay duration can beat the direct link."""


class InfeasibleInstance(MecRelayError):
    """The relay guarantee cannot be met within one frame."""

    def __init__(self, tau_r_lb, direct_rate, T=None):
        self.tau_r_lb = float(tau_r_lb)
        self.direct_rate = float(direct_rate)
        self.T = T
        msg = f"infeasible instance: tau_r_lb={self.tau_r_lb:.6g} s"
        if T is not None:
            msg += f" exceeds T={T:.6g} s"
        super().__init__(msg)


class MaxIterationsExceeded(MecRelayError):
    """The dual solver hit its iteration cap before the bound interval closed.

    ``best`` holds the best dual result found so far.
    """

    def __init__(self, best, iterations):
        self.best = best
        self.iterations = iterations
        super().__init__(f"dual solver did not converge in {iterations} iterations")


class DimensionMismatch(MecRelayError, ValueError):
    pass


class HeterogeneousCycles(MecRelayError, ValueError):
    """The solver path needs one cycles-per-bit value shared by every node."""


class DegenerateDirectLink(MecRelayError):
    pass


class SolutionValidationError(MecRelayError):
    """A recovered solution failed the constraint check. Carries the full report."""

    def __init__(self, report, violations):
        self.report = report
        self.violations = violations
        lines = ", ".join(f"{v.name} ({v.slack:.3g})" for v in violations[:5])
        super().__init__(f"recovered solution violates constraints: {lines}")


class ConfigError(MecRelayError, ValueError):
    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
