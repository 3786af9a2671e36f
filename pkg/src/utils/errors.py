"""Exception hierarchy shared by every package under ``src``.

Invalid inputs are ``ValueError`` subclasses, numerical breakdowns are
``RuntimeError`` subclasses, so callers that only know the builtin types
still catch them.
"""


class ParameterError(ValueError):
    """An argument or configuration value violates its documented domain."""


class ScenarioError(ValueError):
    """A scenario is unknown or starts outside the safe set."""


class NumericalError(RuntimeError):
    """A matrix that must be positive definite is not."""


class GradientUndefinedError(RuntimeError):
    """A gradient was requested at a scaling solution that is not Optimal."""


class ScalingFailure(RuntimeError):
    """The scaling program ended in MaxIter or Infeasible where a value was required."""


class ControllerFailure(RuntimeError):
    """A control law could not produce a command."""
