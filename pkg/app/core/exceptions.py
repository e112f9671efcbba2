"""
Domain errors shared by every service
"""


class HboaError(Exception):
    """Base class for all optimizer and harness errors"""


class InvalidArgumentError(HboaError, ValueError):
    """An argument violates an operation precondition"""


class ContractViolationError(HboaError):
    """An internal contract was broken (e.g. selecting from an unevaluated population)"""


class ConfigurationError(HboaError):
    """The requested experiment cannot be configured (missing ground truth, bad files)"""


class UnsolvableAtCeilingError(HboaError):
    """No population size up to the bisection ceiling passed the success criterion"""

    def __init__(self, ceiling: int, problem_id: str):
        self.ceiling = ceiling
        self.problem_id = problem_id
        super().__init__(f"{problem_id}: no population size up to {ceiling} passed")


class InstanceFormatError(InvalidArgumentError):
    """A spin-glass instance file could not be parsed"""
