"""Exception types raised across the package."""


class AsyncBCDError(Exception):
    """Base class for all package errors."""


class PartitionError(AsyncBCDError, IndexError):
    """A block index or vector length does not match the partition."""


class ConfigError(AsyncBCDError, ValueError):
    """Invalid problem, schedule, stepsize or experiment configuration."""


class DegenerateAgentError(AsyncBCDError, ValueError):
    """An agent whose gradient block depends on no block at all.

    The local stepsize bound is infinite for such an agent, so a finite
    stepsize must be supplied by hand.
    """

    def __init__(self, agents):
        self.agents = tuple(agents)
        super().__init__(
            "agents with all-zero block-Lipschitz row have no finite local "
            f"stepsize bound (0-based): {list(self.agents)}"
        )


class FeasibilityError(AsyncBCDError, ValueError):
    """A point expected to lie in the constraint set does not."""


class DivergenceError(AsyncBCDError, ArithmeticError):
    """The iteration produced a non-finite objective or gradient."""

    def __init__(self, t, what="objective"):
        self.t = int(t)
        super().__init__(f"non-finite {what} at timestep t={self.t}")
