"""Exception types shared across the package."""

import os

DEFAULT_BUDGET = 2**32


class MMLabError(Exception):
    """Base class for all package errors."""


class StructuralError(MMLabError, ValueError):
    """A label vector or permutation does not fit the declared shape."""


class DomainError(MMLabError, ValueError):
    """An operation was applied outside its domain (for example res at radius 0)."""


class ConstraintError(MMLabError, ValueError):
    """A precondition tying several inputs together was violated."""


class CapacityError(MMLabError):
    """An exhaustive scan would exceed the state-count budget."""

    def __init__(self, needed, budget):
        super().__init__(f"state count {needed} exceeds budget {budget}")
        self.needed = needed
        self.budget = budget


class ExclusivityError(MMLabError):
    """A neighborhood has accepting extensions in two different directions."""


class ViewError(MMLabError):
    """A graph neighborhood around an edge is not a complete Delta-ary tree."""


class ExhaustionError(MMLabError):
    """Rejection sampling ran out of tries."""


def resolve_budget(budget=None):
    """Return the state-count budget, honoring the MMLL_BUDGET environment variable."""
    env = os.environ.get("MMLL_BUDGET")
    if env:
        return int(env)
    return DEFAULT_BUDGET if budget is None else int(budget)


def check_budget(count, budget=None):
    budget = resolve_budget(budget)
    if count > budget:
        raise CapacityError(count, budget)
    return count
