"""Exception types shared across the toolkit."""


class MlwfError(Exception):
    """Base class for all toolkit errors."""


class InputError(MlwfError):
    """Malformed or mismatched input data (wrong grid, wrong length, bad file)."""


class ParameterError(MlwfError):
    """A parameter is outside its documented range."""


class CostGuardError(MlwfError):
    """An O(n^{2d}) or worse code path was requested above its size guard.

    Pass ``override_guard=True`` to run anyway.
    """


class DegenerateRegionError(MlwfError):
    """A sampled probe region (ball x cone tail) contains no points."""


class RefusalError(MlwfError):
    """A documented precondition failed; the operation refuses to produce output."""
