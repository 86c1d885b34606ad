"""Exception types shared across the library."""


class ScldpcError(Exception):
    """Base class for all library-specific errors."""


class DegeneratePatternError(ScldpcError):
    """A shortening pattern removes every code bit."""


class InfeasibleError(ScldpcError):
    """No decodable candidate exists at the requested operating point."""


class GridMismatchError(ScldpcError):
    """LLR densities live on different quantization grids."""
