"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad grid counts, out-of-range knobs, unknown keys."""


class CompatibilityError(ValueError):
    """Initial and boundary data violate the required matching conditions at t=0."""


class SolverError(RuntimeError):
    """A numerical solve failed (non-finite data, lattice mismatch, breakdown)."""
