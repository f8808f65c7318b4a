"""Exception types raised by the simulator."""


class ValidationError(ValueError):
    """A configuration, layout, or table violates a documented invariant."""


class GeometryError(RuntimeError):
    """Internal geometric inconsistency (e.g. a ray missing its polygon)."""
