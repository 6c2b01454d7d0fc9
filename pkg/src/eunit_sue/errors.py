"""Exception hierarchy shared across the package."""


class EUnitSueError(Exception):
    """Base class for all package errors."""


class DomainError(EUnitSueError, ValueError):
    """An argument violates a mathematical domain constraint (e.g. negative flow)."""


class EmptySupportError(DomainError):
    """No route lies strictly inside the perceived travel time bounds."""


class StructureError(EUnitSueError, ValueError):
    """Inconsistent indices, topology or table structure."""


class SolverError(EUnitSueError, RuntimeError):
    """A numerical solve failed to produce a usable answer."""


class ScenarioError(EUnitSueError, ValueError):
    """A scenario file or its referenced data failed validation."""
