"""Exception hierarchy.

Every error carries the name of the invariant it violates so the CLI can
report it verbatim.
"""


class TorsionError(Exception):
    """Base class for all package errors."""

    invariant = "unspecified"

    def __init__(self, message, invariant=None, **diagnostics):
        super().__init__(message)
        if invariant is not None:
            self.invariant = invariant
        self.diagnostics = diagnostics


class InvalidBodyError(TorsionError, ValueError):
    invariant = "bounded-nonempty-body"


class DomainError(TorsionError, ValueError):
    invariant = "argument-domain"


class LoadError(TorsionError, ValueError):
    invariant = "input-schema"


class MeshingError(TorsionError, RuntimeError):
    invariant = "mesh-quality"


class InconsistentMeshError(TorsionError, RuntimeError):
    invariant = "facet-tagging"


class SolverError(TorsionError, RuntimeError):
    invariant = "solver-convergence"
