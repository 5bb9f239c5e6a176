"""Exception types shared across the package."""


class StabsteerError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(StabsteerError, ValueError):
    """Operands act on different numbers of qubits."""


class CapacityError(StabsteerError, ValueError):
    """Requested dense object exceeds the desk-scale memory guard."""


class PauliParseError(StabsteerError, ValueError):
    """Malformed Pauli text."""


class OutcomeKeyError(StabsteerError, KeyError):
    """Outcome word keyed by the wrong stabilizer indices."""


class ConstraintError(StabsteerError, ValueError):
    """An algebraic admissibility constraint is violated."""


class NonStationaryError(StabsteerError, ValueError):
    """Operation requires a stationary model; reports the residual."""

    def __init__(self, residual, tolerance):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"model is not stationary: residual {residual:.3e} exceeds "
            f"tolerance {tolerance:.3e}"
        )


class InvalidModelError(StabsteerError, ValueError):
    """Rate matrix fails positive semidefiniteness beyond roundoff."""


class IntegrationError(StabsteerError, RuntimeError):
    """Time integration failed (trace drift or non-convergence)."""


class SpecFileError(StabsteerError, ValueError):
    """Model-spec file is malformed; message carries field diagnostics."""
