"""Exception types shared across the pipeline."""

from __future__ import annotations


class VoxplanError(Exception):
    """Base class for all package errors."""

    code = "internal"


class ParseError(VoxplanError):
    """Malformed mesh file. Carries the byte offset of the offending record."""

    code = "parse_error"

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class EmptyMesh(VoxplanError):
    code = "empty_mesh"


class DegenerateMesh(VoxplanError):
    code = "degenerate_mesh"


class ResolutionTooCoarse(VoxplanError):
    code = "resolution_too_coarse"


class EmptyGrid(VoxplanError):
    code = "empty_grid"


class CanvasTooLarge(VoxplanError):
    code = "canvas_too_large"


class GrammarError(VoxplanError):
    """Model reply did not contain a parseable Parts/Labels line."""

    code = "grammar_error"


class ValidationError(VoxplanError):
    """Selected labels do not exist in the decomposition."""

    code = "validation_error"

    def __init__(self, message: str, unknown_labels: set[int] | None = None):
        super().__init__(message)
        self.unknown_labels = set(unknown_labels or ())


class TransportError(VoxplanError):
    """The chat-vision endpoint could not be reached or replied abnormally."""

    code = "transport_error"


class ConfigError(VoxplanError):
    code = "config_error"


class EmptyAssembly(VoxplanError):
    code = "empty_assembly"


class MissingMethod(VoxplanError):
    code = "missing_method"


class StateError(VoxplanError):
    """Session is not in a state that allows the requested operation."""

    code = "state_error"
