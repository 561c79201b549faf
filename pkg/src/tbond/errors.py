"""Exception hierarchy shared by all tbond modules."""


class TbondError(Exception):
    """Base class; ``code`` is a stable machine-readable tag for reports."""

    code = "error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"code": self.code, "message": str(self), **self.details}


class DimensionError(TbondError, ValueError):
    code = "dimension_mismatch"


class EmptyInputError(TbondError, ValueError):
    code = "empty_input"


class ParseError(TbondError, ValueError):
    """Malformed point-set input; carries ``line``/``column`` when known."""

    code = "parse_error"

    def __init__(self, message, line=None, column=None, **details):
        super().__init__(message, line=line, column=column, **details)
        self.line = line
        self.column = column


class DuplicatePointError(ParseError):
    code = "duplicate_point"


class DegenerateBasisError(ParseError):
    code = "degenerate_basis"


class CapacityError(TbondError, ValueError):
    code = "capacity_exceeded"


class InvalidIndexError(TbondError, IndexError):
    code = "invalid_index"


class RankDeficientError(TbondError, ValueError):
    code = "rank_deficient"


class MarginError(TbondError, ValueError):
    """The window is too small for the requested radius around some center."""

    code = "insufficient_margin"


class RadiusMismatchError(TbondError, ValueError):
    code = "radius_mismatch"


class CenterMismatchError(TbondError, ValueError):
    code = "center_mismatch"


class CandidateCapError(TbondError, RuntimeError):
    code = "candidate_cap_exceeded"


class ParameterError(TbondError, ValueError):
    code = "parameter_violation"
