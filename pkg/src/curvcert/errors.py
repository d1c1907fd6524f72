"""Exception hierarchy shared by every layer of the engine."""


class CurvcertError(Exception):
    """Base class for all engine errors."""


class ParseError(CurvcertError, ValueError):
    """Malformed expression text or model file.

    ``position`` is a 0-based character offset into the offending text;
    ``line``/``column`` are 1-based and filled in when known.
    """

    def __init__(self, message, position=None, line=None, column=None, text=None):
        self.message = message
        self.position = position
        self.line = line
        self.column = column
        self.text = text
        super().__init__(self._render())

    def _render(self):
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.column is not None:
            where.append(f"column {self.column}")
        elif self.position is not None:
            where.append(f"position {self.position}")
        if where:
            return f"{self.message} ({', '.join(where)})"
        return self.message


class ExprSyntaxError(ParseError):
    pass


class UnknownIdentifierError(ParseError):
    pass


class ArityError(ParseError):
    pass


class DomainError(CurvcertError, ValueError):
    """Evaluation left the domain of an elementary function."""


class NotPositiveDefiniteError(CurvcertError, ValueError):
    pass


class OrderExhaustedError(CurvcertError, ValueError):
    """A jet has no derivative order left to consume."""


class SlotError(CurvcertError, ValueError):
    pass


class DimensionError(CurvcertError, ValueError):
    pass


class MissingPotentialError(CurvcertError, ValueError):
    pass


class DegeneratePlaneError(CurvcertError, ValueError):
    pass


class ValidationError(CurvcertError, ValueError):
    pass


class EmptyDomainError(CurvcertError, ValueError):
    pass


class NotApplicableError(CurvcertError):
    pass


class UnknownNameError(CurvcertError, KeyError):
    """Unknown model, check id or tensor name."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class PointEvaluationError(CurvcertError):
    """A geometry error raised while evaluating a check at a specific point."""

    def __init__(self, check_id, point, cause):
        self.check_id = check_id
        self.point = tuple(point)
        self.cause = cause
        super().__init__(f"{check_id} failed at point {self.point}: {cause}")
