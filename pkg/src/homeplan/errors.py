"""Exception hierarchy shared across the package."""


class HomeplanError(Exception):
    """Base class for all package-specific errors."""


class UnknownObjectError(HomeplanError):
    def __init__(self, object_id: str):
        super().__init__(f"unknown object id: {object_id!r}")
        self.object_id = object_id


class UnknownAttributeError(HomeplanError):
    def __init__(self, name: str):
        super().__init__(f"unknown attribute name: {name!r}")
        self.name = name


class InvalidObjectIdError(HomeplanError):
    def __init__(self, text: str, reason: str = ""):
        detail = f": {reason}" if reason else ""
        super().__init__(f"not a well-formed object id: {text!r}{detail}")
        self.text = text


class WorldFormatError(HomeplanError):
    """Raised when a world or task fixture file violates its schema."""


class FormulaSyntaxError(HomeplanError):
    """Syntax error in precondition source, with position and expectations."""

    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        loc = f"line {line}, column {column}"
        exp = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at {loc}{exp}")
        self.line = line
        self.column = column
        self.expected = expected


class UnknownPredicateError(FormulaSyntaxError):
    def __init__(self, name: str, line: int, column: int):
        HomeplanError.__init__(self, f"unknown predicate {name!r} at line {line}, column {column}")
        self.name = name
        self.line = line
        self.column = column
        self.expected = ()


class UnboundVariableError(FormulaSyntaxError):
    def __init__(self, variable: str, line: int = 0, column: int = 0):
        HomeplanError.__init__(self, f"unbound variable {variable}")
        self.variable = variable
        self.line = line
        self.column = column
        self.expected = ()


class UnknownToolError(HomeplanError):
    def __init__(self, name: str, step=None):
        super().__init__(f"unknown tool: {name!r}")
        self.name = name
        self.step = step  # parsed ReactStep when recoverable


class MalformedArgsError(HomeplanError):
    """Action arguments do not satisfy the tool's parameter schema."""


class MissingSlotError(HomeplanError):
    def __init__(self, slot: str):
        super().__init__(f"prompt template slot not filled: {slot!r}")
        self.slot = slot


class MalformedCompletionError(HomeplanError):
    """Completion contains neither a parseable action nor a final answer."""


class NoScoreError(HomeplanError):
    """Critique completion has no Score: line."""


class ScoreOutOfRangeError(HomeplanError):
    def __init__(self, score: int):
        super().__init__(f"critique score {score} outside 1..10")
        self.score = score


class NoPddlFoundError(HomeplanError):
    """Completion contains no fenced pddl block or s-expression."""


class ScriptExhaustedError(HomeplanError):
    """Scripted backend ran out of usable entries."""


class ScriptMismatchError(HomeplanError):
    """Ordered script entry's matcher does not appear in the prompt."""


class BackendUnavailableError(HomeplanError):
    """Remote backend could not produce a completion."""


class GenerationFailedError(HomeplanError):
    def __init__(self, tool: str, last_error: Exception):
        super().__init__(f"precondition generation failed for {tool!r}: {last_error}")
        self.tool = tool
        self.last_error = last_error


class KeyMismatchError(HomeplanError):
    """Generated and ground-truth maps cover different tool names."""


class ExpansionFailedError(HomeplanError):
    """No tree child could be produced within the retry budget."""


class NoFeasibleActionError(HomeplanError):
    """Planner finished its budget with no root children."""


class InsufficientObjectsError(HomeplanError):
    """World lacks the object inventory needed to sample a task."""


class SuiteFormatError(HomeplanError):
    """Suite or task file violates its schema."""
