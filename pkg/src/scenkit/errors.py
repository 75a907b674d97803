"""Exception hierarchy shared by all scenkit modules."""


class ScenkitError(Exception):
    """Base class for toolkit errors."""


class ValidationError(ScenkitError, ValueError):
    """Input violates a documented precondition or invariant."""


class InvalidPathError(ValidationError):
    pass


class RangeError(ValidationError):
    pass


class EmptyInputError(ValidationError):
    pass


class InsufficientInputError(ValidationError):
    pass


class ExtractionError(ValidationError):
    pass


class CompileError(ValidationError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid parameters: " + "; ".join(self.problems))


class UnsupportedFeatureError(ValidationError):
    def __init__(self, element, detail=""):
        self.element = element
        msg = f"unsupported element <{element}>"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class MalformedDocumentError(ValidationError):
    pass


class NotApplicableError(ValidationError):
    pass
