class ValidationError(ValueError):
    """Bad input: malformed file, out-of-range parameter, inconsistent shapes."""


class ParseError(ValidationError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class TrainingError(RuntimeError):
    def __init__(self, message, epoch=None):
        self.epoch = epoch
        super().__init__(message)


class AttackError(RuntimeError):
    def __init__(self, message, iteration=None):
        self.iteration = iteration
        super().__init__(message)
