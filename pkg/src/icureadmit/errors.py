"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ``InputError`` subclasses -> 2,
``EvaluationError`` -> 3, ``UnsupportedModelError`` -> 4.
"""


class InputError(Exception):
    """Bad input data or files (CLI exit code 2)."""


class ParseError(InputError):
    def __init__(self, message, *, row=None, column=None, offset=None, source=None):
        self.row = row
        self.column = column
        self.offset = offset
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DataError(InputError):
    """Parsed data that violates a cross-record rule (e.g. duplicate ids)."""


class EmptyVocabularyError(InputError):
    pass


class ContractError(ValueError):
    """A documented precondition of an operation was violated."""


class TrainingError(Exception):
    pass


class EvaluationError(Exception):
    pass


class UnsupportedModelError(Exception):
    pass
