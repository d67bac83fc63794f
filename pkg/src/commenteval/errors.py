"""Shared exception types."""


class CommentEvalError(Exception):
    """Base class for domain errors raised by this package."""


class IngestAborted(CommentEvalError):
    """Strict-mode ingestion hit a malformed record."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class IdMismatchError(CommentEvalError):
    """Two corpora that must share an id set do not."""

    def __init__(self, only_in_predictions, only_in_references):
        self.only_in_predictions = sorted(only_in_predictions)
        self.only_in_references = sorted(only_in_references)
        super().__init__(
            "id sets differ: only in predictions %s; only in references %s"
            % (self.only_in_predictions, self.only_in_references)
        )


class BackendFailure(CommentEvalError):
    """A scoring/embedding/classifier backend could not produce a result."""

    def __init__(self, message: str, pair_id: str | None = None):
        self.pair_id = pair_id
        if pair_id is not None:
            message = f"{message} (pair {pair_id})"
        super().__init__(message)


class RebuildAborted(CommentEvalError):
    """Failure fraction crossed the configured threshold mid-rebuild."""

    def __init__(self, message: str, failures=None):
        self.failures = list(failures or [])
        super().__init__(message)


class UnresolvedTasksError(CommentEvalError):
    """Aggregation requested while rated items still await resolution."""

    def __init__(self, unresolved):
        self.unresolved = list(unresolved)
        super().__init__(
            "cannot aggregate, %d unresolved item(s): %s"
            % (len(self.unresolved), ", ".join(self.unresolved[:10]))
        )
