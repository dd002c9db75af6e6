"""Exception hierarchy. Each family carries the CLI exit code it maps to."""


class ClustcertError(Exception):
    exit_code = 1


class IngestionError(ClustcertError):
    """Malformed input file."""

    exit_code = 3

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ValidationError(ClustcertError, ValueError):
    """Input violates a precondition (shape, symmetry, sign, argument range)."""

    exit_code = 4


class KindMismatchError(ValidationError):
    pass


class DegenerateRowError(ValidationError):
    def __init__(self, row):
        super().__init__(f"row {row} has zero Euclidean norm; chord distance undefined")
        self.row = row


class DegenerateClusterError(ValidationError):
    def __init__(self, individual, cluster):
        super().__init__(
            f"cluster {cluster} has no members other than individual {individual}"
        )
        self.individual = individual
        self.cluster = cluster


class UndefinedSilhouetteError(ValidationError):
    pass


class SolverError(ClustcertError):
    exit_code = 5


class TuningError(ClustcertError):
    exit_code = 6
