"""Exception hierarchy shared by all stages, mapped to CLI exit codes."""


class SentikitError(Exception):
    """Base class; carries the process exit code for the CLI layer."""

    exit_code = 2


class UsageError(SentikitError):
    """Bad flags, bad config keys, malformed option values."""

    exit_code = 1


class DataError(SentikitError):
    """Unreadable, malformed, or missing input artifacts."""

    exit_code = 2


class FormatError(DataError):
    """A file violates its declared format (column counts, blocks, headers)."""


class CheckpointError(DataError):
    """Checkpoint container corrupt, wrong version, or incompatible shapes."""


class ContractError(SentikitError):
    """A caller violated a documented precondition."""

    exit_code = 2


class NumericalError(SentikitError):
    """Divergence, NaN/Inf losses, or failed numerical self-checks."""

    exit_code = 3
