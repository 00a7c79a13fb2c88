"""Exception hierarchy shared across the platform."""


class IterforgeError(Exception):
    """Base class for all platform errors."""

    code = "error"


class NotFoundError(IterforgeError):
    """A referenced resource (snapshot, asset, task, project) does not exist."""

    code = "not_found"


class ValidationError(IterforgeError):
    """Caller-supplied input violates a precondition."""

    code = "invalid"


class IntegrityError(IterforgeError):
    """Stored state is inconsistent (missing blob, duplicate id, bad reference)."""

    code = "integrity"


class StorageError(IterforgeError):
    """An underlying storage read/write failed."""

    code = "storage"


class StateError(IterforgeError):
    """Operation not valid in the current lifecycle state."""

    code = "state"
