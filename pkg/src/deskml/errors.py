"""Exception hierarchy shared by every layer.

The gateway maps these onto HTTP status codes; everything else raises them
directly.
"""

from __future__ import annotations


class DeskmlError(Exception):
    """Base class. `code` is the stable machine-readable identifier."""

    code = "error"
    http_status = 400

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ValidationError(DeskmlError):
    code = "invalid"
    http_status = 400


class PermissionDeniedError(DeskmlError):
    code = "permission_denied"
    http_status = 403


class AuthError(DeskmlError):
    code = "unauthorized"
    http_status = 401


class NotFoundError(DeskmlError):
    code = "not_found"
    http_status = 404


class StateError(DeskmlError):
    """Operation illegal in the entity's current lifecycle state."""

    code = "illegal_state"
    http_status = 409


class CapacityError(DeskmlError):
    code = "no_capacity"
    http_status = 409


class PersistenceError(DeskmlError):
    """Fatal storage failure while appending to the log."""

    code = "persistence"
    http_status = 500


class CorruptLogError(PersistenceError):
    """Replay hit an undecodable or out-of-order record."""

    code = "corrupt_log"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at line {position})")
        self.position = position


class UnavailableError(DeskmlError):
    """No active primary scheduler right now (failover in progress)."""

    code = "unavailable"
    http_status = 503


class AdmissionRejected(DeskmlError):
    """run/sweep admission failed; carries the decision's reason."""

    http_status = 409

    def __init__(self, reason, message: str):
        super().__init__(message)
        self.reason = reason
        self.code = str(getattr(reason, "value", reason))
        if self.code == "permission_denied":
            self.http_status = 403
