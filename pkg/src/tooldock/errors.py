"""Exception hierarchy and error-message sanitization.

Every error is either transient (worth retrying with backoff: timeouts,
connection drops, HTTP 5xx/429, transport failures) or permanent (retrying
cannot help: schema violations, unknown tools, application errors, other
HTTP 4xx). The ``transient`` attribute carries that categorization.
"""

from __future__ import annotations

import threading

TRANSIENT = "transient"
PERMANENT = "permanent"

_secrets_lock = threading.Lock()
_secrets: set[str] = set()

REDACTED = "[redacted]"


def register_secret(value: str) -> None:
    """Remember a credential string so it never leaks into error messages."""
    if value:
        with _secrets_lock:
            _secrets.add(value)


def clear_secrets() -> None:
    with _secrets_lock:
        _secrets.clear()


def sanitize(message: str) -> str:
    """Replace every registered credential occurrence with a placeholder."""
    with _secrets_lock:
        secrets = list(_secrets)
    for secret in secrets:
        if secret in message:
            message = message.replace(secret, REDACTED)
    return message


class ToolDockError(Exception):
    """Base class for all library errors."""

    transient = False

    @property
    def category(self) -> str:
        return TRANSIENT if self.transient else PERMANENT


# --- naming -----------------------------------------------------------------

class NameUnrenderableError(ToolDockError):
    """No separator substitution yields a name valid for the target pattern."""


class NameTooLongError(ToolDockError):
    """Rendered tool name exceeds the 64-character cap."""


# --- registry ---------------------------------------------------------------

class DuplicateNameError(ToolDockError):
    pass


class UnknownToolError(ToolDockError):
    pass


class SeparatorMismatchError(ToolDockError):
    pass


class UnknownNamespaceError(ToolDockError):
    pass


class MultipleNamespacesError(ToolDockError):
    pass


class WouldCollideError(ToolDockError):
    pass


# --- schema engine ----------------------------------------------------------

class MalformedJsonError(ToolDockError):
    pass


class SchemaViolationError(ToolDockError):
    """Argument object does not conform to the tool's parameter schema.

    ``path`` is a JSON pointer to the offending location.
    """

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path or '/'}: {reason}")
        self.path = path
        self.reason = reason


class UnsupportedSchemaFeatureError(ToolDockError):
    """External schema uses a keyword outside the internal dialect."""

    def __init__(self, keyword: str):
        super().__init__(f"unsupported schema keyword: {keyword}")
        self.keyword = keyword


# --- message compatibility --------------------------------------------------

class UnsupportedFormatError(ToolDockError):
    pass


class MalformedPayloadError(ToolDockError):
    def __init__(self, path: str, reason: str = "malformed payload"):
        super().__init__(f"{path or '/'}: {reason}")
        self.path = path
        self.reason = reason


# --- execution --------------------------------------------------------------

class ToolRaisedError(ToolDockError):
    """The tool itself failed. Permanent unless the adapter marks it transient."""

    def __init__(self, message: str, *, transient: bool = False):
        super().__init__(message)
        self.transient = transient


class CallTimeoutError(ToolDockError):
    transient = True


class WorkerCrashedError(ToolDockError):
    """An isolated-mode worker terminated while running the call."""


# --- HTTP / OpenAPI adapter -------------------------------------------------

class HttpStatusError(ToolDockError):
    """Non-2xx HTTP response. Transient iff status is 5xx or 429."""

    def __init__(self, status_code: int, body: str = ""):
        super().__init__(f"HTTP {status_code}: {body[:500]}")
        self.status_code = status_code
        self.body = body

    @property
    def transient(self) -> bool:  # type: ignore[override]
        return self.status_code >= 500 or self.status_code == 429


class ConnectionFailedError(ToolDockError):
    transient = True


class UnsupportedVersionError(ToolDockError):
    pass


class UnresolvableRefError(ToolDockError):
    pass


class SpecParseError(ToolDockError):
    pass


# --- MCP adapter ------------------------------------------------------------

class TransportUnreachableError(ToolDockError):
    transient = True


class HandshakeRejectedError(ToolDockError):
    pass


class VersionUnsupportedError(ToolDockError):
    pass


class RpcError(ToolDockError):
    """JSON-RPC failure. Transient iff it happened at the transport level."""

    def __init__(self, code: int, message: str, *, transient: bool = False):
        super().__init__(f"RPC error {code}: {message}")
        self.code = code
        self.rpc_message = message
        self.transient = transient


# --- fixtures ---------------------------------------------------------------

class PortInUseError(ToolDockError):
    pass
