"""Exception hierarchy shared by all engine components.

Every error carries a stable ``code`` string so the HTTP layer and the CLI
can map failures without string-matching messages.
"""

from __future__ import annotations


class CmiError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigInvalid(CmiError):
    """A configuration field failed validation; ``field`` is a dotted path."""

    code = "config_invalid"

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class BackendUnavailable(CmiError):
    code = "backend_unavailable"


class ConversationBusy(CmiError):
    code = "busy"


class UnknownConversation(CmiError):
    code = "unknown_conversation"

    def __init__(self, conversation_id: str):
        super().__init__(f"unknown conversation: {conversation_id}")
        self.conversation_id = conversation_id


class PromptTooLarge(CmiError):
    code = "prompt_too_large"


class GenerationFailed(CmiError):
    """Backend failure during generation; the user entry is retained."""

    code = "generation_failed"

    def __init__(self, message: str, cause: CmiError | None = None):
        super().__init__(message)
        self.cause = cause


# --- gateway errors ---------------------------------------------------------

class NetworkError(CmiError):
    code = "network_error"


class AuthError(CmiError):
    code = "auth_error"


class RateLimited(CmiError):
    code = "rate_limited"

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class ContextOverflow(CmiError):
    code = "context_overflow"


class ProcessError(CmiError):
    code = "process_error"

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class ScriptParse(CmiError):
    code = "script_parse"


class ScriptExhausted(CmiError):
    code = "script_exhausted"


# --- renderer errors --------------------------------------------------------

class RendererUnavailable(CmiError):
    code = "renderer_unavailable"


class RenderTimeout(CmiError):
    code = "render_timeout"


class RenderFailed(CmiError):
    code = "render_failed"

    def __init__(self, message: str, diagnostics: str = ""):
        super().__init__(message)
        self.diagnostics = diagnostics


class UnsupportedFormat(CmiError):
    code = "unsupported_format"


# --- store errors -----------------------------------------------------------

class IoError(CmiError):
    code = "io_error"


class CorruptLog(CmiError):
    code = "corrupt_log"

    def __init__(self, message: str, line_number: int):
        super().__init__(message)
        self.line_number = line_number


class NotFound(CmiError):
    code = "not_found"


class HashMismatch(CmiError):
    code = "hash_mismatch"

    def __init__(self, content_hash: str):
        super().__init__(f"artifact bytes do not match hash {content_hash}")
        self.content_hash = content_hash


class UnsupportedVersion(CmiError):
    code = "unsupported_version"


# --- model errors -----------------------------------------------------------

class LanguageMismatch(CmiError):
    code = "language_mismatch"
