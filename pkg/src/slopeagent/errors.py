"""Exception types shared across the package.

Every error carries a stable ``code`` string so the CLI and service can
emit machine-parseable error payloads ({code, field_path?, message}).
"""

from __future__ import annotations


class SlopeAgentError(Exception):
    """Base class; ``code`` is stable across releases."""

    code = "error"

    def __init__(self, message: str, field_path: str | None = None):
        super().__init__(message)
        self.message = message
        self.field_path = field_path

    def payload(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.field_path is not None:
            out["field_path"] = self.field_path
        return out


# -- core model ------------------------------------------------------------

class MissingGeometry(SlopeAgentError):
    code = "missing_geometry"


class UnknownUnit(SlopeAgentError):
    code = "unknown_unit"


class InvalidProblem(SlopeAgentError):
    code = "invalid_problem"


class ProblemFormatError(SlopeAgentError):
    """Raised when a problem file cannot be interpreted structurally."""

    code = "problem_format"


# -- extraction ------------------------------------------------------------

class BackendUnavailable(SlopeAgentError):
    code = "backend_unavailable"


class MalformedBackendReply(SlopeAgentError):
    code = "malformed_backend_reply"


# -- knowledge base ---------------------------------------------------------

class DuplicateDocument(SlopeAgentError):
    code = "duplicate_document"


class EmbedderFailure(SlopeAgentError):
    code = "embedder_failure"


class DimensionMismatch(SlopeAgentError):
    code = "dimension_mismatch"


# -- emitters ----------------------------------------------------------------

class UnknownProfile(SlopeAgentError):
    code = "unknown_profile"


class UnsupportedFeature(SlopeAgentError):
    code = "unsupported_feature"

    def __init__(self, message: str, field_path: str, profile: str):
        super().__init__(message, field_path)
        self.profile = profile


class ParseError(SlopeAgentError):
    code = "parse_error"

    def __init__(self, message: str, line: int, column: int, expected: str):
        super().__init__(message)
        self.line = line
        self.column = column
        self.expected = expected

    def payload(self) -> dict:
        out = super().payload()
        out.update(line=self.line, column=self.column, expected=self.expected)
        return out


# -- solver -------------------------------------------------------------------

class DegenerateCircle(SlopeAgentError):
    code = "degenerate_circle"


class NoDrivingForce(SlopeAgentError):
    code = "no_driving_force"


class NonConvergence(SlopeAgentError):
    code = "non_convergence"


class NoAdmissibleCircle(SlopeAgentError):
    code = "no_admissible_circle"


# -- agent/tools ---------------------------------------------------------------

class UnknownSession(SlopeAgentError):
    code = "unknown_session"


class UnknownAgent(SlopeAgentError):
    code = "unknown_agent"


class UnknownTool(SlopeAgentError):
    code = "unknown_tool"


class ArgumentValidation(SlopeAgentError):
    code = "argument_validation"

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}", field_path=field)
        self.field = field
        self.reason = reason


class ToolTimeout(SlopeAgentError):
    code = "tool_timeout"


# -- service/cli ----------------------------------------------------------------

class UnknownArtifact(SlopeAgentError):
    code = "unknown_artifact"


class UnknownDocument(SlopeAgentError):
    code = "unknown_document"


class UploadTooLarge(SlopeAgentError):
    code = "upload_too_large"


class UnsupportedMediaType(SlopeAgentError):
    code = "unsupported_media_type"


class BadAttachment(SlopeAgentError):
    code = "bad_attachment"


class ConfigError(SlopeAgentError):
    code = "config"
