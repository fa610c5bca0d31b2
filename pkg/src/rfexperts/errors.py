"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates an operation's preconditions."""


class ShapeError(ParameterError):
    """Array dimensions are inconsistent with the declared sizes."""


class InsufficientDataError(ParameterError):
    """A series is too short for the requested statistic."""


class UnsupportedAttributeError(ParameterError):
    """An attribute id outside the supported vocabulary."""


class PoolExhaustedError(RuntimeError):
    """Not enough positives or negatives in the scene pool.

    ``deficient_class`` names the side that ran out ("positive" or
    "negative").
    """

    def __init__(self, message: str, attribute_id: str, deficient_class: str):
        super().__init__(message)
        self.attribute_id = attribute_id
        self.deficient_class = deficient_class


class FormatError(ValueError):
    """A persisted file is malformed. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SchemaError(ValueError):
    """File contents contradict their own declared dimensions or fields."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite. ``last_epoch`` is the last finite epoch."""

    def __init__(self, message: str, last_epoch: int):
        super().__init__(message)
        self.last_epoch = last_epoch


class RegistrationConflictError(ValueError):
    """A tool name is already present in the registry."""


class RpcError(ValueError):
    """JSON-RPC level failure, carrying the spec error code."""

    PARSE_ERROR = -32700
    INVALID_REQUEST = -32600
    METHOD_NOT_FOUND = -32601
    INVALID_PARAMS = -32602
    INTERNAL_ERROR = -32603

    def __init__(self, code: int, message: str, request_id=None):
        super().__init__(message)
        self.code = code
        self.request_id = request_id


class TransportError(RuntimeError):
    """The expert endpoint could not be reached or timed out.

    Distinct from an ERROR-status tool response, which is a valid reply.
    """


class UnsatisfiablePlanError(ValueError):
    """A requested attribute has no registered expert."""

    def __init__(self, attribute_id: str):
        super().__init__(f"no registered expert for attribute {attribute_id!r}")
        self.attribute_id = attribute_id


class PipelineError(RuntimeError):
    """A pipeline stage failed in a way the reasoner cannot absorb."""

    def __init__(self, message: str, tool_name: str | None = None):
        super().__init__(message)
        self.tool_name = tool_name


class LlmParseError(RuntimeError):
    """An external model reply could not be parsed into the strict format."""

    def __init__(self, message: str, raw_reply: str):
        super().__init__(message)
        self.raw_reply = raw_reply
