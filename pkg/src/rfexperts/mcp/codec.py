"""JSON-RPC 2.0 envelopes for the tool layer.

Two methods exist: ``tools/list`` and ``tools/call``.  A tools/call request
carries a tool name plus an arguments record holding the channel vector
``h``; the reply is either a confidence record (status OK) or a tool-level
ERROR record.  Protocol-level failures (unparseable body, bad envelope,
unknown method) map to the standard JSON-RPC error codes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from ..errors import RpcError

JSONRPC_VERSION = "2.0"
METHOD_LIST = "tools/list"
METHOD_CALL = "tools/call"
KNOWN_METHODS = (METHOD_LIST, METHOD_CALL)

STATUS_OK = "OK"
STATUS_ERROR = "ERROR"


@dataclass(frozen=True)
class ToolCallRequest:
    tool_name: str
    arguments: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ToolCallResponse:
    """Standardized expert reply.

    ``source_id`` is the 1-based registration index of the expert; 0 means
    the call never resolved to a registered expert.
    """

    status: str
    source_id: int
    confidence: Optional[float] = None
    error: Optional[str] = None

    def __post_init__(self):
        if self.status == STATUS_OK:
            if self.confidence is None or not 0.0 <= self.confidence <= 1.0:
                raise ValueError("OK responses need a confidence in [0, 1]")
        elif self.status == STATUS_ERROR:
            if not self.error:
                raise ValueError("ERROR responses need an error detail")
        else:
            raise ValueError(f"status must be OK or ERROR, got {self.status!r}")

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def to_result(self) -> Dict[str, Any]:
        if self.ok:
            return {
                "confidence": self.confidence,
                "status": self.status,
                "source_id": self.source_id,
            }
        return {
            "status": self.status,
            "error": self.error,
            "source_id": self.source_id,
        }

    @classmethod
    def from_result(cls, result: Dict[str, Any]) -> "ToolCallResponse":
        return cls(
            status=result.get("status", ""),
            source_id=int(result.get("source_id", 0)),
            confidence=result.get("confidence"),
            error=result.get("error"),
        )


def canonical_json(obj: Any) -> bytes:
    """Key-sorted, whitespace-free encoding used for byte comparisons."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode_request(method: str, params: Dict[str, Any], request_id: int) -> bytes:
    envelope = {
        "jsonrpc": JSONRPC_VERSION,
        "id": request_id,
        "method": method,
        "params": params,
    }
    return json.dumps(envelope).encode("utf-8")


def encode_rpc(request: ToolCallRequest, request_id: int) -> bytes:
    """Wire form of a tools/call request."""
    return encode_request(
        METHOD_CALL,
        {"tool_name": request.tool_name, "arguments": request.arguments},
        request_id,
    )


def decode_request(data: bytes) -> Tuple[str, Dict[str, Any], int]:
    """Parse and validate any request envelope.

    Raises :class:`RpcError` carrying the JSON-RPC error code and, when
    recoverable from the body, the request id.
    """
    try:
        envelope = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise RpcError(RpcError.PARSE_ERROR, f"unparseable body: {exc}") from exc
    if not isinstance(envelope, dict):
        raise RpcError(RpcError.INVALID_REQUEST, "request body must be an object")
    request_id = envelope.get("id")
    if envelope.get("jsonrpc") != JSONRPC_VERSION:
        raise RpcError(
            RpcError.INVALID_REQUEST,
            f"jsonrpc version must be {JSONRPC_VERSION!r}",
            request_id=request_id,
        )
    method = envelope.get("method")
    if not isinstance(method, str):
        raise RpcError(
            RpcError.INVALID_REQUEST, "method must be a string", request_id=request_id
        )
    if method not in KNOWN_METHODS:
        raise RpcError(
            RpcError.METHOD_NOT_FOUND,
            f"unknown method {method!r}",
            request_id=request_id,
        )
    params = envelope.get("params", {})
    if not isinstance(params, dict):
        raise RpcError(
            RpcError.INVALID_PARAMS, "params must be an object", request_id=request_id
        )
    if not isinstance(request_id, int):
        raise RpcError(
            RpcError.INVALID_REQUEST, "id must be an integer", request_id=None
        )
    return method, params, request_id


def decode_rpc(data: bytes) -> Tuple[ToolCallRequest, int]:
    """Parse a tools/call request; inverse of :func:`encode_rpc`."""
    method, params, request_id = decode_request(data)
    if method != METHOD_CALL:
        raise RpcError(
            RpcError.METHOD_NOT_FOUND,
            f"expected {METHOD_CALL!r}, got {method!r}",
            request_id=request_id,
        )
    tool_name = params.get("tool_name")
    if not isinstance(tool_name, str):
        raise RpcError(
            RpcError.INVALID_PARAMS,
            "params.tool_name must be a string",
            request_id=request_id,
        )
    arguments = params.get("arguments", {})
    if not isinstance(arguments, dict):
        raise RpcError(
            RpcError.INVALID_PARAMS,
            "params.arguments must be an object",
            request_id=request_id,
        )
    return ToolCallRequest(tool_name=tool_name, arguments=arguments), request_id


def encode_response(result: Any, request_id: int) -> bytes:
    return json.dumps(
        {"jsonrpc": JSONRPC_VERSION, "id": request_id, "result": result}
    ).encode("utf-8")


def encode_error_response(code: int, message: str, request_id: Optional[int]) -> bytes:
    return json.dumps(
        {
            "jsonrpc": JSONRPC_VERSION,
            "id": request_id,
            "error": {"code": code, "message": message},
        }
    ).encode("utf-8")


def decode_response(data: bytes) -> Tuple[Any, Optional[int]]:
    """Parse a response envelope; JSON-RPC error objects raise RpcError."""
    try:
        envelope = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise RpcError(RpcError.PARSE_ERROR, f"unparseable response: {exc}") from exc
    if not isinstance(envelope, dict) or envelope.get("jsonrpc") != JSONRPC_VERSION:
        raise RpcError(RpcError.INVALID_REQUEST, "malformed response envelope")
    request_id = envelope.get("id")
    if "error" in envelope:
        error = envelope["error"] or {}
        raise RpcError(
            int(error.get("code", RpcError.INTERNAL_ERROR)),
            str(error.get("message", "unknown error")),
            request_id=request_id,
        )
    if "result" not in envelope:
        raise RpcError(RpcError.INVALID_REQUEST, "response carries no result")
    return envelope["result"], request_id
