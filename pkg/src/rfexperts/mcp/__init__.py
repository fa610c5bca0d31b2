"""JSON-RPC 2.0 tool layer: expert registry, wire codec, server and client."""

from .codec import (
    JSONRPC_VERSION,
    METHOD_CALL,
    METHOD_LIST,
    ToolCallRequest,
    ToolCallResponse,
    canonical_json,
    decode_request,
    decode_response,
    decode_rpc,
    encode_error_response,
    encode_request,
    encode_response,
    encode_rpc,
)
from .registry import ExpertRegistration, Registry, dispatch, load_manifest, make_input_schema
from .client import HttpExpertClient, InProcessClient, call_expert, list_remote_tools
from .server import ExpertHttpServer, serve_stream

__all__ = [
    "JSONRPC_VERSION",
    "METHOD_CALL",
    "METHOD_LIST",
    "ToolCallRequest",
    "ToolCallResponse",
    "canonical_json",
    "decode_request",
    "decode_response",
    "decode_rpc",
    "encode_error_response",
    "encode_request",
    "encode_response",
    "encode_rpc",
    "ExpertRegistration",
    "Registry",
    "dispatch",
    "load_manifest",
    "make_input_schema",
    "HttpExpertClient",
    "InProcessClient",
    "call_expert",
    "list_remote_tools",
    "ExpertHttpServer",
    "serve_stream",
]
