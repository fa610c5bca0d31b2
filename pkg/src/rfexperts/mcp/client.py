"""Clients for the expert tool layer.

``HttpExpertClient`` talks to a serving endpoint; ``InProcessClient``
short-circuits to a registry in the same process with identical semantics,
which is what makes transport transparency testable.
"""

from __future__ import annotations

import itertools
import threading
from typing import Any, Dict, List, Sequence

import requests

from ..errors import RpcError, TransportError
from .codec import (
    METHOD_LIST,
    ToolCallRequest,
    ToolCallResponse,
    decode_response,
    encode_request,
    encode_rpc,
)
from .registry import Registry, dispatch

DEFAULT_TIMEOUT = 5.0


class HttpExpertClient:
    """Thread-safe JSON-RPC client bound to one endpoint."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT):
        self.endpoint = endpoint
        self.timeout = timeout
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def _next_id(self) -> int:
        with self._lock:
            return next(self._ids)

    def _post(self, body: bytes) -> bytes:
        try:
            reply = requests.post(
                self.endpoint,
                data=body,
                headers={"Content-Type": "application/json"},
                timeout=self.timeout,
            )
        except requests.exceptions.Timeout as exc:
            raise TransportError(
                f"call to {self.endpoint} timed out after {self.timeout}s"
            ) from exc
        except requests.exceptions.RequestException as exc:
            raise TransportError(f"cannot reach {self.endpoint}: {exc}") from exc
        if reply.status_code != 200:
            raise TransportError(
                f"{self.endpoint} answered HTTP {reply.status_code}"
            )
        return reply.content

    def call(self, tool_name: str, h: Sequence[float]) -> ToolCallResponse:
        request_id = self._next_id()
        body = encode_rpc(
            ToolCallRequest(tool_name=tool_name, arguments={"h": list(h)}),
            request_id,
        )
        result, reply_id = decode_response(self._post(body))
        if reply_id != request_id:
            raise TransportError(
                f"response id {reply_id} does not match request id {request_id}"
            )
        return ToolCallResponse.from_result(result)

    def list_tools(self) -> List[Dict[str, Any]]:
        request_id = self._next_id()
        body = encode_request(METHOD_LIST, {}, request_id)
        result, reply_id = decode_response(self._post(body))
        if reply_id != request_id:
            raise TransportError(
                f"response id {reply_id} does not match request id {request_id}"
            )
        return result.get("tools", [])


class InProcessClient:
    """Same surface as the HTTP client, dispatching against a local registry."""

    def __init__(self, registry: Registry):
        self._registry = registry
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def _next_id(self) -> int:
        with self._lock:
            return next(self._ids)

    def call(self, tool_name: str, h: Sequence[float]) -> ToolCallResponse:
        request_id = self._next_id()
        body = encode_rpc(
            ToolCallRequest(tool_name=tool_name, arguments={"h": list(h)}),
            request_id,
        )
        result, _ = decode_response(dispatch(self._registry, body))
        return ToolCallResponse.from_result(result)

    def list_tools(self) -> List[Dict[str, Any]]:
        body = encode_request(METHOD_LIST, {}, self._next_id())
        result, _ = decode_response(dispatch(self._registry, body))
        return result.get("tools", [])


def call_expert(
    endpoint: str,
    tool_name: str,
    h: Sequence[float],
    timeout: float = DEFAULT_TIMEOUT,
) -> ToolCallResponse:
    """One-shot convenience wrapper around :class:`HttpExpertClient`."""
    return HttpExpertClient(endpoint, timeout=timeout).call(tool_name, h)


def list_remote_tools(
    endpoint: str, timeout: float = DEFAULT_TIMEOUT
) -> List[Dict[str, Any]]:
    return HttpExpertClient(endpoint, timeout=timeout).list_tools()
