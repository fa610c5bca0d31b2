"""Expert registry: registration records, call dispatch, manifest loading.

The registry is assembled offline (registration order assigns source ids)
and treated as read-only while serving, so concurrent handlers can share
it freely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .. import expert
from ..errors import RegistrationConflictError, RpcError, SchemaError
from .codec import (
    METHOD_CALL,
    METHOD_LIST,
    STATUS_ERROR,
    STATUS_OK,
    ToolCallRequest,
    ToolCallResponse,
    decode_request,
    encode_error_response,
    encode_response,
)


def make_input_schema(n: int) -> Dict[str, Any]:
    """JSON schema declaring the required channel vector argument."""
    return {
        "type": "object",
        "properties": {
            "h": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": n,
                "maxItems": n,
                "description": f"Channel magnitude vector of {n} real values",
            }
        },
        "required": ["h"],
    }


def _schema_n(input_schema: Dict[str, Any]) -> int:
    try:
        h_schema = input_schema["properties"]["h"]
    except (KeyError, TypeError):
        raise SchemaError("input_schema must declare properties.h") from None
    if "h" not in input_schema.get("required", ()):
        raise SchemaError('input_schema must list "h" as required')
    n = h_schema.get("minItems")
    if n is None or h_schema.get("maxItems") != n:
        raise SchemaError(
            "input_schema.properties.h must pin minItems == maxItems == n"
        )
    return int(n)


@dataclass(frozen=True)
class ExpertRegistration:
    name: str
    description: str
    input_schema: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "input_schema": self.input_schema,
        }


@dataclass(frozen=True)
class _Entry:
    registration: ExpertRegistration
    weights: expert.MlpWeights
    source_id: int


class Registry:
    """Ordered pool of registered experts."""

    def __init__(self):
        self._entries: Dict[str, _Entry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def source_id(self, name: str) -> int:
        return self._entries[name].source_id

    def register_expert(
        self,
        name: str,
        description: str,
        input_schema: Dict[str, Any],
        weights: expert.MlpWeights,
    ) -> ExpertRegistration:
        """Add one expert; existing entries are never touched."""
        if name in self._entries:
            raise RegistrationConflictError(f"tool {name!r} is already registered")
        n = _schema_n(input_schema)
        if n != weights.n:
            raise SchemaError(
                f"schema declares n={n} but weights expect {weights.n} inputs"
            )
        registration = ExpertRegistration(
            name=name, description=description, input_schema=input_schema
        )
        self._entries[name] = _Entry(
            registration=registration,
            weights=weights,
            source_id=len(self._entries) + 1,
        )
        return registration

    def list_tools(self) -> List[ExpertRegistration]:
        """All registrations in registration order."""
        return [e.registration for e in self._entries.values()]

    def handle_call(self, request: ToolCallRequest) -> ToolCallResponse:
        """Run one expert; validation failures become ERROR responses."""
        entry = self._entries.get(request.tool_name)
        if entry is None:
            return ToolCallResponse(
                status=STATUS_ERROR,
                source_id=0,
                error=f"tool not found: {request.tool_name!r}",
            )
        detail = _validate_h(request.arguments, entry.weights.n)
        if detail is not None:
            return ToolCallResponse(
                status=STATUS_ERROR, source_id=entry.source_id, error=detail
            )
        h = np.asarray(request.arguments["h"], dtype=float)
        confidence = expert.forward(entry.weights, h)
        return ToolCallResponse(
            status=STATUS_OK, source_id=entry.source_id, confidence=confidence
        )


def _validate_h(arguments: Dict[str, Any], n: int) -> Optional[str]:
    if "h" not in arguments:
        return 'missing required argument "h"'
    h = arguments["h"]
    if not isinstance(h, (list, tuple)):
        return 'argument "h" must be an array of numbers'
    if len(h) != n:
        return f'argument "h" must hold {n} values, got {len(h)}'
    for i, value in enumerate(h):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return f'argument "h" must be numeric, entry {i} is {type(value).__name__}'
        if not np.isfinite(value):
            return f'argument "h" must be finite, entry {i} is {value!r}'
    return None


def dispatch(registry: Registry, body: bytes) -> bytes:
    """Serve one raw request body; never raises for malformed input."""
    try:
        method, params, request_id = decode_request(body)
    except RpcError as exc:
        return encode_error_response(exc.code, str(exc), exc.request_id)
    if method == METHOD_LIST:
        result = {"tools": [r.to_dict() for r in registry.list_tools()]}
        return encode_response(result, request_id)
    assert method == METHOD_CALL
    tool_name = params.get("tool_name")
    arguments = params.get("arguments", {})
    if not isinstance(tool_name, str) or not isinstance(arguments, dict):
        return encode_error_response(
            RpcError.INVALID_PARAMS,
            "params must carry a tool_name string and an arguments object",
            request_id,
        )
    response = registry.handle_call(
        ToolCallRequest(tool_name=tool_name, arguments=arguments)
    )
    return encode_response(response.to_result(), request_id)


DEFAULT_DESCRIPTIONS = {
    "detect_los": (
        "Returns the probability that the scene is under LoS condition "
        "given channel features."
    ),
    "detect_high_doppler": (
        "Returns the probability that the scene shows a high Doppler "
        "spread given channel features."
    ),
    "detect_rayleigh": (
        "Returns the probability that the scene is pure Rayleigh fading "
        "given channel features."
    ),
    "detect_rician_k10": (
        "Returns the probability that the scene is Rician fading with "
        "K near 10 given channel features."
    ),
}


def load_manifest(path) -> Tuple[Registry, Dict[str, Dict[str, str]]]:
    """Build a registry from a manifest file.

    The manifest is JSON: ``{"experts": [{"name", "description",
    "weights"}...], "aliases": {...}}``; weight paths resolve relative to
    the manifest location.  Returns the registry plus the alias table.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest is not valid JSON: {exc}") from exc
    if "experts" not in doc or not isinstance(doc["experts"], list):
        raise SchemaError('manifest must carry an "experts" array')
    registry = Registry()
    for item in doc["experts"]:
        for key in ("name", "weights"):
            if key not in item:
                raise SchemaError(f"manifest expert entry missing {key!r}")
        weights = expert.load_weights(path.parent / item["weights"])
        description = item.get(
            "description", DEFAULT_DESCRIPTIONS.get(item["name"], item["name"])
        )
        registry.register_expert(
            name=item["name"],
            description=description,
            input_schema=make_input_schema(weights.n),
            weights=weights,
        )
    aliases = doc.get("aliases", {})
    if not isinstance(aliases, dict):
        raise SchemaError('manifest "aliases" must be an object')
    return registry, aliases


def write_manifest(path, experts: List[Dict[str, str]], aliases=None) -> None:
    doc: Dict[str, Any] = {"experts": experts}
    if aliases:
        doc["aliases"] = aliases
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
