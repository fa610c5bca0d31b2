"""Agent host: plan expert calls, invoke them, reason to a strict verdict.

The pipeline runs in fixed stages: plan which experts to consult, call
them through a tool client, assemble the reasoning prompt, and reduce the
collected confidences to a binary attribute map.  The deterministic
planner and threshold reasoner are first-class (they define the
reproducible path); external-model backends plug in behind the same
signatures.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import requests

from .errors import (
    LlmParseError,
    ParameterError,
    PipelineError,
    TransportError,
    UnsatisfiablePlanError,
)
from .mcp.codec import ToolCallResponse

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class AttributeAlias:
    """Human-facing names of one attribute in prompts and strict replies."""

    display: str
    json_key: str


DEFAULT_ALIASES: Dict[str, AttributeAlias] = {
    "detect_los": AttributeAlias("line-of-sight", "line-of-sight"),
    "detect_high_doppler": AttributeAlias("high Doppler", "highdoppler"),
    "detect_rayleigh": AttributeAlias("Rayleigh fading", "rayleigh"),
    "detect_rician_k10": AttributeAlias("Rician fading with K = 10", "rician_m10"),
}


def aliases_from_manifest(raw: Dict[str, Dict[str, str]]) -> Dict[str, AttributeAlias]:
    """Merge manifest-supplied aliases over the defaults."""
    table = dict(DEFAULT_ALIASES)
    for name, fields in raw.items():
        table[name] = AttributeAlias(
            display=fields.get("display", name),
            json_key=fields.get("json_key", name),
        )
    return table


@dataclass(frozen=True)
class Query:
    text: str
    requested_attributes: Tuple[str, ...]

    def __post_init__(self):
        if not self.requested_attributes:
            raise ParameterError("a query must request at least one attribute")
        object.__setattr__(
            self, "requested_attributes", tuple(self.requested_attributes)
        )


@dataclass(frozen=True)
class Plan:
    mcp_calls: Tuple[str, ...]
    fallback_used: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mcp_calls", tuple(self.mcp_calls))


@dataclass(frozen=True)
class LlmEndpoint:
    """Plain text-in/text-out HTTP adapter for an external model."""

    url: str
    model: str = ""
    api_key: str = ""
    timeout: float = 30.0

    ENV_URL = "RFEXPERTS_LLM_URL"
    ENV_MODEL = "RFEXPERTS_LLM_MODEL"
    ENV_KEY = "RFEXPERTS_LLM_KEY"

    @classmethod
    def from_env(cls) -> Optional["LlmEndpoint"]:
        url = os.environ.get(cls.ENV_URL)
        if not url:
            return None
        return cls(
            url=url,
            model=os.environ.get(cls.ENV_MODEL, ""),
            api_key=os.environ.get(cls.ENV_KEY, ""),
        )

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "text/plain; charset=utf-8"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        if self.model:
            headers["X-Model"] = self.model
        try:
            reply = requests.post(
                self.url, data=prompt.encode("utf-8"), headers=headers,
                timeout=self.timeout,
            )
        except requests.exceptions.RequestException as exc:
            raise TransportError(f"cannot reach model endpoint: {exc}") from exc
        if reply.status_code != 200:
            raise TransportError(f"model endpoint answered HTTP {reply.status_code}")
        return reply.text


@dataclass(frozen=True)
class AgentPolicy:
    planner: str = "deterministic"  # or "llm"
    reasoner: str = "threshold"  # or "llm"
    threshold: float = DEFAULT_THRESHOLD
    llm: Optional[LlmEndpoint] = None

    def __post_init__(self):
        if self.planner not in ("deterministic", "llm"):
            raise ParameterError(f"unknown planner kind {self.planner!r}")
        if self.reasoner not in ("threshold", "llm"):
            raise ParameterError(f"unknown reasoner kind {self.reasoner!r}")
        if ("llm" in (self.planner, self.reasoner)) and self.llm is None:
            raise ParameterError("llm planner/reasoner requires an endpoint")


@dataclass
class Trace:
    """Complete audit record of one agent run; replays stages 3-6."""

    query_text: str
    requested_attributes: Tuple[str, ...]
    h: List[float]
    plan: Tuple[str, ...] = ()
    plan_fallback: bool = False
    calls: List[Dict[str, Any]] = field(default_factory=list)
    prompt: str = ""
    verdict: Dict[str, int] = field(default_factory=dict)
    diagnostics: List[str] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "query_text": self.query_text,
            "requested_attributes": list(self.requested_attributes),
            "h": self.h,
            "plan": list(self.plan),
            "plan_fallback": self.plan_fallback,
            "calls": self.calls,
            "prompt": self.prompt,
            "verdict": self.verdict,
            "diagnostics": self.diagnostics,
        }
        return json.dumps(doc, indent=2)


def plan_deterministic(query: Query, tool_names: Sequence[str]) -> Plan:
    """Select every registered tool the query asks for, in request order."""
    if not tool_names:
        raise UnsatisfiablePlanError(query.requested_attributes[0])
    available = set(tool_names)
    calls: List[str] = []
    for attribute in query.requested_attributes:
        if attribute not in available:
            raise UnsatisfiablePlanError(attribute)
        if attribute not in calls:
            calls.append(attribute)
    return Plan(mcp_calls=tuple(calls))


def _extract_json_object(text: str) -> Optional[Dict[str, Any]]:
    """First well-formed JSON object embedded anywhere in the text."""
    decoder = json.JSONDecoder()
    for start, char in enumerate(text):
        if char != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def planning_prompt(query: Query, tool_names: Sequence[str]) -> str:
    lines = [
        "You orchestrate wireless channel analysis tools.",
        "Available experts: " + ", ".join(tool_names) + ".",
        f"User query: {query.text}",
        "Which experts are relevant? Respond only in strict JSON format: "
        '{"mcp_calls": [expert names]}',
    ]
    return "\n".join(lines)


def plan_llm(
    query: Query, tool_names: Sequence[str], endpoint: LlmEndpoint
) -> Plan:
    """Ask an external model to pick the expert subset.

    Unregistered names are filtered out; an unparseable reply falls back to
    the deterministic plan with the fallback flag set.
    """
    reply = endpoint.complete(planning_prompt(query, tool_names))
    parsed = _extract_json_object(reply)
    if parsed is None or not isinstance(parsed.get("mcp_calls"), list):
        fallback = plan_deterministic(query, tool_names)
        return Plan(mcp_calls=fallback.mcp_calls, fallback_used=True)
    available = set(tool_names)
    calls: List[str] = []
    for name in parsed["mcp_calls"]:
        if isinstance(name, str) and name in available and name not in calls:
            calls.append(name)
    return Plan(mcp_calls=tuple(calls))


def invoke_all(
    plan: Plan, h: Sequence[float], client, concurrency: int = 1
) -> Dict[str, ToolCallResponse]:
    """One call per planned tool; ERROR responses are stored, not raised."""
    h = list(h)

    def one(tool: str) -> ToolCallResponse:
        try:
            return client.call(tool, h)
        except TransportError as exc:
            raise PipelineError(
                f"transport failure calling {tool!r}: {exc}", tool_name=tool
            ) from exc

    if concurrency > 1 and len(plan.mcp_calls) > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            responses = list(pool.map(one, plan.mcp_calls))
    else:
        responses = [one(tool) for tool in plan.mcp_calls]
    return dict(zip(plan.mcp_calls, responses))


def serialize_h(h: Sequence[float]) -> str:
    """Bracketed decimal list form used when a prompt embeds the raw vector."""
    return "[" + ", ".join(repr(float(v)) for v in h) + "]"


def reasoning_template(
    requested_attributes: Sequence[str],
    aliases: Dict[str, AttributeAlias] = DEFAULT_ALIASES,
) -> str:
    attribute_list = ", ".join(
        aliases[a].display if a in aliases else a for a in requested_attributes
    )
    attribute_json = (
        "{"
        + ", ".join(
            f'"{aliases[a].json_key if a in aliases else a}": 0 or 1'
            for a in requested_attributes
        )
        + "}"
    )
    return (
        "You are a wireless environment reasoning assistant. Given a "
        "real-valued channel vector h, infer whether the scene satisfies "
        f"each of the following attributes: {attribute_list}. Respond only "
        f"in strict JSON format: {attribute_json}"
    )


def augment_context(
    query: Query,
    results: Dict[str, ToolCallResponse],
    aliases: Dict[str, AttributeAlias] = DEFAULT_ALIASES,
    h: Optional[Sequence[float]] = None,
) -> str:
    """Assemble the reasoning prompt: template, optional raw vector, one
    line per expert result."""
    lines = [reasoning_template(query.requested_attributes, aliases)]
    if h is not None:
        lines.append(f"Channel vector h: {serialize_h(h)}")
    for name, response in results.items():
        if response.ok:
            lines.append(
                f"expert {name} (source_id {response.source_id}): "
                f"confidence {response.confidence!r}"
            )
        else:
            lines.append(
                f"expert {name} (source_id {response.source_id}): "
                f"status ERROR ({response.error})"
            )
    return "\n".join(lines)


def reason_threshold(
    results: Dict[str, ToolCallResponse],
    requested_attributes: Sequence[str],
    threshold: float = DEFAULT_THRESHOLD,
) -> Tuple[Dict[str, int], List[str]]:
    """Threshold the confidences (inclusive); missing or ERROR results
    score 0 and are flagged in the diagnostics."""
    verdict: Dict[str, int] = {}
    diagnostics: List[str] = []
    for attribute in requested_attributes:
        response = results.get(attribute)
        if response is None:
            verdict[attribute] = 0
            diagnostics.append(f"{attribute}: no expert result")
        elif not response.ok:
            verdict[attribute] = 0
            diagnostics.append(f"{attribute}: expert ERROR ({response.error})")
        else:
            verdict[attribute] = int(response.confidence >= threshold)
    return verdict, diagnostics


def reason_llm(
    prompt: str,
    requested_attributes: Sequence[str],
    endpoint: LlmEndpoint,
    aliases: Dict[str, AttributeAlias] = DEFAULT_ALIASES,
) -> Dict[str, int]:
    """Send the prompt and parse the strict attribute map.

    The extractor recovers the first well-formed JSON object even when the
    model wraps it in prose; anything short of a complete binary map raises
    :class:`LlmParseError` carrying the raw reply.
    """
    reply = endpoint.complete(prompt)
    parsed = _extract_json_object(reply)
    if parsed is None:
        raise LlmParseError("reply holds no JSON object", raw_reply=reply)
    verdict: Dict[str, int] = {}
    for attribute in requested_attributes:
        key = aliases[attribute].json_key if attribute in aliases else attribute
        if key not in parsed:
            raise LlmParseError(f"reply is missing key {key!r}", raw_reply=reply)
        value = parsed[key]
        if value not in (0, 1) or isinstance(value, bool):
            raise LlmParseError(
                f"key {key!r} must be 0 or 1, got {value!r}", raw_reply=reply
            )
        verdict[attribute] = int(value)
    return verdict


def run_agent(
    policy: AgentPolicy,
    query: Query,
    h: Sequence[float],
    client,
    aliases: Dict[str, AttributeAlias] = DEFAULT_ALIASES,
    permissive_plan: bool = False,
) -> Tuple[Dict[str, int], Trace]:
    """Execute the full pipeline and return the verdict with its trace.

    ``permissive_plan`` turns unsatisfiable deterministic plans into an
    empty plan (the reasoner then scores the missing attributes 0) instead
    of raising.
    """
    trace = Trace(
        query_text=query.text,
        requested_attributes=query.requested_attributes,
        h=[float(v) for v in h],
    )
    tool_names = [t["name"] for t in client.list_tools()]

    if policy.planner == "llm":
        plan = plan_llm(query, tool_names, policy.llm)
    else:
        try:
            plan = plan_deterministic(query, tool_names)
        except UnsatisfiablePlanError:
            if not permissive_plan:
                raise
            plan = Plan(mcp_calls=())
            trace.diagnostics.append("plan unsatisfiable; continuing unaugmented")
    trace.plan = plan.mcp_calls
    trace.plan_fallback = plan.fallback_used
    if plan.fallback_used:
        trace.diagnostics.append("llm plan unparseable; deterministic fallback")

    results = invoke_all(plan, h, client)
    for name, response in results.items():
        trace.calls.append(
            {"tool_name": name, "arguments": {"h": trace.h}, "result": response.to_result()}
        )

    trace.prompt = augment_context(query, results, aliases)

    if policy.reasoner == "llm":
        verdict = reason_llm(
            trace.prompt, query.requested_attributes, policy.llm, aliases
        )
    else:
        verdict, flags = reason_threshold(
            results, query.requested_attributes, policy.threshold
        )
        trace.diagnostics.extend(flags)
    trace.verdict = dict(verdict)
    return verdict, trace
