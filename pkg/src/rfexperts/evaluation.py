"""Experiment harness: exact-match accuracy, baselines, reports.

Scores agent verdicts against scene ground truth with the exact-match
metric (per attribute: 1 if the binary verdict equals the label, else 0),
runs policy comparisons over freshly sampled scene sets, and renders the
results as a text table, tidy CSV, or JSON.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import channel, host
from .errors import LlmParseError, ParameterError, PipelineError

DEFAULT_SAMPLE_COUNT = 1000
DEFAULT_QUERY_TEXT = (
    "Determine which wireless propagation attributes hold for the observed "
    "channel."
)

BASELINE_PEAK_TO_MEAN_LOS = 2.0
BASELINE_LAG1_HIGH_DOPPLER = 0.9
BASELINE_CV_RAYLEIGH = (0.45, 0.60)
BASELINE_CV_RICIAN_K10 = 0.25


def accuracy(
    verdict: Dict[str, int], truth: Dict[str, int]
) -> Tuple[Dict[str, int], float]:
    """Exact-match score per attribute plus their mean."""
    if set(verdict) != set(truth):
        raise ParameterError(
            f"verdict keys {sorted(verdict)} do not match truth keys "
            f"{sorted(truth)}"
        )
    per_attribute = {a: int(verdict[a] == truth[a]) for a in truth}
    return per_attribute, sum(per_attribute.values()) / len(per_attribute)


def baseline_naive(
    h: Sequence[float], attribute_set: Sequence[str] = channel.ATTRIBUTES
) -> Dict[str, int]:
    """Fixed hand-written heuristics with no trained parameters.

    Stands in for an unassisted model reading the raw vector: peak-to-mean
    ratio for LoS, lag-1 magnitude autocorrelation for Doppler, and
    coefficient-of-variation windows for the fading classes.
    """
    m = np.asarray(h, dtype=float)
    mean = float(m.mean())
    cv = float(m.std() / mean) if mean > 0 else 0.0
    peak_ratio = float(m.max() / mean) if mean > 0 else 0.0
    x = m - mean
    denom = float((x * x).sum())
    # A constant window has no wiggle at all; treat it as perfectly
    # correlated rather than dividing by zero.
    lag1 = float((x[1:] * x[:-1]).sum() / denom) if denom > 1e-12 else 1.0
    rules = {
        "detect_los": peak_ratio < BASELINE_PEAK_TO_MEAN_LOS,
        "detect_high_doppler": lag1 < BASELINE_LAG1_HIGH_DOPPLER,
        "detect_rayleigh": BASELINE_CV_RAYLEIGH[0] <= cv <= BASELINE_CV_RAYLEIGH[1],
        "detect_rician_k10": cv < BASELINE_CV_RICIAN_K10,
    }
    return {a: int(rules[a]) for a in attribute_set}


@dataclass(frozen=True)
class PolicySpec:
    """One row of the comparison: a verdict source and its tool mode."""

    name: str
    kind: str  # "naive" | "mcp" | "llm_raw" | "llm_mcp"
    agent: Optional[host.AgentPolicy] = None

    KINDS = ("naive", "mcp", "llm_raw", "llm_mcp")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ParameterError(f"unknown policy kind {self.kind!r}")
        if self.kind in ("mcp", "llm_mcp") and self.agent is None:
            raise ParameterError(f"policy {self.name!r} needs an agent policy")
        if self.kind == "llm_raw" and self.agent is None:
            raise ParameterError(f"policy {self.name!r} needs an llm endpoint")

    @property
    def uses_tools(self) -> bool:
        return self.kind in ("mcp", "llm_mcp")


def default_policies() -> List[PolicySpec]:
    return [
        PolicySpec(name="deterministic", kind="naive"),
        PolicySpec(
            name="deterministic",
            kind="mcp",
            agent=host.AgentPolicy(planner="deterministic", reasoner="threshold"),
        ),
    ]


@dataclass(frozen=True)
class ExperimentConfig:
    sample_count: int = DEFAULT_SAMPLE_COUNT
    attribute_set: Tuple[str, ...] = channel.ATTRIBUTES
    seed: int = 0
    policies: Tuple[PolicySpec, ...] = ()
    query_text: str = DEFAULT_QUERY_TEXT
    n: int = channel.DEFAULT_N

    def __post_init__(self):
        if self.sample_count < 1:
            raise ParameterError("sample_count must be >= 1")
        if not self.policies:
            object.__setattr__(self, "policies", tuple(default_policies()))
        if not self.attribute_set:
            raise ParameterError("attribute_set must be non-empty")


@dataclass
class PolicyResult:
    name: str
    kind: str
    average_accuracy: float
    per_attribute_accuracy: Dict[str, float]
    correct: int
    wrong: int
    pipeline_failures: int
    runtime_seconds: float

    def to_dict(self, include_runtime: bool = True) -> Dict:
        doc = {
            "name": self.name,
            "kind": self.kind,
            "average_accuracy": self.average_accuracy,
            "per_attribute_accuracy": self.per_attribute_accuracy,
            "correct": self.correct,
            "wrong": self.wrong,
            "pipeline_failures": self.pipeline_failures,
        }
        if include_runtime:
            doc["runtime_seconds"] = self.runtime_seconds
        return doc


@dataclass
class Report:
    sample_count: int
    attribute_set: Tuple[str, ...]
    seed: int
    results: List[PolicyResult] = field(default_factory=list)
    curves: Dict[str, Dict[str, List[float]]] = field(default_factory=dict)

    def to_dict(self, include_runtime: bool = True) -> Dict:
        """Full report structure; runtimes are timing noise, so callers
        emitting reproducible files leave them out."""
        return {
            "sample_count": self.sample_count,
            "attribute_set": list(self.attribute_set),
            "seed": self.seed,
            "results": [r.to_dict(include_runtime) for r in self.results],
            "curves": self.curves,
        }


def attach_curves(report: Report, histories: Dict) -> None:
    """Record raw and smoothed training curves per attribute."""
    from .expert import moving_average, SMOOTHING_WINDOW

    for attribute, history in histories.items():
        report.curves[attribute] = {
            "train_loss": list(history.train_loss),
            "test_accuracy": list(history.test_accuracy),
            "train_loss_smoothed": moving_average(
                history.train_loss, SMOOTHING_WINDOW
            ),
            "test_accuracy_smoothed": moving_average(
                history.test_accuracy, SMOOTHING_WINDOW
            ),
        }


def run_experiment(
    config: ExperimentConfig,
    client=None,
    aliases: Dict[str, host.AttributeAlias] = host.DEFAULT_ALIASES,
) -> Report:
    """Sample scenes, run every policy on every sample, aggregate scores.

    Tool policies need a reachable ``client``; reachability is probed
    before any sampling so a dead server fails fast.  Per-sample pipeline
    failures score zero, are tallied separately, and never abort the run.
    """
    needs_tools = any(p.uses_tools for p in config.policies)
    if needs_tools:
        if client is None:
            raise ParameterError("tool policies need an expert client")
        client.list_tools()  # setup probe; raises TransportError when dead

    specs = channel.sample_scene_specs(config.sample_count, config.seed, n=config.n)
    samples = [channel.synth_scene(spec, config.attribute_set) for spec in specs]

    report = Report(
        sample_count=config.sample_count,
        attribute_set=tuple(config.attribute_set),
        seed=config.seed,
    )
    query = host.Query(
        text=config.query_text,
        requested_attributes=tuple(config.attribute_set),
    )
    n_attrs = len(config.attribute_set)

    for policy in config.policies:
        started = time.perf_counter()
        correct = 0
        wrong = 0
        failures = 0
        per_attr_correct = {a: 0 for a in config.attribute_set}
        for features, truth, _spec in samples:
            verdict = None
            try:
                if policy.kind == "naive":
                    verdict = baseline_naive(features, config.attribute_set)
                elif policy.kind == "llm_raw":
                    prompt = host.augment_context(query, {}, aliases, h=features)
                    verdict = host.reason_llm(
                        prompt, query.requested_attributes, policy.agent.llm, aliases
                    )
                else:
                    verdict, _trace = host.run_agent(
                        policy.agent, query, features, client, aliases
                    )
            except (PipelineError, LlmParseError):
                failures += n_attrs
                continue
            per_attribute, _mean = accuracy(verdict, truth)
            for attribute, score in per_attribute.items():
                per_attr_correct[attribute] += score
                if score:
                    correct += 1
                else:
                    wrong += 1
        total = config.sample_count * n_attrs
        report.results.append(
            PolicyResult(
                name=policy.name,
                kind=policy.kind,
                average_accuracy=correct / total,
                per_attribute_accuracy={
                    a: per_attr_correct[a] / config.sample_count
                    for a in config.attribute_set
                },
                correct=correct,
                wrong=wrong,
                pipeline_failures=failures,
                runtime_seconds=time.perf_counter() - started,
            )
        )
    return report


_RAW_KINDS = ("naive", "llm_raw")
_MCP_KINDS = ("mcp", "llm_mcp")


def format_table(report: Report) -> str:
    """Text table pairing each policy's raw and tool-augmented accuracy."""
    rows: Dict[str, Dict[str, Optional[float]]] = {}
    for result in report.results:
        cell = "raw" if result.kind in _RAW_KINDS else "mcp"
        rows.setdefault(result.name, {"raw": None, "mcp": None})[cell] = (
            result.average_accuracy
        )
    lines = [
        f"Average attribute accuracy over {report.sample_count} samples",
        f"{'Agent policy':<24}{'Raw accuracy (%)':>18}{'+MCP (%)':>12}",
    ]

    def fmt(value: Optional[float]) -> str:
        return "-" if value is None else f"{100.0 * value:.1f}"

    for name, cells in rows.items():
        lines.append(f"{name:<24}{fmt(cells['raw']):>18}{fmt(cells['mcp']):>12}")
    return "\n".join(lines) + "\n"


def emit_report(report: Report, format: str, path) -> None:
    """Write the report in one of ``table``, ``csv``, ``json``.

    Emitted files exclude wall-clock runtimes so a fixed seed reproduces
    them byte for byte.
    """
    if format == "table":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(format_table(report))
    elif format == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(include_runtime=False), fh, indent=2)
            fh.write("\n")
    elif format == "csv":
        _emit_csv(report, path)
    else:
        raise ParameterError(f"unknown report format {format!r}")


def _emit_csv(report: Report, path) -> None:
    """Tidy long format: one metric value per row, curves included."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record", "policy", "kind", "attribute", "epoch", "value"])
        for result in report.results:
            writer.writerow(
                ["average_accuracy", result.name, result.kind, "", "",
                 repr(result.average_accuracy)]
            )
            for attribute, value in result.per_attribute_accuracy.items():
                writer.writerow(
                    ["attribute_accuracy", result.name, result.kind, attribute,
                     "", repr(value)]
                )
            writer.writerow(
                ["pipeline_failures", result.name, result.kind, "", "",
                 str(result.pipeline_failures)]
            )
        for attribute, curves in report.curves.items():
            for metric, values in curves.items():
                for epoch, value in enumerate(values, start=1):
                    writer.writerow(
                        ["curve", "", "", attribute, str(epoch),
                         f"{metric}={value!r}"]
                    )


def parse_csv_accuracies(path) -> Dict[Tuple[str, str, str], float]:
    """Recover every accuracy cell from the tidy CSV, exactly as written."""
    out: Dict[Tuple[str, str, str], float] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            if row["record"] in ("average_accuracy", "attribute_accuracy"):
                key = (row["policy"], row["kind"], row["attribute"])
                out[key] = float(row["value"])
    return out
