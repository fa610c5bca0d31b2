"""Operator entry points: data generation, training, serving, calls, evaluation.

Exit codes: 0 success, 1 usage error, 2 runtime error.  Every subcommand is
bit-reproducible in its file outputs under a fixed seed.
"""

from __future__ import annotations

import json
import logging
import signal
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import click
import numpy as np

from . import channel, data, evaluation, expert, host
from .errors import (
    FormatError,
    LlmParseError,
    ParameterError,
    PipelineError,
    PoolExhaustedError,
    RegistrationConflictError,
    RpcError,
    SchemaError,
    TrainingDivergedError,
    TransportError,
    UnsatisfiablePlanError,
    UnsupportedAttributeError,
)
from .mcp import (
    ExpertHttpServer,
    HttpExpertClient,
    Registry,
    load_manifest,
    make_input_schema,
    serve_stream,
)
from .mcp.registry import DEFAULT_DESCRIPTIONS, write_manifest

logger = logging.getLogger(__name__)

ACCURACY_FLOORS = {
    "detect_rayleigh": 0.95,
    "detect_high_doppler": 0.95,
    "detect_los": 0.90,
    "detect_rician_k10": 0.90,
}

DATASET_SUFFIX = ".jsonl"
WEIGHTS_SUFFIX = ".weights.json"
HISTORY_SUFFIX = ".history.json"
MANIFEST_NAME = "manifest.json"

_RUNTIME_ERRORS = (
    FormatError,
    LlmParseError,
    ParameterError,
    PipelineError,
    PoolExhaustedError,
    RegistrationConflictError,
    RpcError,
    SchemaError,
    TrainingDivergedError,
    TransportError,
    UnsatisfiablePlanError,
    UnsupportedAttributeError,
    OSError,
)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info-level logging.")
def cli(verbose: bool):
    """Wireless channel-attribute experts served as JSON-RPC tools."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def _attribute_choices(attributes: Tuple[str, ...]) -> List[str]:
    names = list(attributes) if attributes else list(channel.ATTRIBUTES)
    for name in names:
        if name not in channel.ATTRIBUTES:
            raise click.UsageError(f"unknown attribute {name!r}")
    return names


@cli.command("gen-data")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("data"),
              show_default=True, help="Output directory for dataset files.")
@click.option("--size", type=click.IntRange(min=2), default=4000, show_default=True,
              help="Examples per attribute dataset.")
@click.option("--pool", "pool_size", type=click.IntRange(min=2), default=12000,
              show_default=True, help="Scene pool size the datasets sample from.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n", type=click.IntRange(min=1), default=channel.DEFAULT_N,
              show_default=True, help="Feature vector length.")
@click.option("--attributes", "-a", multiple=True,
              help="Attribute subset (default: all four).")
def cmd_gen_data(out_dir: Path, size: int, pool_size: int, seed: int, n: int,
                 attributes: Tuple[str, ...]):
    """Generate balanced per-attribute datasets from one scene pool."""
    names = _attribute_choices(attributes)
    pool = channel.build_scene_pool(pool_size, seed, n=n, attribute_set=names)
    out_dir.mkdir(parents=True, exist_ok=True)
    for offset, name in enumerate(names):
        dataset = data.build_attribute_dataset(name, pool, size, seed + offset)
        path = out_dir / f"{name}{DATASET_SUFFIX}"
        data.save_dataset(dataset, path)
        positives = sum(e.label for e in dataset.examples)
        click.echo(
            f"{name}: {len(dataset)} examples ({positives} positive, "
            f"{len(dataset) - positives} negative) -> {path}"
        )


def _parse_hidden(value: str) -> Tuple[int, int]:
    try:
        h1, h2 = (int(part) for part in value.split(","))
    except ValueError:
        raise click.UsageError(
            f"--hidden must be two comma-separated integers, got {value!r}"
        )
    if h1 < 1 or h2 < 1:
        raise click.UsageError("--hidden sizes must be positive")
    return h1, h2


@cli.command("train")
@click.option("--data", "data_dir", type=click.Path(path_type=Path, exists=True,
              file_okay=False), default=Path("data"), show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("models"),
              show_default=True, help="Output directory for weights and histories.")
@click.option("--epochs", type=click.IntRange(min=1), default=expert.DEFAULT_EPOCHS,
              show_default=True)
@click.option("--lr", "learning_rate", type=click.FloatRange(min=0, min_open=True),
              default=expert.DEFAULT_LEARNING_RATE, show_default=True)
@click.option("--batch-size", type=click.IntRange(min=1),
              default=expert.DEFAULT_BATCH_SIZE, show_default=True)
@click.option("--hidden", default=",".join(str(v) for v in expert.DEFAULT_HIDDEN_SIZES),
              show_default=True, help="Hidden layer sizes, e.g. 48,24.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--patience", type=click.IntRange(min=1), default=None,
              help="Early-stop patience on held-out accuracy (default: off).")
@click.option("--test-fraction", type=click.FloatRange(min=0, max=1, min_open=True,
              max_open=True), default=0.2, show_default=True)
@click.option("--min-accuracy", type=float, default=None,
              help="Uniform accuracy floor (default: per-attribute floors).")
@click.option("--attributes", "-a", multiple=True)
def cmd_train(data_dir: Path, out_dir: Path, epochs: int, learning_rate: float,
              batch_size: int, hidden: str, seed: int, patience: Optional[int],
              test_fraction: float, min_accuracy: Optional[float],
              attributes: Tuple[str, ...]):
    """Train one expert per attribute dataset and write a serving manifest."""
    names = _attribute_choices(attributes)
    hidden_sizes = _parse_hidden(hidden)
    missing = [n for n in names if not (data_dir / f"{n}{DATASET_SUFFIX}").exists()]
    if missing:
        raise click.UsageError(
            f"dataset files missing under {data_dir}: {', '.join(missing)}"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_entries = []
    below_floor = []
    for offset, name in enumerate(names):
        dataset = data.load_dataset(data_dir / f"{name}{DATASET_SUFFIX}")
        train_set, test_set = data.split(dataset, test_fraction, seed + offset)
        config = expert.TrainConfig(
            epochs=epochs,
            learning_rate=learning_rate,
            batch_size=batch_size,
            hidden_sizes=hidden_sizes,
            seed=seed + offset,
            early_stop_patience=patience,
        )
        weights, history = expert.train(config, train_set, test_set)
        weights_path = out_dir / f"{name}{WEIGHTS_SUFFIX}"
        expert.save_weights(weights, weights_path)
        history_doc = {
            "attribute_id": name,
            "epochs": len(history),
            "train_loss": history.train_loss,
            "test_accuracy": history.test_accuracy,
        }
        (out_dir / f"{name}{HISTORY_SUFFIX}").write_text(
            json.dumps(history_doc) + "\n", encoding="utf-8"
        )
        manifest_entries.append(
            {
                "name": name,
                "description": DEFAULT_DESCRIPTIONS.get(name, name),
                "weights": weights_path.name,
            }
        )
        floor = min_accuracy if min_accuracy is not None else ACCURACY_FLOORS.get(name, 0.0)
        best = history.best_accuracy()
        marker = "ok" if best >= floor else f"BELOW FLOOR {floor}"
        if best < floor:
            below_floor.append(name)
        click.echo(
            f"{name}: best held-out accuracy {best:.4f} over {len(history)} "
            f"epochs [{marker}] -> {weights_path}"
        )
    aliases = {
        name: {"display": alias.display, "json_key": alias.json_key}
        for name, alias in host.DEFAULT_ALIASES.items()
        if name in names
    }
    write_manifest(out_dir / MANIFEST_NAME, manifest_entries, aliases)
    click.echo(f"manifest -> {out_dir / MANIFEST_NAME}")
    if below_floor:
        raise click.ClickException(
            "experts below accuracy floor: " + ", ".join(below_floor)
        )


@cli.command("serve")
@click.option("--manifest", type=click.Path(path_type=Path, exists=True, dir_okay=False),
              required=True)
@click.option("--host", "bind_host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8750, show_default=True)
@click.option("--stdio", is_flag=True,
              help="Serve newline-delimited envelopes on stdin/stdout instead of HTTP.")
def cmd_serve(manifest: Path, bind_host: str, port: int, stdio: bool):
    """Serve the registered experts until terminated."""
    registry, _aliases = load_manifest(manifest)
    click.echo(f"loaded {len(registry)} experts from {manifest}", err=True)
    if stdio:
        serve_stream(registry, sys.stdin, sys.stdout)
        return
    try:
        server = ExpertHttpServer(registry, host=bind_host, port=port)
    except OSError as exc:
        raise click.ClickException(f"cannot bind {bind_host}:{port}: {exc}")
    def shut_down(_signum, _frame):
        raise KeyboardInterrupt
    signal.signal(signal.SIGTERM, shut_down)
    click.echo(f"serving on {server.endpoint}", err=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        click.echo("shut down cleanly", err=True)


def _parse_vector(inline: Optional[str], h_file: Optional[Path]) -> List[float]:
    if (inline is None) == (h_file is None):
        raise click.UsageError("provide exactly one of --h or --h-file")
    text = inline if inline is not None else h_file.read_text(encoding="utf-8")
    try:
        values = json.loads(text)
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"h must be a JSON array of numbers: {exc}")
    if not isinstance(values, list):
        raise click.UsageError("h must be a JSON array of numbers")
    return values


@cli.command("call")
@click.option("--endpoint", required=True, help="Server endpoint URL.")
@click.option("--tool", required=True, help="Registered tool name.")
@click.option("--h", "inline_h", default=None, help="Channel vector as a JSON array.")
@click.option("--h-file", type=click.Path(path_type=Path, exists=True, dir_okay=False),
              default=None, help="File holding the JSON channel vector.")
@click.option("--timeout", type=float, default=5.0, show_default=True)
def cmd_call(endpoint: str, tool: str, inline_h: Optional[str],
             h_file: Optional[Path], timeout: float):
    """Call one expert and print the structured response."""
    values = _parse_vector(inline_h, h_file)
    client = HttpExpertClient(endpoint, timeout=timeout)
    response = client.call(tool, values)
    click.echo(json.dumps(response.to_result()))
    if not response.ok:
        raise click.ClickException(f"tool returned ERROR: {response.error}")


_POLICY_CHOICES = ("threshold", "naive", "llm-raw", "llm-mcp")


def _build_policies(kinds: Tuple[str, ...]) -> List[evaluation.PolicySpec]:
    policies: List[evaluation.PolicySpec] = []
    llm = host.LlmEndpoint.from_env()
    for kind in kinds:
        if kind == "naive":
            policies.append(evaluation.PolicySpec(name="deterministic", kind="naive"))
        elif kind == "threshold":
            policies.append(
                evaluation.PolicySpec(
                    name="deterministic",
                    kind="mcp",
                    agent=host.AgentPolicy(planner="deterministic", reasoner="threshold"),
                )
            )
        else:
            if llm is None:
                raise click.UsageError(
                    f"--policy {kind} needs {host.LlmEndpoint.ENV_URL} "
                    "(plus optional model/key variables) in the environment"
                )
            agent = host.AgentPolicy(planner="deterministic", reasoner="llm", llm=llm)
            policies.append(
                evaluation.PolicySpec(
                    name=llm.model or "external-llm",
                    kind="llm_raw" if kind == "llm-raw" else "llm_mcp",
                    agent=agent,
                )
            )
    return policies


@cli.command("evaluate")
@click.option("--manifest", type=click.Path(path_type=Path, exists=True, dir_okay=False),
              required=True, help="Manifest of trained experts to serve.")
@click.option("--samples", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("reports"),
              show_default=True)
@click.option("--endpoint", default=None,
              help="Use an already-running server instead of spawning one.")
@click.option("--policy", "policies", multiple=True,
              type=click.Choice(_POLICY_CHOICES),
              help="Policies to compare (default: threshold and naive).")
@click.option("--timeout", type=float, default=5.0, show_default=True)
@click.option("--trace-dir", type=click.Path(path_type=Path), default=None,
              help="Also dump one agent trace per sample to this directory.")
def cmd_evaluate(manifest: Path, samples: int, seed: int, out_dir: Path,
                 endpoint: Optional[str], policies: Tuple[str, ...],
                 timeout: float, trace_dir: Optional[Path]):
    """Run the policy comparison over live servers and write report files."""
    policy_specs = _build_policies(policies or ("threshold", "naive"))
    registry, manifest_aliases = load_manifest(manifest)
    aliases = host.aliases_from_manifest(manifest_aliases)
    attribute_set = tuple(
        a for a in channel.ATTRIBUTES if a in {r.name for r in registry.list_tools()}
    )
    if not attribute_set:
        raise click.ClickException("manifest registers no known attributes")
    config = evaluation.ExperimentConfig(
        sample_count=samples,
        attribute_set=attribute_set,
        seed=seed,
        policies=tuple(policy_specs),
    )

    server = None
    try:
        if endpoint is None:
            server = ExpertHttpServer(registry).start()
            endpoint = server.endpoint
        client = HttpExpertClient(endpoint, timeout=timeout)
        report = evaluation.run_experiment(config, client=client, aliases=aliases)
        if trace_dir is not None:
            _dump_traces(config, client, aliases, trace_dir)
    finally:
        if server is not None:
            server.stop()

    histories = _load_histories(manifest.parent, attribute_set)
    if histories:
        evaluation.attach_curves(report, histories)

    out_dir.mkdir(parents=True, exist_ok=True)
    for fmt, name in (("table", "report.txt"), ("csv", "report.csv"),
                      ("json", "report.json")):
        evaluation.emit_report(report, fmt, out_dir / name)
    click.echo(evaluation.format_table(report), nl=False)
    for result in report.results:
        click.echo(
            f"{result.name}/{result.kind}: avg {result.average_accuracy:.4f} "
            f"({result.pipeline_failures} pipeline failures, "
            f"{result.runtime_seconds:.1f}s)"
        )
    click.echo(f"reports -> {out_dir}")


def _dump_traces(config, client, aliases, trace_dir: Path) -> None:
    trace_dir.mkdir(parents=True, exist_ok=True)
    agent = host.AgentPolicy(planner="deterministic", reasoner="threshold")
    query = host.Query(config.query_text, tuple(config.attribute_set))
    specs = channel.sample_scene_specs(config.sample_count, config.seed, n=config.n)
    for index, spec in enumerate(specs):
        features, _labels, _spec = channel.synth_scene(spec, config.attribute_set)
        _verdict, trace = host.run_agent(agent, query, features, client, aliases)
        (trace_dir / f"trace_{index:05d}.json").write_text(
            trace.to_json() + "\n", encoding="utf-8"
        )


def _load_histories(models_dir: Path, attribute_set) -> Dict[str, expert.TrainHistory]:
    histories = {}
    for name in attribute_set:
        path = models_dir / f"{name}{HISTORY_SUFFIX}"
        if path.exists():
            doc = json.loads(path.read_text(encoding="utf-8"))
            histories[name] = expert.TrainHistory(
                train_loss=doc["train_loss"], test_accuracy=doc["test_accuracy"]
            )
    return histories


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.Abort:
        click.echo("aborted", err=True)
        return 2
    except _RUNTIME_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
