"""Balanced per-attribute binary datasets over synthetic channel scenes.

Positives are scenes carrying the attribute, negatives are drawn uniformly
from all non-matching scenes in the pool, and every dataset is built to a
50/50 class balance.  Datasets persist as newline-delimited JSON with a
one-line header (see ``save_dataset``).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .channel import SceneSpec
from .errors import (
    FormatError,
    ParameterError,
    PoolExhaustedError,
    SchemaError,
)

ScenePoolItem = Tuple[np.ndarray, Dict[str, int], SceneSpec]


class BalanceWarning(UserWarning):
    """A split ended up with a single class on one side."""


@dataclass(frozen=True)
class LabeledExample:
    """One training example with its generating scene kept as provenance."""

    features: np.ndarray
    label: int
    scene: SceneSpec

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledExample):
            return NotImplemented
        return (
            self.label == other.label
            and self.scene == other.scene
            and np.array_equal(self.features, other.features)
        )


@dataclass(frozen=True)
class AttributeDataset:
    attribute_id: str
    examples: Tuple[LabeledExample, ...]
    split_tag: str = "train"

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def n(self) -> int:
        return int(self.examples[0].features.size) if self.examples else 0

    @property
    def positive_fraction(self) -> float:
        if not self.examples:
            return 0.0
        return sum(e.label for e in self.examples) / len(self.examples)

    def features_matrix(self) -> np.ndarray:
        return np.stack([e.features for e in self.examples])

    def labels_vector(self) -> np.ndarray:
        return np.array([e.label for e in self.examples], dtype=np.int64)


def build_attribute_dataset(
    attribute_id: str,
    pool: Sequence[ScenePoolItem],
    target_size: int,
    seed: int,
) -> AttributeDataset:
    """Sample a balanced dataset for one attribute from a labeled pool.

    Exactly ``target_size`` examples, half positive (the extra one goes to
    the positives when ``target_size`` is odd), sampled without
    replacement and shuffled by ``seed``.
    """
    if target_size < 1:
        raise ParameterError(f"target_size must be >= 1, got {target_size}")
    positives: List[LabeledExample] = []
    negatives: List[LabeledExample] = []
    for features, labels, scene in pool:
        if attribute_id not in labels:
            raise ParameterError(
                f"pool item missing label for attribute {attribute_id!r}"
            )
        example = LabeledExample(
            features=np.asarray(features, dtype=float),
            label=int(labels[attribute_id]),
            scene=scene,
        )
        (positives if example.label == 1 else negatives).append(example)

    need_pos = (target_size + 1) // 2
    need_neg = target_size - need_pos
    if len(positives) < need_pos:
        raise PoolExhaustedError(
            f"attribute {attribute_id!r} needs {need_pos} positives, pool has "
            f"{len(positives)}",
            attribute_id=attribute_id,
            deficient_class="positive",
        )
    if len(negatives) < need_neg:
        raise PoolExhaustedError(
            f"attribute {attribute_id!r} needs {need_neg} negatives, pool has "
            f"{len(negatives)}",
            attribute_id=attribute_id,
            deficient_class="negative",
        )

    rng = np.random.default_rng(seed)
    chosen = [positives[i] for i in rng.choice(len(positives), need_pos, replace=False)]
    chosen += [negatives[i] for i in rng.choice(len(negatives), need_neg, replace=False)]
    order = rng.permutation(len(chosen))
    return AttributeDataset(
        attribute_id=attribute_id,
        examples=tuple(chosen[i] for i in order),
    )


def split(
    dataset: AttributeDataset, test_fraction: float, seed: int
) -> Tuple[AttributeDataset, AttributeDataset]:
    """Stratified train/test split; sizes within 1 of the requested fractions."""
    if not 0.0 < test_fraction < 1.0:
        raise ParameterError(
            f"test_fraction must lie in (0, 1), got {test_fraction}"
        )
    total = len(dataset)
    total_test = int(round(test_fraction * total))
    if total_test == 0 or total_test == total:
        raise ParameterError(
            f"split of {total} examples at test_fraction={test_fraction} "
            "leaves an empty side"
        )

    by_class = {
        0: [e for e in dataset.examples if e.label == 0],
        1: [e for e in dataset.examples if e.label == 1],
    }
    # Per-class test counts: floor of the exact share, remainder assigned by
    # largest fractional part (label 1 wins ties) so totals match exactly.
    exact = {c: test_fraction * len(v) for c, v in by_class.items()}
    counts = {c: int(np.floor(x)) for c, x in exact.items()}
    short = total_test - sum(counts.values())
    for c in sorted(by_class, key=lambda c: (exact[c] - counts[c], c), reverse=True):
        if short <= 0:
            break
        if counts[c] < len(by_class[c]):
            counts[c] += 1
            short -= 1

    rng = np.random.default_rng(seed)
    train_examples: List[LabeledExample] = []
    test_examples: List[LabeledExample] = []
    for c, members in by_class.items():
        order = rng.permutation(len(members))
        picked = set(order[: counts[c]].tolist())
        for i, e in enumerate(members):
            (test_examples if i in picked else train_examples).append(e)
    rng.shuffle(train_examples)
    rng.shuffle(test_examples)

    train = replace(dataset, examples=tuple(train_examples), split_tag="train")
    test = replace(dataset, examples=tuple(test_examples), split_tag="test")
    had_both = all(by_class.values())
    for part in (train, test):
        if had_both and part.positive_fraction in (0.0, 1.0):
            warnings.warn(
                f"{part.split_tag} split of {dataset.attribute_id!r} holds a "
                "single class",
                BalanceWarning,
                stacklevel=2,
            )
    return train, test


def save_dataset(dataset: AttributeDataset, path) -> None:
    """Write the newline-delimited dataset format.

    Header line carries attribute_id, n and count; one example per line.
    The split tag is deliberately not part of the format (callers encode it
    in the file name), keeping the header schema fixed.
    """
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "attribute_id": dataset.attribute_id,
            "n": dataset.n,
            "count": len(dataset),
        }
        fh.write(json.dumps(header) + "\n")
        for example in dataset.examples:
            record = {
                "h": [float(v) for v in example.features],
                "y": int(example.label),
                "scene": {
                    "k_factor": example.scene.k_factor,
                    "doppler_norm": example.scene.doppler_norm,
                    "seed": example.scene.seed,
                },
            }
            fh.write(json.dumps(record) + "\n")


def load_dataset(path, split_tag: str = "train") -> AttributeDataset:
    """Read a dataset file, validating every line against the header."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty dataset file", line=1)

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"unreadable header: {exc.msg}", line=1) from exc
    for key in ("attribute_id", "n", "count"):
        if key not in header:
            raise FormatError(f"header missing field {key!r}", line=1)
    n = int(header["n"])
    count = int(header["count"])
    if len(lines) - 1 != count:
        raise FormatError(
            f"header declares {count} examples, file holds {len(lines) - 1}",
            line=len(lines),
        )

    examples: List[LabeledExample] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"unreadable example: {exc.msg}", line=lineno) from exc
        for key in ("h", "y", "scene"):
            if key not in record:
                raise FormatError(f"example missing field {key!r}", line=lineno)
        features = np.asarray(record["h"], dtype=float)
        if features.size != n:
            raise SchemaError(
                f"line {lineno}: feature length {features.size} contradicts "
                f"header n={n}"
            )
        if record["y"] not in (0, 1):
            raise FormatError(f"label must be 0 or 1, got {record['y']!r}", line=lineno)
        scene_fields = record["scene"]
        try:
            scene = SceneSpec(
                k_factor=float(scene_fields["k_factor"]),
                doppler_norm=float(scene_fields["doppler_norm"]),
                seed=int(scene_fields["seed"]),
                n=n,
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"bad scene record: {exc}", line=lineno) from exc
        examples.append(
            LabeledExample(features=features, label=int(record["y"]), scene=scene)
        )
    return AttributeDataset(
        attribute_id=str(header["attribute_id"]),
        examples=tuple(examples),
        split_tag=split_tag,
    )
