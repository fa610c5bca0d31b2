"""Dataset construction, splitting, and the persistence format."""

import json

import numpy as np
import pytest

from rfexperts import channel, data
from rfexperts.errors import FormatError, ParameterError, PoolExhaustedError, SchemaError

from conftest import toy_level_dataset


def make_pool(positives: int, negatives: int, attribute="detect_los", n=8, seed=0):
    rng = np.random.default_rng(seed)
    pool = []
    for i in range(positives + negatives):
        label = 1 if i < positives else 0
        k = 10.0 if label else 0.0
        spec = channel.SceneSpec(k_factor=k, doppler_norm=0.1, seed=1000 + i, n=n)
        pool.append((rng.uniform(size=n), {attribute: label}, spec))
    return pool


class TestBuild:
    def test_exact_balance_uses_whole_pool(self):
        pool = make_pool(50, 50)
        dataset = data.build_attribute_dataset("detect_los", pool, 100, seed=3)
        assert len(dataset) == 100
        assert dataset.positive_fraction == 0.5

    def test_pool_exhausted_names_deficient_class(self):
        pool = make_pool(10, 90)
        with pytest.raises(PoolExhaustedError) as excinfo:
            data.build_attribute_dataset("detect_los", pool, 100, seed=3)
        assert excinfo.value.deficient_class == "positive"
        assert "50" in str(excinfo.value)

    def test_rayleigh_dataset_splits_on_k_zero(self, scene_pool_small):
        dataset = data.build_attribute_dataset(
            "detect_rayleigh", scene_pool_small, 400, seed=5
        )
        k_zero = sum(1 for e in dataset.examples if e.scene.k_factor == 0)
        k_pos = sum(1 for e in dataset.examples if e.scene.k_factor > 0)
        assert k_zero == 200 and k_pos == 200

    def test_balance_invariant_large_target(self, scene_pool_small):
        dataset = data.build_attribute_dataset(
            "detect_los", scene_pool_small, 500, seed=6
        )
        assert 0.49 <= dataset.positive_fraction <= 0.51

    def test_shuffle_is_seeded(self, scene_pool_small):
        a = data.build_attribute_dataset("detect_los", scene_pool_small, 100, seed=1)
        b = data.build_attribute_dataset("detect_los", scene_pool_small, 100, seed=1)
        assert a == b


class TestSplit:
    def test_stratified_80_20(self):
        dataset = toy_level_dataset(100)
        train, test = data.split(dataset, 0.2, seed=4)
        assert len(train) == 80 and len(test) == 20
        assert train.positive_fraction == 0.5
        assert test.positive_fraction == 0.5
        assert train.split_tag == "train" and test.split_tag == "test"

    def test_disjoint_scenes(self):
        dataset = toy_level_dataset(60)
        train, test = data.split(dataset, 0.25, seed=4)
        train_seeds = {e.scene.seed for e in train.examples}
        test_seeds = {e.scene.seed for e in test.examples}
        assert not train_seeds & test_seeds

    def test_degenerate_two_example_split_warns(self):
        dataset = toy_level_dataset(2)
        with pytest.warns(data.BalanceWarning):
            train, test = data.split(dataset, 0.5, seed=4)
        assert len(train) == 1 and len(test) == 1

    def test_same_seed_identical(self):
        dataset = toy_level_dataset(40)
        first = data.split(dataset, 0.2, seed=9)
        second = data.split(dataset, 0.2, seed=9)
        assert first[0] == second[0] and first[1] == second[1]

    def test_empty_side_rejected(self):
        dataset = toy_level_dataset(4)
        with pytest.raises(ParameterError):
            data.split(dataset, 0.05, seed=1)
        with pytest.raises(ParameterError):
            data.split(dataset, 1.5, seed=1)


class TestPersistence:
    def test_round_trip_identity(self, tmp_path):
        dataset = toy_level_dataset(3)
        path = tmp_path / "toy.jsonl"
        data.save_dataset(dataset, path)
        loaded = data.load_dataset(path)
        assert loaded == dataset

    def test_header_schema_is_pinned(self, tmp_path):
        dataset = toy_level_dataset(2, n=8)
        path = tmp_path / "toy.jsonl"
        data.save_dataset(dataset, path)
        header = json.loads(path.read_text().splitlines()[0])
        assert list(header) == ["attribute_id", "n", "count"]
        line = json.loads(path.read_text().splitlines()[1])
        assert list(line) == ["h", "y", "scene"]
        assert list(line["scene"]) == ["k_factor", "doppler_norm", "seed"]

    def test_feature_length_mismatch_is_schema_error(self, tmp_path):
        dataset = toy_level_dataset(2, n=4)
        path = tmp_path / "toy.jsonl"
        data.save_dataset(dataset, path)
        lines = path.read_text().splitlines()
        record = json.loads(lines[1])
        record["h"] = record["h"][:-1]
        lines[1] = json.dumps(record)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError):
            data.load_dataset(path)

    def test_truncated_line_names_line_number(self, tmp_path):
        dataset = toy_level_dataset(3, n=4)
        path = tmp_path / "toy.jsonl"
        data.save_dataset(dataset, path)
        text = path.read_text().splitlines()
        text[-1] = text[-1][: len(text[-1]) // 2]
        path.write_text("\n".join(text) + "\n")
        with pytest.raises(FormatError) as excinfo:
            data.load_dataset(path)
        assert excinfo.value.line == 4

    def test_count_mismatch_detected(self, tmp_path):
        dataset = toy_level_dataset(3, n=4)
        path = tmp_path / "toy.jsonl"
        data.save_dataset(dataset, path)
        lines = path.read_text().splitlines()[:-1]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError):
            data.load_dataset(path)

    def test_labels_replay_from_scene(self, scene_pool_small, tmp_path):
        dataset = data.build_attribute_dataset(
            "detect_high_doppler", scene_pool_small, 200, seed=2
        )
        path = tmp_path / "doppler.jsonl"
        data.save_dataset(dataset, path)
        for example in data.load_dataset(path).examples:
            replayed = channel.label_scene(example.scene, ["detect_high_doppler"])
            assert replayed["detect_high_doppler"] == example.label
