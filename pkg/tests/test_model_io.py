"""Persistence container, memory accounting, rule export."""

import numpy as np
import pytest

from sparse_tsetlin import (
    ModelFormatError,
    StmModel,
    TrainConfig,
    Vocabulary,
    export_rules,
    load_model,
    model_memory_bound,
    model_memory_bytes,
    save_model,
)
from sparse_tsetlin.model_io import (
    AL_ENTRY_BYTES,
    FIXED_OVERHEAD_BYTES,
    LITERAL_ENTRY_BYTES,
    WEIGHT_BYTES,
)
from tests.conftest import make_random_dataset, make_random_model

N = 128


def trained_model(seed=0, vocab=None):
    rng = np.random.default_rng(seed)
    ds = make_random_dataset(rng, n_samples=80, feature_count=30, class_count=3)
    config = TrainConfig(
        clause_count=12,
        al_capacity=10,
        lower_threshold=40,
        max_clause_size=6,
        margin=8,
        specificity=3.0,
        seed=seed,
    )
    model = StmModel(config, ds.feature_count, ds.class_count, vocab)
    train_rng = np.random.default_rng(seed)
    for _ in range(3):
        model.train_epoch(ds, train_rng)
    return model, ds


class TestRoundTrip:
    def test_equality_and_prediction_identity(self, tmp_path):
        model, ds = trained_model()
        model.meta = {"run": "unit-test", "flags": {"seed": 0}}
        path = tmp_path / "model.stm"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded == model
        assert loaded.meta == model.meta
        assert np.array_equal(loaded.predict_batch(ds.rows), model.predict_batch(ds.rows))

    def test_vocabulary_round_trip(self, tmp_path):
        vocab = Vocabulary(["good", "great", "bad"], max_size=10, min_df=1)
        config = TrainConfig(
            clause_count=2, al_capacity=4, lower_threshold=40, max_clause_size=3
        )
        model = StmModel(config, 3, 2, vocab)
        path = tmp_path / "model.stm"
        save_model(model, path)
        assert load_model(path).vocabulary == vocab

    def test_empty_model_round_trip(self, tmp_path):
        config = TrainConfig(
            clause_count=4, al_capacity=4, lower_threshold=40, max_clause_size=3
        )
        model = StmModel(config, 1000, 2)
        path = tmp_path / "empty.stm"
        save_model(model, path)
        assert load_model(path) == model


class TestRejection:
    def test_truncated_file(self, tmp_path):
        model, _ = trained_model()
        path = tmp_path / "model.stm"
        save_model(model, path)
        blob = path.read_bytes()
        for cut in (3, 7, 40, len(blob) // 2, len(blob) - 1):
            clipped = tmp_path / f"cut{cut}.stm"
            clipped.write_bytes(blob[:cut])
            with pytest.raises(ModelFormatError, match="corrupt model"):
                load_model(clipped)

    def test_unknown_version_names_both(self, tmp_path):
        model, _ = trained_model()
        path = tmp_path / "model.stm"
        save_model(model, path)
        blob = bytearray(path.read_bytes())
        blob[4:8] = (99).to_bytes(4, "little")
        bad = tmp_path / "v99.stm"
        bad.write_bytes(bytes(blob))
        with pytest.raises(ModelFormatError) as err:
            load_model(bad)
        assert "99" in str(err.value) and "1" in str(err.value)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.stm"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ModelFormatError, match="magic"):
            load_model(path)

    def test_trailing_garbage(self, tmp_path):
        model, _ = trained_model()
        path = tmp_path / "model.stm"
        save_model(model, path)
        padded = tmp_path / "padded.stm"
        padded.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ModelFormatError, match="trailing"):
            load_model(padded)

    def test_structurally_invalid_content(self, tmp_path):
        model, _ = trained_model()
        # Force an out-of-spectrum state, then round-trip must refuse.
        j = int(np.argmax(model.bank.sizes))
        assert model.bank.sizes[j] > 0
        model.bank.states[j, 0] = 2 * model.config.state_count + 50
        path = tmp_path / "bad.stm"
        save_model(model, path)
        with pytest.raises(ModelFormatError, match="corrupt model"):
            load_model(path)


class TestMemoryAccounting:
    def test_empty_model_counts_weights_and_overhead_only(self):
        config = TrainConfig(
            clause_count=100, al_capacity=16, lower_threshold=40, max_clause_size=8
        )
        model = StmModel(config, 5000, 2)
        assert model_memory_bytes(model) == FIXED_OVERHEAD_BYTES + 200 * WEIGHT_BYTES

    def test_full_capacity_counts_every_slot(self):
        config = TrainConfig(
            clause_count=3, al_capacity=4, lower_threshold=40, max_clause_size=2
        )
        model = StmModel(config, 10, 2)
        for j in range(3):
            model.bank.insert_literal(j, 0, N)
            model.bank.insert_literal(j, 5, N)
        assert model_memory_bytes(model) == (
            FIXED_OVERHEAD_BYTES + 6 * LITERAL_ENTRY_BYTES + 6 * WEIGHT_BYTES
        )

    def test_bound_formula(self):
        assert model_memory_bound(100, 8, 2, 16) == (
            FIXED_OVERHEAD_BYTES
            + 100 * 8 * LITERAL_ENTRY_BYTES
            + 2 * 100 * WEIGHT_BYTES
            + 16 * 2 * AL_ENTRY_BYTES
        )

    def test_bound_ignores_feature_count(self):
        config = dict(
            clause_count=64, al_capacity=20, lower_threshold=40, max_clause_size=8
        )
        small = StmModel(TrainConfig(**config), 2500, 2)
        huge = StmModel(TrainConfig(**config), 10**6, 2)
        bound = model_memory_bound(64, 8, 2, 20)
        for model in (small, huge):
            assert model_memory_bytes(model) <= bound

    def test_actual_tracks_occupancy_not_features(self):
        config = dict(
            clause_count=4, al_capacity=4, lower_threshold=40, max_clause_size=3
        )
        small = StmModel(TrainConfig(**config), 100, 2)
        huge = StmModel(TrainConfig(**config), 10**6, 2)
        small.bank.insert_literal(0, 7, N)
        huge.bank.insert_literal(0, 999_999, N)
        assert model_memory_bytes(small) == model_memory_bytes(huge)


class TestRuleExport:
    def test_empty_model_no_rules(self):
        config = TrainConfig(
            clause_count=5, al_capacity=4, lower_threshold=40, max_clause_size=3
        )
        model = StmModel(config, 10, 2)
        assert export_rules(model, top_k=10) == []

    def test_formatting_contract(self):
        vocab = Vocabulary(["good", "great", "bad"], max_size=10, min_df=1)
        config = TrainConfig(
            clause_count=2, al_capacity=4, lower_threshold=40, max_clause_size=3
        )
        model = StmModel(config, 3, 2, vocab)
        model.bank.insert_literal(0, 0, N + 5)
        model.bank.insert_literal(0, 1, N + 9)
        model.weights[:, 0] = [-3, 7]
        rules = export_rules(model, top_k=5)
        assert len(rules) == 1
        assert rules[0].format() == "IF good AND great THEN class 1 (w=+7)"

    def test_top_k_truncation(self):
        rng = np.random.default_rng(4)
        model = make_random_model(rng, feature_count=20, clause_count=10)
        nonempty = sum(
            1 for j in range(10) if model.bank.included_literals(j).size > 0
        )
        if nonempty == 0:
            pytest.skip("random model drew no included literals")
        assert len(export_rules(model, top_k=1)) == 1

    def test_sorted_by_strongest_weight(self):
        model, _ = trained_model(seed=5)
        rules = export_rules(model, top_k=100)
        strengths = [max(abs(w) for w in r.weights) for r in rules]
        assert strengths == sorted(strengths, reverse=True)

    def test_export_is_pure(self):
        model, _ = trained_model(seed=6)
        assert export_rules(model, 10) == export_rules(model, 10)

    def test_indices_without_vocabulary(self):
        config = TrainConfig(
            clause_count=1, al_capacity=4, lower_threshold=40, max_clause_size=3
        )
        model = StmModel(config, 10, 2)
        model.bank.insert_literal(0, 7, N + 1)
        model.weights[:, 0] = [1, 0]
        rules = export_rules(model, 1)
        assert rules[0].literals == ["f7"]
