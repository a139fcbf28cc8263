"""End-to-end CLI behavior: formats, determinism, exit codes."""

import json

import numpy as np
import pytest

from sparse_tsetlin import load_model, load_sparse_file
from sparse_tsetlin.cli import main

CORPUS = """\
1\tgood great fun film
0\tdull bad boring film
1\tgreat acting good fun
0\tbad plot boring mess
1\tfun good great cast
0\tboring dull bad script
1\tgood fun great scenes
0\tbad dull mess plot
"""


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / "corpus.tsv"
    path.write_text(CORPUS, encoding="utf-8")
    return path


def prepare(tmp_path, corpus_file, vocab_size=12):
    out = tmp_path / "data.stm.txt"
    code = main(
        [
            "prepare",
            str(corpus_file),
            "-o",
            str(out),
            "--vocab-size",
            str(vocab_size),
        ]
    )
    assert code == 0
    return out


class TestPrepare:
    def test_text_corpus_to_sparse_file(self, tmp_path, corpus_file, capsys):
        out = prepare(tmp_path, corpus_file)
        ds = load_sparse_file(out)
        assert len(ds) == 8
        assert ds.class_count == 2
        assert ds.density() > 0
        assert "wrote" in capsys.readouterr().out

    def test_vocab_size_caps_features(self, tmp_path, corpus_file):
        out = tmp_path / "small.txt"
        main(["prepare", str(corpus_file), "-o", str(out), "--vocab-size", "3"])
        assert load_sparse_file(out).feature_count == 3

    def test_rerun_is_deterministic(self, tmp_path, corpus_file):
        a = prepare(tmp_path, corpus_file)
        first = a.read_bytes()
        b = prepare(tmp_path, corpus_file)
        assert b.read_bytes() == first

    def test_unknown_format_is_usage_error(self, tmp_path, corpus_file):
        with pytest.raises(SystemExit) as err:
            main(["prepare", str(corpus_file), "-o", str(tmp_path / "x"), "--format", "parquet"])
        assert err.value.code == 2

    def test_tabular_input(self, tmp_path):
        table = tmp_path / "table.csv"
        table.write_text("label,f0,f1,f2\n0,1,0,0\n1,0,1,1\n", encoding="utf-8")
        out = tmp_path / "tab.txt"
        assert main(["prepare", str(table), "-o", str(out), "--format", "tabular"]) == 0
        ds = load_sparse_file(out)
        assert ds.feature_count == 3
        assert ds.rows[1].tolist() == [1, 2]

    def test_tabular_rejects_non_binary(self, tmp_path):
        table = tmp_path / "table.csv"
        table.write_text("0,1,2\n", encoding="utf-8")
        assert main(["prepare", str(table), "-o", str(tmp_path / "x"), "--format", "tabular"]) == 3

    def test_missing_input_is_data_error(self, tmp_path):
        assert main(["prepare", str(tmp_path / "nope.tsv"), "-o", str(tmp_path / "x")]) == 3


def train_args(data, model_path, metrics, csv_path, epochs=5):
    return [
        "train",
        str(data),
        str(data),
        "-o",
        str(model_path),
        "--clauses",
        "16",
        "--margin",
        "8",
        "--al-size",
        "8",
        "--lower-threshold",
        "100",
        "--clause-size",
        "4",
        "--epochs",
        str(epochs),
        "--seed",
        "3",
        "--metrics-out",
        str(metrics),
        "--metrics-csv",
        str(csv_path),
        "--quiet",
    ]


class TestTrainEval:
    def test_train_writes_model_and_metrics(self, tmp_path, corpus_file):
        data = prepare(tmp_path, corpus_file)
        model_path = tmp_path / "model.stm"
        metrics = tmp_path / "metrics.jsonl"
        csv_path = tmp_path / "metrics.csv"
        assert main(train_args(data, model_path, metrics, csv_path)) == 0

        lines = metrics.read_text().splitlines()
        header = json.loads(lines[0])
        assert header["flags"]["seed"] == 3  # full provenance echoed
        records = [json.loads(line) for line in lines[1:]]
        assert len(records) == 5
        for record in records:
            assert set(record) == {
                "epoch",
                "seconds",
                "train_acc",
                "test_acc",
                "mean_clause_size",
                "al_occupancy",
            }
            assert record["seconds"] > 0
            assert record["mean_clause_size"] <= 4
        assert len(csv_path.read_text().splitlines()) == 6  # header + 5 epochs

        model = load_model(model_path)
        assert model.meta["flags"]["seed"] == 3

    def test_train_is_deterministic(self, tmp_path, corpus_file):
        data = prepare(tmp_path, corpus_file)
        out = []
        for name in ("a", "b"):
            model_path = tmp_path / f"{name}.stm"
            main(train_args(data, model_path, tmp_path / f"{name}.jsonl", tmp_path / f"{name}.csv"))
            out.append(load_model(model_path))
        assert out[0] == out[1]

    def test_validation_error_before_training(self, tmp_path, corpus_file):
        data = prepare(tmp_path, corpus_file)
        code = main(
            [
                "train",
                str(data),
                "-o",
                str(tmp_path / "m.stm"),
                "--lower-threshold",
                "200",
                "--state-count",
                "128",
                "--quiet",
            ]
        )
        assert code == 2

    def test_eval_matches_final_train_accuracy(self, tmp_path, corpus_file, capsys):
        data = prepare(tmp_path, corpus_file)
        model_path = tmp_path / "model.stm"
        metrics = tmp_path / "metrics.jsonl"
        main(train_args(data, model_path, metrics, tmp_path / "m.csv"))
        capsys.readouterr()
        assert main(["eval", str(model_path), str(data)]) == 0
        printed = capsys.readouterr().out
        last = json.loads(metrics.read_text().splitlines()[-1])
        assert f"accuracy {last['train_acc']:.4f}" in printed
        assert "confusion" in printed

    def test_eval_shape_mismatch_is_data_error(self, tmp_path, corpus_file):
        data = prepare(tmp_path, corpus_file)
        model_path = tmp_path / "model.stm"
        main(train_args(data, model_path, tmp_path / "m.jsonl", tmp_path / "m.csv"))
        other = tmp_path / "other.txt"
        other.write_text("#o=99 m=2\n0 1:1\n")
        assert main(["eval", str(model_path), str(other)]) == 3

    def test_malformed_data_is_data_error(self, tmp_path, corpus_file):
        data = prepare(tmp_path, corpus_file)
        model_path = tmp_path / "model.stm"
        main(train_args(data, model_path, tmp_path / "m.jsonl", tmp_path / "m.csv"))
        bad = tmp_path / "bad.txt"
        bad.write_text("#o=12 m=2\n0 nonsense\n")
        assert main(["eval", str(model_path), str(bad)]) == 3


class TestInspect:
    @pytest.fixture
    def model_path(self, tmp_path, corpus_file):
        data = prepare(tmp_path, corpus_file)
        path = tmp_path / "model.stm"
        main(train_args(data, path, tmp_path / "m.jsonl", tmp_path / "m.csv"))
        return path

    def test_memory_report(self, model_path, capsys):
        assert main(["inspect", str(model_path), "--memory"]) == 0
        out = capsys.readouterr().out
        assert "memory bytes" in out and "bound" in out

    def test_rules_zero_is_empty(self, model_path, capsys):
        assert main(["inspect", str(model_path), "--rules", "0"]) == 0
        assert capsys.readouterr().out == ""

    def test_rules_render(self, model_path, capsys):
        assert main(["inspect", str(model_path), "--rules", "5"]) == 0
        for line in capsys.readouterr().out.splitlines():
            assert line.startswith("IF ") and " THEN class " in line

    def test_al_occupancy_within_capacity(self, model_path, capsys):
        assert main(["inspect", str(model_path), "--al-occupancy"]) == 0
        for line in capsys.readouterr().out.splitlines():
            used, cap = line.split(": ")[1].split("/")
            assert 0 <= int(used) <= int(cap)

    def test_no_action_is_usage_error(self, model_path):
        assert main(["inspect", str(model_path)]) == 2


class TestBench:
    def test_sweep_row_count_and_positive_times(self, tmp_path, corpus_file, capsys):
        csv_out = tmp_path / "bench.csv"
        code = main(
            [
                "bench",
                str(corpus_file),
                "--vocab-sweep",
                "4:8:2",
                "--epochs",
                "2",
                "--clauses",
                "8",
                "--margin",
                "4",
                "--al-size",
                "6",
                "--lower-threshold",
                "100",
                "--clause-size",
                "3",
                "--test-fraction",
                "0.25",
                "--seed",
                "1",
                "--csv-out",
                str(csv_out),
                "--quiet",
            ]
        )
        assert code == 0
        rows = csv_out.read_text().splitlines()
        assert rows[0] == "vocab_size,epoch,seconds,test_accuracy"
        body = rows[1:]
        assert len(body) == 3 * 2  # (8-4)/2+1 vocab sizes x 2 epochs
        for line in body:
            _, _, seconds, accuracy = line.split(",")
            assert float(seconds) > 0
            assert 0.0 <= float(accuracy) <= 1.0
        assert "cumulative training time increase" in capsys.readouterr().out

    def test_bad_sweep_is_usage_error(self, tmp_path, corpus_file):
        assert (
            main(
                [
                    "bench",
                    str(corpus_file),
                    "--vocab-sweep",
                    "10:4:2",
                    "--csv-out",
                    str(tmp_path / "b.csv"),
                ]
            )
            == 2
        )
