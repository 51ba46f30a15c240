"""End-to-end CLI tests over the committed toy fixtures."""

import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from ffrank.cli import main
from ffrank.index import ForwardIndex
from ffrank.rerank import parse_trec_run

DATA = os.path.join(os.path.dirname(__file__), "data")
TOY_INDEX = os.path.join(DATA, "toy.ffidx")
TOY_QUERIES = os.path.join(DATA, "toy_queries.tsv")
TOY_SPARSE = os.path.join(DATA, "toy_sparse.run")
TOY_GOLDEN = os.path.join(DATA, "toy_golden.run")
TOY_QRELS = os.path.join(DATA, "toy.qrels")
TOY_EVAL_RUN = os.path.join(DATA, "toy_eval.run")
TOY_EMB = os.path.join(DATA, "toy_embeddings.tsv")
TOY_PASSAGES = os.path.join(DATA, "toy_passages.tsv")


class TestIndexBuild:
    def test_from_vectors(self, tmp_path, capsys):
        vec_file = tmp_path / "p.tsv"
        vec_file.write_text("a\t0\t1 0\na\t1\t0 1\nb\t0\t0.5 0.5\n")
        out = str(tmp_path / "out.ffidx")
        assert main(["index-build", "--vectors", str(vec_file), "--output", out]) == 0
        assert "2 docs, 3 vectors, dim 2" in capsys.readouterr().out
        index = ForwardIndex.load(out)
        assert len(index) == 2

    def test_mixed_dims_fails(self, tmp_path, capsys):
        vec_file = tmp_path / "p.tsv"
        vec_file.write_text("a\t0\t1 0\nb\t0\t1 0 0\n")
        rc = main(["index-build", "--vectors", str(vec_file), "--output", str(tmp_path / "x")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_passages_with_keep_ratio_one_matches_plain(self, tmp_path):
        out_a = str(tmp_path / "a.ffidx")
        out_b = str(tmp_path / "b.ffidx")
        base = ["index-build", "--passages", TOY_PASSAGES, "--embeddings", TOY_EMB]
        assert main(base + ["--output", out_a]) == 0
        assert main(base + ["--keep-ratio", "1.0", "--output", out_b]) == 0
        assert open(out_a, "rb").read() == open(out_b, "rb").read()

    def test_passages_with_filter(self, tmp_path):
        out = str(tmp_path / "f.ffidx")
        rc = main(
            ["index-build", "--passages", TOY_PASSAGES, "--embeddings", TOY_EMB,
             "--keep-ratio", "0.5", "--output", out]
        )
        assert rc == 0
        index = ForwardIndex.load(out)
        assert len(index) == 2
        assert index.num_vectors == 3


class TestCoalesce:
    def test_delta_zero_no_reduction(self, tmp_path, capsys):
        out = str(tmp_path / "c.ffidx")
        assert main(["coalesce", "--index", TOY_INDEX, "--delta", "0", "--output", out]) == 0
        assert "(0.0% reduction)" in capsys.readouterr().out
        assert ForwardIndex.load(out).num_vectors == ForwardIndex.load(TOY_INDEX).num_vectors

    def test_delta_large_one_vector_per_doc(self, tmp_path, capsys):
        out = str(tmp_path / "c.ffidx")
        assert main(["coalesce", "--index", TOY_INDEX, "--delta", "2.1", "--output", out]) == 0
        index = ForwardIndex.load(out)
        assert index.num_vectors == len(index)

    def test_mid_delta_between_extremes(self, tmp_path):
        # clustered duplicate runs compress partially at a moderate delta
        from ffrank.index import build_index

        docs = []
        for i in range(10):
            docs.append(
                (f"d{i}", np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=np.float32))
            )
        src = str(tmp_path / "src.ffidx")
        build_index(docs).save(src)
        out = str(tmp_path / "mid.ffidx")
        assert main(["coalesce", "--index", src, "--delta", "0.5", "--output", out]) == 0
        index = ForwardIndex.load(out)
        assert len(index) < index.num_vectors < 40


class TestRerank:
    def test_golden_file_byte_identical(self, tmp_path):
        out = str(tmp_path / "out.run")
        rc = main(
            ["rerank", "--run", TOY_SPARSE, "--index", TOY_INDEX, "--queries", TOY_QUERIES,
             "--alpha", "0.5", "--k", "5", "--k-s", "5", "--output", out]
        )
        assert rc == 0
        assert open(out, "rb").read() == open(TOY_GOLDEN, "rb").read()

    def test_alpha_one_is_truncated_retagged_input(self, tmp_path):
        out = str(tmp_path / "out.run")
        rc = main(
            ["rerank", "--run", TOY_SPARSE, "--index", TOY_INDEX, "--queries", TOY_QUERIES,
             "--alpha", "1.0", "--k", "5", "--k-s", "5", "--output", out]
        )
        assert rc == 0
        got = parse_trec_run(out)
        original = parse_trec_run(TOY_SPARSE)
        assert got.tag == "fast-forward"
        assert got.queries == original.queries

    def test_early_stop_k_equals_ks_matches_exhaustive(self, tmp_path):
        out_a = str(tmp_path / "a.run")
        out_b = str(tmp_path / "b.run")
        base = ["rerank", "--run", TOY_SPARSE, "--index", TOY_INDEX, "--queries", TOY_QUERIES,
                "--alpha", "0.5", "--k", "5", "--k-s", "5"]
        assert main(base + ["--mode", "exhaustive", "--output", out_a]) == 0
        assert main(base + ["--mode", "early-stop-running-max", "--output", out_b]) == 0
        assert open(out_a).read() == open(out_b).read()

    def test_missing_doc_aborts_with_name(self, tmp_path, capsys):
        bad_run = tmp_path / "bad.run"
        bad_run.write_text("q1 Q0 dMISSING 1 5.0 bm25\n")
        rc = main(
            ["rerank", "--run", str(bad_run), "--index", TOY_INDEX, "--queries", TOY_QUERIES,
             "--output", str(tmp_path / "o.run")]
        )
        assert rc == 1
        assert "dMISSING" in capsys.readouterr().err

    def test_query_text_encoding_path(self, tmp_path):
        qtext = tmp_path / "q.tsv"
        qtext.write_text("q1\twhat is\nq2\tthe famous bridge\n")
        out = str(tmp_path / "out.run")
        rc = main(
            ["rerank", "--run", TOY_SPARSE, "--index", TOY_INDEX, "--query-text", str(qtext),
             "--embeddings", TOY_EMB, "--output", out]
        )
        assert rc == 0
        assert parse_trec_run(out).queries.keys() == {"q1", "q2"}

    def test_threads_flag_same_output(self, tmp_path):
        out_a = str(tmp_path / "a.run")
        out_b = str(tmp_path / "b.run")
        base = ["rerank", "--run", TOY_SPARSE, "--index", TOY_INDEX, "--queries", TOY_QUERIES]
        assert main(base + ["--output", out_a]) == 0
        assert main(base + ["--threads", "4", "--output", out_b]) == 0
        assert open(out_a).read() == open(out_b).read()


class TestHybrid:
    def test_empty_dense_run_falls_back_to_sparse(self, tmp_path):
        empty = tmp_path / "empty.run"
        empty.write_text("")
        out = str(tmp_path / "h.run")
        assert main(["hybrid", "--sparse", TOY_SPARSE, "--dense", str(empty),
                     "--output", out]) == 0
        got = parse_trec_run(out)
        original = parse_trec_run(TOY_SPARSE)
        for qid in original.queries:
            assert got.queries[qid] == original.queries[qid]

    def test_merges_scores(self, tmp_path):
        dense = tmp_path / "dense.run"
        dense.write_text("q1 Q0 d2 1 1.0 dense\n")
        out = str(tmp_path / "h.run")
        assert main(["hybrid", "--sparse", TOY_SPARSE, "--dense", str(dense),
                     "--alpha", "0.5", "--output", out]) == 0
        got = dict(parse_trec_run(out).queries["q1"])
        assert got["d2"] == pytest.approx(0.5 * 3.0 + 0.5 * 1.0)
        assert got["d1"] == pytest.approx(2.8)  # fallback


class TestEvaluate:
    def test_toy_metrics(self, tmp_path, capsys):
        report_path = str(tmp_path / "metrics.tsv")
        rc = main(["evaluate", "--run", TOY_EVAL_RUN, "--qrels", TOY_QRELS,
                   "--output", report_path])
        assert rc == 0
        out = capsys.readouterr().out
        assert "ndcg@10" in out
        lines = dict()
        for line in open(report_path):
            metric, qid, value = line.split("\t")
            lines[(metric, qid)] = float(value)
        assert lines[("ndcg@10", "all")] == pytest.approx(0.733425, abs=1e-6)
        assert lines[("ap@1000", "all")] == pytest.approx(2 / 3, abs=1e-6)
        assert lines[("rr@10", "all")] == pytest.approx(7 / 9, abs=1e-6)
        assert lines[("recall@1000", "all")] == pytest.approx(8 / 9, abs=1e-6)

    def test_plot_rendered(self, tmp_path):
        png = str(tmp_path / "metrics.png")
        rc = main(["evaluate", "--run", TOY_EVAL_RUN, "--qrels", TOY_QRELS, "--plot", png])
        assert rc == 0
        assert os.path.getsize(png) > 0

    def test_custom_metric_list(self, capsys):
        rc = main(["evaluate", "--run", TOY_EVAL_RUN, "--qrels", TOY_QRELS,
                   "--metrics", "ndcg@3,rr@5"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "ndcg@3" in out and "rr@5" in out

    def test_unknown_metric_fails(self, capsys):
        rc = main(["evaluate", "--run", TOY_EVAL_RUN, "--qrels", TOY_QRELS,
                   "--metrics", "bleu@4"])
        assert rc == 1


class TestBench:
    def test_bench_emits_report(self, tmp_path, capsys):
        report_path = str(tmp_path / "latency.tsv")
        png = str(tmp_path / "latency.png")
        rc = main(["bench", "--run", TOY_SPARSE, "--index", TOY_INDEX,
                   "--queries", TOY_QUERIES, "--repeats", "3",
                   "--output", report_path, "--plot", png])
        assert rc == 0
        text = open(report_path).read()
        assert "latency_encode_ms" in text
        assert "lookups" in text
        assert os.path.getsize(png) > 0
        assert "best of 3 runs" in capsys.readouterr().out


class TestSelftest:
    def test_selftest_passes(self, tmp_path, capsys):
        rc = main(["selftest", "--seed", "7", "--output", str(tmp_path / "st")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert os.path.exists(tmp_path / "st" / "lookups.tsv")
        assert os.path.exists(tmp_path / "st" / "coalescing.tsv")


class TestConsoleScript:
    def test_entry_point_runs(self):
        exe = shutil.which("ffrank")
        if exe is None:
            pytest.skip("console script not on PATH")
        proc = subprocess.run([exe, "--version"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "ffrank" in proc.stdout

    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "ffrank.cli", "--version"], capture_output=True, text=True
        )
        assert proc.returncode == 0
