"""Token retention filter tests: length contract, ordering, padding rules."""

import math

import numpy as np
import pytest

from ffrank.errors import DomainError
from ffrank.selective import DEFAULT_SPECIAL_TOKENS, IdfScorer, TokenBatch, select_tokens

PAD = "[PAD]"


def scores(mapping):
    return lambda token: mapping[token]


class TestSelectTokens:
    def test_p_one_trims_padding_only(self):
        batch = TokenBatch.from_rows([["a", "b", "c"], ["d"]])
        out = select_tokens(batch, scores({"a": 1, "b": 1, "c": 1, "d": 1}), p=1.0)
        assert out.rows == (("a", "b", "c"), ("d", PAD, PAD))

    def test_hand_ranked_keep_top_two(self):
        # scores [0.9, 0.1, 0.8, 0.4], p=0.5 over max_len 4: the 1st and 3rd
        # tokens survive, in their original order
        batch = TokenBatch.from_rows([["t0", "t1", "t2", "t3"]])
        out = select_tokens(batch, scores({"t0": 0.9, "t1": 0.1, "t2": 0.8, "t3": 0.4}), p=0.5)
        assert out.rows == (("t0", "t2"),)

    def test_padding_removed_first(self):
        batch = TokenBatch.from_rows([["a", "b"], ["c", "d", "e", "f"]])
        assert batch.max_len == 4
        out = select_tokens(
            batch, scores({"a": 0.1, "b": 0.2, "c": 1, "d": 1, "e": 1, "f": 1}), p=0.5
        )
        # row 0 had two pads: both real tokens survive despite low scores
        assert out.rows[0] == ("a", "b")
        assert len(out.rows[1]) == 2

    def test_p_out_of_range(self):
        batch = TokenBatch.from_rows([["a"]])
        for p in (-0.01, 1.01):
            with pytest.raises(DomainError):
                select_tokens(batch, scores({"a": 1}), p)

    def test_constant_scorer_keeps_prefix(self):
        batch = TokenBatch.from_rows([["a", "b", "c", "d"]])
        out = select_tokens(batch, lambda t: 0.5, p=0.5)
        assert out.rows == (("a", "b"),)

    def test_length_contract(self):
        rng = np.random.default_rng(83)
        for _ in range(300):
            n_rows = int(rng.integers(1, 5))
            rows = [
                [f"t{rng.integers(0, 50)}" for _ in range(int(rng.integers(1, 12)))]
                for _ in range(n_rows)
            ]
            batch = TokenBatch.from_rows(rows)
            p = float(rng.uniform(0, 1))
            out = select_tokens(batch, lambda t: hash(t) % 97 / 96.0, p)
            target = math.ceil(p * batch.max_len)
            for i, row in enumerate(rows):
                kept = out.real_tokens(i)
                assert len(kept) == min(len(row), target)
            # rows re-pad to the longest surviving row, never beyond target
            assert out.max_len == min(target, max(len(r) for r in rows))

    def test_subsequence_order_preserved(self):
        rng = np.random.default_rng(89)
        for _ in range(200):
            row = [f"t{j}_{rng.integers(0, 9)}" for j in range(int(rng.integers(1, 15)))]
            batch = TokenBatch.from_rows([row])
            out = select_tokens(batch, lambda t: (hash(t) % 13) / 12.0, float(rng.uniform(0, 1)))
            kept = out.real_tokens(0)
            it = iter(row)
            assert all(tok in it for tok in kept)  # kept is a subsequence

    def test_composition_p1_then_px(self):
        rng = np.random.default_rng(97)
        scorer = lambda t: (hash(t) % 31) / 30.0
        for _ in range(50):
            rows = [
                [f"w{rng.integers(0, 40)}" for _ in range(int(rng.integers(1, 10)))]
                for _ in range(3)
            ]
            batch = TokenBatch.from_rows(rows)
            x = float(rng.uniform(0, 1))
            direct = select_tokens(batch, scorer, x)
            composed = select_tokens(select_tokens(batch, scorer, 1.0), scorer, x)
            assert direct.rows == composed.rows

    def test_rows_repadded_to_common_width(self):
        batch = TokenBatch.from_rows([["a", "b", "c", "d"], ["e"]])
        out = select_tokens(batch, lambda t: 1.0, p=0.75)
        widths = {len(r) for r in out.rows}
        assert widths == {3}


class TestTokenBatch:
    def test_from_rows_pads(self):
        batch = TokenBatch.from_rows([["a"], ["b", "c"]])
        assert batch.rows == (("a", PAD), ("b", "c"))
        assert batch.max_len == 2

    def test_unequal_rows_rejected(self):
        with pytest.raises(DomainError):
            TokenBatch(rows=(("a",), ("b", "c")))

    def test_real_tokens(self):
        batch = TokenBatch.from_rows([["a"], ["b", "c"]])
        assert batch.real_tokens(0) == ["a"]


class TestIdfScorer:
    def test_range_and_extremes(self):
        docs = [["common", "rare1"], ["common", "rare2"], ["common"]]
        scorer = IdfScorer(docs)
        assert scorer("common") == pytest.approx(0.0)  # in every document
        assert scorer("never-seen") == 1.0
        assert 0.0 < scorer("rare1") < 1.0

    def test_special_tokens_pinned(self):
        scorer = IdfScorer([["[CLS]", "x", "[SEP]"]] * 5)
        for tok in DEFAULT_SPECIAL_TOKENS:
            assert scorer(tok) == 1.0

    def test_requires_documents(self):
        with pytest.raises(DomainError):
            IdfScorer([])

    def test_scores_bounded(self):
        rng = np.random.default_rng(101)
        docs = [[f"w{rng.integers(0, 20)}" for _ in range(10)] for _ in range(30)]
        scorer = IdfScorer(docs)
        for w in {t for doc in docs for t in doc}:
            assert 0.0 <= scorer(w) <= 1.0
