"""skip-gram 负采样训练

必测：
1. 梯度检查：解析梯度与中心差分最大相对误差 ≤ 1e-4；故意翻转梯度符号后 > 0.1；零中心向量处差分误差 ≤ 1e-6
2. 同一种子两次训练结果逐位一致
3. 空语料 / 空词表报错
4. 训练让同簇 token 比异簇 token 更接近，损失下降
"""

import logging
import sys
from pathlib import Path

import numpy as np
import pytest

_project_root = Path(__file__).resolve().parent.parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from walks import WalkCorpus
from skipgram import (
    Hyperparams, HyperparamsError, EmptyCorpusError, EmptyVocabError,
    build_vocab, train, gradient_check, pair_loss_and_grads, NOISE_POWER,
)
from matcher import cosine


def _two_clusters(n: int = 200, seed: int = 0):
    rng = np.random.default_rng(seed)
    left = ["a", "b", "c", "d"]
    right = ["w", "x", "y", "z"]
    sentences = []
    for i in range(n):
        group = left if i % 2 == 0 else right
        sentences.append([group[j] for j in rng.permutation(len(group))])
    return sentences


def test_gradient_check_passes():
    report = gradient_check(Hyperparams(dim=8, negatives=5, seed=1), trials=100)
    assert report.trials == 100
    assert report.max_relative_error <= 1e-4


def test_gradient_check_detects_wrong_gradient():
    report = gradient_check(Hyperparams(dim=8, negatives=5, seed=1), trials=10, mutate=True)
    assert report.max_relative_error > 0.1


def test_pair_loss_matches_formula():
    rng = np.random.default_rng(3)
    v, u_pos, u_neg = rng.normal(size=4), rng.normal(size=4), rng.normal(size=(2, 4))
    loss, *_ = pair_loss_and_grads(v, u_pos, u_neg)
    sig = lambda x: 1.0 / (1.0 + np.exp(-x))
    expected = -np.log(sig(u_pos @ v)) - np.log(sig(-(u_neg @ v))).sum()
    assert loss == pytest.approx(expected, rel=1e-10)


def test_gradient_at_zero_center_vector():
    """v = 0 时 σ 项都取 0.5：grad_v = −0.5·u_pos + 0.5·Σu_neg，输出向量梯度为 0"""
    dim, h = 8, 1e-5
    rng = np.random.default_rng(5)
    v, u_pos, u_neg = np.zeros(dim), rng.normal(size=dim), rng.normal(size=(3, dim))
    loss, grad_v, grad_u_pos, grad_u_neg = pair_loss_and_grads(v, u_pos, u_neg)
    assert loss == pytest.approx(4 * np.log(2.0), abs=1e-12)
    assert np.allclose(grad_v, -0.5 * u_pos + 0.5 * u_neg.sum(axis=0), atol=1e-12)
    assert not grad_u_pos.any() and not grad_u_neg.any()

    params = [v, u_pos, u_neg]
    analytic = [grad_v, grad_u_pos, grad_u_neg]
    for which, grad in enumerate(analytic):
        numeric = np.zeros_like(grad)
        for idx in np.ndindex(grad.shape):
            shifted = [p.copy() for p in params]
            shifted[which][idx] += h
            plus = pair_loss_and_grads(*shifted)[0]
            shifted[which][idx] -= 2 * h
            minus = pair_loss_and_grads(*shifted)[0]
            numeric[idx] = (plus - minus) / (2 * h)
        assert np.max(np.abs(numeric - grad)) <= 1e-6


def test_training_is_bitwise_deterministic():
    sentences = _two_clusters(60)
    vocab = build_vocab(sentences)
    hp = Hyperparams(dim=8, epochs=3, window=2, seed=11, batch_size=16)
    first = train(sentences, vocab, hp)
    second = train(sentences, build_vocab(sentences), hp)
    assert first.tokens == second.tokens
    assert np.array_equal(first.vectors, second.vectors)
    assert first.epoch_losses == second.epoch_losses

    other = train(sentences, vocab, Hyperparams(dim=8, epochs=3, window=2, seed=12, batch_size=16))
    assert not np.array_equal(first.vectors, other.vectors)


def test_training_separates_clusters_and_lowers_loss():
    sentences = _two_clusters(400)
    vocab = build_vocab(sentences)
    table = train(sentences, vocab, Hyperparams(dim=16, epochs=8, window=3, negatives=3, learning_rate=0.05))
    assert table.epoch_losses[-1] < table.epoch_losses[0]
    within = cosine(table.vector("a"), table.vector("b"))
    across = cosine(table.vector("a"), table.vector("x"))
    assert within > across


def test_vocab_sorted_with_counts_and_noise():
    vocab = build_vocab([["b", "a", "b"], ["c", "b"]])
    assert vocab.tokens == ("a", "b", "c")
    assert list(vocab.counts) == [1, 3, 1]
    assert vocab.noise.sum() == pytest.approx(1.0)
    assert vocab.noise[1] / vocab.noise[0] == pytest.approx(3 ** NOISE_POWER)
    assert "b" in vocab and "z" not in vocab


def test_min_count_filters_tokens():
    vocab = build_vocab([["a", "a", "b"]], min_count=2)
    assert vocab.tokens == ("a",)


def test_walk_corpus_includes_bucket_sentences():
    corpus = WalkCorpus(sentences=[["e", "p", "230"]], bucket_sentences=[["e", "p", "mag:+e2"]])
    vocab = build_vocab(corpus)
    assert "mag:+e2" in vocab
    assert vocab.counts[vocab.index["e"]] == 2


def test_empty_corpus_and_empty_vocab():
    with pytest.raises(EmptyCorpusError):
        build_vocab([])
    with pytest.raises(EmptyCorpusError):
        build_vocab(WalkCorpus())
    vocab = build_vocab([["a", "b"]], min_count=5)
    assert len(vocab) == 0
    with pytest.raises(EmptyVocabError):
        train([["a", "b"]], vocab)


def test_zero_epochs_keeps_initialization():
    sentences = [["a", "b", "c"]]
    vocab = build_vocab(sentences)
    hp = Hyperparams(dim=4, epochs=0, seed=5)
    table = train(sentences, vocab, hp)
    rng = np.random.default_rng(5)
    expected = (rng.random((3, 4)) - 0.5) / 4
    assert np.array_equal(table.vectors, expected)
    assert table.epoch_losses == ()


def test_single_token_sentences_warn_and_skip_training(caplog):
    sentences = [["a"], ["b"]]
    with caplog.at_level(logging.WARNING):
        table = train(sentences, build_vocab(sentences), Hyperparams(dim=4, epochs=2))
    assert table.epoch_losses == ()
    assert table.dim == 4
    assert any("没有任何训练对" in r.getMessage() for r in caplog.records)


def test_table_accessors_and_context_vectors():
    sentences = _two_clusters(20)
    vocab = build_vocab(sentences)
    table = train(sentences, vocab, Hyperparams(dim=6, epochs=1, save_context=True))
    assert table.context_vectors is not None
    assert table.context_vectors.shape == (8, 6)
    assert table.count("a") == 10
    assert table.count("missing") == 0
    assert table.vector("missing") is None
    assert table.vector("a").shape == (6,)
    plain = train(sentences, vocab, Hyperparams(dim=6, epochs=1))
    assert plain.context_vectors is None


@pytest.mark.parametrize("kwargs", [
    {"dim": 0},
    {"window": 0},
    {"epochs": -1},
    {"negatives": -1},
    {"negatives": 0},
    {"batch_size": 0},
    {"seed": -3},
    {"learning_rate": 0.0},
    {"learning_rate": float("inf")},
    {"min_learning_rate": 0.5},
    {"learning_rate": 0.01, "min_learning_rate": 0.01},
    {"dim": 2.5},
])
def test_invalid_hyperparams(kwargs):
    with pytest.raises(HyperparamsError):
        Hyperparams(**kwargs)


def test_cache_fields_cover_training_knobs():
    fields = Hyperparams().cache_fields()
    assert set(fields) == {
        "dim", "window", "epochs", "negatives", "learning_rate", "min_learning_rate",
        "min_count", "seed", "batch_size", "save_context",
    }


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
