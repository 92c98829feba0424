"""向量文件与训练缓存

覆盖：
- 保存 → 加载 → 再保存逐字节一致；同语料同超参训练两次，文件逐字节一致
- 版本不匹配、结构损坏、非有限值、缺少频次文件
- 缓存：未命中 / 命中 / 文件被改动（hash-mismatch）
"""

import logging
import sys
from pathlib import Path

import numpy as np
import pytest

_project_root = Path(__file__).resolve().parent.parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from skipgram import EmbeddingTable, Hyperparams, build_vocab, train
from embedding_store import (
    CACHE_INDEX_FILE, EmbeddingFileError, VersionMismatchError, CorruptEmbeddingFileError,
    EmbeddingCache, save_embeddings, load_embeddings, cache_key, file_sha256,
)

SENTENCES = [
    ["http://example.org/pump", "http://example.org/has", "flow rate"],
    ["http://example.org/motor", "http://example.org/has", "100%"],
    ["http://example.org/pump", "http://example.org/rel", "http://example.org/motor"],
]


def _trained(hp=None):
    hp = hp or Hyperparams(dim=5, epochs=2, seed=3)
    return train(SENTENCES, build_vocab(SENTENCES), hp)


def _lines(path: Path):
    return path.read_text(encoding="utf-8").split("\n")


def test_save_load_round_trip(tmp_path):
    table = _trained()
    path = tmp_path / "model.emb"
    written = save_embeddings(table, path)
    assert written == [path, tmp_path / "model.emb.counts"]
    assert _lines(path)[0] == f"aasmatch-emb v1 5 {len(table)}"

    loaded = load_embeddings(path)
    assert loaded.tokens == table.tokens
    assert loaded.counts == table.counts
    assert np.allclose(loaded.vectors, table.vectors, rtol=1e-8, atol=1e-12)
    assert loaded.context_vectors is None

    again = tmp_path / "again.emb"
    save_embeddings(loaded, again)
    assert again.read_bytes() == path.read_bytes()


def test_tokens_with_separators_survive(tmp_path):
    table = _trained()
    path = tmp_path / "model.emb"
    save_embeddings(table, path)
    assert "flow%20rate\t" in path.read_text(encoding="utf-8")
    loaded = load_embeddings(path)
    assert "flow rate" in loaded and "100%" in loaded


def test_training_twice_gives_identical_files(tmp_path):
    save_embeddings(_trained(), tmp_path / "a.emb")
    save_embeddings(_trained(), tmp_path / "b.emb")
    assert (tmp_path / "a.emb").read_bytes() == (tmp_path / "b.emb").read_bytes()
    assert (tmp_path / "a.emb.counts").read_bytes() == (tmp_path / "b.emb.counts").read_bytes()


def test_context_vectors_saved_on_request(tmp_path):
    table = _trained(Hyperparams(dim=4, epochs=1, save_context=True))
    path = tmp_path / "ctx.emb"
    written = save_embeddings(table, path)
    assert tmp_path / "ctx.emb.context" in written
    loaded = load_embeddings(path)
    assert loaded.context_vectors is not None
    assert loaded.context_vectors.shape == table.vectors.shape

    save_embeddings(table, path, save_context=False)
    assert not (tmp_path / "ctx.emb.context").exists()
    assert load_embeddings(path).context_vectors is None


def test_missing_file(tmp_path):
    with pytest.raises(EmbeddingFileError):
        load_embeddings(tmp_path / "nope.emb")


def test_version_mismatch(tmp_path):
    path = tmp_path / "model.emb"
    save_embeddings(_trained(), path)
    lines = _lines(path)
    lines[0] = lines[0].replace(" v1 ", " v2 ")
    path.write_text("\n".join(lines), encoding="utf-8")
    with pytest.raises(VersionMismatchError):
        load_embeddings(path)


@pytest.mark.parametrize("mutate", [
    lambda lines: ["garbage header"] + lines[1:],
    lambda lines: lines[:-2] + [""],
    lambda lines: [lines[0], lines[1].split("\t")[0] + "\t1 2"] + lines[2:],
    lambda lines: [lines[0], lines[1].replace("\t", " ", 1)] + lines[2:],
    lambda lines: [lines[0], lines[1].split("\t")[0] + "\tnan nan nan nan nan"] + lines[2:],
    lambda lines: [lines[0], lines[2], lines[1]] + lines[3:],
    lambda lines: [lines[0].replace(" 5 ", " five ")] + lines[1:],
])
def test_corrupt_files(tmp_path, mutate):
    path = tmp_path / "model.emb"
    save_embeddings(_trained(), path)
    path.write_text("\n".join(mutate(_lines(path))), encoding="utf-8")
    with pytest.raises(CorruptEmbeddingFileError):
        load_embeddings(path)


def test_missing_counts_defaults_to_one(tmp_path, caplog):
    path = tmp_path / "model.emb"
    table = _trained()
    save_embeddings(table, path)
    (tmp_path / "model.emb.counts").unlink()
    with caplog.at_level(logging.WARNING):
        loaded = load_embeddings(path)
    assert loaded.counts == tuple(1 for _ in table.tokens)
    assert any("缺少频次文件" in r.getMessage() for r in caplog.records)


def test_counts_must_match_tokens(tmp_path):
    path = tmp_path / "model.emb"
    save_embeddings(_trained(), path)
    (tmp_path / "model.emb.counts").write_text("stranger\t3\n", encoding="utf-8")
    with pytest.raises(CorruptEmbeddingFileError):
        load_embeddings(path)


def test_empty_table_round_trip(tmp_path):
    table = EmbeddingTable(tokens=(), vectors=np.zeros((0, 3)), counts=())
    path = tmp_path / "empty.emb"
    save_embeddings(table, path)
    loaded = load_embeddings(path)
    assert len(loaded) == 0
    assert loaded.vectors.shape == (0, 3)


# ---------------------------------------------------------------------------
# 缓存
# ---------------------------------------------------------------------------

def test_cache_key_changes_with_corpus_and_hyperparams():
    hp = Hyperparams(dim=5)
    base = cache_key(SENTENCES, hp)
    assert cache_key([list(s) for s in SENTENCES], hp) == base
    assert cache_key(SENTENCES[:2], hp) != base
    assert cache_key(SENTENCES, Hyperparams(dim=6)) != base
    assert cache_key(SENTENCES, Hyperparams(dim=5, seed=1)) != base
    assert cache_key([["a b"]], hp) != cache_key([["a", "b"]], hp)


def test_cache_miss_then_hit(tmp_path, caplog):
    cache = EmbeddingCache(tmp_path / "cache")
    key = cache_key(SENTENCES, Hyperparams(dim=5, epochs=2, seed=3))
    with caplog.at_level(logging.INFO):
        assert cache.lookup(key) is None
    assert any("cache-miss" in r.getMessage() for r in caplog.records)

    table = _trained()
    path = cache.store(key, table)
    assert path == cache.path_for(key)
    assert key in cache
    assert (tmp_path / "cache" / CACHE_INDEX_FILE).exists()

    caplog.clear()
    reopened = EmbeddingCache(tmp_path / "cache")
    with caplog.at_level(logging.INFO):
        hit = reopened.lookup(key)
    assert hit is not None
    assert hit.tokens == table.tokens
    assert any("cache-hit" in r.getMessage() for r in caplog.records)


def test_cache_detects_tampering(tmp_path, caplog):
    cache = EmbeddingCache(tmp_path)
    key = "k" * 64
    path = cache.store(key, _trained())
    recorded = file_sha256(path)
    lines = _lines(path)
    token, values = lines[1].split("\t")
    lines[1] = token + "\t" + " ".join(["12345.5"] + values.split(" ")[1:])
    path.write_text("\n".join(lines), encoding="utf-8")
    assert file_sha256(path) != recorded

    with caplog.at_level(logging.WARNING):
        assert cache.lookup(key) is None
    assert any("hash-mismatch" in r.getMessage() for r in caplog.records)
    assert key not in cache
    assert key not in EmbeddingCache(tmp_path)


def test_cache_detects_deleted_sidecar(tmp_path, caplog):
    cache = EmbeddingCache(tmp_path)
    key = "d" * 64
    path = cache.store(key, _trained())
    Path(str(path) + ".counts").unlink()
    with caplog.at_level(logging.WARNING):
        assert cache.lookup(key) is None
    assert any("hash-mismatch" in r.getMessage() for r in caplog.records)


def test_corrupt_index_falls_back_to_empty(tmp_path, caplog):
    (tmp_path / CACHE_INDEX_FILE).write_text("{not json", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        cache = EmbeddingCache(tmp_path)
    assert cache.lookup("anything") is None
    assert any("加载缓存清单失败" in r.getMessage() for r in caplog.records)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
