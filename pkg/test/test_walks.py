"""图游走

必测：
1. 50 个随机图：每条 random 游走的每一步都是图中真实存在的三元组
2. 句子数 = 起始实体数 × walks_per_entity，长度 ≤ 2·depth + 1
3. 输出与线程数无关，同种子两次结果相同
4. bfs 枚举按规范序、去重、受 walks_per_entity 截断
5. 数值字面量规范化与量级 token
"""

import logging
import sys
from pathlib import Path

import numpy as np
import pytest

_project_root = Path(__file__).resolve().parent.parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from rdf_core import IRI, Literal, BlankNode, Triple, Graph, XSD
from walks import (
    WalkConfig, WalkStrategy, WalkConfigError, WalkCorpus,
    generate_walks, canonical_lexical, magnitude_token, term_token,
    encode_token, decode_token, save_corpus, load_corpus, BUCKET_SECTION,
)

EX = "http://example.org/"


def _random_graph(rng: np.random.Generator) -> Graph:
    nodes = [IRI(f"{EX}e{i}") for i in range(6)] + [BlankNode("b0")]
    preds = [IRI(f"{EX}p{i}") for i in range(3)]
    g = Graph()
    for _ in range(int(rng.integers(1, 30))):
        s = nodes[rng.integers(len(nodes))]
        p = preds[rng.integers(len(preds))]
        if rng.random() < 0.3:
            o = Literal(str(rng.integers(0, 1000)), datatype=XSD + "integer")
        else:
            o = nodes[rng.integers(len(nodes))]
        g.add(Triple(s, p, o))
    return g


def _token_index(graph: Graph):
    """token → 项（测试图里 token 与项一一对应）"""
    index = {}
    for t in graph:
        for term in (t.subject, t.predicate, t.object):
            index[term_token(term)] = term
    return index


def test_random_walk_steps_are_real_triples():
    rng = np.random.default_rng(5)
    config = WalkConfig(depth=4, walks_per_entity=8, seed=3, numeric_buckets=False)
    for _ in range(50):
        graph = _random_graph(rng)
        starts = graph.subjects()
        corpus = generate_walks(graph, starts, config)
        assert len(corpus.sentences) == len(starts) * config.walks_per_entity
        index = _token_index(graph)
        for sentence in corpus.sentences:
            assert len(sentence) % 2 == 1
            assert len(sentence) <= 2 * config.depth + 1
            for i in range(0, len(sentence) - 2, 2):
                s, p, o = (index[tok] for tok in sentence[i:i + 3])
                assert Triple(s, p, o) in graph


def test_walk_stops_at_dead_end():
    g = Graph([Triple(IRI(EX + "a"), IRI(EX + "p"), IRI(EX + "b"))])
    corpus = generate_walks(g, [IRI(EX + "a")], WalkConfig(depth=5, walks_per_entity=3))
    assert corpus.sentences == [[EX + "a", EX + "p", EX + "b"]] * 3


def test_walks_independent_of_thread_count_and_repeatable():
    rng = np.random.default_rng(9)
    graph = _random_graph(rng)
    config = WalkConfig(walks_per_entity=20, seed=7)
    single = generate_walks(graph, graph.subjects(), config, threads=1)
    multi = generate_walks(graph, graph.subjects(), config, threads=4)
    again = generate_walks(graph, list(reversed(graph.subjects())), config, threads=2)
    assert single.sentences == multi.sentences == again.sentences
    assert single.bucket_sentences == multi.bucket_sentences


def test_seed_changes_random_walks():
    g = Graph([Triple(IRI(EX + "a"), IRI(EX + f"p{i}"), IRI(EX + f"o{i}")) for i in range(10)])
    first = generate_walks(g, [IRI(EX + "a")], WalkConfig(walks_per_entity=30, seed=1))
    second = generate_walks(g, [IRI(EX + "a")], WalkConfig(walks_per_entity=30, seed=2))
    assert first.sentences != second.sentences


def test_non_subject_start_is_skipped(caplog):
    g = Graph([Triple(IRI(EX + "a"), IRI(EX + "p"), IRI(EX + "b"))])
    with caplog.at_level(logging.WARNING):
        corpus = generate_walks(g, [IRI(EX + "b"), IRI(EX + "a")], WalkConfig(walks_per_entity=2))
    assert len(corpus.sentences) == 2
    assert any("跳过起始实体" in r.getMessage() for r in caplog.records)


def test_bfs_enumerates_paths_in_canonical_order():
    g = Graph([
        Triple(IRI(EX + "a"), IRI(EX + "q"), IRI(EX + "c")),
        Triple(IRI(EX + "a"), IRI(EX + "p"), IRI(EX + "b")),
        Triple(IRI(EX + "b"), IRI(EX + "p"), Literal("x")),
        Triple(IRI(EX + "b"), IRI(EX + "r"), IRI(EX + "c")),
    ])
    config = WalkConfig(strategy=WalkStrategy.BFS, depth=3, walks_per_entity=10)
    corpus = generate_walks(g, [IRI(EX + "a")], config)
    assert corpus.sentences == [
        [EX + "a", EX + "p", EX + "b", EX + "p", "x"],
        [EX + "a", EX + "p", EX + "b", EX + "r", EX + "c"],
        [EX + "a", EX + "q", EX + "c"],
    ]
    truncated = generate_walks(g, [IRI(EX + "a")], WalkConfig(strategy=WalkStrategy.BFS, walks_per_entity=2))
    assert truncated.sentences == corpus.sentences[:2]


def test_bfs_respects_depth_on_cycles():
    g = Graph([
        Triple(IRI(EX + "a"), IRI(EX + "p"), IRI(EX + "b")),
        Triple(IRI(EX + "b"), IRI(EX + "p"), IRI(EX + "a")),
    ])
    corpus = generate_walks(g, [IRI(EX + "a")], WalkConfig(strategy=WalkStrategy.BFS, depth=3))
    assert corpus.sentences == [[EX + "a", EX + "p", EX + "b", EX + "p", EX + "a", EX + "p", EX + "b"]]


def test_exclude_literals():
    g = Graph([
        Triple(IRI(EX + "a"), IRI(EX + "p"), Literal("v")),
        Triple(IRI(EX + "a"), IRI(EX + "q"), IRI(EX + "b")),
    ])
    config = WalkConfig(walks_per_entity=20, include_literals=False)
    corpus = generate_walks(g, [IRI(EX + "a")], config)
    for sentence in corpus.sentences:
        assert "v" not in sentence
    bfs = generate_walks(g, [IRI(EX + "a")], WalkConfig(strategy=WalkStrategy.BFS, include_literals=False))
    assert bfs.sentences == [[EX + "a", EX + "q", EX + "b"]]


def test_magnitude_sentences_follow_numeric_walks():
    g = Graph([Triple(IRI(EX + "pump"), IRI(EX + "power"), Literal("230", datatype=XSD + "integer"))])
    corpus = generate_walks(g, [IRI(EX + "pump")], WalkConfig(walks_per_entity=2))
    assert corpus.sentences == [[EX + "pump", EX + "power", "230"]] * 2
    assert corpus.bucket_sentences == [[EX + "pump", EX + "power", "mag:+e2"]] * 2
    assert len(corpus.training_sentences()) == 4

    off = generate_walks(g, [IRI(EX + "pump")], WalkConfig(walks_per_entity=2, numeric_buckets=False))
    assert off.bucket_sentences == []


@pytest.mark.parametrize("lexical,datatype,expected", [
    ("+007", "integer", "7"),
    ("-0", "integer", "0"),
    ("1.500", "decimal", "1.5"),
    ("10", "decimal", "10.0"),
    ("-0.00", "decimal", "0.0"),
    ("1e2", "double", "100.0"),
    ("abc", "integer", "abc"),
    (" 007 ", "string", " 007 "),
])
def test_canonical_lexical(lexical, datatype, expected):
    assert canonical_lexical(Literal(lexical, datatype=XSD + datatype)) == expected


@pytest.mark.parametrize("lexical,datatype,expected", [
    ("230", "integer", "mag:+e2"),
    ("-0.05", "decimal", "mag:-e-2"),
    ("0", "integer", "mag:0"),
    ("9.99", "decimal", "mag:+e0"),
    ("hello", "string", None),
    ("NaN", "double", None),
])
def test_magnitude_token(lexical, datatype, expected):
    assert magnitude_token(Literal(lexical, datatype=XSD + datatype)) == expected


@pytest.mark.parametrize("kwargs", [
    {"depth": 0},
    {"walks_per_entity": 0},
    {"seed": -1},
    {"literal_retries": -1},
    {"depth": True},
    {"strategy": "random"},
])
def test_invalid_walk_config(kwargs):
    with pytest.raises(WalkConfigError):
        WalkConfig(**kwargs)


def test_corpus_file_round_trip(tmp_path):
    corpus = WalkCorpus(
        sentences=[[EX + "a", EX + "p", "two words\tand tab"], [EX + "b", EX + "p", "100%"]],
        bucket_sentences=[[EX + "a", EX + "p", "mag:+e2"]],
    )
    path = tmp_path / "walks.txt"
    save_corpus(corpus, path)
    assert path.read_text(encoding="utf-8").splitlines()[2] == BUCKET_SECTION
    loaded = load_corpus(path)
    assert loaded.sentences == corpus.sentences
    assert loaded.bucket_sentences == corpus.bucket_sentences


def test_literal_with_magnitude_prefix_stays_a_walk(tmp_path):
    corpus = WalkCorpus(sentences=[[EX + "a", EX + "label", "mag:x"], [EX + "b", EX + "p", "%"]])
    path = tmp_path / "walks.txt"
    save_corpus(corpus, path)
    loaded = load_corpus(path)
    assert loaded.sentences == corpus.sentences
    assert loaded.bucket_sentences == []


def test_token_encoding_escapes_separators():
    assert encode_token("a b\tc\n%") == "a%20b%09c%0A%25"
    assert decode_token(encode_token("a b\tc\n%")) == "a b\tc\n%"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
