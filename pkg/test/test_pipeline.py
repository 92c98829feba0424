"""端到端流水线

必测：
1. 同一配置跑两次，报告 JSON（不含耗时）逐字节一致；threads 不改变结果
2. 预筛选后没有候选时 status = "empty-candidates"，不是错误
3. 步骤失败包装为 PipelineError，带步骤标签与错误码；退出码 1/2/3
4. 缓存命中与未命中给出完全相同的分数
5. 与查询完全相同的文档排第 1，分数为 1.0
6. 留一法、多种子实验、阈值扫描的基本形状
"""

import logging
import sys
from dataclasses import replace
from pathlib import Path

import pytest

_project_root = Path(__file__).resolve().parent.parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from aas_model import AASDocument, AssetKind, Shell
from corpus import default_corpus_spec, gen_corpus, write_corpus
from matcher import DecisionPolicy
from models import PipelineConfig, STATUS_EMPTY_CANDIDATES, STATUS_OK, EmbeddingScope
from skipgram import Hyperparams
from walks import WalkConfig
from pipeline import (
    ErrorCode, PipelineError, calibrate, calibration_tsv, exit_code_for, leave_one_out,
    leave_one_out_scores, ranked_lists, run_experiment, run_pipeline, with_seed,
)

NOTHING = 'ASK { ?aas aas:hasSubmodel ?sm . ?sm aas:hasIdShort "NoSuchSubmodel" }'


def _config(**kwargs) -> PipelineConfig:
    base = PipelineConfig(
        walk=WalkConfig(depth=3, walks_per_entity=4),
        hyperparams=Hyperparams(dim=8, epochs=1, window=2, negatives=2, batch_size=64),
        policy=DecisionPolicy.topk(3),
    )
    return with_seed(replace(base, **kwargs), 7)


@pytest.fixture(scope="module")
def small_corpus():
    docs, truth = gen_corpus(default_corpus_spec(instances_per_template=2, seed=3))
    return docs, truth


def test_run_is_deterministic_and_thread_independent(small_corpus):
    docs, _ = small_corpus
    query, repo = docs[0], docs[1:]
    first = run_pipeline(_config(), query, repository=repo)
    second = run_pipeline(_config(), query, repository=repo)
    threaded = run_pipeline(_config(threads=4), query, repository=repo)
    assert first.status == STATUS_OK
    assert len(first.results) == 3
    assert [r.rank for r in first.results] == [1, 2, 3]
    assert first.to_json() == second.to_json() == threaded.to_json()
    assert first.vocab_size > 0 and first.sentences > 0
    assert len(first.candidates) == len(repo)


def test_report_with_timings(small_corpus):
    docs, _ = small_corpus
    report = run_pipeline(_config(), docs[0], repository=docs[1:])
    data = report.to_dict(include_timings=True)
    assert set(data["timings"]) == {"ingest", "convert", "prefilter", "walk", "train", "rank"}
    assert data["cache_status"] == "disabled"
    assert "timings" not in report.to_dict()
    assert report.to_tsv().splitlines()[0] == "rank\tshell_iri\traw\tscore"


def test_empty_candidates_is_a_status(small_corpus):
    docs, _ = small_corpus
    report = run_pipeline(_config(), docs[0], constraint=NOTHING, repository=docs[1:])
    assert report.status == STATUS_EMPTY_CANDIDATES
    assert report.candidates == []
    assert report.results == []


def test_constraint_restricts_candidates(small_corpus):
    docs, _ = small_corpus
    constraint = 'ASK { ?aas aas:hasSubmodel ?sm . ?sm aas:hasIdShort "PumpCharacteristics" }'
    report = run_pipeline(_config(policy=DecisionPolicy.topk(10)), docs[0], constraint=constraint, repository=docs[1:])
    pumps = [d for d in docs[1:] if ":pump:" in d.shells[0].id]
    assert len(report.candidates) == len(pumps) == len(report.results)


def test_filtered_scope_trains_on_candidates_only(small_corpus):
    docs, _ = small_corpus
    full = run_pipeline(_config(), docs[0], repository=docs[1:])
    filtered = run_pipeline(
        _config(embedding_scope=EmbeddingScope.FILTERED), docs[0],
        constraint='ASK { ?aas aas:hasSubmodel ?sm . ?sm aas:hasIdShort "PumpCharacteristics" }', repository=docs[1:],
    )
    assert filtered.vocab_size < full.vocab_size


def test_identical_document_ranks_first(small_corpus):
    docs, _ = small_corpus
    query = docs[0]
    unrelated = [d for d in docs if d.shells[0].id.split(":")[3] != query.shells[0].id.split(":")[3]][:3]
    report = run_pipeline(_config(policy=DecisionPolicy.topk(4)), query, repository=[query] + unrelated)
    top = report.results[0]
    assert top.shell_iri.endswith(query.shells[0].id.replace(":", "%3A"))
    assert top.score == pytest.approx(1.0)
    assert all(r.score < top.score for r in report.results[1:])


def test_cache_hit_gives_identical_scores(small_corpus, tmp_path, caplog):
    docs, _ = small_corpus
    config = _config(cache_dir=str(tmp_path / "cache"))
    first = run_pipeline(config, docs[0], repository=docs[1:])
    assert first.cache_status == "miss"
    with caplog.at_level(logging.INFO):
        second = run_pipeline(config, docs[0], repository=docs[1:])
    assert second.cache_status == "hit"
    assert any("cache-hit" in r.getMessage() for r in caplog.records)
    assert second.to_json() == first.to_json()

    uncached = run_pipeline(_config(), docs[0], repository=docs[1:])
    assert [(r.shell_iri, r.raw, r.score) for r in uncached.results] == [
        (r.shell_iri, r.raw, r.score) for r in first.results
    ]


def test_repository_directory(small_corpus, tmp_path):
    docs, truth = small_corpus
    write_corpus(docs[1:], truth, tmp_path / "repo")
    from_dir = run_pipeline(_config(repo_dir=str(tmp_path / "repo")), docs[0])
    assert len(from_dir.candidates) == len(docs) - 1


# ---------------------------------------------------------------------------
# 错误
# ---------------------------------------------------------------------------

def test_invalid_query_document_fails_in_ingest(small_corpus):
    docs, _ = small_corpus
    dangling = AASDocument(shells=(Shell("urn:q", "Q", AssetKind.INSTANCE, ("urn:missing",)),))
    with pytest.raises(PipelineError) as info:
        run_pipeline(_config(), dangling, repository=docs)
    assert info.value.step == "ingest"
    assert info.value.error_code is ErrorCode.VALIDATION_FAILED
    assert exit_code_for(info.value) == 2


def test_missing_repository_is_a_config_error(small_corpus):
    with pytest.raises(PipelineError) as info:
        run_pipeline(_config(), small_corpus[0][0])
    assert info.value.step == "ingest"
    assert info.value.error_code is ErrorCode.CONFIG_INVALID
    assert exit_code_for(info.value) == 1


def test_bad_repository_file_is_a_parse_error(small_corpus, tmp_path):
    (tmp_path / "broken.json").write_text("{", encoding="utf-8")
    with pytest.raises(PipelineError) as info:
        run_pipeline(_config(repo_dir=str(tmp_path)), small_corpus[0][0])
    assert info.value.error_code is ErrorCode.PARSE_FAILED
    assert "broken.json" in info.value.message


@pytest.mark.parametrize("constraint", ["SELECT WHERE {", "CONSTRUCT { ?aas ?p ?o }", "ASK { ?x ?p ?o }"])
def test_bad_constraint_fails_in_prefilter(small_corpus, constraint):
    docs, _ = small_corpus
    with pytest.raises(PipelineError) as info:
        run_pipeline(_config(), docs[0], constraint=constraint, repository=docs[1:])
    assert info.value.step == "prefilter"
    assert info.value.error_code is ErrorCode.QUERY_INVALID
    assert str(info.value).startswith("[prefilter] QUERY_INVALID")


def test_exit_codes():
    assert ErrorCode.SUCCESS.exit_code == 0
    assert exit_code_for(RuntimeError("boom")) == 3
    assert exit_code_for(OSError("disk")) == 2
    assert exit_code_for(PipelineError("train", ErrorCode.TRAIN_FAILED, "x")) == 2


# ---------------------------------------------------------------------------
# 实验
# ---------------------------------------------------------------------------

def test_leave_one_out_excludes_query(small_corpus):
    docs, _ = small_corpus
    rows = leave_one_out(docs, _config())
    ranked = ranked_lists(rows)
    assert len(ranked) == len(docs)
    for query_id, candidates in ranked.items():
        assert len(candidates) == 3
        assert query_id not in candidates
    assert leave_one_out(docs, _config(threads=3)) == rows


def test_run_experiment_shape(tmp_path):
    spec = default_corpus_spec(instances_per_template=2)
    report = run_experiment(spec, _config(), seeds=[1, 2], k=3, output_dir=tmp_path)
    assert [row.seed for row in report.rows] == [1, 2]
    for row in report.rows:
        assert 0.0 <= row.precision_at_k <= 1.0
        assert 0.0 <= row.mean_reciprocal_rank <= 1.0
        assert row.random_mrr > 0.0
    assert report.to_tsv().splitlines()[0] == "seed\tprecision_at_3\tmrr\trandom_mrr\tratio"
    assert (tmp_path / "results_seed1.tsv").exists()
    assert (tmp_path / "results_seed2.tsv").exists()


def test_calibrate_endpoints(small_corpus):
    docs, truth = small_corpus
    config = _config()
    scores = leave_one_out_scores(docs, config)
    rows = calibrate(docs, truth, config, [0.0, 1.0], scores=scores)
    assert rows[0].mean_returned == pytest.approx(len(docs) - 1)
    assert rows[0].answered == len(docs)
    assert rows[0].precision == pytest.approx(1 / 9)
    assert rows[1].mean_returned == 0.0
    assert rows[1].precision is None
    lines = calibration_tsv(rows).splitlines()
    assert lines[0] == "t\tmean_returned\tprecision\tanswered"
    assert lines[2] == "1\t0.000\t-\t0"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
