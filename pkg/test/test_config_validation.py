"""配置完整性与“硬失败”测试

1. 配置自检是硬失败而不是 warning：validate_config() 未通过则抛 ConfigValidationError。
2. 未知键、类型不符、取值越界在 load() 阶段直接报错，不会被静默忽略。
3. 优先级：--set 覆盖 > 配置文件 > 类属性默认值；未给出路径时回退到 AASMATCH_CONFIG。
4. 全局 seed 同时进入游走与训练配置。
"""

import json
import sys
from dataclasses import replace
from pathlib import Path
from unittest.mock import patch

import pytest

# 项目根加入 path，支持直接运行或 pytest
_project_root = Path(__file__).resolve().parent.parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from config import AasMatchConfig, ConfigValidationError, parse_overrides
from models import EmbeddingScope, PipelineConfig
from walks import WalkStrategy
from matcher import DecisionPolicy, GraphVectorStrategy, Metric


@pytest.fixture(autouse=True)
def _no_env_config(monkeypatch):
    monkeypatch.delenv(AasMatchConfig.ENV_CONFIG_PATH, raising=False)


def _write(tmp_path: Path, data) -> Path:
    path = tmp_path / "aasmatch.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_defaults_load_and_validate():
    """默认配置可以直接通过自检。"""
    config = AasMatchConfig.load()
    is_valid, msg = AasMatchConfig.validate(config)
    assert is_valid, f"默认配置应通过，失败原因: {msg}"
    assert msg == ""
    assert config.walk.strategy is WalkStrategy.RANDOM
    assert config.policy == DecisionPolicy.hybrid(0.7, 5)
    assert config.cache_dir == ".aasmatch_cache"
    assert config.walk.seed == config.hyperparams.seed == config.seed == 42


def test_class_attribute_defaults_are_used():
    with patch.object(AasMatchConfig, "EMBEDDING_DIM", 16), patch.object(AasMatchConfig, "METRIC", "euclidean"):
        config = AasMatchConfig.load()
    assert config.hyperparams.dim == 16
    assert config.metric is Metric.EUCLIDEAN


def test_validate_config_fails_fast_on_bad_namespace():
    """命名空间非法时，validate_config() 必须硬失败。"""
    with patch.object(AasMatchConfig, "NAMESPACE", "not-absolute/"):
        try:
            AasMatchConfig.load()
        except ConfigValidationError as e:
            assert "命名空间" in str(e)
            return
    assert False, "load() 应抛出 ConfigValidationError"


def test_validate_config_fails_fast_on_missing_repo_dir(tmp_path):
    with pytest.raises(ConfigValidationError) as info:
        AasMatchConfig.load(overrides=[f"paths.repo_dir={tmp_path / 'missing'}"])
    assert "仓库目录不存在" in str(info.value)


def test_validate_reports_inconsistent_seeds():
    config = AasMatchConfig.load()
    broken = replace(config, walk=replace(config.walk, seed=7))
    is_valid, msg = AasMatchConfig.validate(broken)
    assert not is_valid
    assert "种子" in msg
    with pytest.raises(ConfigValidationError):
        AasMatchConfig.validate_config(broken)


def test_validate_collects_every_problem():
    config = replace(PipelineConfig(), threads=0, namespace="nope")
    is_valid, msg = AasMatchConfig.validate(config)
    assert not is_valid
    assert "threads" in msg and "命名空间" in msg


def test_config_file_and_overrides_precedence(tmp_path):
    path = _write(tmp_path, {
        "seed": 7,
        "walk": {"strategy": "bfs", "depth": 2},
        "embedding": {"dim": 8, "scope": "filtered"},
        "match": {"policy": "topk:3"},
    })
    config = AasMatchConfig.load(path, overrides=["walk.depth=3", "match.metric=euclidean"])
    assert config.seed == 7
    assert config.walk.seed == 7 and config.hyperparams.seed == 7
    assert config.walk.strategy is WalkStrategy.BFS
    assert config.walk.depth == 3
    assert config.hyperparams.dim == 8
    assert config.embedding_scope is EmbeddingScope.FILTERED
    assert config.policy == DecisionPolicy.topk(3)
    assert config.metric is Metric.EUCLIDEAN


def test_env_var_supplies_config_path(tmp_path, monkeypatch):
    path = _write(tmp_path, {"match": {"strategy": "weighted_mean"}})
    monkeypatch.setenv(AasMatchConfig.ENV_CONFIG_PATH, str(path))
    assert AasMatchConfig.resolve_path(None) == path
    assert AasMatchConfig.load().strategy is GraphVectorStrategy.WEIGHTED_MEAN


def test_mapping_overrides_and_null_paths():
    config = AasMatchConfig.load(overrides={"paths.cache_dir": None, "threads": 4})
    assert config.cache_dir is None
    assert config.threads == 4


@pytest.mark.parametrize("data", [
    {"walkz": {}},
    {"walk": {"speed": 3}},
    {"walk": 3},
    {"rdf": {"namespace": "http://example.org/aas/", "extra": 1}},
])
def test_unknown_keys_rejected(tmp_path, data):
    with pytest.raises(ConfigValidationError):
        AasMatchConfig.load(_write(tmp_path, data))


@pytest.mark.parametrize("override", [
    "walk.depth=0",
    "walk.depth=2.5",
    "walk.strategy=zigzag",
    "walk.include_literals=yes",
    "embedding.dim=-1",
    "embedding.learning_rate=abc",
    "embedding.scope=everything",
    "match.metric=manhattan",
    "match.policy=topk:0",
    "seed=-1",
    "threads=0",
    "walk=3",
    "nosuchkey=1",
    "missing-equals-sign",
])
def test_bad_overrides_rejected(override):
    with pytest.raises(ConfigValidationError):
        AasMatchConfig.load(overrides=[override])


def test_unreadable_or_invalid_config_file(tmp_path):
    with pytest.raises(ConfigValidationError):
        AasMatchConfig.load(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{oops", encoding="utf-8")
    with pytest.raises(ConfigValidationError):
        AasMatchConfig.load(bad)
    array = tmp_path / "array.json"
    array.write_text("[1]", encoding="utf-8")
    with pytest.raises(ConfigValidationError):
        AasMatchConfig.load(array)


def test_parse_overrides_values():
    assert parse_overrides(["a=1", "b=true", "c=null", "d=topk:5", "e= 0.5 "]) == [
        ("a", 1), ("b", True), ("c", None), ("d", "topk:5"), ("e", 0.5),
    ]
    assert parse_overrides(None) == []


def test_to_dict_round_trips_through_load(tmp_path):
    """配置回显可以作为配置文件再次加载，得到相同配置。"""
    config = AasMatchConfig.load(overrides=["walk.depth=2", "match.policy=threshold:0.5"])
    echoed = config.to_dict()
    assert "threads" not in echoed
    assert list(echoed) == sorted(echoed)
    reloaded = AasMatchConfig.load(_write(tmp_path, echoed))
    assert reloaded == config


def test_ensure_directories(tmp_path):
    config = AasMatchConfig.load(overrides={
        "paths.cache_dir": str(tmp_path / "cache"),
        "paths.output_dir": str(tmp_path / "out" / "nested"),
    })
    AasMatchConfig.ensure_directories(config)
    assert (tmp_path / "cache").is_dir()
    assert (tmp_path / "out" / "nested").is_dir()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
