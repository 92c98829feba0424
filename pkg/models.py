"""数据模型定义

流水线共享的配置与报告结构。

数据模型：
- EmbeddingScope: 训练图的作用域（全部仓库 / 预筛选后的候选）
- PipelineConfig: 一次运行的完整配置（由 config.AasMatchConfig.load 构造）
- StepTiming: 单个步骤的耗时
- MatchReport: 一次匹配的结果报告（JSON / TSV 两种输出）

注意事项：
1. PipelineConfig.to_dict() 的键是排序的，报告回显配置时逐字节稳定
2. threads 只影响调度，不进入 to_dict()，所以 --threads 不改变任何输出字节
3. MatchReport.to_json(include_timings=False) 不含耗时与缓存状态，两次运行结果逐字节一致
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

# 支持相对导入（作为模块）和绝对导入（直接运行）
try:
    from .aas2rdf import DEFAULT_NAMESPACE
    from .walks import WalkConfig
    from .skipgram import Hyperparams
    from .matcher import DecisionPolicy, GraphVectorStrategy, Metric, MatchResult
except ImportError:
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).parent))
    from aas2rdf import DEFAULT_NAMESPACE
    from walks import WalkConfig
    from skipgram import Hyperparams
    from matcher import DecisionPolicy, GraphVectorStrategy, Metric, MatchResult


STATUS_OK = "ok"
STATUS_EMPTY_CANDIDATES = "empty-candidates"


class EmbeddingScope(Enum):
    """训练图作用域"""
    REPOSITORY = "repository"  # 全部仓库图 ∪ 查询图
    FILTERED = "filtered"  # 候选子图并集 ∪ 查询图


@dataclass(frozen=True)
class PipelineConfig:
    """流水线配置

    属性：
        namespace: 壳 IRI 命名空间
        walk: 游走配置（seed 与全局 seed 一致）
        hyperparams: 训练超参（seed 与全局 seed 一致）
        metric / strategy / policy: 匹配阶段的度量、图向量策略与决策策略
        embedding_scope: 训练图作用域
        repo_dir: AAS-JSON 仓库目录
        cache_dir: 向量缓存目录（None 表示不缓存）
        output_dir: 报告输出目录
        seed: 全局种子
        threads: 工作线程数（不影响结果）
    """
    namespace: str = DEFAULT_NAMESPACE
    walk: WalkConfig = field(default_factory=WalkConfig)
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    metric: Metric = Metric.COSINE
    strategy: GraphVectorStrategy = GraphVectorStrategy.MEAN
    policy: DecisionPolicy = field(default_factory=lambda: DecisionPolicy.hybrid(0.7, 5))
    embedding_scope: EmbeddingScope = EmbeddingScope.REPOSITORY
    repo_dir: Optional[str] = None
    cache_dir: Optional[str] = None
    output_dir: Optional[str] = None
    seed: int = 42
    threads: int = 1

    def to_dict(self) -> Dict[str, Any]:
        """配置回显（与配置文件同构，键排序）"""
        walk = self.walk
        hp = self.hyperparams
        data = {
            "seed": self.seed,
            "rdf": {"namespace": self.namespace},
            "walk": {
                "strategy": walk.strategy.value,
                "depth": walk.depth,
                "walks_per_entity": walk.walks_per_entity,
                "include_literals": walk.include_literals,
                "numeric_buckets": walk.numeric_buckets,
                "literal_retries": walk.literal_retries,
            },
            "embedding": {
                "dim": hp.dim,
                "window": hp.window,
                "epochs": hp.epochs,
                "negatives": hp.negatives,
                "learning_rate": hp.learning_rate,
                "min_learning_rate": hp.min_learning_rate,
                "min_count": hp.min_count,
                "batch_size": hp.batch_size,
                "save_context": hp.save_context,
                "scope": self.embedding_scope.value,
            },
            "match": {
                "metric": self.metric.value,
                "strategy": self.strategy.value,
                "policy": str(self.policy),
            },
            "paths": {
                "repo_dir": self.repo_dir,
                "cache_dir": self.cache_dir,
                "output_dir": self.output_dir,
            },
        }
        return _sorted(data)


def _sorted(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _sorted(value[k]) for k in sorted(value)}
    return value


@dataclass
class StepTiming:
    step: str
    seconds: float


@dataclass
class MatchReport:
    """一次匹配的报告

    属性：
        status: "ok" 或 "empty-candidates"
        query_id: 查询 AAS 的壳 id
        config: 解析后的完整配置（PipelineConfig.to_dict()）
        candidates: 预筛选后保留的壳 IRI（规范序）
        results: 排序结果
        vocab_size: 向量表 token 数
        sentences: 训练语料句子数（含量级句子）
        timings: 各步骤耗时
        cache_status: 向量缓存状态（hit / miss / disabled）
    """
    status: str
    query_id: str
    config: Dict[str, Any]
    candidates: List[str] = field(default_factory=list)
    results: List[MatchResult] = field(default_factory=list)
    vocab_size: int = 0
    sentences: int = 0
    timings: List[StepTiming] = field(default_factory=list)
    cache_status: str = "disabled"

    @property
    def execution_time(self) -> float:
        return sum(t.seconds for t in self.timings)

    def to_dict(self, include_timings: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "status": self.status,
            "query_id": self.query_id,
            "config": self.config,
            "candidates": list(self.candidates),
            "results": [
                {"rank": r.rank, "shell_iri": r.shell_iri, "raw": r.raw, "score": r.score}
                for r in self.results
            ],
            "vocab_size": self.vocab_size,
            "sentences": self.sentences,
        }
        if include_timings:
            data["timings"] = {t.step: round(t.seconds, 6) for t in self.timings}
            data["cache_status"] = self.cache_status
        return data

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    def to_tsv(self) -> str:
        lines = ["rank\tshell_iri\traw\tscore"]
        for r in self.results:
            lines.append(f"{r.rank}\t{r.shell_iri}\t{r.raw:.9g}\t{r.score:.9g}")
        return "\n".join(lines) + "\n"
