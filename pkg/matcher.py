"""匹配模块（测试流水线第 4 步）

图级向量 → 相似度 → [0,1] 归一化 → 决策策略 → 排序结果。

核心内容：
- graph_vector(): root / mean / weighted_mean 三种图级向量
- cosine() / euclidean(): 两种度量
- normalize_score(): cosine → (raw+1)/2，euclidean → 1/(1+raw)，均严格单调
- apply_policy(): 阈值 / TopK / 混合三种决策策略（纯函数）
- rank(): 对候选集打分并按策略输出

注意事项：
1. 策略只看归一化分数 s，t 始终在 [0,1] 上解释，与度量无关
2. 排序键为 (s 降序, 壳 IRI 升序)，名次从 1 连续
3. 两个向量逐元素相等时 cosine 精确返回 1.0，重复文档在 Threshold(1.0) 下也能命中
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

# 支持相对导入（作为模块）和绝对导入（直接运行）
try:
    from .rdf_core import Graph, IRI, BlankNode, Term, term_key
    from .walks import term_token
    from .skipgram import EmbeddingTable
except ImportError:
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).parent))
    from rdf_core import Graph, IRI, BlankNode, Term, term_key
    from walks import term_token
    from skipgram import EmbeddingTable

logger = logging.getLogger(__name__)


class MatchError(Exception):
    """匹配模块基础异常"""
    pass


class ZeroVectorError(MatchError):
    pass


class DimensionMismatchError(MatchError):
    pass


class OutOfDomainError(MatchError):
    """原始分数不在度量的值域内"""
    pass


class NoResolvableTokensError(MatchError):
    """图中没有任何实体 token 出现在向量表中"""
    pass


class EmptyCandidatesError(MatchError):
    pass


class PolicyError(MatchError):
    """决策策略参数非法或文本无法解析"""
    pass


class GraphVectorStrategy(Enum):
    ROOT = "root"
    MEAN = "mean"
    WEIGHTED_MEAN = "weighted_mean"


class Metric(Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"


class PolicyKind(Enum):
    THRESHOLD = "threshold"
    TOPK = "topk"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class DecisionPolicy:
    """决策策略

    - threshold(t): 返回全部 s ≥ t
    - topk(k): 返回分数最高的 min(k, n) 个
    - hybrid(t, k): 返回 s ≥ t 的集合；不足 k 个时按 s 降序补足到 min(k, n)
    """
    kind: PolicyKind
    t: Optional[float] = None
    k: Optional[int] = None

    def __post_init__(self):
        if self.kind in (PolicyKind.THRESHOLD, PolicyKind.HYBRID):
            if self.t is None or not (0.0 <= self.t <= 1.0):
                raise PolicyError(f"阈值 t 必须在 [0,1] 内: {self.t!r}")
        if self.kind in (PolicyKind.TOPK, PolicyKind.HYBRID):
            if self.k is None or isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
                raise PolicyError(f"k 必须是正整数: {self.k!r}")

    @classmethod
    def threshold(cls, t: float) -> "DecisionPolicy":
        return cls(PolicyKind.THRESHOLD, t=float(t))

    @classmethod
    def topk(cls, k: int) -> "DecisionPolicy":
        return cls(PolicyKind.TOPK, k=k)

    @classmethod
    def hybrid(cls, t: float, k: int) -> "DecisionPolicy":
        return cls(PolicyKind.HYBRID, t=float(t), k=k)

    def __str__(self) -> str:
        if self.kind is PolicyKind.THRESHOLD:
            return f"threshold:{self.t:g}"
        if self.kind is PolicyKind.TOPK:
            return f"topk:{self.k}"
        return f"hybrid:{self.t:g},{self.k}"


def parse_policy(text: str) -> DecisionPolicy:
    """解析 `threshold:t`、`topk:k`、`hybrid:t,k`"""
    name, sep, args = text.strip().partition(":")
    if not sep:
        raise PolicyError(f"策略格式应为 kind:参数，实际为 {text!r}")
    try:
        kind = PolicyKind(name.strip().lower())
    except ValueError:
        raise PolicyError(f"未知策略 {name!r}（可选 threshold / topk / hybrid）")
    parts = [p.strip() for p in args.split(",")]
    try:
        if kind is PolicyKind.THRESHOLD and len(parts) == 1:
            return DecisionPolicy.threshold(float(parts[0]))
        if kind is PolicyKind.TOPK and len(parts) == 1:
            return DecisionPolicy.topk(int(parts[0]))
        if kind is PolicyKind.HYBRID and len(parts) == 2:
            return DecisionPolicy.hybrid(float(parts[0]), int(parts[1]))
    except ValueError as e:
        raise PolicyError(f"策略参数无法解析: {text!r} ({e})") from e
    raise PolicyError(f"策略参数个数不对: {text!r}")


@dataclass(frozen=True)
class MatchResult:
    shell_iri: str
    raw: float
    score: float
    rank: int


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """预筛选后的候选集 [(壳 IRI, 子图)]，壳 IRI 互不相同，按规范序排列"""
    entries: Tuple[Tuple[IRI, Graph], ...] = ()

    def __post_init__(self):
        seen = set()
        for shell, _ in self.entries:
            if shell in seen:
                raise MatchError(f"候选集中壳 IRI 重复: {shell.value}")
            seen.add(shell)

    @classmethod
    def of(cls, entries: Sequence[Tuple[IRI, Graph]]) -> "CandidateSet":
        return cls(tuple(sorted(entries, key=lambda e: term_key(e[0]))))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[IRI, Graph]]:
        return iter(self.entries)

    def iris(self) -> List[str]:
        return [shell.value for shell, _ in self.entries]

    def union_graph(self) -> Graph:
        merged = Graph()
        for _, sub in self.entries:
            for triple in sub:
                merged.add(triple)
        return merged


# ---------------------------------------------------------------------------
# 图级向量
# ---------------------------------------------------------------------------

def entity_tokens(graph: Graph) -> List[str]:
    """图中主语/宾语位置的 IRI 与空白节点 token（去重，规范序）"""
    return [term_token(term) for term in graph.entities()]


def find_root(graph: Graph) -> Term:
    """没有入边的唯一主语"""
    targets = {t.object for t in graph if isinstance(t.object, (IRI, BlankNode))}
    roots = [s for s in graph.subjects() if s not in targets]
    if len(roots) != 1:
        raise MatchError(f"无法确定根实体：找到 {len(roots)} 个没有入边的主语")
    return roots[0]


def graph_vector(
    graph: Graph,
    table: EmbeddingTable,
    strategy: GraphVectorStrategy = GraphVectorStrategy.MEAN,
    root: Optional[Term] = None,
) -> np.ndarray:
    """计算图级向量

    Raises:
        NoResolvableTokensError: 没有任何可解析 token
    """
    if strategy is GraphVectorStrategy.ROOT:
        node = root if root is not None else find_root(graph)
        token = term_token(node)
        vector = table.vector(token)
        if vector is None:
            raise NoResolvableTokensError(f"根实体 {token} 不在向量表中")
        return vector.copy()

    tokens = [tok for tok in entity_tokens(graph) if tok in table]
    if not tokens:
        raise NoResolvableTokensError(f"图（{len(graph)} 个三元组）中没有可解析的实体 token")
    rows = table.vectors[[table.index[tok] for tok in tokens]]
    if strategy is GraphVectorStrategy.MEAN:
        return rows.mean(axis=0)

    weights = np.array([1.0 / max(table.count(tok), 1) for tok in tokens])
    return (weights[:, None] * rows).sum(axis=0) / weights.sum()


# ---------------------------------------------------------------------------
# 度量与归一化
# ---------------------------------------------------------------------------

def _pair(v1, v2) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(v1, dtype=np.float64).ravel()
    b = np.asarray(v2, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(f"向量维度不一致: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def cosine(v1, v2) -> float:
    """余弦相似度，结果在 [-1, 1]

    Raises:
        ZeroVectorError: 任一向量范数为 0
        DimensionMismatchError: 维度不一致
    """
    a, b = _pair(v1, v2)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("零向量没有余弦相似度")
    if np.array_equal(a, b):
        return 1.0
    value = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, value))


def euclidean(x, y) -> float:
    a, b = _pair(x, y)
    return float(np.sqrt(np.sum((a - b) ** 2)))


def normalize_score(raw: float, metric: Metric) -> float:
    """把原始分数映射到 [0,1]（越大越相似）"""
    if math.isnan(raw):
        raise OutOfDomainError("原始分数为 NaN")
    if metric is Metric.COSINE:
        if not (-1.0 <= raw <= 1.0):
            raise OutOfDomainError(f"余弦值超出 [-1,1]: {raw}")
        return (raw + 1.0) / 2.0
    if raw < 0.0 or math.isinf(raw):
        raise OutOfDomainError(f"欧氏距离必须是有限非负数: {raw}")
    return 1.0 / (1.0 + raw)


def raw_score(v1: np.ndarray, v2: np.ndarray, metric: Metric) -> float:
    if metric is Metric.COSINE:
        return cosine(v1, v2)
    return euclidean(v1, v2)


# ---------------------------------------------------------------------------
# 决策策略与排序
# ---------------------------------------------------------------------------

def apply_policy(scored: Sequence[Tuple[str, float, float]], policy: DecisionPolicy) -> List[MatchResult]:
    """对 (壳 IRI, 原始分, 归一化分) 列表应用决策策略

    排序键 (s 降序, 壳 IRI 升序)；名次从 1 连续。
    """
    ordered = sorted(scored, key=lambda item: (-item[2], item[0]))
    n = len(ordered)
    if policy.kind is PolicyKind.THRESHOLD:
        kept = [item for item in ordered if item[2] >= policy.t]
    elif policy.kind is PolicyKind.TOPK:
        kept = ordered[:min(policy.k, n)]
    else:
        # 排序后 R_t 恰是前缀
        above = sum(1 for item in ordered if item[2] >= policy.t)
        kept = ordered[:max(above, min(policy.k, n))]
    return [MatchResult(iri, raw, score, i) for i, (iri, raw, score) in enumerate(kept, start=1)]


def score_candidates(
    query: Graph,
    candidates: CandidateSet,
    table: EmbeddingTable,
    strategy: GraphVectorStrategy = GraphVectorStrategy.MEAN,
    metric: Metric = Metric.COSINE,
) -> List[Tuple[str, float, float]]:
    """对每个候选打分；没有可解析 token 的候选告警跳过"""
    if len(candidates) == 0:
        raise EmptyCandidatesError("候选集为空")
    query_vec = graph_vector(query, table, strategy)
    scored = []
    for shell, sub in candidates:
        try:
            vec = graph_vector(sub, table, strategy, root=shell if strategy is GraphVectorStrategy.ROOT else None)
        except NoResolvableTokensError as e:
            logger.warning(f"[matcher] 跳过候选 {shell.value}: {e}")
            continue
        raw = raw_score(query_vec, vec, metric)
        scored.append((shell.value, raw, normalize_score(raw, metric)))
    return scored


def rank(
    query: Graph,
    candidates: CandidateSet,
    table: EmbeddingTable,
    strategy: GraphVectorStrategy = GraphVectorStrategy.MEAN,
    metric: Metric = Metric.COSINE,
    policy: Optional[DecisionPolicy] = None,
) -> List[MatchResult]:
    """对候选集打分、归一化并按策略输出

    Raises:
        EmptyCandidatesError: 候选集为空
        NoResolvableTokensError: 查询图无法得到向量
    """
    policy = policy or DecisionPolicy.hybrid(0.7, 5)
    scored = score_candidates(query, candidates, table, strategy, metric)
    results = apply_policy(scored, policy)
    logger.info(
        f"[matcher] 排序完成: {len(scored)} 个候选打分, 策略 {policy} 返回 {len(results)} 个"
        f"（度量 {metric.value}, 图向量 {strategy.value}）"
    )
    return results
