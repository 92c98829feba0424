"""图游走（测试流水线第 3 步）

从 RDF 图抽取 token 序列，作为 skip-gram 的训练语料。

游走策略：
- random: 每个起始实体生成 walks_per_entity 条随机游走，每条游走有独立的确定性随机源
- bfs: 按规范序枚举深度内全部最大路径，去重后截取前 walks_per_entity 条

token 规则：
- IRI → IRI 字符串；空白节点 → `_:id`；字面量 → 规范化词形
- 数值字面量（整数/小数/浮点族）规范化：整数去前导零和 `+`，小数去尾随零
- numeric_buckets 打开时，每条以数值字面量结尾的游走额外产生一条“量级句子”，
  末 token 换成 `mag:+e2` 这样的数量级 token，使相近量级的数值共享上下文

注意事项：
1. 输出只由 (图, 起始实体, 配置) 决定，threads 只影响调度
2. 句子满足：实体开头、实体/谓词交替、长度 ≤ 2·depth + 1
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union
from urllib.parse import unquote

import numpy as np

# 支持相对导入（作为模块）和绝对导入（直接运行）
try:
    from .rdf_core import Graph, IRI, Literal, BlankNode, Term, XSD, term_key
except ImportError:
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from rdf_core import Graph, IRI, Literal, BlankNode, Term, XSD, term_key

logger = logging.getLogger(__name__)

MAGNITUDE_PREFIX = "mag:"
# 语料文件中量级句子段的起始行；encode_token 会把 % 编码为 %25，句子行不可能恰为 "%"
BUCKET_SECTION = "%"

_INTEGER_TYPES = {
    XSD + name for name in (
        "integer", "int", "long", "short", "byte",
        "nonNegativeInteger", "positiveInteger", "nonPositiveInteger", "negativeInteger",
        "unsignedLong", "unsignedInt", "unsignedShort", "unsignedByte",
    )
}
_DECIMAL_TYPES = {XSD + "decimal"}
_FLOAT_TYPES = {XSD + "float", XSD + "double"}


class WalkConfigError(Exception):
    """游走配置非法"""
    pass


class WalkStrategy(Enum):
    RANDOM = "random"
    BFS = "bfs"


@dataclass(frozen=True)
class WalkConfig:
    """游走配置

    属性：
        strategy: random 或 bfs
        depth: 最大步数（每步一条边）
        walks_per_entity: 每个起始实体的游走条数（bfs 为上限）
        seed: 全局种子
        include_literals: 是否输出字面量 token
        numeric_buckets: 是否为数值字面量生成量级句子
        literal_retries: 不输出字面量时，落在字面量边上的重采样次数
    """
    strategy: WalkStrategy = WalkStrategy.RANDOM
    depth: int = 4
    walks_per_entity: int = 100
    seed: int = 42
    include_literals: bool = True
    numeric_buckets: bool = True
    literal_retries: int = 3

    def __post_init__(self):
        if not isinstance(self.strategy, WalkStrategy):
            raise WalkConfigError(f"未知游走策略: {self.strategy!r}")
        for name in ("depth", "walks_per_entity"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise WalkConfigError(f"{name} 必须是 ≥ 1 的整数: {value!r}")
        if isinstance(self.literal_retries, bool) or not isinstance(self.literal_retries, int) or self.literal_retries < 0:
            raise WalkConfigError(f"literal_retries 必须是非负整数: {self.literal_retries!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise WalkConfigError(f"seed 必须是非负整数: {self.seed!r}")


@dataclass
class WalkCorpus:
    """游走语料

    sentences 是图上的真实游走；bucket_sentences 是由以数值字面量结尾的游走派生的量级句子。
    """
    sentences: List[List[str]] = field(default_factory=list)
    bucket_sentences: List[List[str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)

    def training_sentences(self) -> List[List[str]]:
        return self.sentences + self.bucket_sentences


# ---------------------------------------------------------------------------
# token
# ---------------------------------------------------------------------------

def _numeric_kind(literal: Literal) -> Optional[str]:
    if literal.datatype in _INTEGER_TYPES:
        return "integer"
    if literal.datatype in _DECIMAL_TYPES:
        return "decimal"
    if literal.datatype in _FLOAT_TYPES:
        return "float"
    return None


def canonical_lexical(literal: Literal) -> str:
    """数值字面量的规范词形；非数值或无法解析时原样返回"""
    kind = _numeric_kind(literal)
    text = literal.lexical.strip()
    try:
        if kind == "integer":
            return str(int(text))
        if kind == "decimal":
            value = Decimal(text)
            if not value.is_finite():
                return literal.lexical
            out = format(value.normalize(), "f")
            if "." not in out:
                out += ".0"
            return "0.0" if out in ("-0.0", "0.0") else out
        if kind == "float":
            return repr(float(text))
    except (ValueError, InvalidOperation):
        pass
    return literal.lexical


def term_token(term: Term) -> str:
    if isinstance(term, IRI):
        return term.value
    if isinstance(term, BlankNode):
        return term.to_ntriples()
    if isinstance(term, Literal):
        return canonical_lexical(term)
    raise TypeError(f"不是 RDF 项: {term!r}")


def magnitude_token(literal: Literal) -> Optional[str]:
    """数值字面量的数量级 token：230 → mag:+e2，-0.05 → mag:-e-2，0 → mag:0；非数值返回 None"""
    if _numeric_kind(literal) is None:
        return None
    try:
        value = Decimal(canonical_lexical(literal))
    except InvalidOperation:
        return None
    if not value.is_finite():
        return None
    if value.is_zero():
        return f"{MAGNITUDE_PREFIX}0"
    sign = "-" if value.is_signed() else "+"
    return f"{MAGNITUDE_PREFIX}{sign}e{value.adjusted()}"


# ---------------------------------------------------------------------------
# 游走
# ---------------------------------------------------------------------------

def _entity_seed(entity: Term) -> int:
    digest = hashlib.sha256(entity.to_ntriples().encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class _Walker:
    """单个图上的游走器；邻接表按需构建并缓存（只读图上并发安全）"""

    def __init__(self, graph: Graph, config: WalkConfig):
        self.graph = graph
        self.config = config
        self._adjacency: Dict[Term, List[Tuple[Term, Term]]] = {}

    def edges(self, node: Term) -> List[Tuple[Term, Term]]:
        cached = self._adjacency.get(node)
        if cached is None:
            cached = self.graph.neighbors(node)
            self._adjacency[node] = cached
        return cached

    def random_walk(self, entity: Term, index: int) -> Tuple[List[str], Term]:
        cfg = self.config
        rng = np.random.default_rng([cfg.seed, _entity_seed(entity), index])
        tokens = [term_token(entity)]
        node = entity
        last: Term = entity
        for _ in range(cfg.depth):
            edges = self.edges(node)
            if not edges:
                break
            predicate, obj = edges[int(rng.integers(len(edges)))]
            if isinstance(obj, Literal) and not cfg.include_literals:
                for _ in range(cfg.literal_retries):
                    predicate, obj = edges[int(rng.integers(len(edges)))]
                    if not isinstance(obj, Literal):
                        break
                if isinstance(obj, Literal):
                    break
            tokens.append(term_token(predicate))
            tokens.append(term_token(obj))
            last = obj
            if isinstance(obj, Literal):
                break
            node = obj
        return tokens, last

    def paths(self, node: Term, remaining: int) -> Iterator[Tuple[Tuple[str, ...], Term]]:
        """深度内全部最大路径，按规范边序枚举"""
        edges = self.edges(node)
        if not self.config.include_literals:
            edges = [(p, o) for p, o in edges if not isinstance(o, Literal)]
        head = term_token(node)
        if remaining == 0 or not edges:
            yield (head,), node
            return
        for predicate, obj in edges:
            if isinstance(obj, Literal):
                yield (head, term_token(predicate), term_token(obj)), obj
                continue
            for rest, last in self.paths(obj, remaining - 1):
                yield (head, term_token(predicate)) + rest, last

    def walks_for(self, entity: Term) -> List[Tuple[List[str], Term]]:
        cfg = self.config
        if cfg.strategy is WalkStrategy.RANDOM:
            return [self.random_walk(entity, i) for i in range(cfg.walks_per_entity)]
        seen = set()
        out = []
        for tokens, last in self.paths(entity, cfg.depth):
            if tokens in seen:
                continue
            seen.add(tokens)
            out.append((list(tokens), last))
            if len(out) >= cfg.walks_per_entity:
                break
        return out


def generate_walks(
    graph: Graph,
    start_entities: Iterable[Term],
    config: Optional[WalkConfig] = None,
    threads: int = 1,
) -> WalkCorpus:
    """从起始实体生成游走语料

    起始实体去重后按规范序处理；不是图中主语的实体告警跳过。
    """
    config = config or WalkConfig()
    starts = []
    for entity in sorted(set(start_entities), key=term_key):
        if not graph.has_subject(entity):
            logger.warning(f"[walks] 跳过起始实体 {entity.to_ntriples()}：不是图中的主语")
            continue
        starts.append(entity)

    walker = _Walker(graph, config)
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_entity = list(pool.map(walker.walks_for, starts))
    else:
        per_entity = [walker.walks_for(entity) for entity in starts]

    corpus = WalkCorpus()
    for walks in per_entity:
        for tokens, last in walks:
            corpus.sentences.append(tokens)
            if config.numeric_buckets and isinstance(last, Literal):
                bucket = magnitude_token(last)
                if bucket is not None:
                    corpus.bucket_sentences.append(tokens[:-1] + [bucket])

    logger.info(
        f"[walks] 游走完成: 策略 {config.strategy.value}, {len(starts)} 个起始实体, "
        f"{len(corpus.sentences)} 条句子, {len(corpus.bucket_sentences)} 条量级句子"
    )
    return corpus


# ---------------------------------------------------------------------------
# 语料文件
# ---------------------------------------------------------------------------

def encode_token(token: str) -> str:
    return (
        token.replace("%", "%25")
        .replace(" ", "%20")
        .replace("\t", "%09")
        .replace("\n", "%0A")
        .replace("\r", "%0D")
    )


def decode_token(text: str) -> str:
    return unquote(text)


def save_corpus(corpus: WalkCorpus, path: Union[str, Path]) -> None:
    """每行一句，token 以空格分隔；量级句子写在分隔行之后"""
    lines = [" ".join(encode_token(t) for t in sentence) for sentence in corpus.sentences]
    if corpus.bucket_sentences:
        lines.append(BUCKET_SECTION)
        lines.extend(" ".join(encode_token(t) for t in sentence) for sentence in corpus.bucket_sentences)
    Path(path).write_bytes(("".join(line + "\n" for line in lines)).encode("utf-8"))


def load_corpus(path: Union[str, Path]) -> WalkCorpus:
    corpus = WalkCorpus()
    target = corpus.sentences
    for line in Path(path).read_text(encoding="utf-8").split("\n"):
        if not line:
            continue
        if line == BUCKET_SECTION:
            target = corpus.bucket_sentences
            continue
        target.append([decode_token(t) for t in line.split(" ")])
    return corpus
