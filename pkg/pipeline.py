"""匹配流水线（编排层）

职责：
把各模块串成端到端的检索流程，并把底层异常转换为带步骤标签的错误码。

流水线步骤：
    ingest → convert → prefilter → walk → train → rank

- ingest: 读取仓库目录下的 AAS-JSON（文件名排序）并校验，查询文档同样校验
- convert: 映射为 RDF，得到合并图与 [(壳 IRI, 子图)]
- prefilter: SPARQL 约束预筛选（无约束时用恒真约束）
- walk: 训练图 = 作用域内图 ∪ 查询图，起始实体 = 训练图全部主语
- train: 经由 EmbeddingCache 训练或命中缓存；无论哪种情况，向量表都由文件加载得到，
  所以缓存命中与未命中的分数完全一致
- rank: 图级向量 → 相似度 → 归一化 → 决策策略

错误处理：
1. 每个步骤内的异常经 _map_error_to_code() 映射为 ErrorCode，包装为 PipelineError(step, error_code, message)
2. ErrorCode.exit_code 给出 CLI 退出码：1 用法/配置，2 数据，3 内部
3. 空候选集不是错误：报告 status = "empty-candidates"

实验：
- leave_one_out(): 语料中每个文档依次作为查询，其余作为候选
- run_experiment(): 多种子留一法实验，输出 precision@k、MRR 与随机基线
- calibrate(): 阈值扫描，给出各阈值下的平均返回数与同模板精度
"""

import logging
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

# 支持相对导入（作为模块）和绝对导入（直接运行）
try:
    from .rdf_core import IRI, RdfError, NTriplesSyntaxError
    from .aas_model import AASDocument, AasParseError, load_aas_file, validate
    from .aas2rdf import MappingRules, MappingError, map_document, build_repository, shell_id_of
    from .sparql_engine import Query, SparqlError, parse_query, prefilter, tautology
    from .walks import WalkConfigError, WalkCorpus, generate_walks
    from .skipgram import EmbeddingTable, Hyperparams, SkipGramError, build_vocab, train
    from .matcher import (
        CandidateSet, DecisionPolicy, MatchError, apply_policy, rank, score_candidates,
    )
    from .corpus import (
        CorpusError, CorpusSpec, GroundTruth, ResultRow, eval_retrieval, gen_corpus, random_baseline_mrr,
        write_results_tsv,
    )
    from .embedding_store import EmbeddingCache, EmbeddingFileError, cache_key, load_embeddings, save_embeddings
    from .models import PipelineConfig, EmbeddingScope, MatchReport, StepTiming, STATUS_OK, STATUS_EMPTY_CANDIDATES
    from .config import ConfigValidationError
except ImportError:
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from rdf_core import IRI, RdfError, NTriplesSyntaxError
    from aas_model import AASDocument, AasParseError, load_aas_file, validate
    from aas2rdf import MappingRules, MappingError, map_document, build_repository, shell_id_of
    from sparql_engine import Query, SparqlError, parse_query, prefilter, tautology
    from walks import WalkConfigError, WalkCorpus, generate_walks
    from skipgram import EmbeddingTable, Hyperparams, SkipGramError, build_vocab, train
    from matcher import (
        CandidateSet, DecisionPolicy, MatchError, apply_policy, rank, score_candidates,
    )
    from corpus import (
        CorpusError, CorpusSpec, GroundTruth, ResultRow, eval_retrieval, gen_corpus, random_baseline_mrr,
        write_results_tsv,
    )
    from embedding_store import EmbeddingCache, EmbeddingFileError, cache_key, load_embeddings, save_embeddings
    from models import PipelineConfig, EmbeddingScope, MatchReport, StepTiming, STATUS_OK, STATUS_EMPTY_CANDIDATES
    from config import ConfigValidationError

logger = logging.getLogger(__name__)


class ErrorCode(Enum):
    """错误码枚举"""
    SUCCESS = "SUCCESS"
    CONFIG_INVALID = "CONFIG_INVALID"
    PARSE_FAILED = "PARSE_FAILED"
    VALIDATION_FAILED = "VALIDATION_FAILED"
    NTRIPLES_INVALID = "NTRIPLES_INVALID"
    MAPPING_FAILED = "MAPPING_FAILED"
    QUERY_INVALID = "QUERY_INVALID"
    TRAIN_FAILED = "TRAIN_FAILED"
    EMBEDDING_FILE_INVALID = "EMBEDDING_FILE_INVALID"
    MATCH_FAILED = "MATCH_FAILED"
    CORPUS_INVALID = "CORPUS_INVALID"
    IO_ERROR = "IO_ERROR"
    UNKNOWN_ERROR = "UNKNOWN_ERROR"

    @property
    def exit_code(self) -> int:
        if self is ErrorCode.SUCCESS:
            return 0
        if self is ErrorCode.CONFIG_INVALID:
            return 1
        if self is ErrorCode.UNKNOWN_ERROR:
            return 3
        return 2


class PipelineError(Exception):
    """流水线异常：带步骤标签与错误码"""
    def __init__(self, step: str, error_code: ErrorCode, message: str):
        self.step = step
        self.error_code = error_code
        self.message = message
        super().__init__(f"[{step}] {error_code.value}: {message}")


class DocumentInvalidError(Exception):
    """文档未通过校验"""
    def __init__(self, source: str, violations):
        self.source = source
        self.violations = list(violations)
        details = "; ".join(f"{v.kind.value} @ {v.path}: {v.message}" for v in self.violations)
        super().__init__(f"{source} 未通过校验: {details}")


def _map_error_to_code(error: Exception) -> tuple[ErrorCode, str]:
    """
    将底层异常映射为错误码和错误信息

    Args:
        error: 底层异常

    Returns:
        (错误码, 错误信息)
    """
    if isinstance(error, PipelineError):
        return (error.error_code, error.message)
    elif isinstance(error, (ConfigValidationError, WalkConfigError)):
        return (ErrorCode.CONFIG_INVALID, f"配置非法: {error}")
    elif isinstance(error, AasParseError):
        return (ErrorCode.PARSE_FAILED, f"AAS-JSON 解析失败: {error}")
    elif isinstance(error, DocumentInvalidError):
        return (ErrorCode.VALIDATION_FAILED, str(error))
    elif isinstance(error, NTriplesSyntaxError):
        return (ErrorCode.NTRIPLES_INVALID, f"N-Triples 语法错误: {error}")
    elif isinstance(error, (MappingError, RdfError)):
        return (ErrorCode.MAPPING_FAILED, f"RDF 映射失败: {error}")
    elif isinstance(error, SparqlError):
        return (ErrorCode.QUERY_INVALID, f"查询非法: {error}")
    elif isinstance(error, SkipGramError):
        return (ErrorCode.TRAIN_FAILED, f"训练失败: {error}")
    elif isinstance(error, EmbeddingFileError):
        return (ErrorCode.EMBEDDING_FILE_INVALID, f"向量文件非法: {error}")
    elif isinstance(error, MatchError):
        return (ErrorCode.MATCH_FAILED, f"匹配失败: {error}")
    elif isinstance(error, CorpusError):
        return (ErrorCode.CORPUS_INVALID, f"语料非法: {error}")
    elif isinstance(error, (OSError, UnicodeDecodeError)):
        return (ErrorCode.IO_ERROR, f"文件读写失败: {error}")
    else:
        return (ErrorCode.UNKNOWN_ERROR, f"未知错误: {type(error).__name__}: {error}")


def exit_code_for(error: Exception) -> int:
    error_code, _ = _map_error_to_code(error)
    return error_code.exit_code


@contextmanager
def _step(name: str, timings: List[StepTiming]) -> Iterator[None]:
    """计时并把步骤内的异常包装为 PipelineError"""
    start = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except Exception as e:
        error_code, error_msg = _map_error_to_code(e)
        logger.error(f"[pipeline] 步骤 {name} 失败: {error_msg}")
        raise PipelineError(name, error_code, error_msg) from e
    finally:
        elapsed = time.perf_counter() - start
        timings.append(StepTiming(name, elapsed))
        logger.info(f"[pipeline] 步骤 {name} 耗时 {elapsed:.3f} 秒")


# ---------------------------------------------------------------------------
# 基础步骤
# ---------------------------------------------------------------------------

def checked(doc: AASDocument, source: str) -> AASDocument:
    """校验文档，有违例则抛 DocumentInvalidError"""
    violations = validate(doc)
    if violations:
        raise DocumentInvalidError(source, violations)
    return doc


def load_repository(repo_dir: Union[str, Path]) -> List[AASDocument]:
    """读取目录下全部 *.json（按文件名排序）并逐个校验"""
    directory = Path(repo_dir)
    if not directory.is_dir():
        raise ConfigValidationError(f"仓库目录不存在: {directory}")
    docs = []
    for path in sorted(directory.glob("*.json")):
        try:
            docs.append(checked(load_aas_file(path), str(path)))
        except AasParseError as e:
            raise AasParseError(e.kind, f"{path.name}:{e.path}", e.message) from e
    logger.info(f"[pipeline] 仓库 {directory} 共 {len(docs)} 个文档")
    return docs


def as_constraint(constraint: Union[None, str, Query]) -> Query:
    if constraint is None:
        return tautology()
    if isinstance(constraint, Query):
        return constraint
    return parse_query(constraint)


def obtain_embeddings(
    corpus: Union[WalkCorpus, Sequence[Sequence[str]]],
    hp: Hyperparams,
    cache_dir: Optional[Union[str, Path]] = None,
) -> Tuple[EmbeddingTable, str]:
    """
    训练或命中缓存，返回 (从文件加载的向量表, 缓存状态)

    缓存状态：hit / miss / disabled（未配置缓存目录，经临时文件保存再加载）
    """
    sentences = corpus.training_sentences() if isinstance(corpus, WalkCorpus) else list(corpus)
    if cache_dir:
        cache = EmbeddingCache(cache_dir)
        key = cache_key(sentences, hp)
        table = cache.lookup(key)
        if table is not None:
            return table, "hit"
        trained = train(sentences, build_vocab(sentences, hp.min_count), hp)
        path = cache.store(key, trained, save_context=hp.save_context)
        return load_embeddings(path), "miss"

    trained = train(sentences, build_vocab(sentences, hp.min_count), hp)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "embeddings.txt"
        save_embeddings(trained, path, save_context=hp.save_context)
        return load_embeddings(path), "disabled"


# ---------------------------------------------------------------------------
# 端到端
# ---------------------------------------------------------------------------

def run_pipeline(
    config: PipelineConfig,
    query_doc: AASDocument,
    constraint: Union[None, str, Query] = None,
    repository: Optional[Sequence[AASDocument]] = None,
    table: Optional[EmbeddingTable] = None,
) -> MatchReport:
    """
    运行完整匹配流程

    Args:
        config: 流水线配置
        query_doc: 查询 AAS
        constraint: SPARQL 约束（文本或已解析查询），None 表示不过滤
        repository: 仓库文档；None 时从 config.repo_dir 读取
        table: 预先训练好的向量表；给出时跳过 walk/train

    Returns:
        MatchReport

    Raises:
        PipelineError: 任一步骤失败（带步骤标签）
    """
    timings: List[StepTiming] = []
    rules = MappingRules(config.namespace)
    query_id = query_doc.shells[0].id if query_doc.shells else ""
    logger.info(f"[pipeline] 开始匹配: 查询 {query_id}")

    with _step("ingest", timings):
        checked(query_doc, "查询文档")
        if repository is None:
            if not config.repo_dir:
                raise ConfigValidationError("未指定仓库目录（paths.repo_dir）")
            docs = load_repository(config.repo_dir)
        else:
            docs = [checked(doc, f"仓库文档 {i}") for i, doc in enumerate(repository)]

    with _step("convert", timings):
        merged, entries = build_repository(docs, rules)
        query_graph = map_document(query_doc, rules).freeze()

    with _step("prefilter", timings):
        candidates = prefilter(as_constraint(constraint), entries, config.threads)

    report = MatchReport(
        status=STATUS_OK,
        query_id=query_id,
        config=config.to_dict(),
        candidates=candidates.iris(),
        timings=timings,
    )
    if len(candidates) == 0:
        logger.info("[pipeline] 预筛选后没有候选，报告 empty-candidates")
        report.status = STATUS_EMPTY_CANDIDATES
        return report

    if table is None:
        with _step("walk", timings):
            scope = merged if config.embedding_scope is EmbeddingScope.REPOSITORY else candidates.union_graph()
            training_graph = scope.union(query_graph)
            corpus = generate_walks(training_graph, training_graph.subjects(), config.walk, config.threads)
        with _step("train", timings):
            table, report.cache_status = obtain_embeddings(corpus, config.hyperparams, config.cache_dir)
        report.sentences = len(corpus.training_sentences())
    report.vocab_size = len(table)

    with _step("rank", timings):
        report.results = rank(query_graph, candidates, table, config.strategy, config.metric, config.policy)

    logger.info(
        f"[pipeline] 匹配完成: {len(candidates)} 个候选, 返回 {len(report.results)} 个, "
        f"总耗时 {report.execution_time:.3f} 秒"
    )
    return report


# ---------------------------------------------------------------------------
# 留一法实验
# ---------------------------------------------------------------------------

Scored = List[Tuple[str, float, float]]


@dataclass
class LeaveOneOutScores:
    """留一法打分结果：查询壳 IRI → [(候选壳 IRI, 原始分, 归一化分)]"""
    scores: Dict[str, Scored]
    rules: MappingRules
    cache_status: str = "disabled"

    def doc_id(self, iri: str) -> str:
        return shell_id_of(IRI(iri), self.rules)


def leave_one_out_scores(docs: Sequence[AASDocument], config: PipelineConfig) -> LeaveOneOutScores:
    """
    语料中每个文档依次作为查询，其余文档作为候选，全部打分

    每个查询的训练图 = (语料 − 查询) ∪ 查询 = 整个语料，所以只训练一次。
    """
    timings: List[StepTiming] = []
    rules = MappingRules(config.namespace)
    with _step("convert", timings):
        for i, doc in enumerate(docs):
            checked(doc, f"语料文档 {i}")
        merged, entries = build_repository(docs, rules)
    with _step("walk", timings):
        corpus = generate_walks(merged, merged.subjects(), config.walk, config.threads)
    with _step("train", timings):
        table, cache_status = obtain_embeddings(corpus, config.hyperparams, config.cache_dir)

    def score_one(index: int) -> Tuple[str, Scored]:
        shell, sub = entries[index]
        others = CandidateSet.of([e for j, e in enumerate(entries) if j != index])
        return shell.value, score_candidates(sub, others, table, config.strategy, config.metric)

    with _step("rank", timings):
        if config.threads > 1 and len(entries) > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                pairs = list(pool.map(score_one, range(len(entries))))
        else:
            pairs = [score_one(i) for i in range(len(entries))]
    return LeaveOneOutScores(scores=dict(pairs), rules=rules, cache_status=cache_status)


def leave_one_out(
    docs: Sequence[AASDocument],
    config: PipelineConfig,
    policy: Optional[DecisionPolicy] = None,
    scores: Optional[LeaveOneOutScores] = None,
) -> List[ResultRow]:
    """留一法排序结果（以文档 id 表示），policy 缺省时用 config.policy"""
    policy = policy or config.policy
    scores = scores or leave_one_out_scores(docs, config)
    rows = []
    for query_iri in sorted(scores.scores):
        query_id = scores.doc_id(query_iri)
        for result in apply_policy(scores.scores[query_iri], policy):
            rows.append(ResultRow(query_id, result.rank, scores.doc_id(result.shell_iri), result.raw, result.score))
    return rows


def ranked_lists(rows: Sequence[ResultRow]) -> Dict[str, List[str]]:
    """ResultRow → query_id → 按名次排列的候选 id"""
    ranked: Dict[str, List[Tuple[int, str]]] = {}
    for row in rows:
        ranked.setdefault(row.query_id, []).append((row.rank, row.candidate_id))
    return {q: [c for _, c in sorted(items)] for q, items in ranked.items()}


def expected_random_mrr(truth: GroundTruth, k: Optional[int] = None) -> float:
    """留一法下随机排序的期望 MRR（逐查询精确期望的均值，只看前 k 个）"""
    ids = sorted(truth.template_of)
    if not ids:
        return 0.0
    values = []
    for query_id in ids:
        template = truth.template_of[query_id]
        relevant = sum(1 for other in ids if other != query_id and truth.template_of[other] == template)
        values.append(random_baseline_mrr(len(ids) - 1, relevant, cutoff=k))
    return float(np.mean(values))


@dataclass(frozen=True)
class ExperimentRow:
    seed: int
    precision_at_k: float
    mean_reciprocal_rank: float
    random_mrr: float

    @property
    def ratio(self) -> float:
        return self.mean_reciprocal_rank / self.random_mrr if self.random_mrr > 0 else float("inf")


@dataclass
class ExperimentReport:
    k: int
    rows: List[ExperimentRow] = field(default_factory=list)

    def min_ratio(self) -> float:
        return min((row.ratio for row in self.rows), default=0.0)

    def to_tsv(self) -> str:
        lines = [f"seed\tprecision_at_{self.k}\tmrr\trandom_mrr\tratio"]
        for row in self.rows:
            lines.append(
                f"{row.seed}\t{row.precision_at_k:.6f}\t{row.mean_reciprocal_rank:.6f}\t"
                f"{row.random_mrr:.6f}\t{row.ratio:.3f}"
            )
        return "\n".join(lines) + "\n"


def with_seed(config: PipelineConfig, seed: int) -> PipelineConfig:
    """把全局种子同时写入游走与训练配置"""
    return replace(
        config,
        seed=seed,
        walk=replace(config.walk, seed=seed),
        hyperparams=replace(config.hyperparams, seed=seed),
    )


def run_experiment(
    spec: CorpusSpec,
    config: PipelineConfig,
    seeds: Sequence[int],
    k: int = 5,
    output_dir: Optional[Union[str, Path]] = None,
) -> ExperimentReport:
    """
    多种子留一法检索实验：每个种子重新生成语料并训练，策略固定为 TopK(k)

    output_dir 给出时，每个种子的排序结果写入 results_seed<seed>.tsv
    """
    report = ExperimentReport(k=k)
    policy = DecisionPolicy.topk(k)
    for seed in seeds:
        docs, truth = gen_corpus(replace(spec, seed=seed))
        seeded = with_seed(config, seed)
        rows = leave_one_out(docs, seeded, policy)
        metrics = eval_retrieval(ranked_lists(rows), truth, k)
        baseline = expected_random_mrr(truth, k)
        row = ExperimentRow(seed, metrics.precision_at_k, metrics.mean_reciprocal_rank, baseline)
        report.rows.append(row)
        logger.info(
            f"[pipeline] 实验 seed={seed}: P@{k}={row.precision_at_k:.4f}, MRR={row.mean_reciprocal_rank:.4f}, "
            f"随机基线={baseline:.4f}"
        )
        if output_dir:
            out = Path(output_dir)
            out.mkdir(parents=True, exist_ok=True)
            write_results_tsv(rows, out / f"results_seed{seed}.tsv")
    return report


@dataclass(frozen=True)
class CalibrationRow:
    """单个阈值下的统计

    属性：
        t: 阈值
        mean_returned: 每个查询平均返回的候选数
        precision: 返回结果中同模板的比例（只统计有返回的查询；全部为空时为 None）
        answered: 有返回的查询数
    """
    t: float
    mean_returned: float
    precision: Optional[float]
    answered: int


def calibrate(
    docs: Sequence[AASDocument],
    truth: GroundTruth,
    config: PipelineConfig,
    thresholds: Sequence[float],
    scores: Optional[LeaveOneOutScores] = None,
) -> List[CalibrationRow]:
    """阈值扫描：对留一法分数逐个应用 Threshold(t)"""
    scores = scores or leave_one_out_scores(docs, config)
    rows = []
    for t in thresholds:
        policy = DecisionPolicy.threshold(t)
        returned = []
        precisions = []
        for query_iri, scored in sorted(scores.scores.items()):
            target = truth.template(scores.doc_id(query_iri))
            kept = apply_policy(scored, policy)
            returned.append(len(kept))
            if kept:
                same = sum(1 for r in kept if truth.template(scores.doc_id(r.shell_iri)) == target)
                precisions.append(same / len(kept))
        rows.append(CalibrationRow(
            t=t,
            mean_returned=float(np.mean(returned)) if returned else 0.0,
            precision=float(np.mean(precisions)) if precisions else None,
            answered=len(precisions),
        ))
    return rows


def calibration_tsv(rows: Sequence[CalibrationRow]) -> str:
    lines = ["t\tmean_returned\tprecision\tanswered"]
    for row in rows:
        precision = "-" if row.precision is None else f"{row.precision:.6f}"
        lines.append(f"{row.t:g}\t{row.mean_returned:.3f}\t{precision}\t{row.answered}")
    return "\n".join(lines) + "\n"
