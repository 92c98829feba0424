"""aasmatch：AAS 混合图匹配检索

给定查询 AAS，在 AAS 仓库中检索语义相似的 AAS。

主要模块：
- aas_model: AAS-JSON 子集解析与校验
- rdf_core: RDF 项、三元组、图与 N-Triples
- aas2rdf: AAS → RDF 确定性映射
- sparql_engine: SPARQL 子集（SELECT/ASK + BGP + FILTER）与约束预筛选
- walks: 随机 / bfs 图游走
- skipgram: skip-gram 负采样训练
- matcher: 图级向量、相似度、决策策略与排序
- corpus: 合成语料与检索评估
- embedding_store: 向量文件与训练缓存
- pipeline: 端到端编排、错误码与实验
- config / models: 配置与共享数据结构

使用示例：
    from aasmatch import AasMatchConfig, load_aas_file, run_pipeline

    config = AasMatchConfig.load(overrides={"paths.repo_dir": "repo/"})
    report = run_pipeline(config, load_aas_file("query.json"))
    print(report.to_tsv())
"""

# 导出配置类与校验异常（硬失败）
from .config import AasMatchConfig, ConfigValidationError

# 导出数据模型
from .models import PipelineConfig, EmbeddingScope, MatchReport, StepTiming

# RDF 与映射
from .rdf_core import (
    IRI,
    Literal,
    BlankNode,
    Triple,
    Graph,
    add_triple,
    neighbors,
    serialize_ntriples,
    parse_ntriples,
)
from .aas_model import AASDocument, parse_aas_json, load_aas_file, validate, dump_aas_json
from .aas2rdf import MappingRules, map_document, build_repository

# 查询
from .sparql_engine import parse_query, eval_select, eval_ask, prefilter

# 游走与训练
from .walks import WalkConfig, WalkStrategy, WalkCorpus, generate_walks
from .skipgram import Hyperparams, EmbeddingTable, build_vocab, train, gradient_check
from .embedding_store import save_embeddings, load_embeddings, EmbeddingCache

# 匹配
from .matcher import (
    GraphVectorStrategy,
    Metric,
    DecisionPolicy,
    MatchResult,
    CandidateSet,
    graph_vector,
    cosine,
    euclidean,
    normalize_score,
    rank,
)

# 语料与评估
from .corpus import CorpusSpec, GroundTruth, gen_corpus, perturb, eval_retrieval

# 编排
from .pipeline import ErrorCode, PipelineError, run_pipeline, leave_one_out, run_experiment, calibrate

__all__ = [
    "AasMatchConfig",
    "ConfigValidationError",
    "PipelineConfig",
    "EmbeddingScope",
    "MatchReport",
    "StepTiming",
    "IRI",
    "Literal",
    "BlankNode",
    "Triple",
    "Graph",
    "add_triple",
    "neighbors",
    "serialize_ntriples",
    "parse_ntriples",
    "AASDocument",
    "parse_aas_json",
    "load_aas_file",
    "validate",
    "dump_aas_json",
    "MappingRules",
    "map_document",
    "build_repository",
    "parse_query",
    "eval_select",
    "eval_ask",
    "prefilter",
    "WalkConfig",
    "WalkStrategy",
    "WalkCorpus",
    "generate_walks",
    "Hyperparams",
    "EmbeddingTable",
    "build_vocab",
    "train",
    "gradient_check",
    "save_embeddings",
    "load_embeddings",
    "EmbeddingCache",
    "GraphVectorStrategy",
    "Metric",
    "DecisionPolicy",
    "MatchResult",
    "CandidateSet",
    "graph_vector",
    "cosine",
    "euclidean",
    "normalize_score",
    "rank",
    "CorpusSpec",
    "GroundTruth",
    "gen_corpus",
    "perturb",
    "eval_retrieval",
    "ErrorCode",
    "PipelineError",
    "run_pipeline",
    "leave_one_out",
    "run_experiment",
    "calibrate",
]
