"""aasmatch 命令行入口

本模块提供按次调用的 CLI：每次执行为独立进程，训练结果通过缓存目录下的
cache_index.json 与向量文件跨进程复用。

推荐入口：
    python cli.py <子命令> [参数...]
    python cli.py --debug <子命令>   # 输出详细日志

常用示例：
    python cli.py ingest repo/*.json                      # 解析并校验 AAS-JSON
    python cli.py convert pump.json -o pump.nt            # 映射为 N-Triples
    python cli.py query --graph repo.nt --query q.rq      # SELECT 输出 TSV 绑定表
    python cli.py gen-corpus -o corpus/                   # 生成合成语料与真值
    python cli.py pipeline --query q.json --repo corpus/  # 端到端匹配
    python cli.py experiment --seeds 10                   # 留一法检索实验
    python cli.py help [topic]                            # 详细帮助
"""

import sys
import argparse
import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

# 确保项目根目录在路径中（适配直接运行与平铺导入）
_project_root = Path(__file__).resolve().parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from config import AasMatchConfig, ConfigValidationError, parse_overrides
from rdf_core import Graph, serialize_ntriples, parse_ntriples
from aas_model import load_aas_file, validate
from aas2rdf import MappingRules, map_document, shells_in, subgraph_of, extract_fields, document_fields
from sparql_engine import QueryForm, parse_query, eval_select, eval_ask, prefilter
from walks import generate_walks, save_corpus, load_corpus
from skipgram import build_vocab, train
from corpus import (
    GROUND_TRUTH_FILE, default_corpus_spec, load_corpus_spec, gen_corpus, write_corpus,
    read_ground_truth, read_results_tsv, eval_retrieval,
)
from embedding_store import save_embeddings, load_embeddings
from pipeline import (
    PipelineError, exit_code_for, load_repository, run_pipeline, run_experiment,
    calibrate, calibration_tsv, checked,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def _configure_logging(debug: bool) -> None:
    """
    配置根日志级别与格式。

    - debug=False（默认）：仅 CRITICAL，命令输出只保留最终结果。
    - debug=True：INFO 级别，可看到每个步骤耗时、缓存命中、训练损失等。
    """
    level = logging.INFO if debug else logging.CRITICAL
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - [%(levelname)s] - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        force=True,  # 覆盖可能已存在的 handler（适配被测试框架导入）
    )
    logging.getLogger().setLevel(level)


class UsageError(Exception):
    """命令行用法错误（退出码 1）"""
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """参数错误抛 UsageError，由 main 统一转成退出码 1"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# 详细帮助文本：供 help 子命令查阅，比 argparse -h 更完整（含输入输出格式与返回码）。
_DETAILED_HELP = {
    "overview": """\
aasmatch 详细说明

定位：在 AAS 仓库中检索与查询 AAS 语义相似的 AAS。
流程：AAS-JSON → RDF（N-Triples）→ SPARQL 预筛选 → 图游走 → skip-gram 向量 → 图向量匹配。

推荐入口：
  python cli.py <子命令> [参数...]
  python cli.py --debug <子命令> [参数...]   # 输出详细日志

分步子命令：ingest / convert / query / walk / train / match
端到端：pipeline
语料与评估：gen-corpus / eval / experiment / calibrate

返回码（所有子命令一致）：
  - 0：成功（预筛选后没有候选也算成功，报告状态为 empty-candidates）
  - 1：用法错误（参数、配置文件、--set 覆盖项非法）
  - 2：数据错误（JSON/N-Triples/查询语法、文档校验、向量文件格式）
  - 3：内部错误
""",
    "config": """\
配置

来源优先级：--set key=value > 子命令专用参数 > --config 文件 > 环境变量 AASMATCH_CONFIG 指向的文件 > 默认值
  - 项目根目录的 .env 会在导入 config 时自动加载（python-dotenv），可在其中设置 AASMATCH_CONFIG。
  - 配置文件为 JSON，键：seed, threads, rdf.namespace, walk.*, embedding.*, match.*, paths.*
  - 未知键直接报错（返回码 1）。

示例：
  python cli.py --set walk.depth=3 --set match.policy=topk:5 pipeline --query q.json --repo repo/
""",
    "ingest": """\
ingest：解析并校验 AAS-JSON 文件

用法：
  python cli.py ingest <file.json> [<file.json> ...]

输出（stdout，每个文件一行；有违例时逐条列出）：
  <文件>\\tOK\\tshells=<n>\\tsubmodels=<m>
  <文件>\\t<违例种类>\\t<JSON 路径>\\t<说明>

返回码：0 全部通过；2 存在解析错误或违例。
""",
    "convert": """\
convert：把 AAS-JSON 映射为 N-Triples

用法：
  python cli.py convert <file.json> [-o out.nt] [--verify]

说明：
  - 命名空间取 rdf.namespace（--set rdf.namespace=http://... 可覆盖）
  - --verify：从图中还原字段并与原文档比较，不一致返回 2
""",
    "query": """\
query：在图上执行 SPARQL 子集查询

用法：
  python cli.py query --graph <file.nt> --query <file.rq>
  python cli.py query <data.nt|data.json> ... --query "<SPARQL>"
  python cli.py query <data> --query-file q.rq
  python cli.py query <data> --query-file constraint.rq --prefilter

输出：
  - SELECT：TSV 绑定表（表头为 ?变量）
  - ASK：true / false
  - --prefilter：把查询当作约束（必须含 ?aas），逐行输出满足约束的壳 IRI
""",
    "walk": """\
walk：生成游走语料

用法：
  python cli.py walk --graph <file.nt> --out corpus.txt [--strategy random|bfs] [--depth N] [--walks N]
  python cli.py walk <data.nt|data.json> ... -o corpus.txt [--strategy random|bfs] [--depth N] [--walks N]

输出文件：每行一句，token 以空格分隔（百分号编码），真实游走在前；有量级句子时先写一行 %，其后是量级句子。
""",
    "train": """\
train：在游走语料上训练 skip-gram 向量

用法：
  python cli.py train corpus.txt -o embeddings.txt [--dim N] [--epochs N] [--window N] [--negatives N]

输出文件：aasmatch-emb v1 格式，另写 embeddings.txt.counts（以及 save_context 时的 .context）。
""",
    "match": """\
match：对仓库做匹配

用法：
  python cli.py match --query q.json --repo repo/ [--constraint c.rq] [--metric cosine|euclidean] [--strategy root|mean|weighted_mean] [--policy hybrid:0.7,5]
  python cli.py match --query q.json --repo repo/ --embeddings embeddings.txt

说明：
  - --constraint 的值以 .rq 结尾或是已存在的文件时读取文件，否则按 SPARQL 文本处理
  - 不给 --embeddings 时经缓存训练（同 pipeline）

输出：TSV（rank, shell_iri, raw, score）；--json 时输出完整报告。
""",
    "pipeline": """\
pipeline：端到端匹配（ingest → convert → prefilter → walk → train → rank）

用法：
  python cli.py pipeline --query q.json --repo repo/ [--constraint-file c.rq] [-o report.json] [--timings] [--tsv]

说明：
  - 训练结果按 (语料, 超参) 缓存到 paths.cache_dir；命中时日志含 cache-hit
  - 报告回显完整配置；不加 --timings 时两次运行的报告逐字节一致
""",
    "gen-corpus": """\
gen-corpus：生成合成语料

用法：
  python cli.py gen-corpus --out corpus/ [--spec spec.json] [--instances 10] [--synonym-rate 0.3] [--drop-rate 0.2] [--seed 42]

输出：每个文档一个 .json，外加 ground_truth.tsv（doc_id, template_id, perturbations）。
""",
    "eval": """\
eval：按真值评估排序结果

用法：
  python cli.py eval --results results.tsv --truth corpus/ground_truth.tsv [--k 5]

results.tsv 列：query_id, rank, candidate_id, raw, score
输出：逐查询 precision@k 与倒数名次，最后一行为均值。
""",
    "experiment": """\
experiment：多种子留一法检索实验

用法：
  python cli.py experiment [--seeds 10 | --seed-list 1,2,3] [--k 5] [--spec spec.json] [-o out/]

每个种子重新生成语料并训练，策略固定 TopK(k)；输出 precision@k、MRR、随机基线与两者之比。
""",
    "calibrate": """\
calibrate：阈值扫描（用于经验确定 Threshold / Hybrid 的 t）

用法：
  python cli.py calibrate --corpus corpus/ [--thresholds 0.5,0.6,0.7,0.8,0.9]

输出：各 t 下每个查询平均返回数、返回结果的同模板精度、有返回的查询数。
""",
}


# ---------------------------------------------------------------------------
# 公共工具
# ---------------------------------------------------------------------------

def _load_config(args, extra: Optional[Dict[str, Any]] = None):
    """合成配置：子命令专用参数先写入，--set 覆盖其后"""
    overrides: Dict[str, Any] = {}
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    for key, value in (extra or {}).items():
        if value is not None:
            overrides[key] = value
    overrides.update(dict(parse_overrides(getattr(args, "set", None) or [])))
    return AasMatchConfig.load(getattr(args, "config", None), overrides)


def _load_graph(paths: List[str], rules: MappingRules) -> Graph:
    """.nt 按 N-Triples 解析，其余按 AAS-JSON 校验后映射；多个文件合并"""
    merged = Graph()
    for name in paths:
        path = Path(name)
        if path.suffix == ".nt":
            graph = parse_ntriples(path.read_bytes())
        else:
            graph = map_document(checked(load_aas_file(path), str(path)), rules)
        for triple in graph:
            merged.add(triple)
    return merged


def _text_or_file(value: str) -> str:
    """以 .rq 结尾或指向已存在文件时读取文件内容，否则按查询文本原样返回"""
    path = Path(value)
    try:
        is_file = path.is_file()
    except (OSError, ValueError):
        is_file = False
    if is_file or path.suffix == ".rq":
        return path.read_text(encoding="utf-8")
    return value


def _graph_files(args) -> List[str]:
    """位置参数与 --graph 合并；两者都没有时为用法错误"""
    files = list(getattr(args, "files", None) or []) + list(getattr(args, "graphs", None) or [])
    if not files:
        raise UsageError("需要至少一个数据文件（位置参数或 --graph）")
    return files


def _read_query_text(args) -> str:
    if getattr(args, "query_file", None):
        return Path(args.query_file).read_text(encoding="utf-8")
    if getattr(args, "query", None):
        return _text_or_file(args.query)
    raise UsageError("需要 --query 或 --query-file")


def _constraint_text(args) -> Optional[str]:
    if getattr(args, "constraint_file", None):
        return Path(args.constraint_file).read_text(encoding="utf-8")
    constraint = getattr(args, "constraint", None)
    return _text_or_file(constraint) if constraint else None


def _write_or_print(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"应为逗号分隔的数字: {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"应为逗号分隔的整数: {text!r}")


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------

def cmd_ingest(args):
    """解析并校验 AAS-JSON；有违例返回 2。"""
    failed = False
    for name in args.files:
        doc = load_aas_file(name)
        for warning in doc.warnings:
            print(f"{name}\twarning\t{warning}", file=sys.stderr)
        violations = validate(doc)
        if not violations:
            print(f"{name}\tOK\tshells={len(doc.shells)}\tsubmodels={len(doc.submodels)}")
            continue
        failed = True
        for v in violations:
            print(f"{name}\t{v.kind.value}\t{v.path}\t{v.message}")
    return EXIT_DATA if failed else EXIT_OK


def cmd_convert(args):
    """AAS-JSON → N-Triples；--verify 时检查映射可还原全部字段。"""
    config = _load_config(args)
    rules = MappingRules(config.namespace)
    doc = checked(load_aas_file(args.file), args.file)
    graph = map_document(doc, rules)
    if args.verify and extract_fields(graph, rules) != document_fields(doc):
        print(f"错误: {args.file} 映射后无法还原全部字段", file=sys.stderr)
        return EXIT_DATA
    data = serialize_ntriples(graph)
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_OK


def cmd_query(args):
    """在图上执行 SELECT / ASK，或作为约束对仓库预筛选。"""
    config = _load_config(args)
    rules = MappingRules(config.namespace)
    query = parse_query(_read_query_text(args))
    graph = _load_graph(_graph_files(args), rules)

    if args.prefilter:
        entries = [(s, subgraph_of(graph, s).freeze()) for s in shells_in(graph, rules)]
        for iri in prefilter(query, entries, config.threads).iris():
            print(iri)
        return EXIT_OK

    graph.freeze()
    if query.form is QueryForm.ASK:
        print("true" if eval_ask(query, graph) else "false")
    else:
        sys.stdout.write(eval_select(query, graph).to_tsv())
    return EXIT_OK


def cmd_walk(args):
    """从图中全部主语出发生成游走语料。"""
    config = _load_config(args, {
        "walk.strategy": args.strategy,
        "walk.depth": args.depth,
        "walk.walks_per_entity": args.walks,
    })
    graph = _load_graph(_graph_files(args), MappingRules(config.namespace)).freeze()
    corpus = generate_walks(graph, graph.subjects(), config.walk, config.threads)
    save_corpus(corpus, args.output)
    print(f"sentences={len(corpus.sentences)}\tbucket_sentences={len(corpus.bucket_sentences)}\t-> {args.output}")
    return EXIT_OK


def cmd_train(args):
    """在游走语料上训练并保存向量。"""
    config = _load_config(args, {
        "embedding.dim": args.dim,
        "embedding.epochs": args.epochs,
        "embedding.window": args.window,
        "embedding.negatives": args.negatives,
    })
    hp = config.hyperparams
    corpus = load_corpus(args.corpus)
    table = train(corpus, build_vocab(corpus, hp.min_count), hp)
    save_embeddings(table, args.output, save_context=hp.save_context)
    final = f"{table.epoch_losses[-1]:.6f}" if table.epoch_losses else "-"
    print(f"tokens={len(table)}\tdim={table.dim}\tfinal_loss={final}\t-> {args.output}")
    return EXIT_OK


def _match_overrides(args) -> Dict[str, Any]:
    return {
        "paths.repo_dir": getattr(args, "repo", None),
        "match.policy": getattr(args, "policy", None),
        "match.metric": getattr(args, "metric", None),
        "match.strategy": getattr(args, "strategy", None),
        "embedding.scope": getattr(args, "scope", None),
    }


def _print_report(report, args) -> None:
    if getattr(args, "tsv", False):
        text = report.to_tsv()
    else:
        text = report.to_json(include_timings=getattr(args, "timings", False))
    _write_or_print(text, getattr(args, "output", None))


def cmd_match(args):
    """对仓库做匹配；给出 --embeddings 时跳过游走与训练，否则经缓存训练。"""
    config = _load_config(args, _match_overrides(args))
    AasMatchConfig.ensure_directories(config)
    table = load_embeddings(args.embeddings) if args.embeddings else None
    query_doc = load_aas_file(args.query_doc)
    report = run_pipeline(config, query_doc, _constraint_text(args), table=table)
    args.tsv = not args.json
    _print_report(report, args)
    return EXIT_OK


def cmd_pipeline(args):
    """端到端匹配并输出报告。"""
    config = _load_config(args, _match_overrides(args))
    AasMatchConfig.ensure_directories(config)
    query_doc = load_aas_file(args.query_doc)
    report = run_pipeline(config, query_doc, _constraint_text(args))
    if not args.output and config.output_dir:
        args.output = str(Path(config.output_dir) / ("report.tsv" if args.tsv else "report.json"))
    _print_report(report, args)
    if args.output:
        print(f"status={report.status}\tresults={len(report.results)}\t-> {args.output}")
    return EXIT_OK


def _corpus_spec(args):
    spec = load_corpus_spec(args.spec) if args.spec else default_corpus_spec()
    changes = {}
    if args.instances is not None:
        changes["instances_per_template"] = args.instances
    if args.synonym_rate is not None:
        changes["synonym_rate"] = args.synonym_rate
    if args.drop_rate is not None:
        changes["drop_rate"] = args.drop_rate
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    return replace(spec, **changes) if changes else spec


def cmd_gen_corpus(args):
    """生成合成语料与真值文件。"""
    spec = _corpus_spec(args)
    docs, truth = gen_corpus(spec)
    written = write_corpus(docs, truth, args.output)
    print(f"documents={len(written)}\ttemplates={len(spec.templates)}\t-> {args.output}")
    return EXIT_OK


def cmd_eval(args):
    """按真值计算 precision@k 与 MRR。"""
    if args.k < 1:
        raise UsageError(f"--k 必须是正整数: {args.k}")
    results = read_results_tsv(args.results)
    truth = read_ground_truth(args.truth)
    metrics = eval_retrieval(results, truth, args.k)
    sys.stdout.write(metrics.to_tsv())
    return EXIT_OK


def cmd_experiment(args):
    """多种子留一法检索实验。"""
    if args.k < 1:
        raise UsageError(f"--k 必须是正整数: {args.k}")
    config = _load_config(args, _match_overrides(args))
    spec = _corpus_spec(args)
    seeds = _int_list(args.seed_list) if args.seed_list else list(range(spec.seed, spec.seed + args.seeds))
    report = run_experiment(spec, config, seeds, args.k, output_dir=args.output)
    sys.stdout.write(report.to_tsv())
    print(f"#min_ratio\t{report.min_ratio():.3f}")
    return EXIT_OK


def cmd_calibrate(args):
    """在已生成的语料目录上扫描阈值。"""
    config = _load_config(args, _match_overrides(args))
    corpus_dir = Path(args.corpus)
    docs = load_repository(corpus_dir)
    truth = read_ground_truth(corpus_dir / GROUND_TRUTH_FILE)
    rows = calibrate(docs, truth, config, _float_list(args.thresholds))
    sys.stdout.write(calibration_tsv(rows))
    return EXIT_OK


def cmd_help(args):
    """输出详细帮助（比 -h 更完整）。默认 overview。"""
    topic = (args.topic or "overview").strip()
    text = _DETAILED_HELP.get(topic) or _DETAILED_HELP.get(topic.replace("_", "-")) or _DETAILED_HELP["overview"]
    print(text.rstrip())
    if topic not in _DETAILED_HELP:
        print("\n可用 help 主题：")
        print(f"  {', '.join(sorted(_DETAILED_HELP))}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# 参数解析
# ---------------------------------------------------------------------------

def _add_match_options(p) -> None:
    p.add_argument("--query", dest="query_doc", required=True, help="查询 AAS-JSON 文件")
    p.add_argument("--repo", default=None, help="仓库目录（覆盖 paths.repo_dir）")
    p.add_argument("--constraint", default=None, help="SPARQL 约束文本或 .rq 文件（含 ?aas）")
    p.add_argument("--constraint-file", default=None, help="SPARQL 约束文件")
    p.add_argument("--policy", default=None, help="决策策略：threshold:t / topk:k / hybrid:t,k")
    p.add_argument("--metric", choices=["cosine", "euclidean"], default=None)
    p.add_argument("--strategy", choices=["root", "mean", "weighted_mean"], default=None, help="图向量策略")
    p.add_argument("-o", "--output", default=None, help="报告输出文件（默认 stdout）")


def _add_corpus_options(p) -> None:
    p.add_argument("--spec", default=None, help="语料规格 JSON（默认 5 个内置模板）")
    p.add_argument("--instances", type=int, default=None, help="每个模板的实例数")
    p.add_argument("--synonym-rate", type=float, default=None)
    p.add_argument("--drop-rate", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="aasmatch",
        description="aasmatch：AAS 混合图匹配检索。使用子命令执行具体功能。",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  python cli.py ingest repo/*.json                       # 解析并校验
  python cli.py convert pump.json -o pump.nt             # 映射为 N-Triples
  python cli.py gen-corpus -o corpus/                    # 生成合成语料
  python cli.py pipeline --query corpus/q.json --repo corpus/ --timings
  python cli.py experiment --seeds 10 --k 5              # 留一法实验
  python cli.py --debug pipeline --query q.json --repo repo/   # 开启详细日志
  python cli.py help [topic]                             # 详细帮助
        """,
    )
    parser.add_argument("--debug", action="store_true", help="输出详细日志（默认静默，只输出命令最终结果）")
    parser.add_argument("--config", default=None, help="配置文件（JSON）；默认取环境变量 AASMATCH_CONFIG")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="覆盖配置项，可重复")
    parser.add_argument("--threads", type=int, default=None, help="工作线程数（不影响任何输出）")
    subparsers = parser.add_subparsers(dest="command", help="子命令")

    # ingest
    p_ingest = subparsers.add_parser("ingest", help="解析并校验 AAS-JSON 文件")
    p_ingest.add_argument("files", nargs="+", help="AAS-JSON 文件")
    p_ingest.set_defaults(func=cmd_ingest)

    # convert
    p_convert = subparsers.add_parser("convert", help="AAS-JSON → N-Triples")
    p_convert.add_argument("file", help="AAS-JSON 文件")
    p_convert.add_argument("-o", "--output", default=None, help="输出 .nt 文件（默认 stdout）")
    p_convert.add_argument("--verify", action="store_true", help="检查映射可还原全部字段")
    p_convert.set_defaults(func=cmd_convert)

    # query
    p_query = subparsers.add_parser("query", help="执行 SPARQL 子集查询")
    p_query.add_argument("files", nargs="*", help=".nt 或 AAS-JSON 文件")
    p_query.add_argument("--graph", dest="graphs", action="append", default=[], help="数据文件，可重复（与位置参数合并）")
    p_query.add_argument("--query", default=None, help="查询文本或 .rq 文件")
    p_query.add_argument("--query-file", default=None, help="查询文件")
    p_query.add_argument("--prefilter", action="store_true", help="作为约束预筛选，输出满足约束的壳 IRI")
    p_query.set_defaults(func=cmd_query)

    # walk
    p_walk = subparsers.add_parser("walk", help="生成游走语料")
    p_walk.add_argument("files", nargs="*", help=".nt 或 AAS-JSON 文件")
    p_walk.add_argument("--graph", dest="graphs", action="append", default=[], help="数据文件，可重复（与位置参数合并）")
    p_walk.add_argument("-o", "--output", "--out", dest="output", required=True, help="语料输出文件")
    p_walk.add_argument("--strategy", choices=["random", "bfs"], default=None)
    p_walk.add_argument("--depth", type=int, default=None)
    p_walk.add_argument("--walks", type=int, default=None, help="每个起始实体的游走条数")
    p_walk.set_defaults(func=cmd_walk)

    # train
    p_train = subparsers.add_parser("train", help="训练 skip-gram 向量")
    p_train.add_argument("corpus", help="游走语料文件")
    p_train.add_argument("-o", "--output", required=True, help="向量输出文件")
    p_train.add_argument("--dim", type=int, default=None)
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--window", type=int, default=None)
    p_train.add_argument("--negatives", type=int, default=None)
    p_train.set_defaults(func=cmd_train)

    # match
    p_match = subparsers.add_parser("match", help="对仓库做匹配，输出 TSV")
    _add_match_options(p_match)
    p_match.add_argument("--embeddings", default=None, help="已训练的向量文件（不给时经缓存训练）")
    p_match.add_argument("--json", action="store_true", help="输出完整 JSON 报告")
    p_match.set_defaults(func=cmd_match)

    # pipeline
    p_pipeline = subparsers.add_parser("pipeline", help="端到端匹配")
    _add_match_options(p_pipeline)
    p_pipeline.add_argument("--scope", choices=["repository", "filtered"], default=None, help="训练图作用域")
    p_pipeline.add_argument("--timings", action="store_true", help="报告中包含步骤耗时与缓存状态")
    p_pipeline.add_argument("--tsv", action="store_true", help="只输出排序结果 TSV")
    p_pipeline.set_defaults(func=cmd_pipeline)

    # gen-corpus
    p_gen = subparsers.add_parser("gen-corpus", help="生成合成语料")
    _add_corpus_options(p_gen)
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("-o", "--output", "--out", dest="output", required=True, help="输出目录")
    p_gen.set_defaults(func=cmd_gen_corpus)

    # eval
    p_eval = subparsers.add_parser("eval", help="按真值评估排序结果")
    p_eval.add_argument("--results", required=True, help="排序结果 TSV")
    p_eval.add_argument("--truth", required=True, help="ground_truth.tsv")
    p_eval.add_argument("--k", type=int, default=5)
    p_eval.set_defaults(func=cmd_eval)

    # experiment
    p_exp = subparsers.add_parser("experiment", help="多种子留一法检索实验")
    _add_corpus_options(p_exp)
    p_exp.add_argument("--seeds", type=int, default=10, help="从语料种子开始连续的种子个数")
    p_exp.add_argument("--seed-list", default=None, help="逗号分隔的种子列表（优先于 --seeds）")
    p_exp.add_argument("--k", type=int, default=5)
    p_exp.add_argument("--metric", choices=["cosine", "euclidean"], default=None)
    p_exp.add_argument("--strategy", choices=["root", "mean", "weighted_mean"], default=None, help="图向量策略")
    p_exp.add_argument("-o", "--output", default=None, help="每个种子的结果 TSV 输出目录")
    p_exp.set_defaults(func=cmd_experiment)

    # calibrate
    p_cal = subparsers.add_parser("calibrate", help="阈值扫描")
    p_cal.add_argument("--corpus", required=True, help="gen-corpus 生成的目录")
    p_cal.add_argument("--thresholds", default="0.5,0.6,0.7,0.8,0.9,0.95")
    p_cal.add_argument("--metric", choices=["cosine", "euclidean"], default=None)
    p_cal.add_argument("--strategy", choices=["root", "mean", "weighted_mean"], default=None, help="图向量策略")
    p_cal.set_defaults(func=cmd_calibrate)

    # help
    p_help = subparsers.add_parser("help", help="输出更详细的帮助说明（比 -h 更详细）")
    p_help.add_argument("topic", nargs="?", default="overview", help="帮助主题：overview/config/<子命令名>")
    p_help.set_defaults(func=cmd_help)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """解析全局与子命令参数，配置日志，派发到对应 cmd_* 并返回退出码（0/1/2/3）。"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"错误: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # -h/--help
        return int(e.code or 0)

    _configure_logging(getattr(args, "debug", False))
    if not args.command:
        parser.print_help()
        return EXIT_OK

    try:
        return args.func(args)
    except (UsageError, ConfigValidationError) as e:
        print(f"错误: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as e:
        print(f"错误: 步骤 {e.step} 失败 [{e.error_code.value}] {e.message}", file=sys.stderr)
        return e.error_code.exit_code
    except Exception as e:
        code = exit_code_for(e)
        if code == EXIT_INTERNAL:
            logger.exception(f"{args.command} 失败")
        print(f"错误: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
