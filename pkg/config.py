"""aasmatch 配置管理

定义流水线的默认值，并把配置文件、环境变量与命令行覆盖合成为 PipelineConfig。

配置来源（优先级从高到低）：
1. 命令行覆盖：--set key=value（点号键，如 walk.depth=3、match.policy=topk:5）
2. 配置文件：--config <path>，未给出时取环境变量 AASMATCH_CONFIG
3. 本模块中的类属性默认值

配置文件格式（单个 JSON 对象，所有键可选）：
    {
      "seed": 42,
      "threads": 1,
      "rdf": {"namespace": "http://example.org/aas/"},
      "walk": {"strategy": "random", "depth": 4, "walks_per_entity": 100, ...},
      "embedding": {"dim": 64, "window": 5, "epochs": 5, "scope": "repository", ...},
      "match": {"metric": "cosine", "strategy": "mean", "policy": "hybrid:0.7,5"},
      "paths": {"repo_dir": null, "cache_dir": ".aasmatch_cache", "output_dir": null}
    }

注意事项：
1. 未知键直接报错（硬失败），不会被静默忽略
2. 全局 seed 同时写入 WalkConfig.seed 与 Hyperparams.seed
3. 配置在运行前完整校验：validate_config() 不通过即抛 ConfigValidationError
"""

import copy
import json
import os
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Union

from dotenv import load_dotenv

# 先加载项目根目录下的 .env（如果存在），例如 AASMATCH_CONFIG
_BASE_DIR = Path(__file__).parent
load_dotenv(dotenv_path=_BASE_DIR / ".env", override=False)

# 支持相对导入（作为模块）和绝对导入（直接运行）
try:
    from .models import PipelineConfig, EmbeddingScope
    from .aas2rdf import DEFAULT_NAMESPACE, check_namespace, MappingError
    from .walks import WalkConfig, WalkStrategy, WalkConfigError
    from .skipgram import Hyperparams, HyperparamsError
    from .matcher import GraphVectorStrategy, Metric, PolicyError, parse_policy
except ImportError:
    # 如果相对导入失败，尝试绝对导入（用于直接运行或测试）
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from models import PipelineConfig, EmbeddingScope
    from aas2rdf import DEFAULT_NAMESPACE, check_namespace, MappingError
    from walks import WalkConfig, WalkStrategy, WalkConfigError
    from skipgram import Hyperparams, HyperparamsError
    from matcher import GraphVectorStrategy, Metric, PolicyError, parse_policy

logger = logging.getLogger(__name__)


class ConfigValidationError(Exception):
    """配置验证失败（硬失败）：配置文件、覆盖项或取值不合法，运行前应直接报错。"""
    pass


class AasMatchConfig:
    """aasmatch 配置类"""

    # ========== 环境变量 ==========
    ENV_CONFIG_PATH = "AASMATCH_CONFIG"  # 配置文件路径回退

    # ========== 全局 ==========
    SEED = 42
    THREADS = 1

    # ========== RDF 映射 ==========
    NAMESPACE = DEFAULT_NAMESPACE

    # ========== 游走 ==========
    WALK_STRATEGY = "random"  # random / bfs
    WALK_DEPTH = 4
    WALKS_PER_ENTITY = 100
    INCLUDE_LITERALS = True
    NUMERIC_BUCKETS = True  # 数值字面量额外生成量级句子
    LITERAL_RETRIES = 3

    # ========== 训练 ==========
    EMBEDDING_DIM = 64
    WINDOW = 5
    EPOCHS = 5
    NEGATIVES = 5
    LEARNING_RATE = 0.025
    MIN_LEARNING_RATE = 0.0001
    MIN_COUNT = 1
    BATCH_SIZE = 256
    SAVE_CONTEXT = False
    EMBEDDING_SCOPE = "repository"  # repository / filtered

    # ========== 匹配 ==========
    METRIC = "cosine"  # cosine / euclidean
    GRAPH_VECTOR_STRATEGY = "mean"  # root / mean / weighted_mean
    POLICY = "hybrid:0.7,5"

    # ========== 路径配置 ==========
    BASE_DIR = _BASE_DIR
    REPO_DIR: Optional[str] = None
    CACHE_DIR: Optional[str] = ".aasmatch_cache"
    OUTPUT_DIR: Optional[str] = None

    @classmethod
    def defaults(cls) -> Dict[str, Any]:
        """默认配置树（与配置文件同构）"""
        return {
            "seed": cls.SEED,
            "threads": cls.THREADS,
            "rdf": {"namespace": cls.NAMESPACE},
            "walk": {
                "strategy": cls.WALK_STRATEGY,
                "depth": cls.WALK_DEPTH,
                "walks_per_entity": cls.WALKS_PER_ENTITY,
                "include_literals": cls.INCLUDE_LITERALS,
                "numeric_buckets": cls.NUMERIC_BUCKETS,
                "literal_retries": cls.LITERAL_RETRIES,
            },
            "embedding": {
                "dim": cls.EMBEDDING_DIM,
                "window": cls.WINDOW,
                "epochs": cls.EPOCHS,
                "negatives": cls.NEGATIVES,
                "learning_rate": cls.LEARNING_RATE,
                "min_learning_rate": cls.MIN_LEARNING_RATE,
                "min_count": cls.MIN_COUNT,
                "batch_size": cls.BATCH_SIZE,
                "save_context": cls.SAVE_CONTEXT,
                "scope": cls.EMBEDDING_SCOPE,
            },
            "match": {
                "metric": cls.METRIC,
                "strategy": cls.GRAPH_VECTOR_STRATEGY,
                "policy": cls.POLICY,
            },
            "paths": {
                "repo_dir": cls.REPO_DIR,
                "cache_dir": cls.CACHE_DIR,
                "output_dir": cls.OUTPUT_DIR,
            },
        }

    @classmethod
    def resolve_path(cls, path: Optional[Union[str, Path]]) -> Optional[Path]:
        """配置文件路径：显式参数优先，其次环境变量 AASMATCH_CONFIG"""
        if path:
            return Path(path)
        env = os.environ.get(cls.ENV_CONFIG_PATH, "").strip()
        return Path(env) if env else None

    @classmethod
    def load(
        cls,
        path: Optional[Union[str, Path]] = None,
        overrides: Optional[Union[Sequence[str], Mapping[str, Any]]] = None,
    ) -> PipelineConfig:
        """
        合成配置：默认值 ← 配置文件 ← 覆盖项

        Args:
            path: 配置文件路径；None 时回退到环境变量 AASMATCH_CONFIG
            overrides: ["walk.depth=3", ...] 或 {"walk.depth": 3, ...}

        Raises:
            ConfigValidationError: 文件不可读、JSON 非法、未知键或取值非法
        """
        tree = cls.defaults()
        config_path = cls.resolve_path(path)
        if config_path is not None:
            _merge(tree, _read_config_file(config_path), "")
            logger.info(f"[config] 已加载配置文件 {config_path}")
        for key, value in parse_overrides(overrides):
            _set_dotted(tree, key, value)
        config = cls.from_dict(tree)
        cls.validate_config(config)
        return config

    @classmethod
    def from_dict(cls, tree: Mapping[str, Any]) -> PipelineConfig:
        """由完整配置树构造 PipelineConfig（取值错误统一转为 ConfigValidationError）"""
        try:
            seed = _int(tree["seed"], "seed")
            walk = tree["walk"]
            emb = tree["embedding"]
            match = tree["match"]
            paths = tree["paths"]
            walk_config = WalkConfig(
                strategy=WalkStrategy(walk["strategy"]),
                depth=_int(walk["depth"], "walk.depth"),
                walks_per_entity=_int(walk["walks_per_entity"], "walk.walks_per_entity"),
                seed=seed,
                include_literals=_bool(walk["include_literals"], "walk.include_literals"),
                numeric_buckets=_bool(walk["numeric_buckets"], "walk.numeric_buckets"),
                literal_retries=_int(walk["literal_retries"], "walk.literal_retries"),
            )
            hyperparams = Hyperparams(
                dim=_int(emb["dim"], "embedding.dim"),
                window=_int(emb["window"], "embedding.window"),
                epochs=_int(emb["epochs"], "embedding.epochs"),
                negatives=_int(emb["negatives"], "embedding.negatives"),
                learning_rate=float(emb["learning_rate"]),
                min_learning_rate=float(emb["min_learning_rate"]),
                min_count=_int(emb["min_count"], "embedding.min_count"),
                seed=seed,
                batch_size=_int(emb["batch_size"], "embedding.batch_size"),
                save_context=_bool(emb["save_context"], "embedding.save_context"),
            )
            return PipelineConfig(
                namespace=str(tree["rdf"]["namespace"]),
                walk=walk_config,
                hyperparams=hyperparams,
                metric=Metric(match["metric"]),
                strategy=GraphVectorStrategy(match["strategy"]),
                policy=parse_policy(str(match["policy"])),
                embedding_scope=EmbeddingScope(emb["scope"]),
                repo_dir=_optional_str(paths["repo_dir"]),
                cache_dir=_optional_str(paths["cache_dir"]),
                output_dir=_optional_str(paths["output_dir"]),
                seed=seed,
                threads=_int(tree["threads"], "threads"),
            )
        except ConfigValidationError:
            raise
        except (WalkConfigError, HyperparamsError, PolicyError) as e:
            raise ConfigValidationError(str(e))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigValidationError(f"配置取值非法: {e}")

    @classmethod
    def validate(cls, config: PipelineConfig) -> tuple[bool, str]:
        """
        验证配置是否满足运行前提

        Returns:
            (is_valid, error_message): 配置是否有效，错误信息
        """
        errors = []
        try:
            check_namespace(config.namespace)
        except MappingError as e:
            errors.append(f"命名空间非法: {e}")
        if config.threads < 1:
            errors.append(f"threads 必须 ≥ 1，当前为 {config.threads}")
        if config.seed < 0:
            errors.append(f"seed 必须是非负整数，当前为 {config.seed}")
        if config.walk.seed != config.seed or config.hyperparams.seed != config.seed:
            errors.append("游走与训练的种子必须与全局 seed 一致")
        if config.repo_dir is not None and not Path(config.repo_dir).is_dir():
            errors.append(f"仓库目录不存在: {config.repo_dir}")
        if errors:
            return False, "; ".join(errors)
        return True, ""

    @classmethod
    def validate_config(cls, config: PipelineConfig) -> None:
        """
        配置自检：硬失败（FAIL FAST），不返回布尔值。
        未通过则直接抛出 ConfigValidationError。
        """
        is_valid, error_message = cls.validate(config)
        if not is_valid:
            raise ConfigValidationError(error_message)

    @classmethod
    def ensure_directories(cls, config: PipelineConfig) -> None:
        """确保缓存与输出目录存在"""
        for directory in (config.cache_dir, config.output_dir):
            if directory:
                Path(directory).mkdir(parents=True, exist_ok=True)


# ---------------------------------------------------------------------------
# 内部工具
# ---------------------------------------------------------------------------

def _read_config_file(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigValidationError(f"无法读取配置文件 {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigValidationError(f"配置文件 {path} 不是合法 JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigValidationError(f"配置文件 {path} 顶层必须是 JSON 对象")
    return data


def _merge(tree: Dict[str, Any], data: Mapping[str, Any], prefix: str) -> None:
    """把 data 合并进 tree；tree 中不存在的键视为未知键"""
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        if key not in tree:
            raise ConfigValidationError(f"未知配置键: {dotted}")
        if isinstance(tree[key], dict):
            if not isinstance(value, dict):
                raise ConfigValidationError(f"配置键 {dotted} 必须是 JSON 对象")
            _merge(tree[key], value, dotted + ".")
        else:
            tree[key] = copy.deepcopy(value)


def parse_overrides(overrides: Optional[Union[Sequence[str], Mapping[str, Any]]]):
    if not overrides:
        return []
    if isinstance(overrides, Mapping):
        return list(overrides.items())
    items = []
    for text in overrides:
        key, sep, raw = text.partition("=")
        if not sep or not key.strip():
            raise ConfigValidationError(f"覆盖项格式应为 key=value: {text!r}")
        items.append((key.strip(), _parse_value(raw.strip())))
    return items


def _parse_value(raw: str) -> Any:
    """覆盖值优先按 JSON 解析（数字、布尔、null），否则按字符串"""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _set_dotted(tree: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    node = tree
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            raise ConfigValidationError(f"未知配置键: {key}")
        node = child
    leaf = parts[-1]
    if leaf not in node or isinstance(node[leaf], dict):
        raise ConfigValidationError(f"未知配置键: {key}")
    node[leaf] = value


def _int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigValidationError(f"{name} 必须是整数: {value!r}")
    return value


def _bool(value: Any, name: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigValidationError(f"{name} 必须是 true/false: {value!r}")
    return value


def _optional_str(value: Any) -> Optional[str]:
    if value is None or value == "":
        return None
    return str(value)
