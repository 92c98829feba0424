"""向量文件读写与训练缓存

文件格式（UTF-8 文本，行尾 \\n）：

    aasmatch-emb v1 <dim> <token-count>
    <百分号编码 token>\\t<dim 个 9 位有效数字浮点，空格分隔>
    ...

- token 按字典序排列，编码规则与游走语料文件一致（% 空格 制表符 换行）
- 语料频次写入 `<path>.counts`（每行 `token\\tcount`）
- save_context 时输出（上下文）向量写入 `<path>.context`，格式同主文件

缓存（EmbeddingCache）：
- 键 = sha256(超参 JSON + 训练句子)，只要语料或超参变化键就变化
- 清单 cache_index.json 记录每个键对应的文件及其 sha256
- 命中时记录 cache-hit 并跳过训练；文件被改动时记录 hash-mismatch 告警并视为未命中
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

# 支持相对导入（作为模块）和绝对导入（直接运行）
try:
    from .skipgram import EmbeddingTable, Hyperparams
    from .walks import encode_token, decode_token
except ImportError:
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from skipgram import EmbeddingTable, Hyperparams
    from walks import encode_token, decode_token

logger = logging.getLogger(__name__)

FORMAT_MAGIC = "aasmatch-emb"
FORMAT_VERSION = "v1"
COUNTS_SUFFIX = ".counts"
CONTEXT_SUFFIX = ".context"
CACHE_INDEX_FILE = "cache_index.json"


class EmbeddingFileError(Exception):
    """向量文件基础异常"""
    pass


class VersionMismatchError(EmbeddingFileError):
    """文件头的格式版本不是当前版本"""
    pass


class CorruptEmbeddingFileError(EmbeddingFileError):
    pass


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


def _format_matrix(tokens: Sequence[str], matrix: np.ndarray) -> bytes:
    dim = int(matrix.shape[1]) if matrix.ndim == 2 else 0
    lines = [f"{FORMAT_MAGIC} {FORMAT_VERSION} {dim} {len(tokens)}"]
    for token, row in zip(tokens, matrix):
        values = " ".join(f"{float(x):.9g}" for x in row)
        lines.append(f"{encode_token(token)}\t{values}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def save_embeddings(table: EmbeddingTable, path: Union[str, Path], save_context: Optional[bool] = None) -> List[Path]:
    """
    保存向量表

    Args:
        table: 向量表
        path: 主文件路径
        save_context: 是否写 .context；None 时按表中是否带上下文向量决定

    Returns:
        写出的文件列表（主文件、.counts，以及可选的 .context）
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(_format_matrix(table.tokens, table.vectors))
    counts_path = _sidecar(path, COUNTS_SUFFIX)
    counts = "".join(f"{encode_token(tok)}\t{int(c)}\n" for tok, c in zip(table.tokens, table.counts))
    counts_path.write_bytes(counts.encode("utf-8"))
    written = [path, counts_path]

    if save_context is None:
        save_context = table.context_vectors is not None
    context_path = _sidecar(path, CONTEXT_SUFFIX)
    if save_context and table.context_vectors is not None:
        context_path.write_bytes(_format_matrix(table.tokens, table.context_vectors))
        written.append(context_path)
    elif context_path.exists():
        context_path.unlink()
    logger.info(f"[embedding_store] 已保存 {len(table)} 个 token（{table.dim} 维）到 {path}")
    return written


def _read_matrix(path: Path) -> Tuple[Tuple[str, ...], np.ndarray]:
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as e:
        raise CorruptEmbeddingFileError(f"{path}: 不是 UTF-8 文本: {e}")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorruptEmbeddingFileError(f"{path}: 空文件")

    header = lines[0].split(" ")
    if len(header) != 4 or header[0] != FORMAT_MAGIC:
        raise CorruptEmbeddingFileError(f"{path}: 文件头非法: {lines[0]!r}")
    if header[1] != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: 格式版本 {header[1]}，期望 {FORMAT_VERSION}")
    try:
        dim, count = int(header[2]), int(header[3])
    except ValueError:
        raise CorruptEmbeddingFileError(f"{path}: 文件头维度/个数不是整数: {lines[0]!r}")
    if dim < 0 or count < 0:
        raise CorruptEmbeddingFileError(f"{path}: 文件头维度/个数为负: {lines[0]!r}")
    if len(lines) - 1 != count:
        raise CorruptEmbeddingFileError(f"{path}: 文件头声明 {count} 个 token，实际 {len(lines) - 1} 行")

    tokens: List[str] = []
    matrix = np.zeros((count, dim), dtype=np.float64)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        token_text, sep, values_text = line.partition("\t")
        if not sep:
            raise CorruptEmbeddingFileError(f"{path} 第 {lineno} 行: 缺少制表符")
        values = values_text.split(" ") if values_text else []
        if len(values) != dim:
            raise CorruptEmbeddingFileError(f"{path} 第 {lineno} 行: 应有 {dim} 个分量，实际 {len(values)}")
        try:
            matrix[i] = [float(v) for v in values]
        except ValueError:
            raise CorruptEmbeddingFileError(f"{path} 第 {lineno} 行: 分量不是浮点数")
        tokens.append(decode_token(token_text))

    if not np.all(np.isfinite(matrix)):
        raise CorruptEmbeddingFileError(f"{path}: 含有 NaN/Inf 分量")
    if any(a >= b for a, b in zip(tokens, tokens[1:])):
        raise CorruptEmbeddingFileError(f"{path}: token 未按字典序排列或有重复")
    return tuple(tokens), matrix


def _read_counts(path: Path, tokens: Sequence[str]) -> Tuple[int, ...]:
    if not path.exists():
        logger.warning(f"[embedding_store] 缺少频次文件 {path}，频次按 1 处理")
        return tuple(1 for _ in tokens)
    counts: Dict[str, int] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        token_text, sep, value = line.partition("\t")
        if not sep:
            raise CorruptEmbeddingFileError(f"{path} 第 {lineno} 行: 缺少制表符")
        try:
            counts[decode_token(token_text)] = int(value)
        except ValueError:
            raise CorruptEmbeddingFileError(f"{path} 第 {lineno} 行: 频次不是整数")
    if set(counts) != set(tokens):
        raise CorruptEmbeddingFileError(f"{path}: 频次文件的 token 与向量文件不一致")
    return tuple(counts[tok] for tok in tokens)


def load_embeddings(path: Union[str, Path]) -> EmbeddingTable:
    """
    加载向量表（save_embeddings 的逆）

    Raises:
        VersionMismatchError: 格式版本不匹配
        CorruptEmbeddingFileError: 文件结构损坏
    """
    path = Path(path)
    if not path.exists():
        raise EmbeddingFileError(f"向量文件不存在: {path}")
    tokens, vectors = _read_matrix(path)
    counts = _read_counts(_sidecar(path, COUNTS_SUFFIX), tokens)
    context = None
    context_path = _sidecar(path, CONTEXT_SUFFIX)
    if context_path.exists():
        context_tokens, context = _read_matrix(context_path)
        if context_tokens != tokens or context.shape != vectors.shape:
            raise CorruptEmbeddingFileError(f"{context_path}: 与主文件的 token/维度不一致")
    return EmbeddingTable(tokens=tokens, vectors=vectors, counts=counts, context_vectors=context)


# ---------------------------------------------------------------------------
# 缓存
# ---------------------------------------------------------------------------

def file_sha256(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cache_key(sentences: Iterable[Sequence[str]], hp: Hyperparams) -> str:
    """sha256(超参 + 训练句子)"""
    digest = hashlib.sha256()
    digest.update(json.dumps(hp.cache_fields(), sort_keys=True).encode("utf-8"))
    digest.update(b"\n")
    for sentence in sentences:
        digest.update(" ".join(encode_token(t) for t in sentence).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


class EmbeddingCache:
    """按缓存键存取向量文件

    清单 cache_index.json 结构：
        {"<key>": {"file": "<key>.emb", "sha256": {"<文件名>": "<hex>", ...}}}
    """

    def __init__(self, cache_dir: Union[str, Path]):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._index: Dict[str, Dict] = self._load_index()

    def _index_path(self) -> Path:
        return self.cache_dir / CACHE_INDEX_FILE

    def _load_index(self) -> Dict[str, Dict]:
        """清单不存在或损坏时返回空清单（等价于全部未命中）"""
        path = self._index_path()
        if not path.exists():
            return {}
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            if not isinstance(data, dict):
                return {}
            return {k: v for k, v in data.items() if isinstance(v, dict)}
        except Exception as e:
            logger.warning(f"[embedding_store] 加载缓存清单失败: {e}，将使用空清单")
            return {}

    def _save_index(self) -> None:
        path = self._index_path()
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(self._index, f, ensure_ascii=False, indent=2, sort_keys=True)
        except Exception as e:
            logger.warning(f"[embedding_store] 保存缓存清单失败: {e}")

    def path_for(self, key: str) -> Path:
        return self.cache_dir / f"{key}.emb"

    def __contains__(self, key: object) -> bool:
        return key in self._index

    def lookup(self, key: str) -> Optional[EmbeddingTable]:
        """命中返回向量表；未命中或文件被改动返回 None"""
        entry = self._index.get(key)
        if entry is None:
            logger.info(f"[embedding_store] cache-miss {key[:12]}")
            return None
        recorded = entry.get("sha256", {})
        for name, expected in sorted(recorded.items()):
            file_path = self.cache_dir / name
            actual = file_sha256(file_path) if file_path.exists() else None
            if actual != expected:
                logger.warning(f"[embedding_store] hash-mismatch {key[:12]}: {name} 与清单记录不一致，将重新训练")
                self._index.pop(key, None)
                self._save_index()
                return None
        try:
            table = load_embeddings(self.cache_dir / entry["file"])
        except (EmbeddingFileError, KeyError) as e:
            logger.warning(f"[embedding_store] hash-mismatch {key[:12]}: 缓存文件不可用（{e}），将重新训练")
            self._index.pop(key, None)
            self._save_index()
            return None
        logger.info(f"[embedding_store] cache-hit {key[:12]}")
        return table

    def store(self, key: str, table: EmbeddingTable, save_context: Optional[bool] = None) -> Path:
        """写入向量文件并更新清单，返回主文件路径"""
        path = self.path_for(key)
        written = save_embeddings(table, path, save_context=save_context)
        self._index[key] = {
            "file": path.name,
            "sha256": {p.name: file_sha256(p) for p in written},
        }
        self._save_index()
        return path
