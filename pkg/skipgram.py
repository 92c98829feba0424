"""skip-gram 负采样训练

用 numpy 从零实现 word2vec 的 skip-gram + 负采样，把游走语料训练成 token 向量表。

目标函数（对每个窗口内的 (中心, 上下文) 对）：

    maximize  log σ(u_ctx · v_c) + Σ_k log σ(-u_neg_k · v_c)

实现要点：
- 词表按 token 字典序排列，噪声分布 ∝ count^0.75
- 输入/输出向量均初始化为 uniform(-0.5, 0.5) / dim，由种子决定
- 按 batch_size 个训练对做小批量更新（np.add.at 累加重复索引），
  学习率按已处理的训练对比例从 learning_rate 线性衰减到 min_learning_rate
- 每轮用同一随机源打乱句子顺序；同一种子两次训练结果逐位一致
- pair_loss_and_grads() 是单个训练对的损失与解析梯度，训练和梯度检查共用同一套公式
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

# 支持相对导入（作为模块）和绝对导入（直接运行）
try:
    from .walks import WalkCorpus
except ImportError:
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).parent))
    from walks import WalkCorpus

logger = logging.getLogger(__name__)

NOISE_POWER = 0.75
GRADIENT_CHECK_STEP = 1e-5


class SkipGramError(Exception):
    """训练模块基础异常"""
    pass


class EmptyCorpusError(SkipGramError):
    pass


class EmptyVocabError(SkipGramError):
    """min_count 过滤后词表为空"""
    pass


class NonFiniteLossError(SkipGramError):
    """损失或参数出现 NaN/Inf（通常是学习率过大）"""
    pass


class HyperparamsError(SkipGramError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    """训练超参数

    属性：
        dim: 向量维度
        window: 上下文窗口半径
        epochs: 训练轮数（0 表示只做初始化）
        negatives: 每个训练对的负样本数
        learning_rate / min_learning_rate: 线性衰减的起点与下限
        min_count: 进入词表的最低频次
        seed: 随机种子
        batch_size: 小批量大小（训练对个数）
        save_context: 保存向量时是否同时保存输出（上下文）向量
    """
    dim: int = 64
    window: int = 5
    epochs: int = 5
    negatives: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    min_count: int = 1
    seed: int = 42
    batch_size: int = 256
    save_context: bool = False

    def __post_init__(self):
        for name, low in (("dim", 1), ("window", 1), ("epochs", 0), ("negatives", 1),
                          ("min_count", 0), ("seed", 0), ("batch_size", 1)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < low:
                raise HyperparamsError(f"{name} 必须是 ≥ {low} 的整数: {value!r}")
        if not (self.learning_rate > 0 and np.isfinite(self.learning_rate)):
            raise HyperparamsError(f"learning_rate 必须是正数: {self.learning_rate!r}")
        if not (0 <= self.min_learning_rate < self.learning_rate):
            raise HyperparamsError(
                f"min_learning_rate 必须在 [0, learning_rate) 内: {self.min_learning_rate!r}"
            )

    def cache_fields(self) -> Dict[str, object]:
        """参与缓存键的字段（影响训练结果的全部超参）"""
        return {
            "dim": self.dim,
            "window": self.window,
            "epochs": self.epochs,
            "negatives": self.negatives,
            "learning_rate": self.learning_rate,
            "min_learning_rate": self.min_learning_rate,
            "min_count": self.min_count,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "save_context": self.save_context,
        }


@dataclass(frozen=True, eq=False)
class Vocab:
    tokens: Tuple[str, ...]
    counts: np.ndarray
    noise: np.ndarray

    @cached_property
    def index(self) -> Dict[str, int]:
        return {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self.index


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """token → 向量表（只读）

    属性：
        tokens: 排序后的 token
        vectors: (len(tokens), dim) 输入向量
        counts: 每个 token 的语料频次
        context_vectors: 输出向量（可选）
        epoch_losses: 每轮平均损失（从文件加载时为空）
    """
    tokens: Tuple[str, ...]
    vectors: np.ndarray
    counts: Tuple[int, ...]
    context_vectors: Optional[np.ndarray] = None
    epoch_losses: Tuple[float, ...] = field(default=())

    @cached_property
    def index(self) -> Dict[str, int]:
        return {tok: i for i, tok in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1]) if self.vectors.ndim == 2 else 0

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self.index

    def vector(self, token: str) -> Optional[np.ndarray]:
        i = self.index.get(token)
        return None if i is None else self.vectors[i]

    def count(self, token: str) -> int:
        i = self.index.get(token)
        return 0 if i is None else self.counts[i]


def _sentences_of(corpus: Union[WalkCorpus, Sequence[Sequence[str]]]) -> List[Sequence[str]]:
    if isinstance(corpus, WalkCorpus):
        return corpus.training_sentences()
    return list(corpus)


def build_vocab(corpus: Union[WalkCorpus, Sequence[Sequence[str]]], min_count: int = 1) -> Vocab:
    """统计 token 频次并按 min_count 过滤

    Raises:
        EmptyCorpusError: 语料中没有任何 token
    """
    counter: Counter = Counter()
    for sentence in _sentences_of(corpus):
        counter.update(sentence)
    if not counter:
        raise EmptyCorpusError("语料为空，无法建立词表")
    tokens = tuple(sorted(tok for tok, c in counter.items() if c >= min_count))
    counts = np.array([counter[tok] for tok in tokens], dtype=np.int64)
    if tokens:
        weights = counts.astype(np.float64) ** NOISE_POWER
        noise = weights / weights.sum()
    else:
        noise = np.zeros(0, dtype=np.float64)
    return Vocab(tokens=tokens, counts=counts, noise=noise)


# ---------------------------------------------------------------------------
# 损失与梯度
# ---------------------------------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def pair_loss_and_grads(
    v: np.ndarray,
    u_pos: np.ndarray,
    u_neg: np.ndarray,
) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """单个训练对的负对数似然与解析梯度

    Args:
        v: 中心词输入向量 (dim,)
        u_pos: 上下文词输出向量 (dim,)
        u_neg: 负样本输出向量 (negatives, dim)

    Returns:
        (loss, grad_v, grad_u_pos, grad_u_neg)
    """
    pos_dot = float(u_pos @ v)
    neg_dot = u_neg @ v
    loss = float(np.logaddexp(0.0, -pos_dot) + np.logaddexp(0.0, neg_dot).sum())
    s_pos = float(_sigmoid(pos_dot))
    s_neg = _sigmoid(neg_dot)
    grad_v = (s_pos - 1.0) * u_pos + s_neg @ u_neg
    grad_u_pos = (s_pos - 1.0) * v
    grad_u_neg = s_neg[:, None] * v[None, :]
    return loss, grad_v, grad_u_pos, grad_u_neg


# ---------------------------------------------------------------------------
# 训练
# ---------------------------------------------------------------------------

def _sentence_pairs(ids: np.ndarray, window: int) -> np.ndarray:
    """句内全部 (中心, 上下文) 索引对，形状 (P, 2)"""
    n = len(ids)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    centers = []
    contexts = []
    for i in range(n):
        lo = max(0, i - window)
        hi = min(n, i + window + 1)
        for j in range(lo, hi):
            if j != i:
                centers.append(ids[i])
                contexts.append(ids[j])
    return np.stack([np.array(centers, dtype=np.int64), np.array(contexts, dtype=np.int64)], axis=1)


def train(corpus: Union[WalkCorpus, Sequence[Sequence[str]]], vocab: Vocab, hp: Optional[Hyperparams] = None) -> EmbeddingTable:
    """训练 token 向量

    Raises:
        EmptyVocabError: 词表为空
        NonFiniteLossError: 损失或参数非有限
    """
    hp = hp or Hyperparams()
    if len(vocab) == 0:
        raise EmptyVocabError("词表为空（min_count 过滤掉了全部 token）")

    rng = np.random.default_rng(hp.seed)
    size = len(vocab)
    w_in = (rng.random((size, hp.dim)) - 0.5) / hp.dim
    w_out = (rng.random((size, hp.dim)) - 0.5) / hp.dim

    index = vocab.index
    per_sentence = []
    for sentence in _sentences_of(corpus):
        ids = np.array([index[tok] for tok in sentence if tok in index], dtype=np.int64)
        pairs = _sentence_pairs(ids, hp.window)
        if len(pairs):
            per_sentence.append(pairs)

    pairs_per_epoch = sum(len(p) for p in per_sentence)
    total = pairs_per_epoch * hp.epochs
    epoch_losses: List[float] = []
    if hp.epochs and pairs_per_epoch == 0:
        logger.warning("[skipgram] 语料中没有任何训练对（句子长度都小于 2），向量保持初始化值")

    processed = 0
    span = hp.learning_rate - hp.min_learning_rate
    for epoch in range(hp.epochs if pairs_per_epoch else 0):
        order = rng.permutation(len(per_sentence))
        pairs = np.concatenate([per_sentence[i] for i in order], axis=0)
        loss_sum = 0.0
        for start in range(0, len(pairs), hp.batch_size):
            batch = pairs[start:start + hp.batch_size]
            lr = hp.learning_rate - span * (processed / total)
            processed += len(batch)
            loss_sum += _train_batch(w_in, w_out, batch, vocab.noise, hp.negatives, lr, rng)
        mean_loss = loss_sum / pairs_per_epoch
        if not np.isfinite(mean_loss):
            raise NonFiniteLossError(f"第 {epoch + 1} 轮损失非有限（学习率 {hp.learning_rate} 可能过大）")
        epoch_losses.append(mean_loss)
        logger.info(f"[skipgram] 第 {epoch + 1}/{hp.epochs} 轮，平均损失 {mean_loss:.6f}")

    if not (np.isfinite(w_in).all() and np.isfinite(w_out).all()):
        raise NonFiniteLossError("训练后向量含非有限分量")

    return EmbeddingTable(
        tokens=vocab.tokens,
        vectors=w_in,
        counts=tuple(int(c) for c in vocab.counts),
        context_vectors=w_out if hp.save_context else None,
        epoch_losses=tuple(epoch_losses),
    )


def _train_batch(
    w_in: np.ndarray,
    w_out: np.ndarray,
    batch: np.ndarray,
    noise: np.ndarray,
    negatives: int,
    lr: float,
    rng: np.random.Generator,
) -> float:
    """一个小批量：批内所有对使用批开始时的参数计算梯度，再统一累加更新。返回批内损失和。"""
    centers = batch[:, 0]
    contexts = batch[:, 1]
    v = w_in[centers]
    u_pos = w_out[contexts]
    pos_dot = np.einsum("bd,bd->b", v, u_pos)
    s_pos = _sigmoid(pos_dot)
    loss = float(np.logaddexp(0.0, -pos_dot).sum())

    grad_v = (s_pos - 1.0)[:, None] * u_pos
    grad_u_pos = (s_pos - 1.0)[:, None] * v

    if negatives:
        neg = rng.choice(len(noise), size=(len(batch), negatives), p=noise)
        u_neg = w_out[neg]
        neg_dot = np.einsum("bkd,bd->bk", u_neg, v)
        s_neg = _sigmoid(neg_dot)
        loss += float(np.logaddexp(0.0, neg_dot).sum())
        grad_v += np.einsum("bk,bkd->bd", s_neg, u_neg)
        grad_u_neg = s_neg[:, :, None] * v[:, None, :]
        np.add.at(w_out, neg.ravel(), -lr * grad_u_neg.reshape(-1, w_out.shape[1]))

    np.add.at(w_in, centers, -lr * grad_v)
    np.add.at(w_out, contexts, -lr * grad_u_pos)
    return loss


# ---------------------------------------------------------------------------
# 梯度检查
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradientCheckReport:
    max_relative_error: float
    trials: int


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = float(np.linalg.norm(analytic - numeric))
    scale = max(float(np.linalg.norm(analytic) + np.linalg.norm(numeric)), 1e-12)
    return diff / scale


def _numeric_grad(fn, x: np.ndarray, h: float) -> np.ndarray:
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        plus = fn()
        flat[i] = orig - h
        minus = fn()
        flat[i] = orig
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def gradient_check(hp: Optional[Hyperparams] = None, trials: int = 100, mutate: bool = False) -> GradientCheckReport:
    """在随机 (中心, 上下文, 负样本) 上比较解析梯度与中心差分

    每个参数块（v、u_pos、u_neg）分别计算相对误差，取全部试验中的最大值。
    mutate=True 时翻转 v 的解析梯度符号，用来确认检查本身能发现错误。
    """
    hp = hp or Hyperparams(dim=8)
    negatives = max(hp.negatives, 1)
    rng = np.random.default_rng(hp.seed)
    worst = 0.0
    for _ in range(trials):
        v = rng.normal(0.0, 0.5, hp.dim)
        u_pos = rng.normal(0.0, 0.5, hp.dim)
        u_neg = rng.normal(0.0, 0.5, (negatives, hp.dim))

        def loss() -> float:
            return pair_loss_and_grads(v, u_pos, u_neg)[0]

        _, grad_v, grad_u_pos, grad_u_neg = pair_loss_and_grads(v, u_pos, u_neg)
        if mutate:
            grad_v = -grad_v
        for analytic, param in ((grad_v, v), (grad_u_pos, u_pos), (grad_u_neg, u_neg)):
            numeric = _numeric_grad(loss, param, GRADIENT_CHECK_STEP)
            worst = max(worst, _relative_error(analytic, numeric))
    logger.info(f"[skipgram] 梯度检查: {trials} 次试验, 最大相对误差 {worst:.3e}")
    return GradientCheckReport(max_relative_error=worst, trials=trials)
