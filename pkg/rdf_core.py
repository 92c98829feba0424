"""RDF 核心模块

定义 RDF 三元组数据模型、带索引的内存图，以及逐字节确定的 N-Triples 读写。

核心内容：
- IRI / Literal / BlankNode: 三种项（Term），均为不可变值对象
- Triple: 主语-谓词-宾语三元组（谓词必须是 IRI，主语不能是字面量）
- Graph: 三元组集合 + 主语/谓词/宾语三个索引
- parse_ntriples() / serialize_ntriples(): N-Triples 解析与规范化序列化

注意事项：
1. 项的规范文本（to_ntriples()）同时作为排序键，所有“规范序”都指按该文本排序
2. 序列化输出按行排序，与插入顺序无关，便于逐字节比较
3. 图在构建阶段之后可 freeze()，冻结后只读，可安全并发读取
"""

import logging
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple, Union

logger = logging.getLogger(__name__)

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
XSD = "http://www.w3.org/2001/XMLSchema#"

# IRI 中不允许出现的字符（空白单独判断）
_IRI_FORBIDDEN = set('<>"{}|^`\\')
_BNODE_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_\-]*")
_LANG_RE = re.compile(r"[A-Za-z]+(?:-[A-Za-z0-9]+)*")

_LITERAL_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_LITERAL_UNESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


class RdfError(Exception):
    """RDF 模块基础异常"""
    pass


class MalformedTermError(RdfError):
    """项或三元组不满足结构约束（谓词非 IRI、主语为字面量、IRI 含非法字符等）"""
    pass


class FrozenGraphError(RdfError):
    """向已冻结的图添加三元组"""
    pass


class NTriplesSyntaxError(RdfError):
    """N-Triples 语法错误（带行号）"""
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"第 {line} 行: {message}")


class InvalidIriError(NTriplesSyntaxError):
    """IRI 非法或未闭合"""
    pass


class UnterminatedLiteralError(NTriplesSyntaxError):
    """字面量缺少结束引号"""
    pass


def check_iri(value: str) -> None:
    """校验 IRI 字符串：非空、无空白、无尖括号等保留字符。不合法时抛 MalformedTermError。"""
    if not isinstance(value, str) or not value:
        raise MalformedTermError("IRI 不能为空")
    for ch in value:
        if ch.isspace() or ch in _IRI_FORBIDDEN or ord(ch) < 0x20:
            raise MalformedTermError(f"IRI 含非法字符 {ch!r}: {value!r}")


class Term:
    """RDF 项基类；子类实现 to_ntriples()"""

    def to_ntriples(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class IRI(Term):
    value: str

    def __post_init__(self):
        check_iri(self.value)

    @cached_property
    def _nt(self) -> str:
        return f"<{self.value}>"

    def to_ntriples(self) -> str:
        return self._nt

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Literal(Term):
    lexical: str
    datatype: Optional[str] = None
    language: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.lexical, str):
            raise MalformedTermError(f"字面量词形必须是字符串: {self.lexical!r}")
        if self.datatype is not None and self.language is not None:
            raise MalformedTermError("字面量不能同时带 datatype 与 language")
        if self.datatype is not None:
            check_iri(self.datatype)
        if self.language is not None and not _LANG_RE.fullmatch(self.language):
            raise MalformedTermError(f"非法语言标签: {self.language!r}")

    @cached_property
    def _nt(self) -> str:
        text = '"' + "".join(_LITERAL_ESCAPES.get(ch, ch) for ch in self.lexical) + '"'
        if self.datatype is not None:
            return f"{text}^^<{self.datatype}>"
        if self.language is not None:
            return f"{text}@{self.language}"
        return text

    def to_ntriples(self) -> str:
        return self._nt

    def __str__(self) -> str:
        return self.lexical


@dataclass(frozen=True)
class BlankNode(Term):
    id: str

    def __post_init__(self):
        if not isinstance(self.id, str) or not _BNODE_RE.fullmatch(self.id):
            raise MalformedTermError(f"非法空白节点 id: {self.id!r}")

    @cached_property
    def _nt(self) -> str:
        return f"_:{self.id}"

    def to_ntriples(self) -> str:
        return self._nt

    def __str__(self) -> str:
        return self._nt


def term_key(term: Term) -> str:
    """规范排序键"""
    return term.to_ntriples()


@dataclass(frozen=True)
class Triple:
    """RDF 三元组

    属性：
        subject: 主语（IRI 或空白节点）
        predicate: 谓词（仅 IRI）
        object: 宾语（任意项）
    """
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if not isinstance(self.subject, (IRI, BlankNode)):
            raise MalformedTermError(f"主语必须是 IRI 或空白节点: {self.subject!r}")
        if not isinstance(self.predicate, IRI):
            raise MalformedTermError(f"谓词必须是 IRI: {self.predicate!r}")
        if not isinstance(self.object, Term):
            raise MalformedTermError(f"宾语不是 RDF 项: {self.object!r}")

    @cached_property
    def _nt(self) -> str:
        return f"{self.subject.to_ntriples()} {self.predicate.to_ntriples()} {self.object.to_ntriples()} ."

    def to_ntriples(self) -> str:
        return self._nt


class Graph:
    """带索引的内存 RDF 图

    - 集合语义：重复添加同一三元组不改变图
    - 三个索引（主语/谓词/宾语 → 三元组集合）与三元组集合严格一致
    - freeze() 后只读
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples: Set[Triple] = set()
        self._by_subject: Dict[Term, Set[Triple]] = {}
        self._by_predicate: Dict[Term, Set[Triple]] = {}
        self._by_object: Dict[Term, Set[Triple]] = {}
        self._frozen = False
        for triple in triples:
            self.add(triple)

    def add(self, triple: Triple) -> "Graph":
        """添加三元组（幂等），返回自身便于链式调用"""
        if self._frozen:
            raise FrozenGraphError("图已冻结，不能再添加三元组")
        if not isinstance(triple, Triple):
            raise MalformedTermError(f"不是三元组: {triple!r}")
        if triple in self._triples:
            return self
        self._triples.add(triple)
        self._by_subject.setdefault(triple.subject, set()).add(triple)
        self._by_predicate.setdefault(triple.predicate, set()).add(triple)
        self._by_object.setdefault(triple.object, set()).add(triple)
        return self

    def freeze(self) -> "Graph":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, triple: object) -> bool:
        return triple in self._triples

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._triples == other._triples

    def __repr__(self) -> str:
        return f"Graph({len(self._triples)} triples)"

    def sorted_triples(self) -> List[Triple]:
        return sorted(self._triples, key=Triple.to_ntriples)

    def triples(
        self,
        subject: Optional[Term] = None,
        predicate: Optional[Term] = None,
        obj: Optional[Term] = None,
    ) -> Iterator[Triple]:
        """按模式查找三元组；None 表示通配。从最小的候选索引桶开始过滤。"""
        buckets = []
        if subject is not None:
            buckets.append(self._by_subject.get(subject, set()))
        if predicate is not None:
            buckets.append(self._by_predicate.get(predicate, set()))
        if obj is not None:
            buckets.append(self._by_object.get(obj, set()))
        if not buckets:
            yield from self._triples
            return
        smallest = min(buckets, key=len)
        for triple in smallest:
            if subject is not None and triple.subject != subject:
                continue
            if predicate is not None and triple.predicate != predicate:
                continue
            if obj is not None and triple.object != obj:
                continue
            yield triple

    def neighbors(self, node: Term) -> List[Tuple[Term, Term]]:
        return neighbors(self, node)

    def has_subject(self, node: Term) -> bool:
        return node in self._by_subject

    def subjects(self) -> List[Term]:
        """全部主语，按规范序"""
        return sorted(self._by_subject, key=term_key)

    def entities(self) -> List[Term]:
        """出现在主语或宾语位置的 IRI / 空白节点，按规范序"""
        found: Set[Term] = set(self._by_subject)
        found.update(o for o in self._by_object if isinstance(o, (IRI, BlankNode)))
        return sorted(found, key=term_key)

    def union(self, other: "Graph") -> "Graph":
        merged = Graph(self._triples)
        for triple in other:
            merged.add(triple)
        return merged

    def copy(self) -> "Graph":
        return Graph(self._triples)

    def index_consistent(self) -> bool:
        """检查三个索引与三元组集合是否一致（测试与调试用）"""
        for index, position in (
            (self._by_subject, "subject"),
            (self._by_predicate, "predicate"),
            (self._by_object, "object"),
        ):
            seen: Set[Triple] = set()
            for key, bucket in index.items():
                if not bucket:
                    return False
                for triple in bucket:
                    if getattr(triple, position) != key:
                        return False
                seen.update(bucket)
            if seen != self._triples:
                return False
        return True


def add_triple(graph: Graph, triple: Triple) -> Graph:
    """向图添加三元组（幂等）"""
    return graph.add(triple)


def neighbors(graph: Graph, node: Term) -> List[Tuple[Term, Term]]:
    """返回 node 的全部出边 (谓词, 宾语)，按规范序；节点不存在时返回 []"""
    pairs = [(t.predicate, t.object) for t in graph.triples(subject=node)]
    pairs.sort(key=lambda po: (po[0].to_ntriples(), po[1].to_ntriples()))
    return pairs


# ---------------------------------------------------------------------------
# N-Triples 读写
# ---------------------------------------------------------------------------

def serialize_ntriples(graph: Graph) -> bytes:
    """规范化序列化：每行一个三元组，行按字典序排序，UTF-8 编码"""
    lines = sorted(triple.to_ntriples() for triple in graph)
    if not lines:
        return b""
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_ntriples(text: Union[bytes, str]) -> Graph:
    """解析 N-Triples 文本为图

    空行与 # 注释行忽略；每个非空非注释行恰好产生一个三元组。
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise NTriplesSyntaxError(0, f"不是合法的 UTF-8: {e}") from e
    graph = Graph()
    # 只按 \n 切分：字面量中的其他行分隔字符不是行结束
    for lineno, line in enumerate(text.split("\n"), start=1):
        if line.endswith("\r"):
            line = line[:-1]
        triple = _parse_line(line, lineno)
        if triple is not None:
            graph.add(triple)
    return graph


def _skip_ws(line: str, pos: int) -> int:
    while pos < len(line) and line[pos] in " \t":
        pos += 1
    return pos


def _parse_line(line: str, lineno: int) -> Optional[Triple]:
    pos = _skip_ws(line, 0)
    if pos >= len(line) or line[pos] == "#":
        return None
    subject, pos = _read_term(line, _skip_ws(line, pos), lineno)
    predicate, pos = _read_term(line, _skip_ws(line, pos), lineno)
    obj, pos = _read_term(line, _skip_ws(line, pos), lineno)
    pos = _skip_ws(line, pos)
    if pos >= len(line) or line[pos] != ".":
        raise NTriplesSyntaxError(lineno, "三元组缺少结尾的 '.'")
    pos = _skip_ws(line, pos + 1)
    if pos < len(line) and line[pos] != "#":
        raise NTriplesSyntaxError(lineno, f"'.' 之后存在多余内容: {line[pos:]!r}")
    try:
        return Triple(subject, predicate, obj)
    except MalformedTermError as e:
        raise NTriplesSyntaxError(lineno, str(e)) from e


def _read_term(line: str, pos: int, lineno: int) -> Tuple[Term, int]:
    if pos >= len(line):
        raise NTriplesSyntaxError(lineno, "行意外结束，缺少项")
    ch = line[pos]
    if ch == "<":
        return _read_iri(line, pos, lineno)
    if ch == '"':
        return _read_literal(line, pos, lineno)
    if line.startswith("_:", pos):
        match = _BNODE_RE.match(line, pos + 2)
        if not match:
            raise NTriplesSyntaxError(lineno, "空白节点 id 为空")
        return BlankNode(match.group(0)), match.end()
    raise NTriplesSyntaxError(lineno, f"无法识别的项起始字符 {ch!r}（位置 {pos}）")


def _read_iri(line: str, pos: int, lineno: int) -> Tuple[IRI, int]:
    end = line.find(">", pos + 1)
    if end < 0:
        raise InvalidIriError(lineno, "IRI 缺少结束的 '>'")
    raw = _decode_uchars(line[pos + 1:end], lineno)
    try:
        return IRI(raw), end + 1
    except MalformedTermError as e:
        raise InvalidIriError(lineno, str(e)) from e


def _decode_uchars(raw: str, lineno: int) -> str:
    if "\\" not in raw:
        return raw
    out = []
    i = 0
    while i < len(raw):
        if raw[i] == "\\" and i + 1 < len(raw) and raw[i + 1] in "uU":
            width = 4 if raw[i + 1] == "u" else 8
            digits = raw[i + 2:i + 2 + width]
            if len(digits) != width or not all(c in "0123456789abcdefABCDEF" for c in digits):
                raise InvalidIriError(lineno, f"非法 Unicode 转义: {raw[i:i + 2 + width]!r}")
            out.append(chr(int(digits, 16)))
            i += 2 + width
        else:
            out.append(raw[i])
            i += 1
    return "".join(out)


def _read_literal(line: str, pos: int, lineno: int) -> Tuple[Literal, int]:
    out = []
    i = pos + 1
    while True:
        if i >= len(line):
            raise UnterminatedLiteralError(lineno, "字面量缺少结束引号")
        ch = line[i]
        if ch == '"':
            i += 1
            break
        if ch == "\\":
            if i + 1 >= len(line):
                raise UnterminatedLiteralError(lineno, "字面量在转义符处结束")
            esc = line[i + 1]
            if esc in _LITERAL_UNESCAPES:
                out.append(_LITERAL_UNESCAPES[esc])
                i += 2
                continue
            if esc in "uU":
                width = 4 if esc == "u" else 8
                digits = line[i + 2:i + 2 + width]
                if len(digits) != width or not all(c in "0123456789abcdefABCDEF" for c in digits):
                    raise NTriplesSyntaxError(lineno, f"非法 Unicode 转义: {line[i:i + 2 + width]!r}")
                out.append(chr(int(digits, 16)))
                i += 2 + width
                continue
            raise NTriplesSyntaxError(lineno, f"非法转义序列 \\{esc}")
        out.append(ch)
        i += 1
    lexical = "".join(out)
    if line.startswith("^^", i):
        if i + 2 >= len(line) or line[i + 2] != "<":
            raise NTriplesSyntaxError(lineno, "'^^' 之后必须是 <datatype>")
        datatype, i = _read_iri(line, i + 2, lineno)
        return Literal(lexical, datatype=datatype.value), i
    if i < len(line) and line[i] == "@":
        match = _LANG_RE.match(line, i + 1)
        if not match:
            raise NTriplesSyntaxError(lineno, "'@' 之后缺少语言标签")
        return Literal(lexical, language=match.group(0)), match.end()
    return Literal(lexical), i
