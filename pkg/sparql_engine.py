"""SPARQL 子集引擎

支持 SELECT / ASK + 基本图模式（BGP）+ 简单 FILTER，用于检索前的约束预筛选。

文法（关键字大小写不敏感，详见 docs/sparql-subset.md）：

    Query    := Prefix* (Select | Ask) ('LIMIT' INT)?
    Prefix   := 'PREFIX' PNAME_NS IRIREF
    Select   := 'SELECT' 'DISTINCT'? (Var+ | '*') 'WHERE'? Group
    Ask      := 'ASK' 'WHERE'? Group
    Group    := '{' (Pattern | Filter) ('.'? (Pattern | Filter))* '.'? '}'
    Pattern  := Node Node Node
    Filter   := 'FILTER' '(' ( Var '=' Const
                             | 'CONTAINS' '(' ('STR' '(' Var ')' | Var) ',' String ')' ) ')'

求值语义：
- 模式从左到右做嵌套连接，每一步用图索引查找候选三元组
- 结果为集合语义（DISTINCT 可写可不写），行按项的 N-Triples 文本排序
- FILTER 中的变量未绑定时视为不成立

内置前缀：rdf:、xsd:、aas:（映射词汇）。
"""

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

# 支持相对导入（作为模块）和绝对导入（直接运行）
try:
    from .rdf_core import Graph, IRI, Literal, Term, RDF_TYPE, XSD, MalformedTermError
    from .aas2rdf import VOCAB
    from .matcher import CandidateSet
except ImportError:
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).parent))
    from rdf_core import Graph, IRI, Literal, Term, RDF_TYPE, XSD, MalformedTermError
    from aas2rdf import VOCAB
    from matcher import CandidateSet

logger = logging.getLogger(__name__)

RESERVED_VARIABLE = "aas"

BUILTIN_PREFIXES = {
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "xsd": XSD,
    "aas": VOCAB,
}


class SparqlError(Exception):
    """SPARQL 模块基础异常"""
    pass


class SparqlSyntaxError(SparqlError):
    """语法错误（position 为查询文本中的字符偏移）"""
    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"位置 {position}: {message}")


class UnknownKeywordError(SparqlSyntaxError):
    """不支持的关键字（如 OPTIONAL、UNION、CONSTRUCT）"""
    pass


class UnboundProjectionError(SparqlError):
    """投影变量或 FILTER 变量未出现在任何模式中"""
    pass


class EmptyPatternError(SparqlError):
    """模式组为空"""
    pass


class ReservedVariableMissingError(SparqlError):
    """预筛选约束中没有保留变量 ?aas"""
    pass


class QueryForm(Enum):
    SELECT = "SELECT"
    ASK = "ASK"


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


Node = Union[Term, Variable]


@dataclass(frozen=True)
class TriplePattern:
    subject: Node
    predicate: Node
    object: Node

    def positions(self) -> Tuple[Node, Node, Node]:
        return (self.subject, self.predicate, self.object)

    def variables(self) -> List[str]:
        return [n.name for n in self.positions() if isinstance(n, Variable)]


@dataclass(frozen=True)
class Equals:
    var: str
    value: Term

    def holds(self, term: Optional[Term]) -> bool:
        return term is not None and term == self.value


@dataclass(frozen=True)
class Contains:
    """子串判断：作用于 IRI 字符串或字面量词形；空白节点恒不成立"""
    var: str
    substring: str

    def holds(self, term: Optional[Term]) -> bool:
        if isinstance(term, IRI):
            return self.substring in term.value
        if isinstance(term, Literal):
            return self.substring in term.lexical
        return False


FilterExpr = Union[Equals, Contains]


@dataclass(frozen=True)
class Query:
    """解析后的查询

    属性：
        form: SELECT 或 ASK
        projection: 投影变量名（SELECT，* 展开为模式中变量的首次出现顺序）
        patterns: 三元组模式（非空）
        filters: 过滤条件
        limit: 结果行数上限（可选）
    """
    form: QueryForm
    projection: Tuple[str, ...]
    patterns: Tuple[TriplePattern, ...]
    filters: Tuple[FilterExpr, ...] = ()
    limit: Optional[int] = None

    def variables(self) -> List[str]:
        return _pattern_variables(self.patterns)

    def as_ask(self) -> "Query":
        return Query(QueryForm.ASK, (), self.patterns, self.filters, None)


@dataclass
class BindingTable:
    """绑定表：每行按 columns 顺序给出项；行互不相同且按规范序排列"""
    columns: Tuple[str, ...]
    rows: List[Tuple[Term, ...]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def as_dicts(self) -> List[Dict[str, Term]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def to_tsv(self) -> str:
        lines = ["\t".join(f"?{c}" for c in self.columns)]
        for row in self.rows:
            lines.append("\t".join(term.to_ntriples() for term in row))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# 词法分析
# ---------------------------------------------------------------------------

class _Tok(Enum):
    IRIREF = "IRIREF"
    PNAME = "PNAME"
    VAR = "VAR"
    STRING = "STRING"
    INTEGER = "INTEGER"
    DECIMAL = "DECIMAL"
    WORD = "WORD"
    PUNCT = "PUNCT"
    LANGTAG = "LANGTAG"
    DTYPE = "DTYPE"
    EOF = "EOF"


@dataclass(frozen=True)
class _Token:
    kind: _Tok
    text: str
    pos: int


_TOKEN_RES = [
    (_Tok.IRIREF, re.compile(r"<([^<>\"{}|^`\\\s]*)>")),
    (_Tok.VAR, re.compile(r"[?$]([A-Za-z_][A-Za-z0-9_]*)")),
    (_Tok.DTYPE, re.compile(r"\^\^")),
    (_Tok.LANGTAG, re.compile(r"@([A-Za-z]+(?:-[A-Za-z0-9]+)*)")),
    (_Tok.DECIMAL, re.compile(r"[+-]?\d*\.\d+")),
    (_Tok.INTEGER, re.compile(r"[+-]?\d+")),
    (_Tok.PNAME, re.compile(r"([A-Za-z][A-Za-z0-9_\-]*)?:([A-Za-z0-9_][A-Za-z0-9_\-.]*[A-Za-z0-9_\-]|[A-Za-z0-9_])?")),
    (_Tok.WORD, re.compile(r"[A-Za-z_][A-Za-z0-9_]*")),
    (_Tok.PUNCT, re.compile(r"[{}().,=*]")),
]

_STRING_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", "b": "\b", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


def _tokenize(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch == "#":
            end = text.find("\n", pos)
            pos = len(text) if end < 0 else end + 1
            continue
        if ch in "\"'":
            value, end = _read_string(text, pos)
            tokens.append(_Token(_Tok.STRING, value, pos))
            pos = end
            continue
        for kind, regex in _TOKEN_RES:
            match = regex.match(text, pos)
            if match:
                if kind in (_Tok.IRIREF, _Tok.VAR, _Tok.LANGTAG):
                    value = match.group(1)
                else:
                    value = match.group(0)
                tokens.append(_Token(kind, value, pos))
                pos = match.end()
                break
        else:
            if ch == "<":
                raise SparqlSyntaxError(pos, "IRI 未闭合或含非法字符")
            raise SparqlSyntaxError(pos, f"无法识别的字符 {ch!r}")
    tokens.append(_Token(_Tok.EOF, "", len(text)))
    return tokens


def _read_string(text: str, pos: int) -> Tuple[str, int]:
    quote = text[pos]
    out = []
    i = pos + 1
    while i < len(text):
        ch = text[i]
        if ch == quote:
            return "".join(out), i + 1
        if ch == "\n":
            break
        if ch == "\\":
            esc = text[i + 1] if i + 1 < len(text) else ""
            if esc in _STRING_ESCAPES:
                out.append(_STRING_ESCAPES[esc])
                i += 2
                continue
            if esc in ("u", "U"):
                width = 4 if esc == "u" else 8
                digits = text[i + 2:i + 2 + width]
                if len(digits) == width and all(c in "0123456789abcdefABCDEF" for c in digits):
                    out.append(chr(int(digits, 16)))
                    i += 2 + width
                    continue
            raise SparqlSyntaxError(i, f"非法转义序列 \\{esc}")
        out.append(ch)
        i += 1
    raise SparqlSyntaxError(pos, "字符串缺少结束引号")


# ---------------------------------------------------------------------------
# 语法分析
# ---------------------------------------------------------------------------

_KNOWN_TOP = {"PREFIX", "SELECT", "ASK"}


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.prefixes = dict(BUILTIN_PREFIXES)

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        token = self.tokens[self.i]
        if token.kind is not _Tok.EOF:
            self.i += 1
        return token

    def is_word(self, word: str) -> bool:
        return self.tok.kind is _Tok.WORD and self.tok.text.upper() == word

    def is_punct(self, ch: str) -> bool:
        return self.tok.kind is _Tok.PUNCT and self.tok.text == ch

    def expect_punct(self, ch: str) -> _Token:
        if not self.is_punct(ch):
            raise SparqlSyntaxError(self.tok.pos, f"期望 {ch!r}，实际为 {self.tok.text or 'EOF'!r}")
        return self.advance()

    def expect_word(self, word: str) -> _Token:
        if not self.is_word(word):
            raise SparqlSyntaxError(self.tok.pos, f"期望关键字 {word}，实际为 {self.tok.text or 'EOF'!r}")
        return self.advance()

    def unknown_word(self) -> UnknownKeywordError:
        return UnknownKeywordError(self.tok.pos, f"不支持的关键字 {self.tok.text!r}")

    # -- 顶层 --

    def parse(self) -> Query:
        while self.is_word("PREFIX"):
            self.advance()
            self.parse_prefix()

        if self.is_word("SELECT"):
            self.advance()
            query = self.parse_select()
        elif self.is_word("ASK"):
            self.advance()
            query = self.parse_ask()
        elif self.tok.kind is _Tok.WORD:
            raise self.unknown_word()
        else:
            raise SparqlSyntaxError(self.tok.pos, "查询必须以 SELECT 或 ASK 开头")

        if self.is_word("LIMIT"):
            self.advance()
            if self.tok.kind is not _Tok.INTEGER or self.tok.text.startswith(("+", "-")):
                raise SparqlSyntaxError(self.tok.pos, "LIMIT 之后必须是非负整数")
            limit = int(self.advance().text)
            query = Query(query.form, query.projection, query.patterns, query.filters, limit)
        if self.tok.kind is _Tok.WORD:
            raise self.unknown_word()
        if self.tok.kind is not _Tok.EOF:
            raise SparqlSyntaxError(self.tok.pos, f"查询末尾存在多余内容 {self.tok.text!r}")
        return query

    def parse_prefix(self) -> None:
        token = self.tok
        if token.kind is not _Tok.PNAME or not token.text.endswith(":"):
            raise SparqlSyntaxError(token.pos, "PREFIX 之后必须是 'name:'")
        self.advance()
        if self.tok.kind is not _Tok.IRIREF:
            raise SparqlSyntaxError(self.tok.pos, "PREFIX 声明缺少 <iri>")
        self.prefixes[token.text[:-1]] = self.advance().text

    def parse_select(self) -> Query:
        if self.is_word("DISTINCT"):
            self.advance()
        projection: List[str] = []
        star_pos: Optional[int] = None
        if self.is_punct("*"):
            star_pos = self.advance().pos
        else:
            while self.tok.kind is _Tok.VAR:
                projection.append(self.advance().text)
            if not projection:
                raise SparqlSyntaxError(self.tok.pos, "SELECT 之后必须是变量列表或 *")
        if self.is_word("WHERE"):
            self.advance()
        patterns, filters = self.parse_group()

        names = _pattern_variables(patterns)
        if star_pos is not None:
            projection = names
        for name in projection:
            if name not in names:
                raise UnboundProjectionError(f"投影变量 ?{name} 未出现在任何模式中")
        # 重复投影变量只保留首次出现
        unique = tuple(dict.fromkeys(projection))
        return Query(QueryForm.SELECT, unique, tuple(patterns), tuple(filters))

    def parse_ask(self) -> Query:
        if self.is_word("WHERE"):
            self.advance()
        patterns, filters = self.parse_group()
        return Query(QueryForm.ASK, (), tuple(patterns), tuple(filters))

    # -- 模式组 --

    def parse_group(self) -> Tuple[List[TriplePattern], List[FilterExpr]]:
        open_tok = self.expect_punct("{")
        patterns: List[TriplePattern] = []
        filters: List[FilterExpr] = []
        while not self.is_punct("}"):
            if self.tok.kind is _Tok.EOF:
                raise SparqlSyntaxError(self.tok.pos, "模式组缺少 '}'")
            if self.is_word("FILTER"):
                self.advance()
                filters.append(self.parse_filter())
            else:
                patterns.append(self.parse_pattern())
            if self.is_punct("."):
                self.advance()
        self.advance()
        if not patterns:
            raise EmptyPatternError(f"位置 {open_tok.pos}: 模式组中没有三元组模式")
        names = _pattern_variables(patterns)
        for expr in filters:
            if expr.var not in names:
                raise UnboundProjectionError(f"FILTER 变量 ?{expr.var} 未出现在任何模式中")
        return patterns, filters

    def parse_pattern(self) -> TriplePattern:
        start = self.tok.pos
        subject = self.parse_node(allow_a=False)
        predicate = self.parse_node(allow_a=True)
        obj = self.parse_node(allow_a=False)
        if isinstance(subject, Literal):
            raise SparqlSyntaxError(start, "主语不能是字面量")
        if not isinstance(predicate, (IRI, Variable)):
            raise SparqlSyntaxError(start, "谓词必须是 IRI 或变量")
        return TriplePattern(subject, predicate, obj)

    def parse_node(self, allow_a: bool) -> Node:
        token = self.tok
        if token.kind is _Tok.VAR:
            self.advance()
            return Variable(token.text)
        if token.kind is _Tok.WORD:
            if allow_a and token.text == "a":
                self.advance()
                return IRI(RDF_TYPE)
            if token.text.lower() in ("true", "false"):
                self.advance()
                return Literal(token.text.lower(), datatype=XSD + "boolean")
            raise self.unknown_word()
        if token.kind is _Tok.PUNCT:
            raise SparqlSyntaxError(token.pos, f"此处需要模式项，实际为 {token.text!r}")
        if token.kind is _Tok.EOF:
            raise SparqlSyntaxError(token.pos, "查询意外结束")
        return self.parse_constant()

    def parse_constant(self) -> Term:
        token = self.advance()
        try:
            if token.kind is _Tok.IRIREF:
                return IRI(token.text)
            if token.kind is _Tok.PNAME:
                return self.expand(token)
            if token.kind is _Tok.INTEGER:
                return Literal(token.text, datatype=XSD + "integer")
            if token.kind is _Tok.DECIMAL:
                return Literal(token.text, datatype=XSD + "decimal")
            if token.kind is _Tok.STRING:
                if self.tok.kind is _Tok.LANGTAG:
                    return Literal(token.text, language=self.advance().text)
                if self.tok.kind is _Tok.DTYPE:
                    self.advance()
                    dt_token = self.advance()
                    if dt_token.kind is _Tok.IRIREF:
                        return Literal(token.text, datatype=dt_token.text)
                    if dt_token.kind is _Tok.PNAME:
                        return Literal(token.text, datatype=self.expand(dt_token).value)
                    raise SparqlSyntaxError(dt_token.pos, "'^^' 之后必须是数据类型 IRI")
                return Literal(token.text)
        except MalformedTermError as e:
            raise SparqlSyntaxError(token.pos, str(e)) from e
        raise SparqlSyntaxError(token.pos, f"此处需要常量，实际为 {token.text!r}")

    def expand(self, token: _Token) -> IRI:
        prefix, _, local = token.text.partition(":")
        if prefix not in self.prefixes:
            raise SparqlSyntaxError(token.pos, f"未声明的前缀 {prefix}:")
        return IRI(self.prefixes[prefix] + local)

    def parse_filter(self) -> FilterExpr:
        self.expect_punct("(")
        if self.tok.kind is _Tok.VAR:
            var = self.advance().text
            self.expect_punct("=")
            if self.tok.kind is _Tok.WORD and self.tok.text.lower() in ("true", "false"):
                value: Term = Literal(self.advance().text.lower(), datatype=XSD + "boolean")
            elif self.tok.kind in (_Tok.VAR, _Tok.PUNCT, _Tok.EOF, _Tok.WORD):
                raise SparqlSyntaxError(self.tok.pos, "'=' 右侧必须是常量")
            else:
                value = self.parse_constant()
            self.expect_punct(")")
            return Equals(var, value)
        if self.is_word("CONTAINS"):
            self.advance()
            self.expect_punct("(")
            if self.is_word("STR"):
                self.advance()
                self.expect_punct("(")
                var = self._expect_var()
                self.expect_punct(")")
            else:
                var = self._expect_var()
            self.expect_punct(",")
            if self.tok.kind is not _Tok.STRING:
                raise SparqlSyntaxError(self.tok.pos, "CONTAINS 的第二个参数必须是字符串")
            substring = self.advance().text
            self.expect_punct(")")
            self.expect_punct(")")
            return Contains(var, substring)
        if self.tok.kind is _Tok.WORD:
            raise self.unknown_word()
        raise SparqlSyntaxError(self.tok.pos, "FILTER 只支持 ?var = 常量 与 CONTAINS(...)")

    def _expect_var(self) -> str:
        if self.tok.kind is not _Tok.VAR:
            raise SparqlSyntaxError(self.tok.pos, "此处需要变量")
        return self.advance().text


def _pattern_variables(patterns: Sequence[TriplePattern]) -> List[str]:
    seen: List[str] = []
    for pattern in patterns:
        for name in pattern.variables():
            if name not in seen:
                seen.append(name)
    return seen


def parse_query(text: Union[bytes, str]) -> Query:
    """解析查询文本

    Raises:
        SparqlSyntaxError: 语法错误（带位置）
        UnknownKeywordError: 不支持的关键字
        UnboundProjectionError: 投影/FILTER 变量未出现在模式中
        EmptyPatternError: 模式组为空
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SparqlSyntaxError(e.start, "查询不是合法的 UTF-8") from e
    return _Parser(text).parse()


def tautology() -> Query:
    """恒真约束：任何有出边的壳都满足"""
    return Query(
        QueryForm.ASK, (),
        (TriplePattern(Variable(RESERVED_VARIABLE), Variable("p"), Variable("o")),),
    )


# ---------------------------------------------------------------------------
# 求值
# ---------------------------------------------------------------------------

Binding = Dict[str, Term]


def _resolve(node: Node, binding: Binding) -> Optional[Term]:
    if isinstance(node, Variable):
        return binding.get(node.name)
    return node


def _solutions(patterns: Sequence[TriplePattern], filters: Sequence[FilterExpr],
               graph: Graph, initial: Optional[Binding] = None) -> Iterator[Binding]:
    """左到右嵌套连接，逐个产出满足全部模式与过滤条件的绑定"""

    def extend(index: int, binding: Binding) -> Iterator[Binding]:
        if index == len(patterns):
            if all(expr.holds(binding.get(expr.var)) for expr in filters):
                yield binding
            return
        pattern = patterns[index]
        s = _resolve(pattern.subject, binding)
        p = _resolve(pattern.predicate, binding)
        o = _resolve(pattern.object, binding)
        # 字面量主语或非 IRI 谓词不可能匹配
        if isinstance(s, Literal) or (p is not None and not isinstance(p, IRI)):
            return
        for triple in graph.triples(s, p, o):
            new = dict(binding)
            consistent = True
            for node, term in zip(pattern.positions(), (triple.subject, triple.predicate, triple.object)):
                if isinstance(node, Variable):
                    bound = new.get(node.name)
                    if bound is None:
                        new[node.name] = term
                    elif bound != term:
                        consistent = False
                        break
            if consistent:
                yield from extend(index + 1, new)

    yield from extend(0, dict(initial or {}))


def _row_key(row: Tuple[Term, ...]) -> Tuple[str, ...]:
    return tuple(term.to_ntriples() for term in row)


def eval_select(query: Query, graph: Graph) -> BindingTable:
    """求 SELECT 查询的绑定表（集合语义，规范排序，LIMIT 在排序后截断）"""
    columns = query.projection or tuple(query.variables())
    rows = {
        tuple(binding[name] for name in columns)
        for binding in _solutions(query.patterns, query.filters, graph)
    }
    ordered = sorted(rows, key=_row_key)
    if query.limit is not None:
        ordered = ordered[:query.limit]
    return BindingTable(columns=tuple(columns), rows=ordered)


def eval_ask(query: Query, graph: Graph) -> bool:
    """ASK：存在至少一个解即为真（找到第一个解即停止）"""
    for _ in _solutions(query.patterns, query.filters, graph):
        return True
    return False


def prefilter(
    constraint: Query,
    repository: Sequence[Tuple[IRI, Graph]],
    threads: int = 1,
) -> CandidateSet:
    """约束预筛选：逐候选把 ?aas 固定为壳 IRI，在候选子图上求 ASK

    Args:
        constraint: 含保留变量 ?aas 的查询（SELECT 也按 ASK 处理）
        repository: [(壳 IRI, 子图)]
        threads: 并行线程数，只影响调度

    Returns:
        满足约束的候选集合，按壳 IRI 规范序

    Raises:
        ReservedVariableMissingError: 约束中没有 ?aas
    """
    if RESERVED_VARIABLE not in constraint.variables():
        raise ReservedVariableMissingError(f"约束必须使用保留变量 ?{RESERVED_VARIABLE}")

    def satisfied(entry: Tuple[IRI, Graph]) -> bool:
        shell, sub = entry
        for _ in _solutions(constraint.patterns, constraint.filters, sub, {RESERVED_VARIABLE: shell}):
            return True
        return False

    entries = list(repository)
    if threads > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flags = list(pool.map(satisfied, entries))
    else:
        flags = [satisfied(entry) for entry in entries]

    kept = [entry for entry, ok in zip(entries, flags) if ok]
    logger.info(f"[sparql] 预筛选: {len(kept)}/{len(entries)} 个候选满足约束")
    return CandidateSet.of(kept)
