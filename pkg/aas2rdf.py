"""AAS → RDF 映射

把 AASDocument 确定性地映射为 RDF 图，并按壳抽取子图。

映射表（规范性，详见 docs/mapping-table.md）：

    壳      <ns+quote(id)>        rdf:type vocab:AssetAdministrationShell
                                  vocab:hasIdShort "idShort"
                                  vocab:assetKind vocab:Instance | vocab:Type
                                  vocab:hasSubmodel <子模型>（每个已解析引用一条）
    子模型  <ns+quote(id)>        rdf:type vocab:Submodel
                                  vocab:hasIdShort "idShort"
                                  vocab:hasSemanticId <semanticId>（可选）
                                  vocab:hasElement <元素>
    元素    <子模型/quote(idShort)> rdf:type vocab:Property
                                  vocab:hasIdShort "idShort"
                                  vocab:hasValueType <xsd:类型>
                                  vocab:hasSemanticId <semanticId>（可选）
                                  vocab:hasValue "value"^^xsd:类型（可选）

注意事项：
1. id 一律用 urllib.parse.quote(safe="") 编码，因此 id → IRI 是单射
2. 映射前要求 validate() 无违例，否则抛 UnresolvedReferenceError
3. 元素顺序不进入图（RDF 无序），其余字段无损
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple
from urllib.parse import quote, unquote, urlsplit

# 支持相对导入（作为模块）和绝对导入（直接运行）
try:
    from .rdf_core import Graph, IRI, Literal, Triple, RDF_TYPE, XSD, term_key, check_iri, MalformedTermError
    from .aas_model import AASDocument, AssetKind, ValueType, validate
except ImportError:
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).parent))
    from rdf_core import Graph, IRI, Literal, Triple, RDF_TYPE, XSD, term_key, check_iri, MalformedTermError
    from aas_model import AASDocument, AssetKind, ValueType, validate

logger = logging.getLogger(__name__)

VOCAB = "urn:aasmatch:vocab:"
DEFAULT_NAMESPACE = "http://example.org/aas/"


class MappingError(Exception):
    """映射模块基础异常"""
    pass


class UnresolvedReferenceError(MappingError):
    """文档未通过校验（悬空引用、重复 id 等），不能映射"""
    pass


class UnknownShellError(MappingError):
    """图中不存在指定的壳"""
    pass


@dataclass(frozen=True)
class MappingRules:
    """映射规则

    属性：
        namespace: 铸造 IRI 的基址，必须是以 '/' 或 '#' 结尾的绝对 IRI
        vocab: 词汇基址（固定谓词与类均以此为前缀）
    """
    namespace: str = DEFAULT_NAMESPACE
    vocab: str = VOCAB

    def __post_init__(self):
        check_namespace(self.namespace)

    def term(self, name: str) -> IRI:
        if name == "rdfType":
            return IRI(RDF_TYPE)
        return IRI(self.vocab + name)

    @property
    def has_submodel(self) -> IRI:
        return self.term("hasSubmodel")

    @property
    def has_element(self) -> IRI:
        return self.term("hasElement")

    @property
    def has_id_short(self) -> IRI:
        return self.term("hasIdShort")

    @property
    def has_semantic_id(self) -> IRI:
        return self.term("hasSemanticId")

    @property
    def has_value(self) -> IRI:
        return self.term("hasValue")

    @property
    def has_value_type(self) -> IRI:
        return self.term("hasValueType")

    @property
    def asset_kind(self) -> IRI:
        return self.term("assetKind")

    @property
    def rdf_type(self) -> IRI:
        return IRI(RDF_TYPE)

    @property
    def shell_class(self) -> IRI:
        return self.term("AssetAdministrationShell")

    @property
    def submodel_class(self) -> IRI:
        return self.term("Submodel")

    @property
    def property_class(self) -> IRI:
        return self.term("Property")


def check_namespace(namespace: str) -> None:
    """namespace 必须是带 scheme 的绝对 IRI 且以 '/' 或 '#' 结尾，否则抛 MappingError"""
    try:
        check_iri(namespace)
    except MalformedTermError as e:
        raise MappingError(f"namespace 不是合法 IRI: {e}") from e
    if not urlsplit(namespace).scheme:
        raise MappingError(f"namespace 必须是绝对 IRI: {namespace!r}")
    if not namespace.endswith(("/", "#")):
        raise MappingError(f"namespace 必须以 '/' 或 '#' 结尾: {namespace!r}")


def shell_iri(identifier: str, rules: MappingRules) -> IRI:
    """壳/子模型 id → IRI"""
    return IRI(rules.namespace + quote(identifier, safe=""))


def shell_id_of(iri: IRI, rules: MappingRules) -> str:
    """IRI → 壳/子模型 id（shell_iri 的逆）"""
    if not iri.value.startswith(rules.namespace):
        raise MappingError(f"IRI 不在命名空间 {rules.namespace} 下: {iri.value}")
    return unquote(iri.value[len(rules.namespace):])


def element_iri(submodel: IRI, id_short: str) -> IRI:
    return IRI(submodel.value + "/" + quote(id_short, safe=""))


def _xsd(value_type: ValueType) -> str:
    return XSD + value_type.value


def map_document(doc: AASDocument, rules: Optional[MappingRules] = None) -> Graph:
    """把文档映射为 RDF 图

    Raises:
        UnresolvedReferenceError: 文档存在校验违例
    """
    rules = rules or MappingRules()
    violations = validate(doc)
    if violations:
        first = violations[0]
        raise UnresolvedReferenceError(
            f"文档未通过校验（{len(violations)} 处违例），首个: {first.kind.value} @ {first.path}: {first.message}"
        )

    graph = Graph()
    for shell in doc.shells:
        s = shell_iri(shell.id, rules)
        graph.add(Triple(s, rules.rdf_type, rules.shell_class))
        graph.add(Triple(s, rules.has_id_short, Literal(shell.id_short)))
        kind = rules.term("Instance" if shell.asset_kind is AssetKind.INSTANCE else "Type")
        graph.add(Triple(s, rules.asset_kind, kind))
        for ref in shell.submodel_refs:
            graph.add(Triple(s, rules.has_submodel, shell_iri(ref, rules)))

    for submodel in doc.submodels:
        sm = shell_iri(submodel.id, rules)
        graph.add(Triple(sm, rules.rdf_type, rules.submodel_class))
        graph.add(Triple(sm, rules.has_id_short, Literal(submodel.id_short)))
        if submodel.semantic_id is not None:
            graph.add(Triple(sm, rules.has_semantic_id, IRI(submodel.semantic_id)))
        for element in submodel.elements:
            el = element_iri(sm, element.id_short)
            graph.add(Triple(sm, rules.has_element, el))
            graph.add(Triple(el, rules.rdf_type, rules.property_class))
            graph.add(Triple(el, rules.has_id_short, Literal(element.id_short)))
            graph.add(Triple(el, rules.has_value_type, IRI(_xsd(element.value_type))))
            if element.semantic_id is not None:
                graph.add(Triple(el, rules.has_semantic_id, IRI(element.semantic_id)))
            if element.value is not None:
                graph.add(Triple(el, rules.has_value, Literal(element.value, datatype=_xsd(element.value_type))))

    logger.info(f"[aas2rdf] 映射完成: {len(doc.shells)} 个壳, {len(doc.submodels)} 个子模型, {len(graph)} 个三元组")
    return graph


def expected_triple_count(doc: AASDocument) -> int:
    """映射结果三元组数的闭式（文档须已通过校验）"""
    count = 0
    for shell in doc.shells:
        count += 3 + len(set(shell.submodel_refs))
    for submodel in doc.submodels:
        count += 2 + (submodel.semantic_id is not None)
        for element in submodel.elements:
            count += 4 + (element.semantic_id is not None) + (element.value is not None)
    return count


def subgraph_of(graph: Graph, shell: IRI) -> Graph:
    """从壳出发沿有向边可达的全部三元组

    Raises:
        UnknownShellError: 壳不是图中的主语
    """
    if not graph.has_subject(shell):
        raise UnknownShellError(f"图中不存在壳: {shell.value}")
    sub = Graph()
    visited = {shell}
    frontier = [shell]
    while frontier:
        node = frontier.pop()
        for triple in graph.triples(subject=node):
            sub.add(triple)
            target = triple.object
            if target not in visited and graph.has_subject(target):
                visited.add(target)
                frontier.append(target)
    return sub


def shells_in(graph: Graph, rules: Optional[MappingRules] = None) -> List[IRI]:
    """图中全部壳 IRI，按规范序"""
    rules = rules or MappingRules()
    found = {t.subject for t in graph.triples(predicate=rules.rdf_type, obj=rules.shell_class)}
    return sorted(found, key=term_key)


def build_repository(
    docs: Iterable[AASDocument],
    rules: Optional[MappingRules] = None,
) -> Tuple[Graph, List[Tuple[IRI, Graph]]]:
    """映射多个文档并合并

    Returns:
        (合并后的图, [(壳 IRI, 壳子图)])，子图列表按壳 IRI 规范序
    """
    rules = rules or MappingRules()
    merged = Graph()
    for doc in docs:
        for triple in map_document(doc, rules):
            merged.add(triple)
    entries = [(s, subgraph_of(merged, s).freeze()) for s in shells_in(merged, rules)]
    merged.freeze()
    logger.info(f"[aas2rdf] 仓库构建完成: {len(entries)} 个壳, {len(merged)} 个三元组")
    return merged, entries


def extract_fields(graph: Graph, rules: Optional[MappingRules] = None) -> Dict[str, Dict]:
    """从图中反向抽取壳与子模型字段（元素顺序不保留，按 idShort 排序）

    Returns:
        {"shells": {id: {...}}, "submodels": {id: {...}}}
    """
    rules = rules or MappingRules()

    def one(subject: IRI, predicate: IRI):
        objs = sorted((t.object for t in graph.triples(subject=subject, predicate=predicate)), key=term_key)
        return objs[0] if objs else None

    shells: Dict[str, Dict] = {}
    for s in shells_in(graph, rules):
        kind = one(s, rules.asset_kind)
        refs = sorted(shell_id_of(t.object, rules) for t in graph.triples(subject=s, predicate=rules.has_submodel))
        shells[shell_id_of(s, rules)] = {
            "idShort": str(one(s, rules.has_id_short)),
            "assetKind": kind.value[len(rules.vocab):] if kind is not None else None,
            "submodels": refs,
        }

    submodels: Dict[str, Dict] = {}
    for t in sorted(graph.triples(predicate=rules.rdf_type, obj=rules.submodel_class), key=Triple.to_ntriples):
        sm = t.subject
        sem = one(sm, rules.has_semantic_id)
        elements = []
        for et in graph.triples(subject=sm, predicate=rules.has_element):
            el = et.object
            el_sem = one(el, rules.has_semantic_id)
            value = one(el, rules.has_value)
            value_type = one(el, rules.has_value_type)
            elements.append({
                "idShort": str(one(el, rules.has_id_short)),
                "semanticId": el_sem.value if el_sem is not None else None,
                "valueType": value_type.value[len(XSD):] if value_type is not None else None,
                "value": value.lexical if value is not None else None,
            })
        elements.sort(key=lambda e: e["idShort"])
        submodels[shell_id_of(sm, rules)] = {
            "idShort": str(one(sm, rules.has_id_short)),
            "semanticId": sem.value if sem is not None else None,
            "elements": elements,
        }
    return {"shells": shells, "submodels": submodels}


def document_fields(doc: AASDocument) -> Dict[str, Dict]:
    """与 extract_fields 同构的文档字段视图（无损性比较用）"""
    shells = {
        shell.id: {
            "idShort": shell.id_short,
            "assetKind": shell.asset_kind.value,
            "submodels": sorted(shell.submodel_refs),
        }
        for shell in doc.shells
    }
    submodels = {}
    for submodel in doc.submodels:
        elements = [
            {
                "idShort": e.id_short,
                "semanticId": e.semantic_id,
                "valueType": e.value_type.value,
                "value": e.value,
            }
            for e in submodel.elements
        ]
        elements.sort(key=lambda e: e["idShort"])
        submodels[submodel.id] = {
            "idShort": submodel.id_short,
            "semanticId": submodel.semantic_id,
            "elements": elements,
        }
    return {"shells": shells, "submodels": submodels}

