"""AAS → RDF 映射

必测：
1. 同一文档两次映射得到相同的图，N-Triples 逐字节相同
2. 三元组数等于闭式 expected_triple_count
3. 无损：extract_fields(map(doc)) == document_fields(doc)
4. namespace 非法、文档有违例时报错
5. 子图抽取只包含从壳可达的三元组
"""

import sys
from pathlib import Path

import pytest

_project_root = Path(__file__).resolve().parent.parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from rdf_core import IRI, Literal, Triple, RDF_TYPE, XSD, serialize_ntriples, parse_ntriples
from aas_model import AASDocument, AssetKind, Shell, Submodel, SubmodelElement, ValueType
from aas2rdf import (
    VOCAB, MappingRules, MappingError, UnresolvedReferenceError, UnknownShellError,
    map_document, expected_triple_count, subgraph_of, shells_in, build_repository,
    shell_iri, shell_id_of, extract_fields, document_fields,
)
from corpus import default_corpus_spec, gen_corpus


def _pump(suffix: str = "1") -> AASDocument:
    return AASDocument(
        shells=(Shell(f"urn:aas:pump-{suffix}", f"Pump{suffix}", AssetKind.INSTANCE, (f"urn:sm:tech-{suffix}",)),),
        submodels=(
            Submodel(f"urn:sm:tech-{suffix}", "TechnicalData", "https://admin-shell.io/TechnicalData", (
                SubmodelElement("MaxPressure", ValueType.DECIMAL, "https://example.org/cd/pressure", "16.5"),
                SubmodelElement("Manufacturer", ValueType.STRING, None, "ACME"),
                SubmodelElement("SerialNumber", ValueType.STRING),
            )),
        ),
    )


def test_mapping_is_deterministic():
    doc = _pump()
    first = map_document(doc)
    second = map_document(doc)
    assert first == second
    assert serialize_ntriples(first) == serialize_ntriples(second)


def test_mapping_table_triples():
    g = map_document(_pump())
    rules = MappingRules()
    s = shell_iri("urn:aas:pump-1", rules)
    sm = shell_iri("urn:sm:tech-1", rules)
    assert s == IRI("http://example.org/aas/urn%3Aaas%3Apump-1")
    assert Triple(s, IRI(RDF_TYPE), IRI(VOCAB + "AssetAdministrationShell")) in g
    assert Triple(s, IRI(VOCAB + "hasIdShort"), Literal("Pump1")) in g
    assert Triple(s, IRI(VOCAB + "assetKind"), IRI(VOCAB + "Instance")) in g
    assert Triple(s, IRI(VOCAB + "hasSubmodel"), sm) in g
    assert Triple(sm, IRI(VOCAB + "hasSemanticId"), IRI("https://admin-shell.io/TechnicalData")) in g
    el = IRI(sm.value + "/MaxPressure")
    assert Triple(sm, IRI(VOCAB + "hasElement"), el) in g
    assert Triple(el, IRI(VOCAB + "hasValue"), Literal("16.5", datatype=XSD + "decimal")) in g
    assert Triple(el, IRI(VOCAB + "hasValueType"), IRI(XSD + "decimal")) in g
    serial = IRI(sm.value + "/SerialNumber")
    assert list(g.triples(subject=serial, predicate=IRI(VOCAB + "hasValue"))) == []


def test_triple_count_matches_closed_form():
    doc = _pump()
    assert len(map_document(doc)) == expected_triple_count(doc) == 3 + 1 + 3 + 3 * 4 + 1 + 2


def test_corpus_documents_lossless_and_counted():
    """合成语料中每个文档：三元组数符合闭式，字段可从图中无损取回。"""
    docs, _ = gen_corpus(default_corpus_spec(instances_per_template=3, seed=11))
    for doc in docs:
        g = map_document(doc)
        assert len(g) == expected_triple_count(doc)
        assert extract_fields(g) == document_fields(doc)
        assert parse_ntriples(serialize_ntriples(g)) == g


def test_ids_with_reserved_characters_are_injective():
    rules = MappingRules()
    ids = ["urn:a/b", "urn:a%2Fb", "urn:a b", "urn:a#b", "http://x.org/ü?q=1"]
    iris = [shell_iri(i, rules) for i in ids]
    assert len(set(iris)) == len(ids)
    assert [shell_id_of(iri, rules) for iri in iris] == ids


def test_shell_id_of_rejects_foreign_namespace():
    with pytest.raises(MappingError):
        shell_id_of(IRI("http://other.org/x"), MappingRules())


@pytest.mark.parametrize("namespace", ["relative/", "http://example.org/aas", "http://exa mple.org/", ""])
def test_invalid_namespace(namespace):
    with pytest.raises(MappingError):
        MappingRules(namespace=namespace)


def test_custom_namespace_changes_iris_only():
    rules = MappingRules(namespace="urn:plant:aas#")
    g = map_document(_pump(), rules)
    assert shells_in(g, rules) == [IRI("urn:plant:aas#urn%3Aaas%3Apump-1")]
    assert extract_fields(g, rules) == document_fields(_pump())


def test_invalid_document_is_rejected():
    doc = AASDocument(shells=(Shell("urn:aas:x", "X", AssetKind.TYPE, ("urn:sm:missing",)),))
    with pytest.raises(UnresolvedReferenceError):
        map_document(doc)


def test_subgraph_contains_only_reachable_triples():
    merged, entries = build_repository([_pump("1"), _pump("2")])
    assert [iri for iri, _ in entries] == shells_in(merged)
    assert len(merged) == 2 * expected_triple_count(_pump())
    for iri, sub in entries:
        assert sub.frozen
        assert len(sub) == expected_triple_count(_pump())
        suffix = shell_id_of(iri, MappingRules())[-1]
        assert all(suffix in t.subject.value for t in sub)


def test_subgraph_of_unknown_shell():
    g = map_document(_pump())
    with pytest.raises(UnknownShellError):
        subgraph_of(g, IRI("http://example.org/aas/nobody"))


def test_shared_submodel_appears_in_both_subgraphs():
    shared = Submodel("urn:sm:shared", "Nameplate", None, (SubmodelElement("Vendor", ValueType.STRING, None, "ACME"),))
    doc = AASDocument(
        shells=(
            Shell("urn:aas:a", "A", AssetKind.INSTANCE, ("urn:sm:shared",)),
            Shell("urn:aas:b", "B", AssetKind.INSTANCE, ("urn:sm:shared",)),
        ),
        submodels=(shared,),
    )
    _, entries = build_repository([doc])
    sub_a, sub_b = entries[0][1], entries[1][1]
    vendor = Triple(
        IRI("http://example.org/aas/urn%3Asm%3Ashared/Vendor"),
        IRI(VOCAB + "hasValue"),
        Literal("ACME", datatype=XSD + "string"),
    )
    assert vendor in sub_a and vendor in sub_b


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
