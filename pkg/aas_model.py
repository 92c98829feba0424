"""AAS 数据模型与 JSON 解析

解析并校验 AAS-JSON 的一个固定子集：

    assetAdministrationShells[{id, idShort, assetKind, submodels:[引用]}]
    submodels[{id, idShort, semanticId, submodelElements:[Property]}]
    Property{idShort, semanticId, valueType, value}

数据模型：
- AASDocument: 文档（壳列表 + 子模型列表 + 解析警告）
- Shell / Submodel / SubmodelElement: 对应 AAS 元素，解析后不可变
- Violation: 校验违例（数据，不是异常）

注意事项：
1. 未知 JSON 键忽略，但会写入 AASDocument.warnings 并记录 warning 日志，便于导入真实导出文件
2. 悬空的子模型引用由 validate() 报告，不是解析错误
3. 元素列表保持 JSON 中的顺序（RDF 层不保存顺序）
"""

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)


class AssetKind(Enum):
    """资产类别"""
    INSTANCE = "Instance"
    TYPE = "Type"


class ValueType(Enum):
    """属性值类型（JSON 中同时接受 integer 与 xs:integer 两种写法）"""
    STRING = "string"
    INTEGER = "integer"
    DECIMAL = "decimal"
    BOOLEAN = "boolean"

    @classmethod
    def parse(cls, text: str) -> "ValueType":
        name = text[3:] if text.startswith("xs:") else text
        return cls(name)

    @property
    def xs_name(self) -> str:
        return f"xs:{self.value}"


_INTEGER_RE = re.compile(r"[+-]?\d+")
_DECIMAL_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)")
_BOOLEAN_VALUES = {"true", "false", "1", "0"}
_IRI_BAD_CHARS = set('<>"{}|^`\\')


def lexical_ok(value: str, value_type: ValueType) -> bool:
    """词形能否按 valueType 解析"""
    if value_type is ValueType.INTEGER:
        return bool(_INTEGER_RE.fullmatch(value))
    if value_type is ValueType.DECIMAL:
        return bool(_DECIMAL_RE.fullmatch(value))
    if value_type is ValueType.BOOLEAN:
        return value in _BOOLEAN_VALUES
    return True


def _iri_like(value: str) -> bool:
    return bool(value) and not any(ch.isspace() or ch in _IRI_BAD_CHARS for ch in value)


@dataclass(frozen=True)
class SubmodelElement:
    """子模型元素（仅 Property）

    属性：
        id_short: 短名，在子模型内唯一
        value_type: 值类型
        semantic_id: 语义引用（IRI 字符串，可选）
        value: 值的词形（可选）；存在时必须能按 value_type 解析
    """
    id_short: str
    value_type: ValueType = ValueType.STRING
    semantic_id: Optional[str] = None
    value: Optional[str] = None


@dataclass(frozen=True)
class Submodel:
    id: str
    id_short: str
    semantic_id: Optional[str] = None
    elements: Tuple[SubmodelElement, ...] = ()


@dataclass(frozen=True)
class Shell:
    """资产管理壳

    属性：
        id: 全局唯一标识
        id_short: 短名
        asset_kind: 资产类别
        submodel_refs: 引用的子模型 id（保序）
    """
    id: str
    id_short: str
    asset_kind: AssetKind = AssetKind.INSTANCE
    submodel_refs: Tuple[str, ...] = ()


@dataclass(frozen=True)
class AASDocument:
    shells: Tuple[Shell, ...] = ()
    submodels: Tuple[Submodel, ...] = ()
    warnings: Tuple[str, ...] = field(default=(), compare=False)

    def submodel_by_id(self, submodel_id: str) -> Optional[Submodel]:
        for submodel in self.submodels:
            if submodel.id == submodel_id:
                return submodel
        return None


class ParseErrorKind(Enum):
    JSON_SYNTAX = "json-syntax-error"
    MISSING_FIELD = "missing-required-field"
    TYPE_MISMATCH = "type-mismatch"


class AasParseError(Exception):
    """AAS-JSON 解析失败"""
    def __init__(self, kind: ParseErrorKind, path: str, message: str):
        self.kind = kind
        self.path = path
        self.message = message
        super().__init__(f"{kind.value} @ {path}: {message}")


class ViolationKind(Enum):
    DANGLING_REFERENCE = "dangling-reference"
    DUPLICATE_ID = "duplicate-id"
    DUPLICATE_ID_SHORT = "duplicate-idShort"
    EMPTY_FIELD = "empty-field"
    INVALID_VALUE = "invalid-value"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    path: str
    message: str


# ---------------------------------------------------------------------------
# 解析
# ---------------------------------------------------------------------------

_DOC_KEYS = {"assetAdministrationShells", "submodels", "conceptDescriptions"}
_SHELL_KEYS = {"id", "idShort", "assetKind", "assetInformation", "submodels", "modelType"}
_SUBMODEL_KEYS = {"id", "idShort", "semanticId", "submodelElements", "modelType", "kind"}
_ELEMENT_KEYS = {"idShort", "semanticId", "valueType", "value", "modelType"}


class _Reader:
    """带路径信息的 JSON 读取器，负责必填/类型检查与未知键告警"""

    def __init__(self):
        self.warnings: List[str] = []

    def warn(self, message: str) -> None:
        logger.warning(f"[aas_model] {message}")
        self.warnings.append(message)

    def check_keys(self, obj: Dict[str, Any], known: set, path: str) -> None:
        for key in obj:
            if key not in known:
                self.warn(f"忽略未知键 {path}.{key}")

    def obj(self, value: Any, path: str) -> Dict[str, Any]:
        if not isinstance(value, dict):
            raise AasParseError(ParseErrorKind.TYPE_MISMATCH, path, f"应为对象，实际为 {type(value).__name__}")
        return value

    def arr(self, value: Any, path: str) -> List[Any]:
        if not isinstance(value, list):
            raise AasParseError(ParseErrorKind.TYPE_MISMATCH, path, f"应为数组，实际为 {type(value).__name__}")
        return value

    def required_str(self, obj: Dict[str, Any], key: str, path: str) -> str:
        if key not in obj:
            raise AasParseError(ParseErrorKind.MISSING_FIELD, f"{path}.{key}", "缺少必填字段")
        return self.string(obj[key], f"{path}.{key}")

    def string(self, value: Any, path: str) -> str:
        if not isinstance(value, str):
            raise AasParseError(ParseErrorKind.TYPE_MISMATCH, path, f"应为字符串，实际为 {type(value).__name__}")
        return value

    def reference(self, value: Any, path: str) -> str:
        """引用：字符串，或 {"keys": [..., {"value": ...}]} 引用对象（取最后一个 key）"""
        if isinstance(value, str):
            return value
        ref = self.obj(value, path)
        keys = self.arr(ref.get("keys"), f"{path}.keys") if "keys" in ref else None
        if not keys:
            raise AasParseError(ParseErrorKind.MISSING_FIELD, f"{path}.keys", "引用对象缺少 keys")
        last = self.obj(keys[-1], f"{path}.keys[{len(keys) - 1}]")
        return self.required_str(last, "value", f"{path}.keys[{len(keys) - 1}]")

    def semantic_id(self, obj: Dict[str, Any], path: str) -> Optional[str]:
        if "semanticId" not in obj or obj["semanticId"] is None:
            return None
        sem = self.reference(obj["semanticId"], f"{path}.semanticId")
        if not _iri_like(sem):
            raise AasParseError(ParseErrorKind.TYPE_MISMATCH, f"{path}.semanticId", f"semanticId 不是合法 IRI: {sem!r}")
        return sem


def parse_aas_json(text: Union[bytes, str]) -> AASDocument:
    """解析 AAS-JSON 子集文本为 AASDocument

    Raises:
        AasParseError: JSON 语法错误、缺少必填字段、类型不匹配（含值无法按 valueType 解析）
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise AasParseError(ParseErrorKind.JSON_SYNTAX, "$", f"不是合法的 UTF-8: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise AasParseError(ParseErrorKind.JSON_SYNTAX, "$", f"第 {e.lineno} 行第 {e.colno} 列: {e.msg}") from e

    reader = _Reader()
    root = reader.obj(data, "$")
    reader.check_keys(root, _DOC_KEYS, "$")

    shells = []
    for i, raw in enumerate(reader.arr(root.get("assetAdministrationShells", []), "$.assetAdministrationShells")):
        shells.append(_parse_shell(reader, raw, f"$.assetAdministrationShells[{i}]"))

    submodels = []
    for i, raw in enumerate(reader.arr(root.get("submodels", []), "$.submodels")):
        submodels.append(_parse_submodel(reader, raw, f"$.submodels[{i}]"))

    return AASDocument(shells=tuple(shells), submodels=tuple(submodels), warnings=tuple(reader.warnings))


def _parse_shell(reader: _Reader, raw: Any, path: str) -> Shell:
    obj = reader.obj(raw, path)
    reader.check_keys(obj, _SHELL_KEYS, path)
    shell_id = reader.required_str(obj, "id", path)
    id_short = reader.required_str(obj, "idShort", path)

    kind_text: Optional[str] = None
    if "assetKind" in obj:
        kind_text = reader.string(obj["assetKind"], f"{path}.assetKind")
    elif "assetInformation" in obj:
        info = reader.obj(obj["assetInformation"], f"{path}.assetInformation")
        if "assetKind" in info:
            kind_text = reader.string(info["assetKind"], f"{path}.assetInformation.assetKind")
    if kind_text is None:
        raise AasParseError(ParseErrorKind.MISSING_FIELD, f"{path}.assetKind", "缺少必填字段")
    try:
        asset_kind = AssetKind(kind_text)
    except ValueError:
        raise AasParseError(ParseErrorKind.TYPE_MISMATCH, f"{path}.assetKind", f"未知 assetKind: {kind_text!r}")

    refs = []
    for j, ref in enumerate(reader.arr(obj.get("submodels", []), f"{path}.submodels")):
        refs.append(reader.reference(ref, f"{path}.submodels[{j}]"))

    return Shell(id=shell_id, id_short=id_short, asset_kind=asset_kind, submodel_refs=tuple(refs))


def _parse_submodel(reader: _Reader, raw: Any, path: str) -> Submodel:
    obj = reader.obj(raw, path)
    reader.check_keys(obj, _SUBMODEL_KEYS, path)
    elements = []
    for j, raw_el in enumerate(reader.arr(obj.get("submodelElements", []), f"{path}.submodelElements")):
        el_path = f"{path}.submodelElements[{j}]"
        el_obj = reader.obj(raw_el, el_path)
        model_type = el_obj.get("modelType", "Property")
        if model_type != "Property":
            reader.warn(f"跳过不支持的元素类型 {model_type!r}: {el_path}")
            continue
        elements.append(_parse_element(reader, el_obj, el_path))
    return Submodel(
        id=reader.required_str(obj, "id", path),
        id_short=reader.required_str(obj, "idShort", path),
        semantic_id=reader.semantic_id(obj, path),
        elements=tuple(elements),
    )


def _parse_element(reader: _Reader, obj: Dict[str, Any], path: str) -> SubmodelElement:
    reader.check_keys(obj, _ELEMENT_KEYS, path)
    id_short = reader.required_str(obj, "idShort", path)
    type_text = reader.required_str(obj, "valueType", path)
    try:
        value_type = ValueType.parse(type_text)
    except ValueError:
        raise AasParseError(ParseErrorKind.TYPE_MISMATCH, f"{path}.valueType", f"不支持的 valueType: {type_text!r}")

    value: Optional[str] = None
    if obj.get("value") is not None:
        raw_value = obj["value"]
        # 兼容数字/布尔直接写成 JSON 原生值的导出
        if isinstance(raw_value, bool):
            raw_value = "true" if raw_value else "false"
        elif isinstance(raw_value, int):
            raw_value = str(raw_value)
        elif isinstance(raw_value, float):
            # 定点写法：1e+20 → "100000000000000000000.0"
            raw_value = np.format_float_positional(raw_value)
        value = reader.string(raw_value, f"{path}.value")
        if not lexical_ok(value, value_type):
            raise AasParseError(
                ParseErrorKind.TYPE_MISMATCH, f"{path}.value",
                f"值 {value!r} 无法按 {value_type.value} 解析",
            )
    return SubmodelElement(
        id_short=id_short,
        value_type=value_type,
        semantic_id=reader.semantic_id(obj, path),
        value=value,
    )


def load_aas_file(path: Union[str, Path]) -> AASDocument:
    return parse_aas_json(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# 校验
# ---------------------------------------------------------------------------

def validate(doc: AASDocument) -> List[Violation]:
    """检查文档不变式，返回违例列表（空列表表示全部成立）"""
    violations: List[Violation] = []
    seen_ids: Dict[str, str] = {}

    def check_unique(identifier: str, path: str) -> None:
        if identifier in seen_ids:
            violations.append(Violation(
                ViolationKind.DUPLICATE_ID, path,
                f"id {identifier!r} 与 {seen_ids[identifier]} 重复",
            ))
        else:
            seen_ids[identifier] = path

    submodel_ids = {sm.id for sm in doc.submodels}

    for i, shell in enumerate(doc.shells):
        path = f"shells[{i}]"
        if not shell.id:
            violations.append(Violation(ViolationKind.EMPTY_FIELD, f"{path}.id", "id 为空"))
        if not shell.id_short:
            violations.append(Violation(ViolationKind.EMPTY_FIELD, f"{path}.idShort", "idShort 为空"))
        check_unique(shell.id, path)
        for j, ref in enumerate(shell.submodel_refs):
            if ref not in submodel_ids:
                violations.append(Violation(
                    ViolationKind.DANGLING_REFERENCE, f"{path}.submodelRefs[{j}]",
                    f"引用的子模型 {ref!r} 不存在",
                ))

    for i, submodel in enumerate(doc.submodels):
        path = f"submodels[{i}]"
        if not submodel.id:
            violations.append(Violation(ViolationKind.EMPTY_FIELD, f"{path}.id", "id 为空"))
        if not submodel.id_short:
            violations.append(Violation(ViolationKind.EMPTY_FIELD, f"{path}.idShort", "idShort 为空"))
        check_unique(submodel.id, path)
        seen_shorts = set()
        for j, element in enumerate(submodel.elements):
            el_path = f"{path}.elements[{j}]"
            if not element.id_short:
                violations.append(Violation(ViolationKind.EMPTY_FIELD, f"{el_path}.idShort", "idShort 为空"))
            elif element.id_short in seen_shorts:
                violations.append(Violation(
                    ViolationKind.DUPLICATE_ID_SHORT, el_path,
                    f"idShort {element.id_short!r} 在子模型内重复",
                ))
            seen_shorts.add(element.id_short)
            if element.value is not None and not lexical_ok(element.value, element.value_type):
                violations.append(Violation(
                    ViolationKind.INVALID_VALUE, f"{el_path}.value",
                    f"值 {element.value!r} 无法按 {element.value_type.value} 解析",
                ))
    return violations


# ---------------------------------------------------------------------------
# 写回 JSON（gen-corpus 输出用）
# ---------------------------------------------------------------------------

def _model_reference(key_type: str, value: str) -> Dict[str, Any]:
    return {"type": "ModelReference", "keys": [{"type": key_type, "value": value}]}


def _external_reference(value: str) -> Dict[str, Any]:
    return {"type": "ExternalReference", "keys": [{"type": "GlobalReference", "value": value}]}


def document_to_dict(doc: AASDocument) -> Dict[str, Any]:
    shells = []
    for shell in doc.shells:
        shells.append({
            "modelType": "AssetAdministrationShell",
            "id": shell.id,
            "idShort": shell.id_short,
            "assetInformation": {"assetKind": shell.asset_kind.value},
            "submodels": [_model_reference("Submodel", ref) for ref in shell.submodel_refs],
        })
    submodels = []
    for submodel in doc.submodels:
        entry: Dict[str, Any] = {"modelType": "Submodel", "id": submodel.id, "idShort": submodel.id_short}
        if submodel.semantic_id is not None:
            entry["semanticId"] = _external_reference(submodel.semantic_id)
        elements = []
        for element in submodel.elements:
            el: Dict[str, Any] = {
                "modelType": "Property",
                "idShort": element.id_short,
                "valueType": element.value_type.xs_name,
            }
            if element.semantic_id is not None:
                el["semanticId"] = _external_reference(element.semantic_id)
            if element.value is not None:
                el["value"] = element.value
            elements.append(el)
        entry["submodelElements"] = elements
        submodels.append(entry)
    return {"assetAdministrationShells": shells, "submodels": submodels}


def dump_aas_json(doc: AASDocument) -> bytes:
    """写出 AAS-JSON 子集（键顺序固定、缩进 2，便于 diff）"""
    return (json.dumps(document_to_dict(doc), ensure_ascii=False, indent=2) + "\n").encode("utf-8")
