"""合成语料与检索评估

按模板生成带可控异质性的 AAS 玩具语料，并按真值计算 precision@k 与 MRR。

模板结构：
    AssetTemplate(template_id, id_short_prefix, submodels)
      └─ SubmodelTemplate(id_short, semantic_id, mandatory, properties)
           └─ PropertyTemplate(concept, pool, value_type, values, semantic_id)

pool[0] 是属性的规范名，其余为同义词（例如 motor 的 PowerInput ↔ ElectricPower）。

异质性（perturb）：
1. 子模型缺省：逐个子模型以 drop_rate 概率删除，mandatory 子模型永不删除
2. 同义词替换：逐个属性以 synonym_rate 概率把 idShort 换成池中另一个成员
两步按固定顺序消耗随机数（概率为 0 时也照样抽取），所以同一种子下结果与概率参数解耦。

评估：
- precision@k = 前 k 个候选中同模板比例（分母固定为 k）的查询均值
- MRR = 首个同模板候选名次倒数的查询均值（前列表中没有同模板候选记 0）
"""

import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

# 支持相对导入（作为模块）和绝对导入（直接运行）
try:
    from .aas_model import (
        AASDocument, AssetKind, Shell, Submodel, SubmodelElement, ValueType,
        lexical_ok, validate, dump_aas_json,
    )
except ImportError:
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from aas_model import (
        AASDocument, AssetKind, Shell, Submodel, SubmodelElement, ValueType,
        lexical_ok, validate, dump_aas_json,
    )

logger = logging.getLogger(__name__)

DOC_ID_PREFIX = "urn:aasmatch:aas:"
GROUND_TRUTH_FILE = "ground_truth.tsv"
RESULTS_HEADER = ("query_id", "rank", "candidate_id", "raw", "score")


class CorpusError(Exception):
    """语料模块基础异常"""
    pass


class InvalidCorpusSpecError(CorpusError):
    pass


class UnknownPropertyError(CorpusError):
    """文档中的子模型或属性在模板里找不到"""
    pass


class MissingGroundTruthError(CorpusError):
    pass


@dataclass(frozen=True)
class PropertyTemplate:
    concept: str
    pool: Tuple[str, ...]
    value_type: ValueType
    values: Tuple[str, ...]
    semantic_id: Optional[str] = None


@dataclass(frozen=True)
class SubmodelTemplate:
    id_short: str
    mandatory: bool
    properties: Tuple[PropertyTemplate, ...]
    semantic_id: Optional[str] = None


@dataclass(frozen=True)
class AssetTemplate:
    template_id: str
    id_short_prefix: str
    submodels: Tuple[SubmodelTemplate, ...]


@dataclass(frozen=True)
class CorpusSpec:
    """语料规格

    属性：
        templates: 模板列表
        instances_per_template: 每个模板生成的文档数
        synonym_rate: 属性名替换概率
        drop_rate: 非必选子模型删除概率
        seed: 随机种子
    """
    templates: Tuple[AssetTemplate, ...]
    instances_per_template: int = 10
    synonym_rate: float = 0.3
    drop_rate: float = 0.2
    seed: int = 42

    def __post_init__(self):
        check_corpus_spec(self)


@dataclass
class GroundTruth:
    """真值：文档 id → 模板 id，以及每个文档的扰动记录"""
    template_of: Dict[str, str] = field(default_factory=dict)
    perturbations: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    def template(self, doc_id: str) -> str:
        try:
            return self.template_of[doc_id]
        except KeyError:
            raise MissingGroundTruthError(f"真值中没有文档 {doc_id!r}")


@dataclass(frozen=True)
class QueryMetrics:
    query_id: str
    precision: float
    reciprocal_rank: float
    first_hit: Optional[int]


@dataclass(frozen=True)
class RetrievalMetrics:
    precision_at_k: float
    mean_reciprocal_rank: float
    k: int
    rows: Tuple[QueryMetrics, ...] = ()

    def to_tsv(self) -> str:
        lines = ["query_id\tprecision_at_k\treciprocal_rank\tfirst_hit"]
        for row in self.rows:
            hit = "" if row.first_hit is None else str(row.first_hit)
            lines.append(f"{row.query_id}\t{row.precision:.6f}\t{row.reciprocal_rank:.6f}\t{hit}")
        lines.append(f"#mean\t{self.precision_at_k:.6f}\t{self.mean_reciprocal_rank:.6f}\t")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ResultRow:
    query_id: str
    rank: int
    candidate_id: str
    raw: float
    score: float


# ---------------------------------------------------------------------------
# 内置模板
# ---------------------------------------------------------------------------

def _prop(family: str, pool: Sequence[str], value_type: ValueType, values: Sequence[str]) -> PropertyTemplate:
    return PropertyTemplate(
        concept=pool[0],
        pool=tuple(pool),
        value_type=value_type,
        values=tuple(values),
        semantic_id=f"urn:aasmatch:concept:{family}:{pool[0]}",
    )


def _submodel(family: str, id_short: str, mandatory: bool, *properties: PropertyTemplate) -> SubmodelTemplate:
    return SubmodelTemplate(
        id_short=id_short,
        mandatory=mandatory,
        properties=tuple(properties),
        semantic_id=f"urn:aasmatch:submodel:{family}:{id_short}",
    )


_S, _I, _D = ValueType.STRING, ValueType.INTEGER, ValueType.DECIMAL


def builtin_templates() -> Dict[str, AssetTemplate]:
    """5 个内置模板族：nameplate、timeseries（数字铭牌 / 时间序列）与 pump、motor、sensor"""
    f = "nameplate"
    nameplate = AssetTemplate(f, "Nameplate", (
        _submodel(f, "DigitalNameplate", True,
                  _prop(f, ["ManufacturerName", "Manufacturer", "VendorName"], _S, ["ACME GmbH", "Festo", "Siemens", "Bosch"]),
                  _prop(f, ["SerialNumber", "SerialNo", "SerNum"], _S, ["SN-1001", "SN-2040", "SN-7781", "SN-0042"]),
                  _prop(f, ["YearOfConstruction", "ConstructionYear", "BuildYear"], _I, ["2016", "2018", "2020", "2023"]),
                  _prop(f, ["ProductDesignation", "ProductName", "Designation"], _S, ["Controller X1", "Drive Unit", "IO Module"])),
        _submodel(f, "TechnicalData", False,
                  _prop(f, ["RatedVoltage", "NominalVoltage", "VoltageRating"], _I, ["24", "230", "400"]),
                  _prop(f, ["Weight", "Mass", "NetWeight"], _D, ["1.2", "3.75", "12.5"])),
        _submodel(f, "Documentation", False,
                  _prop(f, ["OperatingManual", "UserManual", "Handbook"], _S, ["manual-de.pdf", "manual-en.pdf"]),
                  _prop(f, ["DocumentLanguage", "Language", "ManualLanguage"], _S, ["de", "en", "fr"])),
    ))

    f = "timeseries"
    timeseries = AssetTemplate(f, "TimeSeries", (
        _submodel(f, "TimeSeriesData", True,
                  _prop(f, ["SamplingInterval", "SampleRate", "SamplingPeriod"], _I, ["100", "500", "1000"]),
                  _prop(f, ["StartTime", "BeginTime", "RecordStart"], _S, ["2024-01-01T00:00:00Z", "2024-06-01T12:00:00Z"]),
                  _prop(f, ["RecordCount", "NumberOfRecords", "SampleCount"], _I, ["1440", "86400", "3600"])),
        _submodel(f, "Metadata", False,
                  _prop(f, ["SeriesName", "Title", "Name"], _S, ["Line1-Temperature", "Press-Pressure", "Spindle-Load"]),
                  _prop(f, ["Description", "Comment", "Note"], _S, ["raw sensor log", "aggregated values"])),
        _submodel(f, "Segments", False,
                  _prop(f, ["SegmentCount", "NumberOfSegments", "Segments"], _I, ["1", "4", "12"]),
                  _prop(f, ["Duration", "TimeSpan", "Period"], _D, ["60.0", "3600.0", "86400.0"])),
    ))

    f = "pump"
    pump = AssetTemplate(f, "Pump", (
        _submodel(f, "PumpCharacteristics", True,
                  _prop(f, ["FlowRate", "VolumeFlow", "Throughput"], _D, ["12.5", "40.0", "125.0"]),
                  _prop(f, ["Head", "DeliveryHead", "PumpHead"], _D, ["8.5", "32.0", "55.0"]),
                  _prop(f, ["Efficiency", "HydraulicEfficiency", "PumpEfficiency"], _D, ["0.62", "0.71", "0.8"])),
        _submodel(f, "Operation", False,
                  _prop(f, ["RotationalSpeed", "Speed", "RPM"], _I, ["1450", "2900"]),
                  _prop(f, ["OperatingHours", "RunTime", "HoursInService"], _I, ["1200", "8760", "20000"])),
        _submodel(f, "Maintenance", False,
                  _prop(f, ["LastServiceDate", "LastMaintenance", "ServiceDate"], _S, ["2023-03-01", "2024-02-15"]),
                  _prop(f, ["ServiceInterval", "MaintenanceInterval", "InspectionInterval"], _I, ["2000", "4000"])),
    ))

    f = "motor"
    motor = AssetTemplate(f, "Motor", (
        _submodel(f, "MotorData", True,
                  _prop(f, ["PowerInput", "ElectricPower", "InputPower"], _D, ["0.75", "5.5", "22.0"]),
                  _prop(f, ["RatedSpeed", "NominalSpeed", "ShaftSpeed"], _I, ["1450", "2950"]),
                  _prop(f, ["Torque", "RatedTorque", "NominalTorque"], _D, ["4.9", "36.0", "145.0"])),
        _submodel(f, "Electrical", False,
                  _prop(f, ["SupplyVoltage", "Voltage", "LineVoltage"], _I, ["230", "400", "690"]),
                  _prop(f, ["RatedCurrent", "Current", "Amperage"], _D, ["1.8", "11.2", "41.0"]),
                  _prop(f, ["PowerFactor", "CosPhi", "DisplacementFactor"], _D, ["0.78", "0.85", "0.9"])),
        _submodel(f, "Thermal", False,
                  _prop(f, ["InsulationClass", "ThermalClass", "IsolationClass"], _S, ["B", "F", "H"]),
                  _prop(f, ["AmbientTemperature", "AmbientTemp", "MaxAmbientTemperature"], _I, ["40", "50"])),
    ))

    f = "sensor"
    sensor = AssetTemplate(f, "Sensor", (
        _submodel(f, "SensorData", True,
                  _prop(f, ["MeasuringRange", "MeasurementRange", "Span"], _D, ["10.0", "100.0", "250.0"]),
                  _prop(f, ["Accuracy", "MeasurementAccuracy", "Tolerance"], _D, ["0.1", "0.25", "0.5"]),
                  _prop(f, ["OutputSignal", "SignalType", "Output"], _S, ["4-20mA", "0-10V", "IO-Link"])),
        _submodel(f, "Calibration", False,
                  _prop(f, ["CalibrationDate", "LastCalibration", "CalDate"], _S, ["2023-11-20", "2024-04-02"]),
                  _prop(f, ["CalibrationInterval", "RecalibrationPeriod", "CalInterval"], _I, ["12", "24"])),
        _submodel(f, "Environment", False,
                  _prop(f, ["IPRating", "ProtectionClass", "IngressProtection"], _S, ["IP65", "IP67", "IP68"]),
                  _prop(f, ["OperatingTemperature", "TemperatureRange", "OpTemp"], _I, ["70", "85", "125"])),
    ))
    return {t.template_id: t for t in (nameplate, timeseries, pump, motor, sensor)}


def check_corpus_spec(spec: CorpusSpec) -> None:
    """校验语料规格，不合法时抛 InvalidCorpusSpecError"""
    if not spec.templates:
        raise InvalidCorpusSpecError("至少需要一个模板")
    if isinstance(spec.instances_per_template, bool) or not isinstance(spec.instances_per_template, int) \
            or spec.instances_per_template < 1:
        raise InvalidCorpusSpecError(f"instances_per_template 必须是正整数: {spec.instances_per_template!r}")
    for name in ("synonym_rate", "drop_rate"):
        rate = getattr(spec, name)
        if not isinstance(rate, (int, float)) or not (0.0 <= rate <= 1.0):
            raise InvalidCorpusSpecError(f"{name} 必须在 [0,1] 内: {rate!r}")
    if isinstance(spec.seed, bool) or not isinstance(spec.seed, int) or not (0 <= spec.seed < 2 ** 64):
        raise InvalidCorpusSpecError(f"seed 必须是 64 位非负整数: {spec.seed!r}")

    template_ids = set()
    submodel_names = set()
    for template in spec.templates:
        if template.template_id in template_ids:
            raise InvalidCorpusSpecError(f"模板 id 重复: {template.template_id!r}")
        template_ids.add(template.template_id)
        if not re.fullmatch(r"[A-Za-z0-9_\-]+", template.template_id):
            raise InvalidCorpusSpecError(f"模板 id 只能包含字母、数字、'_'、'-': {template.template_id!r}")
        if not template.submodels:
            raise InvalidCorpusSpecError(f"模板 {template.template_id} 没有子模型")
        if not any(sm.mandatory for sm in template.submodels):
            raise InvalidCorpusSpecError(f"模板 {template.template_id} 至少需要一个 mandatory 子模型")
        for sm in template.submodels:
            if sm.id_short in submodel_names:
                raise InvalidCorpusSpecError(f"子模型 idShort 在模板间重复: {sm.id_short!r}")
            submodel_names.add(sm.id_short)
            names = set()
            for prop in sm.properties:
                if not prop.pool:
                    raise InvalidCorpusSpecError(f"{sm.id_short}: 属性 {prop.concept!r} 的同义词池为空")
                if not prop.values:
                    raise InvalidCorpusSpecError(f"{sm.id_short}: 属性 {prop.concept!r} 没有候选值")
                for name in prop.pool:
                    if not name or name in names:
                        raise InvalidCorpusSpecError(f"{sm.id_short}: 同义词 {name!r} 为空或在子模型内重复")
                    names.add(name)
                for value in prop.values:
                    if not lexical_ok(value, prop.value_type):
                        raise InvalidCorpusSpecError(
                            f"{sm.id_short}.{prop.concept}: 值 {value!r} 无法按 {prop.value_type.value} 解析"
                        )


# ---------------------------------------------------------------------------
# 规格文件
# ---------------------------------------------------------------------------

def _template_from_dict(data: Mapping[str, Any]) -> AssetTemplate:
    try:
        template_id = data["id"]
        submodels = []
        for sm in data["submodels"]:
            props = []
            for p in sm["properties"]:
                pool = tuple(p["pool"])
                props.append(PropertyTemplate(
                    concept=p.get("concept", pool[0] if pool else ""),
                    pool=pool,
                    value_type=ValueType.parse(p.get("valueType", "string")),
                    values=tuple(str(v) for v in p["values"]),
                    semantic_id=p.get("semanticId"),
                ))
            submodels.append(SubmodelTemplate(
                id_short=sm["idShort"],
                mandatory=bool(sm.get("mandatory", False)),
                properties=tuple(props),
                semantic_id=sm.get("semanticId"),
            ))
        return AssetTemplate(template_id, data.get("idShortPrefix", template_id), tuple(submodels))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidCorpusSpecError(f"模板定义不完整: {e!r}") from e


def corpus_spec_from_dict(data: Mapping[str, Any]) -> CorpusSpec:
    """templates 中每项可以是内置模板 id，也可以是完整模板定义；缺省时使用全部内置模板"""
    builtins = builtin_templates()
    templates = []
    for entry in data.get("templates", list(builtins)):
        if isinstance(entry, str):
            if entry not in builtins:
                raise InvalidCorpusSpecError(f"未知内置模板 {entry!r}（可选: {', '.join(builtins)}）")
            templates.append(builtins[entry])
        elif isinstance(entry, dict):
            templates.append(_template_from_dict(entry))
        else:
            raise InvalidCorpusSpecError(f"模板项必须是字符串或对象: {entry!r}")
    return CorpusSpec(
        templates=tuple(templates),
        instances_per_template=data.get("instances_per_template", 10),
        synonym_rate=data.get("synonym_rate", 0.3),
        drop_rate=data.get("drop_rate", 0.2),
        seed=data.get("seed", 42),
    )


def load_corpus_spec(path: Union[str, Path]) -> CorpusSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidCorpusSpecError(f"语料规格不是合法 JSON: {e}") from e
    if not isinstance(data, dict):
        raise InvalidCorpusSpecError("语料规格顶层必须是对象")
    return corpus_spec_from_dict(data)


def default_corpus_spec(**overrides) -> CorpusSpec:
    return CorpusSpec(templates=tuple(builtin_templates().values()), **overrides)


# ---------------------------------------------------------------------------
# 生成与扰动
# ---------------------------------------------------------------------------

def doc_id(template_id: str, index: int) -> str:
    return f"{DOC_ID_PREFIX}{template_id}:{index:03d}"


def instantiate(template: AssetTemplate, index: int, rng: np.random.Generator) -> AASDocument:
    """模板实例（未扰动）：每个属性从候选值中抽一个"""
    shell_id = doc_id(template.template_id, index)
    submodels = []
    for sm in template.submodels:
        elements = []
        for prop in sm.properties:
            value = prop.values[int(rng.integers(len(prop.values)))]
            elements.append(SubmodelElement(
                id_short=prop.pool[0],
                value_type=prop.value_type,
                semantic_id=prop.semantic_id,
                value=value,
            ))
        submodels.append(Submodel(
            id=f"urn:aasmatch:sm:{template.template_id}:{index:03d}:{sm.id_short}",
            id_short=sm.id_short,
            semantic_id=sm.semantic_id,
            elements=tuple(elements),
        ))
    shell = Shell(
        id=shell_id,
        id_short=f"{template.id_short_prefix}{index:03d}",
        asset_kind=AssetKind.INSTANCE,
        submodel_refs=tuple(sm.id for sm in submodels),
    )
    return AASDocument(shells=(shell,), submodels=tuple(submodels))


def _lookup(spec: CorpusSpec) -> Dict[str, SubmodelTemplate]:
    return {sm.id_short: sm for template in spec.templates for sm in template.submodels}


def _perturb_with_log(doc: AASDocument, spec: CorpusSpec, seed: int) -> Tuple[AASDocument, List[str]]:
    rng = np.random.default_rng(seed)
    templates = _lookup(spec)
    log: List[str] = []

    kept: List[Submodel] = []
    for submodel in doc.submodels:
        sm_template = templates.get(submodel.id_short)
        if sm_template is None:
            raise UnknownPropertyError(f"子模型 {submodel.id_short!r} 不属于任何模板")
        draw = rng.random()
        if not sm_template.mandatory and draw < spec.drop_rate:
            log.append(f"drop:{submodel.id_short}")
            continue
        kept.append(submodel)

    result: List[Submodel] = []
    for submodel in kept:
        pools = {name: prop for prop in templates[submodel.id_short].properties for name in prop.pool}
        elements = []
        for element in submodel.elements:
            prop = pools.get(element.id_short)
            if prop is None:
                raise UnknownPropertyError(f"属性 {submodel.id_short}.{element.id_short} 没有同义词池")
            draw = rng.random()
            others = [name for name in prop.pool if name != element.id_short]
            pick = int(rng.integers(max(len(others), 1)))
            if others and draw < spec.synonym_rate:
                log.append(f"synonym:{submodel.id_short}.{element.id_short}->{others[pick]}")
                element = replace(element, id_short=others[pick])
            elements.append(element)
        result.append(replace(submodel, elements=tuple(elements)))

    kept_ids = {sm.id for sm in result}
    shells = tuple(
        replace(shell, submodel_refs=tuple(ref for ref in shell.submodel_refs if ref in kept_ids))
        for shell in doc.shells
    )
    return AASDocument(shells=shells, submodels=tuple(result)), log


def perturb(doc: AASDocument, spec: CorpusSpec, seed: int) -> AASDocument:
    """按 CorpusSpec 中的概率对文档做子模型缺省与同义词替换

    Raises:
        UnknownPropertyError: 文档中的子模型/属性在模板里没有对应项
    """
    return _perturb_with_log(doc, spec, seed)[0]


def gen_corpus(spec: CorpusSpec) -> Tuple[List[AASDocument], GroundTruth]:
    """生成语料：模板顺序 × 实例序号 001..N，每个文档由 (seed, 模板序号, 实例序号) 派生的随机源决定"""
    docs: List[AASDocument] = []
    truth = GroundTruth()
    for t_index, template in enumerate(spec.templates):
        for index in range(1, spec.instances_per_template + 1):
            rng = np.random.default_rng([spec.seed, t_index, index])
            base = instantiate(template, index, rng)
            doc, log = _perturb_with_log(base, spec, int(rng.integers(2 ** 63)))
            violations = validate(doc)
            if violations:
                raise CorpusError(f"生成的文档未通过校验: {violations[0]}")
            docs.append(doc)
            identifier = doc.shells[0].id
            truth.template_of[identifier] = template.template_id
            truth.perturbations[identifier] = tuple(log)
    logger.info(
        f"[corpus] 生成语料: {len(spec.templates)} 个模板 × {spec.instances_per_template} 个实例, "
        f"synonym_rate={spec.synonym_rate}, drop_rate={spec.drop_rate}, seed={spec.seed}"
    )
    return docs, truth


# ---------------------------------------------------------------------------
# 语料读写
# ---------------------------------------------------------------------------

def doc_file_name(identifier: str) -> str:
    return re.sub(r"[^A-Za-z0-9._\-]", "_", identifier) + ".json"


def write_corpus(docs: Sequence[AASDocument], truth: GroundTruth, out_dir: Union[str, Path]) -> List[Path]:
    """每个文档写一个 .json，另写 ground_truth.tsv"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for doc in docs:
        path = out / doc_file_name(doc.shells[0].id)
        path.write_bytes(dump_aas_json(doc))
        written.append(path)
    lines = ["doc_id\ttemplate_id\tperturbations"]
    for identifier in sorted(truth.template_of):
        log = ";".join(truth.perturbations.get(identifier, ()))
        lines.append(f"{identifier}\t{truth.template_of[identifier]}\t{log}")
    (out / GROUND_TRUTH_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return written


def read_ground_truth(path: Union[str, Path]) -> GroundTruth:
    truth = GroundTruth()
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise CorpusError(f"{path} 第 {lineno} 行: 列数不足")
        truth.template_of[parts[0]] = parts[1]
        log = parts[2] if len(parts) > 2 else ""
        truth.perturbations[parts[0]] = tuple(x for x in log.split(";") if x)
    return truth


def write_results_tsv(rows: Sequence[ResultRow], path: Union[str, Path]) -> None:
    lines = ["\t".join(RESULTS_HEADER)]
    for row in rows:
        lines.append(f"{row.query_id}\t{row.rank}\t{row.candidate_id}\t{row.raw:.9g}\t{row.score:.9g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_results_tsv(path: Union[str, Path]) -> Dict[str, List[str]]:
    """读取排序结果，返回 query_id → 按名次排列的候选 id 列表"""
    ranked: Dict[str, List[Tuple[int, str]]] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split("\t")) != RESULTS_HEADER:
        raise CorpusError(f"{path}: 缺少表头 {' '.join(RESULTS_HEADER)}")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(RESULTS_HEADER):
            raise CorpusError(f"{path} 第 {lineno} 行: 应有 {len(RESULTS_HEADER)} 列")
        try:
            rank_value = int(parts[1])
        except ValueError:
            raise CorpusError(f"{path} 第 {lineno} 行: rank 不是整数")
        ranked.setdefault(parts[0], []).append((rank_value, parts[2]))
    return {q: [c for _, c in sorted(items)] for q, items in ranked.items()}


# ---------------------------------------------------------------------------
# 评估
# ---------------------------------------------------------------------------

def eval_retrieval(results: Mapping[str, Sequence[str]], truth: GroundTruth, k: int) -> RetrievalMetrics:
    """按真值计算 precision@k 与 MRR

    Args:
        results: query_id → 排好序的候选 id 列表（查询自身会被剔除）
        truth: 真值
        k: precision 的截断位置

    Raises:
        MissingGroundTruthError: 查询或候选不在真值中
    """
    if k < 1:
        raise CorpusError(f"k 必须是正整数: {k}")
    if not results:
        raise CorpusError("没有任何查询结果")
    rows = []
    for query_id in sorted(results):
        target = truth.template(query_id)
        ranked = [c for c in results[query_id] if c != query_id]
        relevant = [truth.template(c) == target for c in ranked]
        precision = sum(relevant[:k]) / k
        first_hit = next((i for i, hit in enumerate(relevant, start=1) if hit), None)
        rr = 1.0 / first_hit if first_hit is not None else 0.0
        rows.append(QueryMetrics(query_id, precision, rr, first_hit))
    return RetrievalMetrics(
        precision_at_k=float(np.mean([r.precision for r in rows])),
        mean_reciprocal_rank=float(np.mean([r.reciprocal_rank for r in rows])),
        k=k,
        rows=tuple(rows),
    )


def random_baseline_mrr(n_candidates: int, n_relevant: int, cutoff: Optional[int] = None) -> float:
    """均匀随机排列下倒数名次的精确期望

    n 个候选中有 m 个相关；首个相关项在名次 r 的概率为 C(n-r, m-1) / C(n, m)。
    cutoff 给定时，名次超过 cutoff 的命中记 0（对应只输出前 cutoff 个结果）。
    """
    if n_relevant <= 0 or n_candidates <= 0:
        return 0.0
    if n_relevant > n_candidates:
        raise CorpusError(f"相关数 {n_relevant} 超过候选数 {n_candidates}")
    last = n_candidates - n_relevant + 1
    if cutoff is not None:
        last = min(last, cutoff)
    total = math.comb(n_candidates, n_relevant)
    expected = 0.0
    for r in range(1, last + 1):
        expected += math.comb(n_candidates - r, n_relevant - 1) / total / r
    return expected


def simulate_random_mrr(
    n_candidates: int,
    n_relevant: int,
    trials: int = 10000,
    seed: int = 0,
    cutoff: Optional[int] = None,
) -> float:
    """随机排列的蒙特卡洛模拟（random_baseline_mrr 的对照）"""
    rng = np.random.default_rng(seed)
    labels = np.zeros(n_candidates, dtype=bool)
    labels[:n_relevant] = True
    total = 0.0
    for _ in range(trials):
        order = labels[rng.permutation(n_candidates)]
        hits = np.flatnonzero(order)
        if hits.size:
            r = int(hits[0]) + 1
            if cutoff is None or r <= cutoff:
                total += 1.0 / r
    return total / trials
