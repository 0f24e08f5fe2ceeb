"""
report.sarif - SARIF 2.1.0 output built from the sarif-om object model.

sarif-om classes are attrs classes whose fields carry the SARIF property
name in their metadata; `to_sarif_dict` walks them to produce the camelCase
JSON document.
"""

from typing import Any, Dict, List

import attr
from sarif_om import (
    ArtifactLocation,
    Location,
    Message,
    MultiformatMessageString,
    PhysicalLocation,
    PropertyBag,
    Region,
    ReportingDescriptor,
    Result,
    Run,
    SarifLog,
    Tool,
    ToolComponent,
)

from equiv_guard.detectors.models import Confidence, Finding
from equiv_guard.models import ALL_SMELLS, Smell
from equiv_guard.report.models import TOOL_NAME, Report

SARIF_VERSION = "2.1.0"
SARIF_SCHEMA = "https://json.schemastore.org/sarif-2.1.0.json"
INFORMATION_URI = "https://github.com/equiv-guard/equiv-guard"

RULES: Dict[Smell, Dict[str, str]] = {
    Smell.CCRA: {"name": "CrossChainReplayAttack",
                 "short": "Signature digest not bound to the executing chain",
                 "full": "Incorrect chain information validation lets a signed message be replayed on another chain."},
    Smell.TDT: {"name": "TimeDelayTrap",
                "short": "Waiting period measured in blocks",
                "full": "Block-count intervals assume one block time; the real delay differs across chains."},
    Smell.PCA: {"name": "PhishingContractAttack",
                "short": "External call to a hardcoded address",
                "full": "A fixed address may be empty or attacker-controlled on another chain."},
    Smell.GLI: {"name": "GasLimitImbalance",
                "short": "Control flow decided by gasleft() against a constant",
                "full": "Gas prices and limits differ across chains, so a fixed gas amount changes behaviour."},
    Smell.FGR: {"name": "FixedGasReentrancy",
                "short": "transfer()/send() before the state it depends on is updated",
                "full": "The 2300 gas stipend only prevents reentrancy under one chain's opcode prices."},
    Smell.BHM: {"name": "BlockHeightMisalignment",
                "short": "Branch on an absolute block height",
                "full": "Block heights are chain specific; the same height is reached at different times."},
}

LEVELS = {Confidence.CONFIRMED: "error", Confidence.LIKELY: "warning", Confidence.STATIC: "warning"}


def rule_id(smell: Smell) -> str:
    return f"{TOOL_NAME}/{smell.value}"


def _rule(smell: Smell) -> ReportingDescriptor:
    text = RULES[smell]
    return ReportingDescriptor(
        id=rule_id(smell),
        name=text["name"],
        short_description=MultiformatMessageString(text=text["short"]),
        full_description=MultiformatMessageString(text=text["full"]),
    )


def _result(finding: Finding, rule_index: int) -> Result:
    location = finding.primary_location
    region = Region(start_line=finding.line, start_column=finding.column,
                    char_offset=location.start, char_length=location.length)
    properties = PropertyBag()
    properties.confidence = finding.confidence.value.lower()
    properties.contract = finding.contract
    properties.function = finding.function
    if finding.verification is not None:
        properties.verification = finding.verification.value
    if finding.metadata:
        properties.metadata = finding.metadata
    return Result(
        rule_id=rule_id(finding.smell),
        rule_index=rule_index,
        level=LEVELS[finding.confidence],
        message=Message(text=finding.message),
        locations=[Location(physical_location=PhysicalLocation(
            artifact_location=ArtifactLocation(uri=finding.file), region=region))],
        properties=properties,
    )


def build_sarif(report: Report) -> SarifLog:
    smells: List[Smell] = [s for s in ALL_SMELLS if any(f.smell == s for f in report.findings)]
    index = {smell: i for i, smell in enumerate(smells)}
    driver = ToolComponent(name=TOOL_NAME, version=report.tool_version, information_uri=INFORMATION_URI,
                           rules=[_rule(s) for s in smells])
    run = Run(tool=Tool(driver=driver), results=[_result(f, index[f.smell]) for f in report.findings])
    return SarifLog(version=SARIF_VERSION, schema_uri=SARIF_SCHEMA, runs=[run])


def to_sarif_dict(value: Any) -> Any:
    """Serialize sarif-om objects, dropping unset fields."""
    if isinstance(value, PropertyBag):
        return {k: to_sarif_dict(v) for k, v in sorted(vars(value).items())
                if not k.startswith("_") and v is not None and k != "tags"}
    if attr.has(type(value)):
        out = {}
        for field in attr.fields(type(value)):
            item = getattr(value, field.name)
            if item is None or (isinstance(field.default, (int, str)) and item == field.default
                                and field.name not in ("version",)):
                continue
            out[field.metadata.get("schema_property_name", field.name)] = to_sarif_dict(item)
        return out
    if isinstance(value, (list, tuple)):
        return [to_sarif_dict(v) for v in value]
    if isinstance(value, dict):
        return {k: to_sarif_dict(v) for k, v in value.items()}
    return value


def emit_sarif(report: Report) -> Dict[str, Any]:
    """One rule per reported smell and one result per finding."""
    return to_sarif_dict(build_sarif(report))
