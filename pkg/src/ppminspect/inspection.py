"""Rules that confront explanations with process knowledge mined from the log."""
from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field

from . import gbdt
from .encode import EncodingError, FeatureMatrix, FeatureName, sparsity_report
from .eventlog import AttributeKind, AttributeSchema, EventLog, LabelSpec
from .explain import GlobalExplanation, LocalExplanation
from .mine import MiningError, eventually_follows_ratio, min_prefix_index, precedes_ratio

logger = logging.getLogger(__name__)

DIRECT_LEAKAGE = "DirectLeakage"
CORRELATED_LEAKAGE = "CorrelatedLeakage"
IRRELEVANT_FEATURE = "IrrelevantFeature"
STATIC_DOMINANCE = "StaticDominance"
SPARSITY_WARNING = "SparsityWarning"

SEVERITY_RANK = {"error": 2, "warning": 1, "info": 0}


@dataclass(frozen=True)
class InspectionConfig:
    top_k: int = 10
    leak_ratio: float = 0.5
    static_share: float = 0.6
    density_floor: float = 0.05

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        for name in ("leak_ratio", "static_share", "density_floor"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Finding:
    kind: str
    severity: str
    subjects: list[str]
    evidence: dict
    message: str = ""
    context: str | None = None  # e.g. the bucket/model the finding concerns

    def sort_key(self):
        return (-SEVERITY_RANK[self.severity], self.kind, self.subjects, self.context or "")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "severity": self.severity,
            "subjects": list(self.subjects),
            "context": self.context,
            "message": self.message,
            "evidence": self.evidence,
        }


def _parse(name: str) -> FeatureName | None:
    try:
        return FeatureName.parse(name)
    except EncodingError:
        logger.info("skipping unparseable feature name %r", name)
        return None


def inspect_leakage(
    explanation: GlobalExplanation,
    label: LabelSpec,
    log: EventLog,
    cfg: InspectionConfig | None = None,
    context: str | None = None,
) -> list[Finding]:
    """Flag important features that reveal, or travel with, the label activity."""
    cfg = cfg or InspectionConfig()
    anchor = label.anchor
    if min_prefix_index(log, anchor) is None:
        raise MiningError(f"label activity {anchor!r} does not occur in the log")
    findings = []
    for rank, (name, importance) in enumerate(explanation.top(cfg.top_k), start=1):
        feat = _parse(name)
        act = feat.activity_ref if feat else None
        if act is None:
            continue
        base = {"activity": act, "importance": importance, "rank": rank, "top_k": cfg.top_k,
                "importance_method": explanation.method}
        if act in label.label_activities:
            findings.append(Finding(
                DIRECT_LEAKAGE, "error", [name],
                {**base, "label_activities": list(label.label_activities)},
                f"{act} is part of the outcome being predicted",
                context,
            ))
            continue
        follows = eventually_follows_ratio(log, anchor, act)
        precedes = precedes_ratio(log, act, anchor)
        if follows >= cfg.leak_ratio or precedes >= cfg.leak_ratio:
            findings.append(Finding(
                CORRELATED_LEAKAGE, "warning", [name],
                {**base, "label_activity": anchor, "follows_ratio": follows,
                 "precedes_ratio": precedes, "threshold": cfg.leak_ratio},
                f"{act} follows {anchor} in {follows:.0%} and precedes it in {precedes:.0%} of the cases",
                context,
            ))
    return findings


def inspect_relevance(
    explanation: LocalExplanation,
    prefix_length: int,
    log: EventLog,
    cfg: InspectionConfig | None = None,
    context: str | None = None,
) -> list[Finding]:
    """Flag absence conditions on activities that cannot have happened yet."""
    findings = []
    for attr in explanation.attributions:
        if not attr.asserts_absence:
            continue
        feat = _parse(attr.feature)
        act = feat.activity_ref if feat else None
        if act is None:
            continue
        first = min_prefix_index(log, act)
        if first is not None and first > prefix_length:
            findings.append(Finding(
                IRRELEVANT_FEATURE, "error", [attr.feature],
                {"activity": act, "min_prefix_index": first, "prefix_length": prefix_length,
                 "condition": attr.condition, "weight": attr.weight,
                 "row_id": list(explanation.row_id) if explanation.row_id else None},
                f"absence of {act} is uninformative before position {first}; explanation is for length {prefix_length}",
                context,
            ))
    return findings


def inspect_static_dominance(
    explanation: GlobalExplanation,
    schema: AttributeSchema,
    task: str,
    cfg: InspectionConfig | None = None,
    context: str | None = None,
) -> list[Finding]:
    """Flag remaining-time models whose top features are mostly case attributes."""
    cfg = cfg or InspectionConfig()
    if task != gbdt.SQUARED_ERROR:
        raise ValueError("static dominance is checked for remaining-time (regression) models only")
    top = explanation.top(cfg.top_k)
    total = sum(v for _, v in top)
    static = []
    for name, v in top:
        feat = _parse(name)
        if feat is not None and feat.namespace == "static":
            spec = schema.attributes.get(feat.attribute)
            if spec is None or spec.kind == AttributeKind.STATIC:
                static.append((name, v))
    share = sum(v for _, v in static) / total if total > 0 else 0.0
    if share >= cfg.static_share and static:
        return [Finding(
            STATIC_DOMINANCE, "warning", [n for n, _ in static],
            {"static_share": share, "threshold": cfg.static_share, "top_k": cfg.top_k,
             "static_features": [{"feature": n, "importance": v} for n, v in static],
             "importance_method": explanation.method},
            f"{share:.0%} of top-{cfg.top_k} importance sits on static case attributes",
            context,
        )]
    return []


def inspect_sparsity(matrix: FeatureMatrix, cfg: InspectionConfig | None = None, context: str | None = None) -> list[Finding]:
    cfg = cfg or InspectionConfig()
    count, density = sparsity_report(matrix)
    if density < cfg.density_floor:
        return [Finding(
            SPARSITY_WARNING, "info", [],
            {"feature_count": count, "density": density, "density_floor": cfg.density_floor},
            f"{count} features with only {density:.1%} non-zero cells",
            context,
        )]
    return []


@dataclass
class InspectionReport:
    metadata: dict
    findings: list[Finding] = field(default_factory=list)

    @property
    def summary(self) -> dict:
        return {
            "by_kind": dict(sorted(Counter(f.kind for f in self.findings).items())),
            "by_severity": dict(sorted(Counter(f.severity for f in self.findings).items())),
            "total": len(self.findings),
        }

    @property
    def has_errors(self) -> bool:
        return any(f.severity == "error" for f in self.findings)

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "findings": [f.to_dict() for f in self.findings],
            "summary": self.summary,
            "has_errors": self.has_errors,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        lines = ["Inspection report"]
        for k, v in sorted(self.metadata.items()):
            lines.append(f"  {k}: {v}")
        s = self.summary
        lines.append(f"{s['total']} finding(s): " + ", ".join(f"{k}={v}" for k, v in s["by_severity"].items()))
        for f in self.findings:
            where = f" [{f.context}]" if f.context else ""
            subj = ", ".join(f.subjects) if f.subjects else "-"
            lines.append(f"- {f.severity.upper()} {f.kind}{where}: {subj}")
            if f.message:
                lines.append(f"    {f.message}")
            for k, v in sorted(f.evidence.items()):
                lines.append(f"    {k} = {v}")
        return "\n".join(lines) + "\n"


def build_report(findings: list[Finding], metadata: dict | None = None) -> InspectionReport:
    return InspectionReport(dict(metadata or {}), sorted(findings, key=Finding.sort_key))
