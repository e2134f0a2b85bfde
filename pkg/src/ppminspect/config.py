"""JSON run configuration for the command-line tool.

Example::

    {
      "version": 1,
      "log": {"path": "log.csv", "resource_column": "org:resource"},
      "target": {"kind": "outcome", "label": {"type": "contains_activity", "activity": "X"}},
      "method": "single_agg",
      "prefix": {"min": 1, "max": 40, "gap": 1},
      "seed": 0
    }

Relative paths are resolved against the directory holding the config file.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import gbdt
from .encode import EncodingError, normalize_encodings
from .eventlog import LabelSpec, label_from_dict
from .explain import LocalConfig
from .ingest import ColumnMapping
from .inspection import InspectionConfig
from .pipeline import METHODS, PipelineConfig
from .prep import REMAINING_TIME

CONFIG_VERSION = 1


class ConfigFileError(ValueError):
    """Invalid configuration; the message names the file and field."""


@dataclass(frozen=True)
class ExplanationConfig:
    global_method: str = "gain"  # "gain" | "permutation"
    permutation_repeats: int = 5
    n_samples: int = 5000
    k: int = 10
    kernel_width: float | None = None
    ridge: float = 1e-3
    #: test prefixes explained (and checked for relevance) by `inspect`
    local_instances: int = 5

    def __post_init__(self):
        if self.global_method not in ("gain", "permutation"):
            raise ValueError(f"global_method must be 'gain' or 'permutation', got {self.global_method!r}")
        if self.permutation_repeats < 1 or self.n_samples < 2 or self.k < 1 or self.local_instances < 0:
            raise ValueError("permutation_repeats, k >= 1; n_samples >= 2; local_instances >= 0")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")

    @property
    def local(self) -> LocalConfig:
        return LocalConfig(self.n_samples, self.k, self.kernel_width, self.ridge)


@dataclass(frozen=True)
class RunConfig:
    log_path: Path
    mapping: ColumnMapping
    target: LabelSpec | str
    bucketing: str = "single"
    encodings: tuple[str, ...] = ("static", "aggregation")
    min_len: int = 1
    max_len: int = 40
    gap: int = 1
    split_ratio: float = 0.8
    hyperparams: gbdt.Hyperparams = field(default_factory=gbdt.Hyperparams)
    explanation: ExplanationConfig = field(default_factory=ExplanationConfig)
    inspection: InspectionConfig = field(default_factory=InspectionConfig)
    seed: int = 0
    output_dir: Path = Path("out")
    source: Path | None = None

    @property
    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            target=self.target,
            bucketing=self.bucketing,
            encodings=self.encodings,
            min_len=self.min_len,
            max_len=self.max_len,
            gap=self.gap,
            split_ratio=self.split_ratio,
            hyperparams=self.hyperparams,
            seed=self.seed,
        )

    @property
    def is_outcome(self) -> bool:
        return self.target != REMAINING_TIME

    def to_dict(self) -> dict:
        """Canonical form used for the digest; only the log file name is kept."""
        return {
            "version": CONFIG_VERSION,
            "log": {"path": self.log_path.name, **self.mapping.to_dict()},
            "target": {"kind": "remaining_time"} if not self.is_outcome
            else {"kind": "outcome", "label": self.target.to_dict()},
            "bucketing": self.bucketing,
            "encodings": list(self.encodings),
            "prefix": {"min": self.min_len, "max": self.max_len, "gap": self.gap},
            "split_ratio": self.split_ratio,
            "hyperparams": asdict(self.hyperparams),
            "explanation": asdict(self.explanation),
            "inspection": asdict(self.inspection),
            "seed": self.seed,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _section(data: dict, key: str, where: str) -> dict:
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ConfigFileError(f"{where}: field {key!r} must be an object")
    return value


def _build(cls, values: dict, where: str, key: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigFileError(f"{where}: unknown field(s) in {key!r}: {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigFileError(f"{where}: field {key!r}: {exc}") from exc


def parse_config(data: dict, base_dir: Path | None = None, where: str = "<config>") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigFileError(f"{where}: top level must be a JSON object")
    version = data.get("version")
    if version != CONFIG_VERSION:
        raise ConfigFileError(f"{where}: field 'version' must be {CONFIG_VERSION}, got {version!r}")
    base_dir = base_dir or Path.cwd()

    log_section = dict(_section(data, "log", where))
    if "path" not in log_section:
        raise ConfigFileError(f"{where}: field 'log.path' is required")
    log_path = Path(log_section.pop("path"))
    if not log_path.is_absolute():
        log_path = base_dir / log_path
    mapping = _build(ColumnMapping, log_section, where, "log")

    tgt = _section(data, "target", where)
    kind = tgt.get("kind")
    if kind == "remaining_time":
        target = REMAINING_TIME
    elif kind == "outcome":
        if "label" not in tgt:
            raise ConfigFileError(f"{where}: field 'target.label' is required for an outcome target")
        try:
            target = label_from_dict(tgt["label"])
        except (KeyError, ValueError, AttributeError) as exc:
            raise ConfigFileError(f"{where}: field 'target.label': {exc}") from exc
    else:
        raise ConfigFileError(f"{where}: field 'target.kind' must be 'outcome' or 'remaining_time', got {kind!r}")

    if "method" in data:
        if data["method"] not in METHODS:
            raise ConfigFileError(f"{where}: field 'method' must be one of {sorted(METHODS)}")
        bucketing, encodings = METHODS[data["method"]]
        bucketing = data.get("bucketing", bucketing)
        encodings = tuple(data.get("encodings", encodings))
    else:
        bucketing = data.get("bucketing", "single")
        encodings = tuple(data.get("encodings", ("static", "aggregation")))
    if bucketing not in ("single", "prefix_length"):
        raise ConfigFileError(f"{where}: field 'bucketing' must be 'single' or 'prefix_length'")
    try:
        encodings = normalize_encodings(encodings)
    except EncodingError as exc:
        raise ConfigFileError(f"{where}: field 'encodings': {exc}") from exc
    if "index" in encodings and bucketing != "prefix_length":
        raise ConfigFileError(f"{where}: field 'encodings': index encoding requires prefix_length bucketing")

    prefix = _section(data, "prefix", where)
    unknown = sorted(set(prefix) - {"min", "max", "gap"})
    if unknown:
        raise ConfigFileError(f"{where}: unknown field(s) in 'prefix': {', '.join(unknown)}")
    min_len, max_len, gap = prefix.get("min", 1), prefix.get("max", 40), prefix.get("gap", 1)
    for name, v in (("min", min_len), ("max", max_len), ("gap", gap)):
        if not isinstance(v, int) or v < 1:
            raise ConfigFileError(f"{where}: field 'prefix.{name}' must be a positive integer")
    if min_len > max_len:
        raise ConfigFileError(f"{where}: field 'prefix.min' exceeds 'prefix.max'")

    split_ratio = data.get("split_ratio", 0.8)
    if not isinstance(split_ratio, (int, float)) or not 0.0 < split_ratio < 1.0:
        raise ConfigFileError(f"{where}: field 'split_ratio' must lie in (0, 1)")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigFileError(f"{where}: field 'seed' must be a non-negative integer")

    output_dir = Path(data.get("output_dir", "out"))
    if not output_dir.is_absolute():
        output_dir = base_dir / output_dir

    return RunConfig(
        log_path=log_path,
        mapping=mapping,
        target=target,
        bucketing=bucketing,
        encodings=encodings,
        min_len=min_len,
        max_len=max_len,
        gap=gap,
        split_ratio=float(split_ratio),
        hyperparams=_build(gbdt.Hyperparams, _section(data, "hyperparams", where), where, "hyperparams"),
        explanation=_build(ExplanationConfig, _section(data, "explanation", where), where, "explanation"),
        inspection=_build(InspectionConfig, _section(data, "inspection", where), where, "inspection"),
        seed=seed,
        output_dir=output_dir,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigFileError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    cfg = parse_config(data, path.resolve().parent, str(path))
    return replace(cfg, source=path)
