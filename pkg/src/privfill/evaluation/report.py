"""Evaluation report records, merging, and plain-text / CSV rendering."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

from privfill.evaluation.metrics import EvalInputs, pp_plus, relative_gain

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


@dataclass
class EvalReport:
    dataset: str = ""
    mechanism: str = ""
    kinds: list[str] = field(default_factory=list)
    seed: int | None = None
    n_documents: int | None = None
    f1_averaging: str = "micro"
    utility_f1_mean: float | None = None
    utility_f1_std: float | None = None
    privacy_f1_static: float | None = None
    privacy_f1_adaptive_mean: float | None = None
    privacy_f1_adaptive_std: float | None = None
    rouge1: float | None = None
    rougeL: float | None = None
    cosine_similarity: float | None = None
    perplexity_mean: float | None = None
    perplexity_skipped: int | None = None
    baseline_utility_f1: float | None = None
    baseline_privacy_f1: float | None = None
    mg_u: float | None = None
    mg_p: float | None = None
    pp_plus: int | None = None
    relative_gain_static: float | None = None
    relative_gain_adaptive: float | None = None
    providers: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        for name in ("rouge1", "rougeL"):
            v = getattr(self, name)
            if v is not None and not 0 <= v <= 1:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.cosine_similarity is not None and not -1 <= self.cosine_similarity <= 1:
            raise ValueError("cosine_similarity outside [-1, 1]")
        if self.perplexity_mean is not None and not self.perplexity_mean > 0:
            raise ValueError("perplexity must be positive")

    def derive(self) -> "EvalReport":
        """Fill PP+ and relative gains from whatever inputs are present."""
        if self.utility_f1_mean is not None and self.mg_u is not None:
            self.pp_plus = pp_plus(self.utility_f1_mean, self.mg_u)
        needed = (self.utility_f1_mean, self.baseline_utility_f1, self.baseline_privacy_f1, self.mg_u, self.mg_p)
        if all(v is not None for v in needed):
            for attr, p_r in (
                ("relative_gain_static", self.privacy_f1_static),
                ("relative_gain_adaptive", self.privacy_f1_adaptive_mean),
            ):
                if p_r is not None:
                    setattr(self, attr, relative_gain(EvalInputs(
                        self.baseline_utility_f1, self.utility_f1_mean,
                        self.baseline_privacy_f1, p_r, self.mg_u, self.mg_p,
                    )))
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaError(f"report schema version {version!r}, expected {SCHEMA_VERSION}")
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


def write_report(path: str | Path, report: EvalReport) -> None:
    Path(path).write_text(report.to_json(), encoding="utf-8")


def read_report(path: str | Path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def merge_reports(reports: Iterable[EvalReport]) -> list[EvalReport]:
    """Combine fragments sharing (dataset, mechanism); later non-null fields win."""
    merged: dict[tuple[str, str], EvalReport] = {}
    for rep in reports:
        key = (rep.dataset, rep.mechanism)
        if key not in merged:
            merged[key] = EvalReport(dataset=rep.dataset, mechanism=rep.mechanism)
        target = merged[key]
        for f in fields(EvalReport):
            value = getattr(rep, f.name)
            if f.name == "kinds":
                target.kinds = sorted(set(target.kinds) | set(value))
            elif f.name == "providers":
                target.providers.update(value)
            elif value is not None and f.name not in ("dataset", "mechanism"):
                setattr(target, f.name, value)
    return [r.derive() for r in merged.values()]


def _fmt(value, digits=2, std=None) -> str:
    if value is None:
        return "n/a"
    text = f"{value:.{digits}f}" if isinstance(value, float) else str(value)
    if std is not None:
        text += f" ({std:.1f})"
    return text


def _render(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = [
        "  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths))),
        "  ".join("-" * w for w in widths),
    ]
    for r in rows:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(lines) + "\n"


def _label(rep: EvalReport) -> str:
    return f"{rep.dataset}/{rep.mechanism}" if rep.dataset else rep.mechanism


def render_utility_table(reports: Sequence[EvalReport]) -> str:
    header = ["Mechanism", "R1", "RL", "CS", "PPL", "F1"]
    rows = [
        [
            _label(r), _fmt(r.rouge1), _fmt(r.rougeL), _fmt(r.cosine_similarity),
            _fmt(None if r.perplexity_mean is None else round(r.perplexity_mean)),
            _fmt(r.utility_f1_mean, std=r.utility_f1_std),
        ]
        for r in reports
    ]
    return _render(header, rows)


def render_privacy_table(reports: Sequence[EvalReport]) -> str:
    header = ["Mechanism", "Utility F1", "PP+", "Privacy F1 (static)", "Privacy F1 (adapt.)", "RG (static)", "RG (adapt.)"]
    rows = [
        [
            _label(r), _fmt(r.utility_f1_mean, std=r.utility_f1_std), _fmt(r.pp_plus),
            _fmt(r.privacy_f1_static),
            _fmt(r.privacy_f1_adaptive_mean, std=r.privacy_f1_adaptive_std),
            _fmt(r.relative_gain_static), _fmt(r.relative_gain_adaptive),
        ]
        for r in reports
    ]
    return _render(header, rows)


CSV_FIELDS = [f.name for f in fields(EvalReport) if f.name not in ("providers", "kinds")]


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        d = r.to_dict()
        writer.writerow({k: ("" if d[k] is None else d[k]) for k in CSV_FIELDS})
    return buf.getvalue()


def per_document_csv(rows: Sequence[dict]) -> str:
    """Per-document metrics, e.g. cosine similarity against sentence count."""
    buf = io.StringIO()
    names = ["id", "n_sentences", "rouge1", "rougeL", "cosine_similarity"]
    writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{row[k]:.6f}" if isinstance(row.get(k), float) else row.get(k)) for k in names})
    return buf.getvalue()
