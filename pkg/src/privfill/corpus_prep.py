"""Dataset preparation: Enron email cleaning, author filtering, label tasks."""

from __future__ import annotations

import ast
import email
import email.policy
import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from privfill.rewriter.mechanisms import Document
from privfill.rewriter.segment import segment_sentences

DEFAULT_SIGNOFFS = (
    "Best",
    "All the best",
    "Best wishes",
    "Best regards",
    "Sincerely",
    "Respectfully",
    "Regards",
    "Warm regards",
    "Kind regards",
    "Thank you,",
    "Thank you in advance,",
    "Talk to you soon,",
    "Thanks,",
)

FORWARDED = "forwarded"
REUTERS = "reuters"
EMPTY = "empty"
SHORT = "short"
INFREQUENT = "infrequent_author"

_REPLY_MARKER = re.compile(r"-{2,}\s*Original Message\s*-{2,}")
_FORWARDED = re.compile(r"\bForwarded\b")
_REUTERS = re.compile(r"\bReuters\b")
_LAST_PUNCT = re.compile(r"[.!?](?=[^.!?]*\Z)")
# a signoff may be followed on its line by a short capitalised name
_NAME_TAIL = r"(?:[ \t]+[A-Z][\w.'-]*(?:[ \t]+[A-Z][\w.'-]*){0,2})?"


@dataclass(frozen=True)
class RawEmail:
    user: str
    folder: str
    body: str
    id: str = ""


@dataclass
class PrepStats:
    input_count: int = 0
    dropped_forwarded: int = 0
    dropped_reuters: int = 0
    dropped_empty: int = 0
    dropped_short: int = 0
    dropped_infrequent: int = 0
    output_count: int = 0

    def drops(self) -> int:
        return (
            self.dropped_forwarded
            + self.dropped_reuters
            + self.dropped_empty
            + self.dropped_short
            + self.dropped_infrequent
        )

    def balanced(self) -> bool:
        return self.output_count + self.drops() == self.input_count

    def __add__(self, other: "PrepStats") -> "PrepStats":
        return PrepStats(**{k: v + getattr(other, k) for k, v in asdict(self).items()})

    def count_drop(self, reason: str) -> None:
        attr = {
            FORWARDED: "dropped_forwarded",
            REUTERS: "dropped_reuters",
            EMPTY: "dropped_empty",
            SHORT: "dropped_short",
            INFREQUENT: "dropped_infrequent",
        }[reason]
        setattr(self, attr, getattr(self, attr) + 1)


def _signoff_pattern(signoffs: Sequence[str]) -> re.Pattern:
    cores = sorted({s.rstrip(",").strip() for s in signoffs}, key=len, reverse=True)
    alt = "|".join(re.escape(c) for c in cores)
    return re.compile(rf"^[ \t]*(?i:{alt})[ \t]*[,.!]*{_NAME_TAIL}[ \t]*$", re.M)


def _clean_once(text: str, signoff_re: re.Pattern) -> tuple[str | None, str | None]:
    m = _REPLY_MARKER.search(text)
    if m:
        text = text[: m.start()]
    if _FORWARDED.search(text):
        return None, FORWARDED
    if _REUTERS.search(text):
        return None, REUTERS
    cr = text.rfind("\r")
    if cr >= 0:
        text = text[cr + 1 :]
    hdr = text.find("From:")
    if hdr >= 0:
        text = text[:hdr]
    m = signoff_re.search(text)
    if m:
        text = text[: m.start()]
    else:
        p = _LAST_PUNCT.search(text)
        if p:
            text = text[: p.end()]
    text = text.strip()
    if not text:
        return None, EMPTY
    return text, None


def clean_enron_email_with_reason(
    body: str | RawEmail, signoffs: Sequence[str] = DEFAULT_SIGNOFFS
) -> tuple[str | None, str | None]:
    """Return ``(cleaned_text, None)`` or ``(None, drop_reason)``.

    The rule sequence is repeated until the text stops changing, so cleaning is
    idempotent even when a signoff cut exposes trailing unpunctuated text.
    """
    text = body.body if isinstance(body, RawEmail) else body
    signoff_re = _signoff_pattern(signoffs)
    while True:
        cleaned, reason = _clean_once(text, signoff_re)
        if cleaned is None or cleaned == text:
            return cleaned, reason
        text = cleaned


def clean_enron_email(body: str | RawEmail, signoffs: Sequence[str] = DEFAULT_SIGNOFFS) -> str | None:
    return clean_enron_email_with_reason(body, signoffs)[0]


def nearest_rank_percentile(values: Sequence[float], percentile: float) -> float:
    if not values:
        raise ValueError("empty value list")
    if not 0 < percentile < 100:
        raise ValueError("percentile must be in (0, 100)")
    ordered = sorted(values)
    rank = math.ceil(percentile / 100 * len(ordered))
    return ordered[max(rank, 1) - 1]


def filter_frequent_authors(
    emails: Sequence[tuple[str, Any]], percentile: float = 80
) -> tuple[list[tuple[str, Any]], float]:
    """Keep items whose author wrote at least the ``percentile``-th count.

    Items are ``(user, payload)`` pairs; the threshold uses the nearest-rank
    convention over per-user counts.
    """
    if not emails:
        raise ValueError("no emails to filter")
    counts = Counter(user for user, _ in emails)
    threshold = nearest_rank_percentile(list(counts.values()), percentile)
    keep = {u for u, c in counts.items() if c >= threshold}
    return [e for e in emails if e[0] in keep], threshold


def min_sentence_filter(docs: Iterable[Document | str], minimum: int = 2) -> list:
    if minimum < 1:
        raise ValueError("minimum must be >= 1")
    out = []
    for d in docs:
        text = d.text if isinstance(d, Document) else d
        if text and len(segment_sentences(text)) >= minimum:
            out.append(d)
    return out


@dataclass
class EnronResult:
    documents: list[Document]
    stats: PrepStats
    drop_log: list[dict]
    author_threshold: float | None = None


def prepare_enron(
    emails: Iterable[RawEmail],
    signoffs: Sequence[str] = DEFAULT_SIGNOFFS,
    percentile: float | None = 80,
    min_sentences: int = 2,
) -> EnronResult:
    """Clean, keep frequent authors (over the cleaned set), then drop short emails."""
    stats = PrepStats()
    drop_log: list[dict] = []
    cleaned: list[tuple[str, RawEmail, str]] = []
    for raw in emails:
        stats.input_count += 1
        text, reason = clean_enron_email_with_reason(raw.body, signoffs)
        if text is None:
            stats.count_drop(reason)
            drop_log.append({"id": raw.id, "user": raw.user, "reason": reason})
            continue
        cleaned.append((raw.user, raw, text))

    threshold = None
    if percentile is not None and cleaned:
        kept, threshold = filter_frequent_authors([(u, (r, t)) for u, r, t in cleaned], percentile)
        kept_ids = {id(p[0]) for _, p in kept}
        for user, raw, _ in cleaned:
            if id(raw) not in kept_ids:
                stats.count_drop(INFREQUENT)
                drop_log.append({"id": raw.id, "user": user, "reason": INFREQUENT})
        cleaned = [(u, r, t) for u, (r, t) in kept]

    docs = []
    for user, raw, text in cleaned:
        if len(segment_sentences(text)) < min_sentences:
            stats.count_drop(SHORT)
            drop_log.append({"id": raw.id, "user": user, "reason": SHORT})
            continue
        docs.append(Document(id=raw.id, text=text, privacy_label=user))
    stats.output_count = len(docs)
    return EnronResult(docs, stats, drop_log, threshold)


def _decode_bytes(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def message_body(raw: str) -> str:
    """Strip RFC 822 headers if present; otherwise return the text unchanged."""
    if not re.match(r"^[\w-]+:", raw):
        return raw
    msg = email.message_from_string(raw, policy=email.policy.compat32)
    payload = msg.get_payload()
    if isinstance(payload, list):
        payload = "\n".join(str(p.get_payload()) for p in payload)
    return payload


def read_maildir(root: str | Path, folders: Sequence[str] = ("sent_items",)) -> Iterator[RawEmail]:
    """Walk ``root/<user>/<folder>/...`` in sorted order."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"not a directory: {root}")
    for user_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for folder in folders:
            fdir = user_dir / folder
            if not fdir.is_dir():
                continue
            for f in sorted(p for p in fdir.rglob("*") if p.is_file()):
                raw = _decode_bytes(f.read_bytes())
                rel = f.relative_to(root).as_posix()
                yield RawEmail(user=user_dir.name, folder=folder, body=message_body(raw), id=rel)


def read_email_jsonl(path: str | Path, folders: Sequence[str] | None = ("sent_items",)) -> Iterator[RawEmail]:
    """Records with ``user`` and ``body`` (or raw ``message``), optional ``folder``/``id``."""
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh):
            if not line.strip():
                continue
            rec = json.loads(line)
            folder = rec.get("folder", "sent_items")
            if folders is not None and folder not in folders:
                continue
            body = rec["body"] if "body" in rec else message_body(rec["message"])
            yield RawEmail(user=str(rec["user"]), folder=folder, body=body, id=str(rec.get("id", n)))


@dataclass
class LabelTask:
    """How to turn raw records into labelled Documents.

    ``*_map`` turns a raw field value into a label; values missing from a map
    are dropped, or raise when ``strict`` is set. ``first_label`` takes the
    first element of list-valued fields.
    """

    text_field: str
    utility_field: str | None = None
    privacy_field: str | None = None
    utility_map: dict | None = None
    privacy_map: dict | None = None
    id_field: str | None = None
    first_label: bool = False
    top_k: int | None = None
    min_sentences: int | None = None
    sample_fraction: float | None = None
    seed: int = 42
    strict: bool = False


class LabelError(ValueError):
    pass


def _first(value):
    if isinstance(value, str) and value.startswith("["):
        value = ast.literal_eval(value)
    if isinstance(value, (list, tuple)):
        return value[0] if value else None
    return value


def _map_label(value, mapping, strict, offenders, first):
    if value is None:
        return None
    if first:
        value = _first(value)
    if mapping is None:
        return str(value)
    key = value if value in mapping else str(value)
    if key in mapping:
        return mapping[key]
    if strict:
        offenders.add(value)
    return None


def seeded_sample(items: Sequence, fraction: float, seed: int = 42) -> list:
    """Draw ``round(fraction * n)`` items without replacement, original order kept."""
    if not 0 < fraction <= 1:
        raise ValueError("sample fraction must be in (0, 1]")
    n = round(fraction * len(items))
    picked = np.random.default_rng(seed).choice(len(items), size=n, replace=False)
    return [items[i] for i in sorted(picked)]


def build_label_task(records: Iterable[dict], task: LabelTask) -> list[Document]:
    offenders: set = set()
    rows = []
    for n, rec in enumerate(records):
        text = rec.get(task.text_field)
        if not isinstance(text, str) or not text.strip():
            continue
        u = _map_label(rec.get(task.utility_field) if task.utility_field else None,
                       task.utility_map, task.strict, offenders, task.first_label)
        p = _map_label(rec.get(task.privacy_field) if task.privacy_field else None,
                       task.privacy_map, task.strict, offenders, False)
        if task.utility_field and u is None:
            continue
        if task.privacy_field and p is None:
            continue
        doc_id = str(rec[task.id_field]) if task.id_field else str(n)
        rows.append(Document(doc_id, text, u, p))
    if offenders:
        shown = ", ".join(sorted(map(repr, offenders))[:10])
        raise LabelError(f"unmapped label values: {shown}")
    if task.top_k is not None:
        counts = Counter(d.utility_label for d in rows)
        top = {lab for lab, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[: task.top_k]}
        rows = [d for d in rows if d.utility_label in top]
    if task.min_sentences is not None:
        rows = min_sentence_filter(rows, task.min_sentences)
    if task.sample_fraction is not None:
        rows = seeded_sample(rows, task.sample_fraction, task.seed)
    return rows


TASK_PRESETS: dict[str, LabelTask] = {
    "arxiv": LabelTask(text_field="abstracts", utility_field="terms", first_label=True, top_k=10),
    "bbc": LabelTask(text_field="text", utility_field="category"),
    "docnli": LabelTask(text_field="premise", utility_field="label", sample_fraction=0.01),
    "trustpilot": LabelTask(
        text_field="text",
        utility_field="rating",
        privacy_field="gender",
        utility_map={1: "negative", 2: "negative", 5: "positive", "1": "negative", "2": "negative", "5": "positive"},
        min_sentences=2,
        sample_fraction=0.1,
    ),
    "yelp": LabelTask(text_field="review", utility_field="sentiment", privacy_field="user_id"),
}


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def write_documents(path: str | Path, docs: Iterable[Document]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(d.to_record(), ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    return n


def read_documents(path: str | Path) -> list[Document]:
    return [Document.from_record(r) for r in read_jsonl(path)]
