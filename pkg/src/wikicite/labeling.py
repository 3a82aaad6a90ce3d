"""Rule-based labeling of citations and leakage removal for training data."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .uniform import CitationRecord, UniformCitation

BOOK = "BOOK"
JOURNAL_ARTICLE = "JOURNAL_ARTICLE"
WEB_CONTENT = "WEB_CONTENT"
CLASS_LABELS = (BOOK, JOURNAL_ARTICLE, WEB_CONTENT)

NEWS_DOMAINS = frozenset({
    "nytimes", "bbc", "washingtonpost", "cnn", "theguardian",
    "huffingtonpost", "indiatimes",
})
MEDIA_DOMAINS = frozenset({
    "youtube", "rollingstone", "billboard", "mtv", "metacritic",
    "discogs", "allmusic",
})

# Fields whose values were used to derive labels; cleared before training.
LEAKAGE_FIELDS = ("type", "url", "url_top_level_domain", "work", "newspaper", "website")

_TARGET_ALIASES = {"book": BOOK, "web": WEB_CONTENT, "journal": JOURNAL_ARTICLE}


@dataclass
class LabeledCitation:
    record: CitationRecord  # citation inside is leakage-stripped
    label: str

    def to_dict(self) -> dict:
        d = self.record.to_dict()
        d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledCitation":
        return cls(record=CitationRecord.from_dict(d), label=d["label"])


def assign_label(c: UniformCitation) -> str | None:
    """Apply the labeling rules in order; None means "classify later".

    Identifier rules take precedence over domain rules, and the PMC/PMID rule
    over the DOI rule, following their stated order.
    """
    ids = c.id_list
    if "PMC" in ids or "PMID" in ids:
        return JOURNAL_ARTICLE
    if "DOI" in ids and _is_journal_template(c):
        return JOURNAL_ARTICLE
    if "ISBN" in ids:
        return BOOK
    domain = c.url_top_level_domain.lower()
    if domain in NEWS_DOMAINS:
        return WEB_CONTENT
    if domain in MEDIA_DOMAINS:
        return WEB_CONTENT
    return None


def _is_journal_template(c: UniformCitation) -> bool:
    # "citation" with a periodical counts as the journal-flavoured use of the
    # generic template (its journal=/magazine= parameters land there)
    return c.type in ("cite journal", "cite conference") or (
        c.type == "citation" and bool(c.periodical)
    )


def strip_leakage(c: UniformCitation) -> UniformCitation:
    """Empty the identifier list and the label-deriving fields; keep the rest."""
    return replace(c, id_list={}, **{f: "" for f in LEAKAGE_FIELDS})


def label_record(record: CitationRecord) -> LabeledCitation | None:
    label = assign_label(record.citation)
    if label is None:
        return None
    stripped = replace(record, citation=strip_leakage(record.citation))
    return LabeledCitation(record=stripped, label=label)


def partition(records: Iterable[CitationRecord]):
    """Split a corpus into per-class labeled sets and the unlabeled pool."""
    labeled: dict[str, list[LabeledCitation]] = {label: [] for label in CLASS_LABELS}
    unlabeled: list[CitationRecord] = []
    for record in records:
        item = label_record(record)
        if item is None:
            unlabeled.append(record)
        else:
            labeled[item.label].append(item)
    return labeled, unlabeled


def build_training_set(records: Iterable[CitationRecord],
                       targets: dict[str, int] | None = None,
                       seed: int = 0) -> list[LabeledCitation]:
    """Per-class uniform sample without replacement, deterministically shuffled.

    ``targets`` maps class names (BOOK/WEB_CONTENT/JOURNAL_ARTICLE, or the
    short forms book/web/journal) to sample sizes; absent classes are taken
    whole.  A target larger than the available pool is an error naming the
    class.
    """
    labeled, _ = partition(records)
    wanted: dict[str, int | None] = {label: None for label in CLASS_LABELS}
    for key, count in (targets or {}).items():
        label = _TARGET_ALIASES.get(key.lower(), key.upper())
        if label not in wanted:
            raise ValueError(f"unknown class in targets: {key!r}")
        wanted[label] = int(count)

    rng = np.random.default_rng(seed)
    sample: list[LabeledCitation] = []
    for label in CLASS_LABELS:
        pool = labeled[label]
        target = wanted[label]
        if target is None or target == len(pool):
            sample.extend(pool)
            continue
        if target > len(pool):
            raise ValueError(
                f"target {target} for class {label} exceeds available {len(pool)}")
        picked = rng.choice(len(pool), size=target, replace=False)
        sample.extend(pool[i] for i in sorted(picked))
    order = rng.permutation(len(sample))
    return [sample[i] for i in order]
