"""Descriptive statistics over the final corpus, with table and plot emission."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .identifiers import CORE_KINDS
from .labeling import CLASS_LABELS, JOURNAL_ARTICLE
from .uniform import CitationRecord

YEAR_MIN = 1000
YEAR_MAX = 2030

_YEAR_RE = re.compile(r"\b(\d{4})\b")


def parse_year(record: CitationRecord, lo: int = YEAR_MIN, hi: int = YEAR_MAX) -> int | None:
    """4-digit publication year from the year then date field; None if absent."""
    for text in (record.citation.year, record.citation.date):
        for m in _YEAR_RE.finditer(text):
            value = int(m.group(1))
            if lo <= value <= hi:
                return value
    return None


def record_key(record: CitationRecord) -> str:
    return f"{record.page_id}:{record.order_index}"


def identifier_cooccurrence(records) -> tuple[dict[tuple[int, ...], int], int]:
    """Counts per presence pattern over (DOI, ISBN, PMC, PMID, ARXIV).

    Citations whose only identifiers are outside those five kinds go into
    the separate "other identifiers only" bucket.
    """
    patterns: dict[tuple[int, ...], int] = {}
    other_only = 0
    for record in records:
        ids = record.citation.id_list
        if not ids:
            continue
        pattern = tuple(int(kind in ids) for kind in CORE_KINDS)
        if any(pattern):
            patterns[pattern] = patterns.get(pattern, 0) + 1
        else:
            other_only += 1
    return patterns, other_only


def pages_with_identifier_share(records, kind: str) -> tuple[int, float]:
    """Distinct pages with >=1 citation carrying ``kind``, and their share."""
    pages = set()
    with_kind = set()
    for record in records:
        pages.add(record.page_id)
        if kind in record.citation.id_list:
            with_kind.add(record.page_id)
    share = len(with_kind) / len(pages) if pages else 0.0
    return len(with_kind), share


def moving_average(values, window: int, centered: bool = True) -> np.ndarray:
    """Moving mean with edge windows shortened to the available points.

    The divisor depends only on the position, so smoothing stays linear in
    the series.  ``window=1`` is the identity.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    values = np.asarray(values, dtype=float)
    n = len(values)
    out = np.empty(n)
    left = (window - 1) // 2 if centered else window - 1
    right = window - 1 - left if centered else 0
    for i in range(n):
        lo = max(0, i - left)
        hi = min(n, i + right + 1)
        out[i] = values[lo:hi].mean()
    return out


def publication_year_histogram(records, keys: set[str] | None, year_range=(YEAR_MIN, YEAR_MAX),
                               window: int = 1, centered: bool = True):
    """(years, smoothed counts, missing-year count) for the selected records.

    ``keys`` restricts to the given provenance keys (None = all records).
    """
    lo, hi = year_range
    years = np.arange(lo, hi + 1)
    counts = np.zeros(len(years), dtype=float)
    missing = 0
    for record in records:
        if keys is not None and record_key(record) not in keys:
            continue
        year = parse_year(record, lo, hi)
        if year is None:
            missing += 1
        else:
            counts[year - lo] += 1
    return years, moving_average(counts, window, centered), missing


def _normalize_journal(name: str) -> str:
    return re.sub(r"\s+", " ", name).strip().casefold()


def top_journals(records, journal_keys: set[str], n: int = 10) -> list[tuple[str, int]]:
    """Most-cited periodicals among journal-article citations; ties lexicographic."""
    counts: dict[str, int] = {}
    for record in records:
        if record_key(record) not in journal_keys:
            continue
        name = _normalize_journal(record.citation.periodical)
        if name:
            counts[name] = counts.get(name, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:n]


def distinct_dois_per_page(records) -> dict[int, int]:
    """Histogram of |unique DOIs| per page, over pages with at least one."""
    per_page: dict[int, set[str]] = {}
    for record in records:
        doi = record.citation.id_list.get("DOI")
        if doi:
            per_page.setdefault(record.page_id, set()).add(doi)
    histogram: dict[int, int] = {}
    for dois in per_page.values():
        histogram[len(dois)] = histogram.get(len(dois), 0) + 1
    return histogram


# ---------------------------------------------------------------------------
# Whole-corpus statistics


@dataclass
class CorpusStats:
    citations_total: int = 0
    pages_total: int = 0
    identifier_counts: dict[str, int] = field(default_factory=dict)
    cooccurrence: dict[tuple[int, ...], int] = field(default_factory=dict)
    other_identifiers_only: int = 0
    class_totals: dict[str, dict[str, int]] = field(default_factory=dict)
    unique_dois: int = 0
    unique_isbns: int = 0
    pages_with: dict[str, tuple[int, float]] = field(default_factory=dict)
    year_histograms: dict[str, dict] = field(default_factory=dict)
    dois_per_page: dict[int, int] = field(default_factory=dict)
    top_journals: list[tuple[str, int]] = field(default_factory=list)
    lookup_report: dict = field(default_factory=dict)

    def summary_dict(self) -> dict:
        return {
            "citations_total": self.citations_total,
            "pages_total": self.pages_total,
            "identifier_counts": dict(sorted(self.identifier_counts.items())),
            "other_identifiers_only": self.other_identifiers_only,
            "class_totals": {k: dict(v) for k, v in sorted(self.class_totals.items())},
            "unique_dois": self.unique_dois,
            "unique_isbns": self.unique_isbns,
            "pages_with": {k: {"pages": c, "share": s}
                           for k, (c, s) in sorted(self.pages_with.items())},
            "year_missing": {k: v["missing"] for k, v in sorted(self.year_histograms.items())},
            "top_journals": [{"journal": j, "citations": c} for j, c in self.top_journals],
            "lookup": dict(self.lookup_report),
        }


def compute_stats(records: list[CitationRecord],
                  class_map: dict[str, tuple[str, str]],
                  lookup_report: dict | None = None,
                  smoothing_window: int = 4,
                  centered: bool = True) -> CorpusStats:
    """All of the report's numbers in one pass-friendly structure.

    ``class_map`` assigns each provenance key ``(label, source)`` with
    source "known" (rule-labeled) or "predicted".
    """
    stats = CorpusStats(lookup_report=lookup_report or {})
    stats.citations_total = len(records)
    stats.pages_total = len({r.page_id for r in records})

    for kind in CORE_KINDS:
        stats.identifier_counts[kind] = sum(
            1 for r in records if kind in r.citation.id_list)
    extended = {k for r in records for k in r.citation.id_list} - set(CORE_KINDS)
    for kind in sorted(extended):
        stats.identifier_counts[kind] = sum(
            1 for r in records if kind in r.citation.id_list)

    stats.cooccurrence, stats.other_identifiers_only = identifier_cooccurrence(records)
    stats.unique_dois = len({r.citation.id_list["DOI"] for r in records
                             if "DOI" in r.citation.id_list})
    stats.unique_isbns = len({r.citation.id_list["ISBN"] for r in records
                              if "ISBN" in r.citation.id_list})
    for kind in ("DOI", "ISBN"):
        stats.pages_with[kind] = pages_with_identifier_share(records, kind)

    for label in CLASS_LABELS:
        known = sum(1 for key, (lab, src) in class_map.items()
                    if lab == label and src == "known")
        new = sum(1 for key, (lab, src) in class_map.items()
                  if lab == label and src == "predicted")
        stats.class_totals[label] = {"known": known, "new": new, "total": known + new}

    for label in ("BOOK", "JOURNAL_ARTICLE"):
        keys = {key for key, (lab, _) in class_map.items() if lab == label}
        years, smoothed, missing = publication_year_histogram(
            records, keys, window=smoothing_window, centered=centered)
        _, raw, _ = publication_year_histogram(records, keys, window=1)
        stats.year_histograms[label] = {
            "years": years, "raw": raw, "smoothed": smoothed, "missing": missing,
        }

    journal_keys = {key for key, (lab, _) in class_map.items()
                    if lab == JOURNAL_ARTICLE}
    stats.top_journals = top_journals(records, journal_keys)
    stats.dois_per_page = distinct_dois_per_page(records)
    return stats


# ---------------------------------------------------------------------------
# Emission


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def emit_report(stats: CorpusStats, out_dir, formats=("csv", "png"),
                pr_curve: dict | None = None) -> list[Path]:
    """Write tables, plots and the summary; byte-stable for identical stats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    summary = out / "summary.json"
    with open(summary, "w", encoding="utf-8") as fh:
        json.dump(stats.summary_dict(), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    written.append(summary)

    if "csv" in formats:
        path = out / "identifier_counts.csv"
        _write_csv(path, ["identifier", "citations"],
                   sorted(stats.identifier_counts.items()))
        written.append(path)

        path = out / "identifier_cooccurrence.csv"
        rows = [[*pattern, count]
                for pattern, count in sorted(stats.cooccurrence.items())]
        _write_csv(path, ["doi", "isbn", "pmc", "pmid", "arxiv", "citations"], rows)
        written.append(path)

        path = out / "class_totals.csv"
        _write_csv(path, ["label", "new", "known", "total"],
                   [[label, v["new"], v["known"], v["total"]]
                    for label, v in sorted(stats.class_totals.items())])
        written.append(path)

        for label, hist in sorted(stats.year_histograms.items()):
            path = out / f"year_histogram_{label.lower()}.csv"
            rows = [[int(y), int(r), f"{s:.6f}"] for y, r, s in
                    zip(hist["years"], hist["raw"], hist["smoothed"])
                    if r or s]
            _write_csv(path, ["year", "citations", "smoothed"], rows)
            written.append(path)

        path = out / "dois_per_page.csv"
        _write_csv(path, ["distinct_dois", "pages"],
                   sorted(stats.dois_per_page.items()))
        written.append(path)

        path = out / "top_journals.csv"
        _write_csv(path, ["rank", "journal", "citations"],
                   [[i + 1, name, count]
                    for i, (name, count) in enumerate(stats.top_journals)])
        written.append(path)

        path = out / "pages_with_identifier.csv"
        _write_csv(path, ["identifier", "pages", "share"],
                   [[kind, count, f"{share:.6f}"]
                    for kind, (count, share) in sorted(stats.pages_with.items())])
        written.append(path)

    if "png" in formats:
        written.extend(_emit_plots(stats, out, pr_curve))
    return written


def _emit_plots(stats: CorpusStats, out: Path, pr_curve: dict | None) -> list[Path]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    meta = {"Software": "wikicite"}
    written = []

    if stats.year_histograms:
        fig, ax = plt.subplots(figsize=(8, 4.5))
        for label, hist in sorted(stats.year_histograms.items()):
            mask = (hist["years"] >= 2000) & (hist["years"] <= 2020)
            ax.plot(hist["years"][mask], hist["raw"][mask], label=label.lower())
        ax.set_xlabel("publication year")
        ax.set_ylabel("citations")
        ax.legend()
        fig.tight_layout()
        path = out / "years_recent.png"
        fig.savefig(path, metadata=meta)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(8, 4.5))
        for label, hist in sorted(stats.year_histograms.items()):
            mask = (hist["years"] >= 1500) & (hist["years"] <= 2020)
            ax.plot(hist["years"][mask], hist["smoothed"][mask], label=label.lower())
        ax.set_xlabel("publication year")
        ax.set_ylabel("citations (smoothed)")
        ax.legend()
        fig.tight_layout()
        path = out / "years_all.png"
        fig.savefig(path, metadata=meta)
        plt.close(fig)
        written.append(path)

    if stats.dois_per_page:
        fig, ax = plt.subplots(figsize=(8, 4.5))
        pairs = sorted(stats.dois_per_page.items())
        ax.bar([k for k, _ in pairs], [v for _, v in pairs])
        ax.set_xlabel("distinct DOIs on page")
        ax.set_ylabel("pages")
        fig.tight_layout()
        path = out / "dois_per_page.png"
        fig.savefig(path, metadata=meta)
        plt.close(fig)
        written.append(path)

    if pr_curve and pr_curve.get("thresholds"):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        ax.plot(pr_curve["thresholds"], pr_curve["precision"], label="precision")
        ax.plot(pr_curve["thresholds"], pr_curve["recall"], label="recall")
        ax.axvline(pr_curve.get("chosen_threshold", 0.0), linestyle="--", color="grey")
        ax.set_xlabel("score threshold")
        ax.set_ylabel("precision / recall")
        ax.legend()
        fig.tight_layout()
        path = out / "lookup_pr_curve.png"
        fig.savefig(path, metadata=meta)
        plt.close(fig)
        written.append(path)
    return written
