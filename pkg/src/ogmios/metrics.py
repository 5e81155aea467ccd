"""Corpus statistics, timing breakdowns and parser-evaluation comparisons.

Every report renders both as an aligned text table and as tab-separated
values.  Rendering is a pure function of the inputs.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .model import MORPHO, NE, SENTENCES, TERMS, WORDS, Document

UNIT_KINDS = ("tokens", "named entities", "words", "sentences", "morpho tags", "terms")
_LAYER_OF = {"named entities": NE, "words": WORDS, "sentences": SENTENCES, "morpho tags": MORPHO, "terms": TERMS}

STEP_LABELS = {
    "load": "loading XML input doc.",
    "tokenize": "tokenization",
    "ne": "named entity recognition",
    "words": "word segmentation",
    "sentences": "sentence segmentation",
    "morpho": "part-of-speech tagging and lemmatization",
    "terms": "term tagging",
    "parse": "parsing",
    "render": "rendering XML output doc.",
}
STEP_ORDER = tuple(STEP_LABELS)

CRITERIA = ("NbW", "NbL", "PT", "CLF", "EL", "CQ")
OOL_KINDS = ("UW", "GW")


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    for r in [header, *rows]:
        cells = [str(c).ljust(w) if i == 0 else str(c).rjust(w) for i, (c, w) in enumerate(zip(r, widths))]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def _tsv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(value: Optional[float], decimals: int) -> str:
    return "undefined" if value is None else f"{value:.{decimals}f}"


# --------------------------------------------------------------------------
# unit counts


@dataclass(frozen=True)
class CorpusStats:
    documents: int
    totals: Mapping[str, int]
    decimals: int = 2

    @classmethod
    def from_totals(cls, totals: Mapping[str, int], documents: int, decimals: int = 2) -> "CorpusStats":
        return cls(documents, dict(totals), decimals)

    def average(self, kind: str) -> Optional[float]:
        """Full-precision average, None for an empty corpus."""
        if self.documents == 0:
            return None
        return self.totals.get(kind, 0) / self.documents

    def rendered_average(self, kind: str) -> Optional[float]:
        avg = self.average(kind)
        return None if avg is None else round(avg, self.decimals)

    @property
    def undefined_averages(self) -> bool:
        return self.documents == 0

    def rows(self) -> list:
        return [(kind, _fmt(self.average(kind), self.decimals), str(self.totals.get(kind, 0)))
                for kind in UNIT_KINDS if kind in self.totals]

    def to_text(self) -> str:
        note = "" if self.documents else "(empty corpus: averages undefined)\n"
        return _table(("unit", "average per document", "total"), self.rows()) + f"documents: {self.documents}\n" + note

    def to_tsv(self) -> str:
        return _tsv(("unit", "average", "total"), self.rows() + [("documents", "", str(self.documents))])


def document_counts(doc: Document) -> dict:
    counts = {"tokens": len(doc.tokens)}
    for kind, layer in _LAYER_OF.items():
        counts[kind] = len(doc.layer(layer))
    return counts


def corpus_stats(docs: Iterable[Document], decimals: int = 2) -> CorpusStats:
    totals = Counter({kind: 0 for kind in UNIT_KINDS})
    n = 0
    for doc in docs:
        n += 1
        totals.update(document_counts(doc))
    return CorpusStats(n, dict(totals), decimals)


# --------------------------------------------------------------------------
# timings


@dataclass(frozen=True)
class TimingReport:
    """Per-step average seconds and share of the total.

    The total is the sum of the step averages, so shares add up to 100.
    """

    averages: Mapping[str, float]
    counts: Mapping[str, int] = field(default_factory=dict)
    total_average: Optional[float] = None

    @classmethod
    def from_averages(cls, averages: Mapping[str, float], total: Optional[float] = None) -> "TimingReport":
        return cls(dict(averages), {}, total)

    @property
    def empty(self) -> bool:
        return not self.averages

    @property
    def total(self) -> float:
        if self.total_average is not None:
            return self.total_average
        return math.fsum(self.averages.values())

    def percentage(self, step: str) -> float:
        return self.averages[step] / self.total * 100.0 if self.total else 0.0

    def steps(self) -> list:
        known = [s for s in STEP_ORDER if s in self.averages]
        return known + sorted(s for s in self.averages if s not in STEP_LABELS)

    def rows(self) -> list:
        rows = [(STEP_LABELS.get(s, s), f"{self.averages[s]:.2f}", f"{self.percentage(s):.2f}") for s in self.steps()]
        rows.append(("Total", f"{self.total:.2f}", "100.00" if self.total else "0.00"))
        return rows

    def to_text(self) -> str:
        if self.empty:
            return "no timing records found\n"
        return _table(("step", "average seconds", "percentage"), self.rows())

    def to_tsv(self) -> str:
        return _tsv(("step", "average_seconds", "percentage"), [] if self.empty else self.rows())


def timing_report(docs: Iterable[Document]) -> TimingReport:
    """Average each step over the documents that executed it."""
    sums: dict = defaultdict(list)
    counts: Counter = Counter()
    for doc in docs:
        for t in doc.timings:
            sums[t.step].append(t.wall_seconds)
            counts[t.step] += 1
    averages = {step: math.fsum(values) / counts[step] for step, values in sums.items()}
    return TimingReport(averages, dict(counts))


# --------------------------------------------------------------------------
# document sizes


def size_histogram(sizes: Iterable[int], bins_per_decade: int = 1) -> list:
    """Counts of sizes (bytes) in logarithmic bins, as ``(low, high, count)``."""
    counts: Counter = Counter()
    for size in sizes:
        b = -1 if size <= 0 else math.floor(math.log10(size) * bins_per_decade + 1e-9)
        counts[b] += 1
    out = []
    for b in sorted(counts):
        if b < 0:
            out.append((0, 1, counts[b]))
        else:
            lo = 10 ** (b / bins_per_decade)
            hi = 10 ** ((b + 1) / bins_per_decade)
            out.append((round(lo), round(hi), counts[b]))
    return out


def size_histogram_text(hist: list) -> str:
    return _table(("bytes from", "bytes to", "documents"), [(str(lo), str(hi), str(n)) for lo, hi, n in hist])


# --------------------------------------------------------------------------
# parser evaluation


@dataclass(frozen=True)
class ParserEvalRecord:
    values: Mapping[str, float]

    def __post_init__(self):
        v = self.values
        if "NbW" in v and v["NbW"] < 1:
            raise ValueError(f"NbW must be at least 1, got {v['NbW']}")
        if "CLF" in v and v["CLF"] not in (0, 1):
            raise ValueError(f"CLF must be 0 or 1, got {v['CLF']}")
        if "EL" in v and v["EL"] < 0:
            raise ValueError(f"EL must be non-negative, got {v['EL']}")


def read_eval_records(path_or_text, is_text: bool = False) -> list:
    """Read a tab-separated file with a header row of criterion names.

    Known columns: NbW, NbL, PT, CLF, EL, CQ and the out-of-lexicon tallies
    UW, UW_incorrect, GW, GW_incorrect.  Empty cells mean "not assessed".
    """
    text = path_or_text if is_text else open(path_or_text, encoding="utf-8").read()
    rows = [r for r in csv.reader(io.StringIO(text), delimiter="\t") if r and not r[0].startswith("#")]
    if not rows:
        return []
    header = [h.strip() for h in rows[0]]
    records = []
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != len(header):
            raise ValueError(f"row {lineno}: {len(row)} cells for {len(header)} columns")
        values = {}
        for name, cell in zip(header, row):
            cell = cell.strip()
            if cell:
                try:
                    values[name] = float(cell)
                except ValueError:
                    raise ValueError(f"row {lineno}: {name}={cell!r} is not a number") from None
        records.append(ParserEvalRecord(values))
    return records


@dataclass(frozen=True)
class OolTally:
    kind: str
    assignments: float
    incorrect: float

    @property
    def incorrect_percent(self) -> Optional[float]:
        return self.incorrect / self.assignments * 100.0 if self.assignments else None


@dataclass(frozen=True)
class ParserComparison:
    baseline: Mapping[str, float]
    variant: Mapping[str, float]
    omitted: tuple
    baseline_ool: tuple
    variant_ool: tuple

    def ratio(self, criterion: str) -> Optional[float]:
        base = self.baseline[criterion]
        return self.variant[criterion] / base * 100.0 if base else None

    @property
    def criteria(self) -> list:
        return [c for c in self.baseline]

    def rows(self) -> list:
        return [(c, f"{self.baseline[c]:.4g}", f"{self.variant[c]:.4g}", _fmt(self.ratio(c), 2))
                for c in self.criteria]

    def ool_rows(self) -> list:
        rows = []
        for b, v in zip(self.baseline_ool, self.variant_ool):
            rows.append((b.kind, f"{b.assignments:g}", _fmt(b.incorrect_percent, 1),
                         f"{v.assignments:g}", _fmt(v.incorrect_percent, 1)))
        return rows

    def to_text(self) -> str:
        out = _table(("criterion", "baseline avg", "variant avg", "% of baseline"), self.rows())
        if self.ool_rows():
            out += "\n" + _table(("words", "baseline a", "baseline b%", "variant a", "variant b%"), self.ool_rows())
        for c in self.omitted:
            out += f"note: criterion {c} absent from all records, column omitted\n"
        return out

    def to_tsv(self) -> str:
        out = _tsv(("criterion", "baseline_avg", "variant_avg", "percent_of_baseline"),
                   [(c, repr(self.baseline[c]), repr(self.variant[c]), "" if self.ratio(c) is None else repr(self.ratio(c)))
                    for c in self.criteria])
        if self.ool_rows():
            out += _tsv(("words", "baseline_a", "baseline_incorrect_pct", "variant_a", "variant_incorrect_pct"),
                        self.ool_rows())
        return out


def _averages(records: Sequence[ParserEvalRecord], criteria: Sequence[str]) -> dict:
    out = {}
    for c in criteria:
        vals = [r.values[c] for r in records if c in r.values]
        if vals:
            out[c] = math.fsum(vals) / len(vals)
    return out


def _ool(records: Sequence[ParserEvalRecord]) -> tuple:
    tallies = []
    for kind in OOL_KINDS:
        a = math.fsum(r.values.get(kind, 0.0) for r in records)
        bad = math.fsum(r.values.get(f"{kind}_incorrect", 0.0) for r in records)
        tallies.append(OolTally(kind, a, bad))
    tallies.append(OolTally("OoL", tallies[0].assignments + tallies[1].assignments,
                            tallies[0].incorrect + tallies[1].incorrect))
    return tuple(tallies)


def parser_eval_report(baseline: Sequence[ParserEvalRecord], variant: Sequence[ParserEvalRecord]) -> ParserComparison:
    if not baseline or not variant:
        raise ValueError("both record sets must be non-empty")
    base_avg = _averages(baseline, CRITERIA)
    var_avg = _averages(variant, CRITERIA)
    kept = [c for c in CRITERIA if c in base_avg and c in var_avg]
    omitted = tuple(c for c in CRITERIA if c not in kept)
    has_ool = any(k in r.values for r in list(baseline) + list(variant) for k in OOL_KINDS)
    return ParserComparison({c: base_avg[c] for c in kept}, {c: var_avg[c] for c in kept}, omitted,
                            _ool(baseline) if has_ool else (), _ool(variant) if has_ool else ())
