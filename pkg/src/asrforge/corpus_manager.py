"""Manifests, ingestion, stratified splits, corpus statistics and WER scoring.

A manifest is JSONL, one :class:`UtteranceRecord` per line. Hypothesis files
are ``id<TAB>text`` per line.
"""

import csv
import hashlib
import io
import json
import logging
import math
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .audio_io import load_16k
from .errors import (
    AsrForgeError,
    InsufficientData,
    LangProfileMismatch,
    MissingHypothesis,
    MissingTranscript,
    UnreadableAudio,
)
from .text_normalizer import LANGUAGES, char_tokenize, load_profile, normalize

log = logging.getLogger(__name__)

SPLITS = ("pretrain", "train", "valid", "test")
MODES = ("char", "subword")


@dataclass
class UtteranceRecord:
    id: str
    audio_path: str
    duration_s: float
    lang: str
    dataset: str
    split: str
    transcript: str = None
    source_url: str = None

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError(f"{self.id}: duration_s must be positive")
        if self.lang not in LANGUAGES:
            raise ValueError(f"{self.id}: unknown language {self.lang!r}")
        if self.split not in SPLITS:
            raise ValueError(f"{self.id}: unknown split {self.split!r}")
        if (self.transcript is None) != (self.split == "pretrain"):
            raise ValueError(f"{self.id}: transcript must be present iff split != pretrain")

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def read_manifest(path) -> list:
    records, seen = [], set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            rec = UtteranceRecord(**json.loads(line))
            if rec.id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    return records


def write_manifest(records, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def audio_digest(samples_16k: np.ndarray) -> str:
    q = np.clip(np.round(samples_16k * 32768.0), -32768, 32767).astype("<i2")
    return hashlib.sha256(q.tobytes()).hexdigest()


def _list_audio(source) -> list:
    source = Path(source)
    if source.is_dir():
        return sorted(source.rglob("*.wav")), source
    base = source.parent
    paths = []
    for line in source.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            p = Path(line)
            paths.append(p if p.is_absolute() else base / p)
    return paths, base


def _record_id(dataset: str, path: Path, base: Path) -> str:
    try:
        rel = path.relative_to(base)
    except ValueError:
        rel = Path(path.name)
    return f"{dataset}_{rel.with_suffix('').as_posix().replace('/', '-')}"


def _probe(path: Path):
    try:
        buf = load_16k(path)
    except AsrForgeError as exc:
        raise UnreadableAudio(f"{path}: {exc}") from exc
    return buf.duration_s, audio_digest(buf.samples)


@dataclass
class IngestResult:
    records: list
    duplicates: list = field(default_factory=list)


def ingest(source, lang: str, dataset: str, split: str = "pretrain", jobs: int = None) -> IngestResult:
    """One record per audio file in a directory or listing file.

    Labeled splits need a ``<stem>.txt`` transcript next to each WAV; the
    transcript is normalized with the language profile. Files whose
    16 kHz sample content is already present are skipped as duplicates.
    """
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    profile = load_profile(lang)
    paths, base = _list_audio(source)
    labeled = split != "pretrain"

    transcripts = {}
    if labeled:
        for p in paths:
            sidecar = p.with_suffix(".txt")
            if not sidecar.exists():
                raise MissingTranscript(f"no transcript for {p}")
            transcripts[p] = normalize(sidecar.read_text(encoding="utf-8"), profile)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        probes = list(pool.map(_probe, paths))

    records, duplicates, seen = [], [], {}
    for p, (duration, digest) in zip(paths, probes):
        if digest in seen:
            duplicates.append(str(p))
            log.info("duplicate audio %s (same content as %s)", p, seen[digest])
            continue
        seen[digest] = p
        records.append(UtteranceRecord(
            id=_record_id(dataset, p, base),
            audio_path=str(p),
            duration_s=duration,
            lang=lang,
            dataset=dataset,
            split=split,
            transcript=transcripts.get(p),
        ))
    records.sort(key=lambda r: r.id)
    log.info("ingested %d records, %d duplicates", len(records), len(duplicates))
    return IngestResult(records, duplicates)


def _targets_for(dataset: str, total_s: float, ratios, hours) -> dict:
    if ratios is not None:
        denom = sum(ratios.values())
        if denom <= 0:
            raise ValueError("split ratios must sum to a positive value")
        return {s: total_s * r / denom for s, r in ratios.items()}
    nested = any(isinstance(v, dict) for v in hours.values())
    wanted = hours.get(dataset, {}) if nested else hours
    return {s: h * 3600.0 for s, h in wanted.items()}


def split(records, ratios: dict = None, hours: dict = None, seed: int = 0) -> list:
    """Assign train/valid/test labels, stratified per dataset.

    ``ratios`` maps split name to a relative weight and partitions every
    record. ``hours`` maps split name to target hours (optionally nested per
    dataset); records left over once targets are met are dropped. Within a
    dataset, records are visited longest first (seeded shuffle breaks ties) and
    each goes to the split furthest below its target, so every split lands
    within one utterance duration of its target.
    """
    if (ratios is None) == (hours is None):
        raise ValueError("give exactly one of ratios or hours")
    by_dataset = defaultdict(list)
    for rec in records:
        if rec.transcript is None:
            raise ValueError(f"{rec.id}: only labeled records can be split")
        by_dataset[rec.dataset].append(rec)

    out = []
    for dataset in sorted(by_dataset):
        recs = sorted(by_dataset[dataset], key=lambda r: r.id)
        random.Random(f"{seed}:{dataset}").shuffle(recs)
        recs.sort(key=lambda r: -r.duration_s)
        total = math.fsum(r.duration_s for r in recs)
        targets = _targets_for(dataset, total, ratios, hours)
        if not targets:
            log.info("%s: no hour targets, all %d records left out", dataset, len(recs))
            continue
        for name in targets:
            if name not in ("train", "valid", "test"):
                raise ValueError(f"cannot split into {name!r}")
        active = [s for s, t in targets.items() if t > 0]
        if len(recs) < len(active):
            raise InsufficientData(f"{dataset}: {len(recs)} records cannot fill splits {active}")

        assigned = dict.fromkeys(targets, 0.0)
        counts = dict.fromkeys(targets, 0)
        dropped = 0
        for rec in recs:
            name = max(targets, key=lambda s: targets[s] - assigned[s])
            deficit = targets[name] - assigned[name]
            if hours is not None and deficit <= rec.duration_s / 2:
                dropped += 1
                continue
            assigned[name] += rec.duration_s
            counts[name] += 1
            out.append(UtteranceRecord(**{**asdict(rec), "split": name}))
        empty = [s for s in active if counts[s] == 0]
        if empty:
            raise InsufficientData(f"{dataset}: no records landed in {empty}")
        if dropped:
            log.info("%s: %d records beyond the hour targets left out", dataset, dropped)
    out.sort(key=lambda r: r.id)
    return out


@dataclass
class CorpusStats:
    """Hours and utterance counts per (lang, dataset, split)."""

    cells: dict = field(default_factory=dict)

    def hours(self, lang=None, dataset=None, split=None) -> float:
        return math.fsum(
            h for (l, d, s), (h, _) in self.cells.items()
            if (lang is None or l == lang) and (dataset is None or d == dataset) and (split is None or s == split)
        )

    def count(self, lang=None, dataset=None, split=None) -> int:
        return sum(
            n for (l, d, s), (_, n) in self.cells.items()
            if (lang is None or l == lang) and (dataset is None or d == dataset) and (split is None or s == split)
        )

    def rows(self) -> list:
        return [
            {"lang": l, "dataset": d, "split": s, "hours": h, "utterances": n}
            for (l, d, s), (h, n) in sorted(self.cells.items())
        ]


def stats(records) -> CorpusStats:
    seconds = defaultdict(list)
    for rec in records:
        seconds[rec.lang, rec.dataset, rec.split].append(rec.duration_s)
    return CorpusStats({k: (math.fsum(v) / 3600.0, len(v)) for k, v in seconds.items()})


def format_hours(h: float, digits: int = 0) -> str:
    return f"{h:,.{digits}f} hrs"


def _aligned(header, rows) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(r, widths)).rstrip() for r in [header, *rows]]
    return "\n".join(lines) + "\n"


def render_overview(st: CorpusStats, digits: int = 0) -> str:
    """Per-language pretraining / train / test hours."""
    langs = sorted({l for l, _, _ in st.cells}, key=LANGUAGES.index)
    rows = [
        [lang.capitalize()] + [format_hours(st.hours(lang, split=s), digits) for s in ("pretrain", "train", "test")]
        for lang in langs
    ]
    return _aligned(["Language", "Pretraining", "Train Set", "Test Set"], rows)


def render_dataset_splits(st: CorpusStats, lang: str, digits: int = 2) -> str:
    """Per-dataset train / validation hours for one language."""
    datasets = sorted({d for l, d, s in st.cells if l == lang and s in ("train", "valid")})
    rows = [[d, f"{st.hours(lang, d, 'train'):.{digits}f}", f"{st.hours(lang, d, 'valid'):.{digits}f}"] for d in datasets]
    return _aligned([f"{lang.capitalize()} Dataset", "Train Duration (hours)", "Validation Duration (hours)"], rows)


def edit_distance(ref_tokens, hyp_tokens):
    """Unit-cost Levenshtein distance as ``(distance, S, I, D)``.

    Alignment ties prefer a substitution over an insertion/deletion pair.
    """
    vocab = {}
    ref = np.array([vocab.setdefault(t, len(vocab)) for t in ref_tokens], dtype=np.int64)
    hyp = np.array([vocab.setdefault(t, len(vocab)) for t in hyp_tokens], dtype=np.int64)
    return kernels.edit_distance_ops(ref, hyp)


def read_hypotheses(path) -> dict:
    hyps = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            uid, _, text = line.partition("\t")
            hyps[uid] = text
    return hyps


def write_hypotheses(hyps, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for uid in sorted(hyps):
            f.write(f"{uid}\t{hyps[uid]}\n")


@dataclass
class EvalRow:
    lang: str
    dataset: str
    utterances: int = 0
    ref_words: int = 0
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    ref_chars: int = 0
    char_errors: int = 0

    @property
    def word_errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        if self.ref_words == 0:
            return 0.0 if self.word_errors == 0 else math.inf
        return self.word_errors / self.ref_words

    @property
    def cer(self) -> float:
        if self.ref_chars == 0:
            return 0.0 if self.char_errors == 0 else math.inf
        return self.char_errors / self.ref_chars

    def add(self, other: "EvalRow") -> None:
        for name in ("utterances", "ref_words", "substitutions", "insertions", "deletions", "ref_chars", "char_errors"):
            setattr(self, name, getattr(self, name) + getattr(other, name))


@dataclass
class EvalReport:
    mode: str
    rows: list  # per (lang, dataset), sorted

    def totals(self) -> dict:
        """Pooled row per language."""
        out = {}
        for row in self.rows:
            out.setdefault(row.lang, EvalRow(row.lang, "ALL")).add(row)
        return out

    def wer(self, lang: str = None) -> float:
        pooled = EvalRow(lang or "", "ALL")
        for row in self.rows:
            if lang is None or row.lang == lang:
                pooled.add(row)
        return pooled.wer

    def _table_rows(self):
        rows = list(self.rows)
        totals = self.totals()
        for lang in sorted(totals, key=LANGUAGES.index):
            rows.append(totals[lang])
        return rows

    def render(self) -> str:
        header = ["Lang", "Dataset", "Utts", "Words", "S", "I", "D", "WER%", "CER%"]
        body = [
            [r.lang, r.dataset, r.utterances, r.ref_words, r.substitutions, r.insertions, r.deletions,
             f"{100 * r.wer:.1f}", f"{100 * r.cer:.1f}"]
            for r in self._table_rows()
        ]
        return f"mode: {self.mode}\n" + _aligned(header, body)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "lang", "dataset", "utterances", "ref_words", "substitutions", "insertions",
                    "deletions", "wer", "ref_chars", "char_errors", "cer"])
        for r in self._table_rows():
            w.writerow([self.mode, r.lang, r.dataset, r.utterances, r.ref_words, r.substitutions, r.insertions,
                        r.deletions, f"{r.wer:.6f}", r.ref_chars, r.char_errors, f"{r.cer:.6f}"])
        return buf.getvalue()


def _score_one(rec, hyp_text, profile):
    ref = normalize(rec.transcript, profile)
    hyp = normalize(hyp_text, profile)
    row = EvalRow(rec.lang, rec.dataset, utterances=1)
    ref_words = ref.split()
    _, row.substitutions, row.insertions, row.deletions = edit_distance(ref_words, hyp.split())
    row.ref_words = len(ref_words)
    ref_chars = char_tokenize(ref)
    row.char_errors = edit_distance(ref_chars, char_tokenize(hyp))[0]
    row.ref_chars = len(ref_chars)
    return row


def score(records, hypotheses: dict, mode: str = "subword", profile=None, jobs: int = None) -> EvalReport:
    """Corpus-level (pooled) WER/CER per language and dataset.

    References and hypotheses go through the same language profile before
    word splitting. ``profile`` overrides the per-record default and must match
    each record's language.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    work = []
    for rec in records:
        if rec.transcript is None:
            raise ValueError(f"{rec.id}: cannot score an unlabeled record")
        if rec.id not in hypotheses:
            raise MissingHypothesis(f"no hypothesis for {rec.id}")
        prof = profile if profile is not None else load_profile(rec.lang)
        if prof.lang != rec.lang:
            raise LangProfileMismatch(f"{rec.id}: record is {rec.lang}, profile is {prof.lang}")
        work.append((rec, hypotheses[rec.id], prof))

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        per_utt = list(pool.map(lambda w: _score_one(*w), work))

    cells = {}
    for row in per_utt:
        cells.setdefault((row.lang, row.dataset), EvalRow(row.lang, row.dataset)).add(row)
    return EvalReport(mode, [cells[k] for k in sorted(cells)])


def render_comparison(reports) -> str:
    """WER% per language (columns Urdu, Persian, Arabic), one row per report."""
    header = ["Model"] + [lang.capitalize() for lang in LANGUAGES]
    label = {"char": "Character-based", "subword": "Subword-based"}
    rows = []
    for rep in reports:
        totals = rep.totals()
        rows.append([label.get(rep.mode, rep.mode)] + [
            f"{100 * totals[lang].wer:.1f}" if lang in totals else "-" for lang in LANGUAGES
        ])
    return _aligned(header, rows)
