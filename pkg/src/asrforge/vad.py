"""Frame-level speech probabilities, hysteresis segmentation and chunking.

The default probability source is an energy detector. Probabilities from an
external neural VAD can be imported from the line-oriented ``.probs`` format::

    #frame_ms=30 hop_ms=10
    0.01
    0.97
    ...
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import TARGET_SAMPLE_RATE, AudioBuffer
from .errors import BufferTooShort, MalformedFile, OutOfRangeProbability

log = logging.getLogger(__name__)

# energy detector
NOISE_FLOOR_PERCENTILE = 20.0
NOISE_FLOOR_CEILING_DB = -45.0  # a floor louder than this is treated as speech, not noise
ONSET_MARGIN_DB = 10.0
SLOPE_DB = 2.0
_ENERGY_EPS = 1e-10  # -100 dBFS


@dataclass(frozen=True)
class FrameConfig:
    frame_ms: int = 30
    hop_ms: int = 10

    def __post_init__(self):
        if self.hop_ms <= 0 or self.frame_ms < self.hop_ms:
            raise ValueError(f"need frame_ms >= hop_ms > 0, got {self.frame_ms}/{self.hop_ms}")


@dataclass(frozen=True)
class FrameProbabilities:
    probs: np.ndarray
    frame_ms: int = 30
    hop_ms: int = 10

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).reshape(-1)
        if p.size and (not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0):
            raise OutOfRangeProbability("frame probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return len(self.probs)

    def frame_start_ms(self, i: int) -> int:
        return i * self.hop_ms

    def frame_end_ms(self, i: int) -> int:
        return i * self.hop_ms + self.frame_ms


@dataclass(frozen=True)
class ChunkingConfig:
    min_chunk_s: float = 3.0
    max_chunk_s: float = 32.0
    speech_prob_threshold: float = 0.70
    merge_gap_s: float = 0.30
    onset_threshold: float = 0.60
    offset_threshold: float = 0.40

    def __post_init__(self):
        if not 0 < self.min_chunk_s < self.max_chunk_s:
            raise ValueError("need 0 < min_chunk_s < max_chunk_s")
        if not 0 < self.speech_prob_threshold < 1:
            raise ValueError("speech_prob_threshold must be in (0, 1)")
        for name in ("onset_threshold", "offset_threshold"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.merge_gap_s < 0:
            raise ValueError("merge_gap_s must be non-negative")


@dataclass(frozen=True)
class SpeechChunk:
    start_s: float
    end_s: float
    mean_speech_prob: float
    source_id: str = ""

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def wav_name(self) -> str:
        start_ms = int(round(self.start_s * 1000))
        end_ms = int(round(self.end_s * 1000))
        return f"{self.source_id}_{start_ms}_{end_ms}.wav"

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "mean_speech_prob": self.mean_speech_prob,
        }


def frame_count(n_samples: int, sample_rate: int, frame_ms: int, hop_ms: int) -> int:
    frame = sample_rate * frame_ms // 1000
    hop = sample_rate * hop_ms // 1000
    if n_samples < frame:
        return 0
    return (n_samples - frame) // hop + 1


def frame_energies_db(buf: AudioBuffer, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    sr = buf.sample_rate_hz
    frame = sr * cfg.frame_ms // 1000
    hop = sr * cfg.hop_ms // 1000
    n = frame_count(len(buf), sr, cfg.frame_ms, cfg.hop_ms)
    if n == 0:
        raise BufferTooShort(f"{len(buf)} samples is shorter than one {cfg.frame_ms} ms frame")
    frames = np.lib.stride_tricks.sliding_window_view(buf.samples, frame)[::hop][:n]
    return 10.0 * np.log10(np.mean(frames * frames, axis=1) + _ENERGY_EPS)


def compute_speech_probs(buf: AudioBuffer, cfg: FrameConfig = FrameConfig()) -> FrameProbabilities:
    """Energy-based speech probability per frame.

    Log-energy goes through a logistic centred ``ONSET_MARGIN_DB`` above an
    adaptive noise floor, the 20th percentile of frame energies (capped at
    ``NOISE_FLOOR_CEILING_DB`` so uniformly loud input is not read as noise).
    """
    if buf.sample_rate_hz != TARGET_SAMPLE_RATE:
        raise ValueError(f"expected {TARGET_SAMPLE_RATE} Hz input, got {buf.sample_rate_hz}")
    energy = frame_energies_db(buf, cfg)
    floor = min(float(np.percentile(energy, NOISE_FLOOR_PERCENTILE)), NOISE_FLOOR_CEILING_DB)
    z = (energy - floor - ONSET_MARGIN_DB) / SLOPE_DB
    probs = 1.0 / (1.0 + np.exp(-z))
    return FrameProbabilities(probs, cfg.frame_ms, cfg.hop_ms)


def write_speech_probs(fp: FrameProbabilities, path) -> None:
    lines = [f"#frame_ms={fp.frame_ms} hop_ms={fp.hop_ms}"]
    lines.extend(repr(float(p)) for p in fp.probs)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_speech_probs(path) -> FrameProbabilities:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
    if not lines or not lines[0].startswith("#"):
        raise MalformedFile(f"{path}: missing '#frame_ms=<int> hop_ms=<int>' header")
    try:
        geometry = dict(item.split("=", 1) for item in lines[0][1:].split())
        frame_ms, hop_ms = int(geometry["frame_ms"]), int(geometry["hop_ms"])
    except (ValueError, KeyError) as exc:
        raise MalformedFile(f"{path}: bad header {lines[0]!r}") from exc

    probs = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        try:
            p = float(line)
        except ValueError as exc:
            raise MalformedFile(f"{path}:{lineno}: not a number: {line!r}") from exc
        if not 0.0 <= p <= 1.0:
            raise OutOfRangeProbability(f"{path}:{lineno}: probability {p} outside [0, 1]")
        probs.append(p)
    try:
        return FrameProbabilities(np.array(probs), frame_ms, hop_ms)
    except ValueError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc


def _detect_frame_runs(probs: np.ndarray, onset: float, offset: float) -> list:
    runs = []
    start = None
    for i, p in enumerate(probs.tolist()):
        if start is None:
            if p >= onset:
                start = i
        elif p < offset:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(probs) - 1))
    return runs


def _merge_frame_runs(runs: list, fp: FrameProbabilities, merge_gap_s: float) -> list:
    merged = []
    for a, b in runs:
        if merged:
            gap_ms = fp.frame_start_ms(a) - fp.frame_end_ms(merged[-1][1])
            if gap_ms < merge_gap_s * 1000:
                merged[-1] = (merged[-1][0], b)
                continue
        merged.append((a, b))
    return merged


def detect_segments(fp: FrameProbabilities, cfg: ChunkingConfig = ChunkingConfig()) -> list:
    """Hysteresis speech segments as sorted, non-overlapping ``(start_s, end_s)``.

    A segment spanning frames ``a..b`` covers ``[a * hop, b * hop + frame]``.
    """
    runs = _detect_frame_runs(fp.probs, cfg.onset_threshold, cfg.offset_threshold)
    runs = _merge_frame_runs(runs, fp, cfg.merge_gap_s)
    return [(fp.frame_start_ms(a) / 1000.0, fp.frame_end_ms(b) / 1000.0) for a, b in runs]


def _split_piece(fp, a, b, start_ms, end_ms, max_s, out):
    # frames a..b inclusive; [start_ms, end_ms] is the piece's time span
    if (end_ms / 1000.0 - start_ms / 1000.0) <= max_s or b <= a:
        out.append((a, b, start_ms, end_ms))
        return
    span = end_ms - start_ms
    lo_ms, hi_ms = start_ms + 0.25 * span, start_ms + 0.75 * span
    # frames k in a+1..b whose start k*hop lies in the central half
    k_lo = max(a + 1, math.ceil(lo_ms / fp.hop_ms))
    k_hi = min(b, math.floor(hi_ms / fp.hop_ms))
    if k_hi < k_lo:
        out.append((a, b, start_ms, end_ms))
        return
    k = k_lo + int(np.argmin(fp.probs[k_lo : k_hi + 1]))  # first minimum on ties
    split_ms = fp.frame_start_ms(k)
    _split_piece(fp, a, k - 1, start_ms, split_ms, max_s, out)
    _split_piece(fp, k, b, split_ms, end_ms, max_s, out)


def chunk_segments(segments, fp: FrameProbabilities, cfg: ChunkingConfig = ChunkingConfig(),
                   source_id: str = "") -> list:
    """Cut segments into training chunks honouring the duration and probability bounds.

    Over-long segments are split recursively at the lowest-probability frame in
    their central half. Pieces shorter than ``min_chunk_s`` or whose mean frame
    probability falls below ``speech_prob_threshold`` are dropped.
    """
    chunks = []
    for start_s, end_s in segments:
        start_ms = int(round(start_s * 1000))
        end_ms = int(round(end_s * 1000))
        a = start_ms // fp.hop_ms
        b = min((end_ms - fp.frame_ms) // fp.hop_ms, len(fp) - 1)
        if b < a:
            continue
        pieces = []
        _split_piece(fp, a, b, start_ms, end_ms, cfg.max_chunk_s, pieces)
        for pa, pb, ps, pe in pieces:
            cs, ce = ps / 1000.0, pe / 1000.0
            if ce - cs < cfg.min_chunk_s or ce - cs > cfg.max_chunk_s:
                continue
            mean_p = float(np.mean(fp.probs[pa : pb + 1]))
            if mean_p < cfg.speech_prob_threshold:
                continue
            chunks.append(SpeechChunk(cs, ce, mean_p, source_id))
    return chunks


def segment_buffer(buf: AudioBuffer, source_id: str = "", cfg: ChunkingConfig = ChunkingConfig(),
                   frame_cfg: FrameConfig = FrameConfig()) -> list:
    fp = compute_speech_probs(buf, frame_cfg)
    return chunk_segments(detect_segments(fp, cfg), fp, cfg, source_id)


def cut_chunk(buf: AudioBuffer, chunk: SpeechChunk) -> AudioBuffer:
    sr = buf.sample_rate_hz
    return AudioBuffer(buf.samples[int(round(chunk.start_s * sr)) : int(round(chunk.end_s * sr))], sr)
