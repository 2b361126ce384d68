"""WAV input/output, mono downmix and resampling to the 16 kHz pipeline rate."""

import logging
import struct
import wave
from dataclasses import dataclass
from functools import lru_cache
from math import gcd
from pathlib import Path

import numpy as np

from . import kernels
from .errors import EmptyAudio, IoFailure, MalformedContainer, UnsupportedEncoding

log = logging.getLogger(__name__)

TARGET_SAMPLE_RATE = 16000

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003

# resampler design
TAPS_PER_PHASE = 32
CUTOFF_FRACTION = 0.45  # of min(in_rate, out_rate), i.e. 0.9 x the lower Nyquist
KAISER_BETA = 8.6


@dataclass(frozen=True)
class AudioBuffer:
    """Mono samples in [-1, 1] at ``sample_rate_hz``.

    Samples are copied, made finite, clamped, and frozen on construction.
    """

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        x = np.array(self.samples, dtype=np.float64).reshape(-1)
        x = np.clip(np.nan_to_num(x, nan=0.0, posinf=1.0, neginf=-1.0), -1.0, 1.0)
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def downmix(channels: np.ndarray) -> np.ndarray:
    """Arithmetic mean over the last axis (frames x channels -> frames)."""
    channels = np.asarray(channels, dtype=np.float64)
    if channels.ndim == 1:
        return channels
    return channels.mean(axis=-1)


def _iter_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise MalformedContainer(f"chunk {cid!r} truncated: declared {size} bytes, found {len(body)}")
        yield cid, body
        pos += 8 + size + (size & 1)


def read_wav(path) -> AudioBuffer:
    """Read a PCM16 or float32 WAV file with one or two channels."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedContainer(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    for cid, body in _iter_chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise MalformedContainer(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            payload = body
    if fmt is None or payload is None:
        raise MalformedContainer(f"{path}: missing fmt or data chunk")

    tag, nchan, rate, _, block_align, bits = fmt
    if tag == _WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedEncoding(f"{path}: format tag 0x{tag:04x} with {bits} bits")
    if nchan not in (1, 2):
        raise UnsupportedEncoding(f"{path}: {nchan} channels")
    if rate <= 0:
        raise MalformedContainer(f"{path}: sample rate {rate}")
    if block_align != nchan * dtype.itemsize:
        raise MalformedContainer(f"{path}: block align {block_align} inconsistent with format")

    nframes = len(payload) // block_align
    if nframes == 0:
        raise EmptyAudio(f"{path}: no samples")
    raw = np.frombuffer(payload[: nframes * block_align], dtype=dtype).astype(np.float64) * scale
    samples = downmix(raw.reshape(nframes, nchan))
    return AudioBuffer(samples, rate)


def write_wav(buf: AudioBuffer, path) -> None:
    """Write ``buf`` as mono PCM16."""
    if not str(path):
        raise IoFailure("empty output path")
    q = np.clip(np.round(buf.samples * 32768.0), -32768, 32767).astype("<i2")
    try:
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(buf.sample_rate_hz)
            w.writeframes(q.tobytes())
    except (OSError, wave.Error) as exc:
        raise IoFailure(f"{path}: {exc}") from exc


@lru_cache(maxsize=32)
def _filter_table(up: int, down: int, in_rate: int, out_rate: int) -> np.ndarray:
    # Kaiser-windowed sinc sampled at each of the `up` fractional phases.
    half = TAPS_PER_PHASE // 2
    cutoff = CUTOFF_FRACTION * min(in_rate, out_rate) / in_rate  # cycles per input sample
    frac = np.arange(up)[:, None] / up
    j = np.arange(TAPS_PER_PHASE)[None, :]
    dist = frac + (half - 1) - j  # output time minus tap time, in input samples
    window = np.i0(KAISER_BETA * np.sqrt(np.clip(1.0 - (dist / half) ** 2, 0.0, None))) / np.i0(KAISER_BETA)
    table = 2.0 * cutoff * np.sinc(2.0 * cutoff * dist) * window
    table /= table.sum(axis=1, keepdims=True)
    table.setflags(write=False)
    return np.ascontiguousarray(table)


def resample(buf: AudioBuffer, out_rate: int) -> AudioBuffer:
    """Polyphase windowed-sinc resampling to ``out_rate``."""
    in_rate = buf.sample_rate_hz
    if in_rate == out_rate:
        return buf
    g = gcd(in_rate, out_rate)
    up, down = out_rate // g, in_rate // g
    out_len = int(round(len(buf) * out_rate / in_rate))
    table = _filter_table(up, down, in_rate, out_rate)
    y = kernels.polyphase_resample(np.ascontiguousarray(buf.samples), table, up, down, out_len)
    return AudioBuffer(y, out_rate)


def resample_to_16k(buf: AudioBuffer) -> AudioBuffer:
    return resample(buf, TARGET_SAMPLE_RATE)


def load_16k(path) -> AudioBuffer:
    """Read a WAV file and bring it to the pipeline rate."""
    return resample_to_16k(read_wav(path))
