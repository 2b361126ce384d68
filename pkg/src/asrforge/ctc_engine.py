"""CTC loss with analytic gradients, greedy and prefix beam search decoding.

Everything runs in log space, float64. Logit files exported from an acoustic
model use a small binary container::

    b"CTCL" | u32 version=1 | u32 T | u32 V | T*V float32 (little-endian, row-major)
"""

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DimensionMismatch, Infeasible, MalformedFile
from .tokens import BLANK_ID

log = logging.getLogger(__name__)

LOGIT_MAGIC = b"CTCL"
LOGIT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int = 32
    prune_logp: float = -np.inf  # per-frame symbols below this log-prob are never expanded

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")


def log_softmax(logits) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionMismatch(f"expected a T x V matrix with T >= 1, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("logits must be finite")
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def min_frames(target) -> int:
    """Fewest frames that can emit ``target``: one per label plus a blank between repeats."""
    target = list(target)
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _check_target(target, V: int) -> np.ndarray:
    t = np.asarray(list(target), dtype=np.int64)
    if t.size and (t.min() < 0 or t.max() >= V):
        raise DimensionMismatch(f"target index out of range for V={V}")
    if np.any(t == BLANK_ID):
        raise DimensionMismatch("target must not contain the blank symbol")
    return t


def ctc_loss(logp, target, strict: bool = False):
    """Negative log-likelihood of ``target`` and its gradient w.r.t. the logits.

    ``logp`` is a T x V log-probability matrix (e.g. from :func:`log_softmax`);
    the returned gradient includes the log-softmax, i.e. it is
    ``softmax - posterior occupancy``. Targets that no alignment can produce
    give ``(inf, zeros)``, or raise :class:`Infeasible` when ``strict``.
    """
    logp = np.ascontiguousarray(logp, dtype=np.float64)
    if logp.ndim != 2:
        raise DimensionMismatch(f"expected a T x V matrix, got shape {logp.shape}")
    T, V = logp.shape
    tgt = _check_target(target, V)
    if min_frames(tgt) > T:
        if strict:
            raise Infeasible(f"target of {len(tgt)} labels needs {min_frames(tgt)} frames, have {T}")
        return float("inf"), np.zeros((T, V))

    ext = np.full(2 * len(tgt) + 1, BLANK_ID, dtype=np.int64)
    ext[1::2] = tgt
    alpha, beta, log_prob = kernels.ctc_forward_backward(logp, ext, BLANK_ID)

    occupancy = np.exp(alpha + beta - log_prob)  # T x S
    posterior = np.zeros((T, V))
    np.add.at(posterior, (slice(None), ext), occupancy)
    row_lse = np.logaddexp.reduce(logp, axis=1, keepdims=True)
    grad = np.exp(logp - row_lse) - posterior
    return max(-log_prob, 0.0), grad


def collapse(path) -> list:
    """Merge consecutive repeats, then drop blanks."""
    out, prev = [], None
    for s in path:
        s = int(s)
        if s != prev and s != BLANK_ID:
            out.append(s)
        prev = s
    return out


def greedy_decode(logp, table=None) -> list:
    """Best-path decoding; argmax ties go to the lowest symbol index."""
    logp = np.asarray(logp)
    if table is not None and logp.shape[1] != len(table):
        raise DimensionMismatch(f"V={logp.shape[1]} but symbol table has {len(table)} entries")
    return collapse(np.argmax(logp, axis=1))


def _lae(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


def beam_decode(logp, table=None, cfg: BeamConfig = BeamConfig()) -> list:
    """CTC prefix beam search.

    Each prefix carries separate log mass for alignments ending in blank and in
    its last label. Returns up to ``beam_width`` ``(labels, log_prob)`` pairs,
    best first. With no pruning active the result is exact marginalization
    over alignments.
    """
    logp = np.asarray(logp, dtype=np.float64)
    T, V = logp.shape
    if table is not None and V != len(table):
        raise DimensionMismatch(f"V={V} but symbol table has {len(table)} entries")
    neg_inf = -math.inf
    lae = _lae

    beams = {(): (0.0, neg_inf)}  # prefix -> (log p ending blank, log p ending label)
    for t in range(T):
        row = logp[t]
        row_list = row.tolist()
        p_blank = row_list[BLANK_ID]
        cands = np.flatnonzero(row >= cfg.prune_logp)
        cands = cands[cands != BLANK_ID]
        if len(cands) > cfg.beam_width:
            top = np.argpartition(-row[cands], cfg.beam_width - 1)[: cfg.beam_width]
            cands = np.sort(cands[top])
        cand_lp = row[cands].tolist()
        cands = cands.tolist()

        nxt = {}
        for prefix, (pb, pnb) in beams.items():
            total = lae(pb, pnb)
            last = prefix[-1] if prefix else None

            b, nb = nxt.get(prefix, (neg_inf, neg_inf))
            b = lae(b, total + p_blank)
            if last is not None:
                nb = lae(nb, pnb + row_list[last])
            nxt[prefix] = (b, nb)

            for c, lp in zip(cands, cand_lp):
                ext = prefix + (c,)
                eb, enb = nxt.get(ext, (neg_inf, neg_inf))
                # a repeated label only extends through a blank
                enb = lae(enb, (pb if c == last else total) + lp)
                nxt[ext] = (eb, enb)

        scored = sorted(((lae(b, nb), p) for p, (b, nb) in nxt.items()), key=lambda x: (-x[0], x[1]))
        beams = {p: nxt[p] for _, p in scored[: cfg.beam_width]}

    ranked = [(list(p), lae(b, nb)) for p, (b, nb) in beams.items()]
    ranked = [r for r in ranked if r[1] > neg_inf]
    ranked.sort(key=lambda x: (-x[1], x[0]))
    return ranked


def write_logits(logits, path) -> None:
    x = np.asarray(logits, dtype="<f4")
    if x.ndim != 2:
        raise DimensionMismatch(f"expected a T x V matrix, got shape {x.shape}")
    T, V = x.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(LOGIT_MAGIC, LOGIT_VERSION, T, V))
        f.write(np.ascontiguousarray(x).tobytes())


def read_logits(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise MalformedFile(f"{path}: too short for a logit header")
    magic, version, T, V = _HEADER.unpack_from(data)
    if magic != LOGIT_MAGIC or version != LOGIT_VERSION:
        raise MalformedFile(f"{path}: bad magic/version {magic!r}/{version}")
    body = data[_HEADER.size :]
    if len(body) != 4 * T * V:
        raise MalformedFile(f"{path}: expected {4 * T * V} bytes of logits, found {len(body)}")
    if T < 1 or V < 1:
        raise MalformedFile(f"{path}: empty logit matrix {T}x{V}")
    return np.frombuffer(body, dtype="<f4").reshape(T, V).astype(np.float64)
