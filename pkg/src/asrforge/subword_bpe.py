"""Word-internal BPE vocabularies and the CTC symbol tables built from them.

Sentences are split into words on whitespace and each word is encoded on its
own; a dedicated ``<wb>`` symbol separates words in the CTC label stream.

Model file layout (UTF-8)::

    #bpe v1 lang=persian vocab=512
    #base<TAB>34
    <one base symbol per line>
    #merges<TAB>478
    <LEFT><TAB><RIGHT>   (in learned order)
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyCorpus, InvalidIndex, MalformedFile, VocabTooSmall
from .text_normalizer import char_tokenize
from .tokens import BLANK_ID, RESERVED, UNK_ID, WB_ID, WORD_BOUNDARY

log = logging.getLogger(__name__)

DEFAULT_VOCAB_SIZE = 512


class CtcSymbolTable:
    """Dense index <-> symbol map: 0 blank, 1 word boundary, 2 unk, then units."""

    def __init__(self, units):
        units = list(units)
        dup = set(units) & set(RESERVED)
        if dup:
            raise ValueError(f"reserved symbols cannot be units: {sorted(dup)}")
        self.symbols = list(RESERVED) + units
        self.index = {s: i for i, s in enumerate(self.symbols)}
        if len(self.index) != len(self.symbols):
            raise ValueError("duplicate symbols in table")

    def __len__(self):
        return len(self.symbols)

    def __eq__(self, other):
        return isinstance(other, CtcSymbolTable) and self.symbols == other.symbols

    def __getitem__(self, i):
        return self.symbols[i]

    def id_of(self, symbol: str) -> int:
        return self.index.get(symbol, UNK_ID)

    def save(self, path) -> None:
        Path(path).write_text("".join(s + "\n" for s in self.symbols), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CtcSymbolTable":
        symbols = Path(path).read_text(encoding="utf-8").split("\n")
        if symbols and symbols[-1] == "":
            symbols.pop()
        if tuple(symbols[: len(RESERVED)]) != RESERVED:
            raise MalformedFile(f"{path}: table must start with {RESERVED}")
        return cls(symbols[len(RESERVED) :])


@dataclass
class BpeModel:
    base_symbols: list
    merges: list
    lang: str = ""
    vocab_size_target: int = DEFAULT_VOCAB_SIZE
    pieces: list = field(init=False)

    def __post_init__(self):
        self.merges = [tuple(m) for m in self.merges]
        pieces = list(self.base_symbols)
        seen = set(pieces)
        for left, right in self.merges:
            p = left + right
            if p not in seen:
                seen.add(p)
                pieces.append(p)
        self.pieces = pieces
        self.ranks = {m: i for i, m in enumerate(self.merges)}
        self.table = CtcSymbolTable(pieces)
        self._cache = {}
        self.unk_count = 0

    def to_text(self) -> str:
        lines = [f"#bpe v1 lang={self.lang} vocab={len(self.pieces)}", f"#base\t{len(self.base_symbols)}"]
        lines += self.base_symbols
        lines.append(f"#merges\t{len(self.merges)}")
        lines += [f"{left}\t{right}" for left, right in self.merges]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> "BpeModel":
        lines = text.split("\n")
        try:
            header = lines[0].split()
            if header[:2] != ["#bpe", "v1"]:
                raise ValueError("bad magic")
            meta = dict(kv.split("=", 1) for kv in header[2:])
            tag, n_base = lines[1].split("\t")
            if tag != "#base":
                raise ValueError("missing #base section")
            n_base = int(n_base)
            base = lines[2 : 2 + n_base]
            tag, n_merges = lines[2 + n_base].split("\t")
            if tag != "#merges":
                raise ValueError("missing #merges section")
            merge_lines = lines[3 + n_base : 3 + n_base + int(n_merges)]
            merges = [tuple(m.split("\t")) for m in merge_lines]
            if len(merges) != int(n_merges) or any(len(m) != 2 for m in merges):
                raise ValueError("truncated merges section")
        except (IndexError, ValueError) as exc:
            raise MalformedFile(f"bad BPE model: {exc}") from exc
        model = cls(base, merges, lang=meta.get("lang", ""))
        model.vocab_size_target = int(meta.get("vocab", len(model.pieces)))
        return model

    @classmethod
    def load(cls, path) -> "BpeModel":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def segment(self, word: str) -> list:
        """Piece strings for ``word``; unknown characters stay as single characters."""
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        parts = list(word)
        ranks = self.ranks
        last = -1  # merges are applied once each, in learned order
        while len(parts) > 1:
            best, best_rank = -1, None
            for i in range(len(parts) - 1):
                r = ranks.get((parts[i], parts[i + 1]))
                if r is not None and r > last and (best_rank is None or r < best_rank):
                    best, best_rank = i, r
            if best < 0:
                break
            # apply this merge to every occurrence, left to right
            left, right = self.merges[best_rank]
            last = best_rank
            merged, i = [], 0
            while i < len(parts):
                if i < len(parts) - 1 and parts[i] == left and parts[i + 1] == right:
                    merged.append(left + right)
                    i += 2
                else:
                    merged.append(parts[i])
                    i += 1
            parts = merged
        self._cache[word] = parts
        return parts


def _split_words(corpus) -> Counter:
    words = Counter()
    for sentence in corpus:
        words.update(sentence.split())
    return words


def _pair_counts(vocab: dict) -> Counter:
    pairs = Counter()
    for symbols, freq in vocab.items():
        for i in range(len(symbols) - 1):
            pairs[symbols[i], symbols[i + 1]] += freq
    return pairs


def _apply_merge(symbols: tuple, left: str, right: str) -> tuple:
    out, i = [], 0
    while i < len(symbols):
        if i < len(symbols) - 1 and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def train_bpe(corpus, vocab_size: int = DEFAULT_VOCAB_SIZE, lang: str = "",
              min_pair_count: int = 2) -> BpeModel:
    """Learn merges over the word-frequency-weighted corpus.

    Each step merges the most frequent adjacent pair, ties going to the
    lexicographically smallest ``(left, right)``. Training stops once the piece
    count reaches ``vocab_size`` or no pair occurs ``min_pair_count`` times.
    ``vocab_size`` counts subword pieces only; the three reserved CTC symbols
    sit outside it.
    """
    words = _split_words(corpus)
    if not words:
        raise EmptyCorpus("corpus has no words")
    base = sorted({ch for w in words for ch in w})
    if vocab_size < len(base) + len(RESERVED):
        raise VocabTooSmall(f"vocab_size {vocab_size} < {len(base)} characters + {len(RESERVED)} reserved")

    vocab = {tuple(w): f for w, f in words.items()}
    pieces = set(base)
    n_pieces = len(base)
    merges = []
    pairs = _pair_counts(vocab)
    while n_pieces < vocab_size and pairs:
        top = max(pairs.values())
        if top < min_pair_count:
            break
        left, right = min(p for p, c in pairs.items() if c == top)
        merges.append((left, right))
        if left + right not in pieces:
            pieces.add(left + right)
            n_pieces += 1

        # only words containing the pair change; update their pair counts in place
        new_vocab = {}
        for symbols, freq in vocab.items():
            if left in symbols and right in symbols:
                merged = _apply_merge(symbols, left, right)
                if merged != symbols:
                    for i in range(len(symbols) - 1):
                        pairs[symbols[i], symbols[i + 1]] -= freq
                    for i in range(len(merged) - 1):
                        pairs[merged[i], merged[i + 1]] += freq
                    symbols = merged
            new_vocab[symbols] = new_vocab.get(symbols, 0) + freq
        vocab = new_vocab
        pairs = +pairs  # drop zero counts

    log.info("trained BPE: %d base symbols, %d merges, %d pieces", len(base), len(merges), n_pieces)
    return BpeModel(base, merges, lang=lang, vocab_size_target=vocab_size)


def encode_word(model: BpeModel, word: str) -> list:
    """Symbol-table indices for one word; unseen characters become ``<unk>``."""
    if any(ch.isspace() for ch in word):
        raise ValueError(f"word contains whitespace: {word!r}")
    return [model.table.id_of(p) for p in model.segment(word)]


def encode_sentence(model: BpeModel, sentence: str) -> list:
    """Words encoded independently and joined by ``<wb>``."""
    ids = []
    for i, word in enumerate(sentence.split()):
        if i:
            ids.append(WB_ID)
        ids.extend(encode_word(model, word))
    return ids


def char_encode(table: CtcSymbolTable, sentence: str) -> list:
    return [table.id_of(s) for s in char_tokenize(" ".join(sentence.split()))]


def decode_pieces(table, ids) -> str:
    """Join piece strings, regrouping at ``<wb>`` into space-separated words.

    ``table`` may be a :class:`CtcSymbolTable` or a :class:`BpeModel`.
    ``<unk>`` decodes to nothing; blanks are ignored.
    """
    model = table if isinstance(table, BpeModel) else None
    if model is not None:
        table = model.table
    words, current = [], []
    for i in ids:
        i = int(i)
        if not 0 <= i < len(table):
            raise InvalidIndex(f"symbol index {i} outside table of size {len(table)}")
        if i == WB_ID:
            words.append("".join(current))
            current = []
        elif i == UNK_ID:
            if model is not None:
                model.unk_count += 1
            log.debug("dropping <unk> during decode")
        elif i != BLANK_ID:
            current.append(table[i])
    words.append("".join(current))
    return " ".join(w for w in words if w)


def build_symbol_table(model: BpeModel = None, corpus=None) -> CtcSymbolTable:
    """Symbol table for a BPE model, or a character table over ``corpus``."""
    if model is not None:
        return CtcSymbolTable(model.pieces)
    if corpus is None:
        raise ValueError("need a model or a corpus")
    chars = set()
    for sentence in corpus:
        chars.update(s for s in char_tokenize(sentence) if s != WORD_BOUNDARY)
    return CtcSymbolTable(sorted(chars))
