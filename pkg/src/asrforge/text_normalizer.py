"""Script-aware transcript normalization for Urdu, Persian and Arabic.

Rules live in ``profiles/<lang>.tsv``: one ``SRC<TAB>DST`` hex-codepoint
mapping per line, ``#`` starts a comment, and an empty DST deletes SRC.
Mappings whose source is a decimal digit form the digit map; the rest are
letter folds.
"""

import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import regex

from .tokens import WORD_BOUNDARY

LANGUAGES = ("urdu", "persian", "arabic")
ZWNJ = "‌"

_GRAPHEME = regex.compile(r"\X")


@dataclass(frozen=True)
class LangProfile:
    lang: str
    fold_table: dict
    strip_set: frozenset
    digit_map: dict

    def __post_init__(self):
        for src, dst in self.fold_table.items():
            if dst in self.fold_table and self.fold_table[dst] != dst:
                raise ValueError(f"fold table not idempotent: {src!r} -> {dst!r} -> {self.fold_table[dst]!r}")
        for ch in self.strip_set:
            if unicodedata.category(ch) not in ("Mn", "Me", "Cf", "Lm"):
                raise ValueError(f"strip set may hold only marks and format controls, got U+{ord(ch):04X}")
        object.__setattr__(self, "_table", str.maketrans({**self.fold_table, **self.digit_map,
                                                          **{c: None for c in self.strip_set}}))

    @property
    def keeps_zwnj(self) -> bool:
        return ZWNJ not in self.strip_set


def parse_profile(text: str, lang: str) -> LangProfile:
    folds, digits, strip = {}, {}, set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        try:
            src = chr(int(fields[0].strip(), 16))
            dst_field = fields[1].strip() if len(fields) > 1 else ""
            dst = chr(int(dst_field, 16)) if dst_field else None
        except ValueError as exc:
            raise ValueError(f"profile line {lineno}: {raw!r}") from exc
        if dst is None:
            strip.add(src)
        elif unicodedata.decimal(src, None) is not None:
            digits[src] = dst
        else:
            folds[src] = dst
    return LangProfile(lang, folds, frozenset(strip), digits)


@lru_cache(maxsize=None)
def load_profile(lang: str) -> LangProfile:
    if lang not in LANGUAGES:
        raise ValueError(f"unknown language {lang!r}; expected one of {LANGUAGES}")
    text = resources.files("asrforge").joinpath("profiles", f"{lang}.tsv").read_text(encoding="utf-8")
    return parse_profile(text, lang)


def load_profile_file(path, lang: str) -> LangProfile:
    return parse_profile(Path(path).read_text(encoding="utf-8"), lang)


def _lower_latin(text: str) -> str:
    # only 1:1 case mappings, so lowering never lengthens the string
    return "".join(lc if len(lc := ch.lower()) == 1 else ch for ch in text)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _single_pass(text: str, profile: LangProfile) -> str:
    text = unicodedata.normalize("NFC", text)
    text = _lower_latin(text)
    text = text.translate(profile._table)
    return "".join(" " if _is_punct(ch) else ch for ch in text)


def normalize(text: str, profile: LangProfile) -> str:
    """Canonical transcript form; idempotent.

    The composition/strip/fold pass repeats until nothing changes, because
    stripping a mark can let composition rebuild a letter the fold table maps
    away (e.g. alef + hamza + madda).
    """
    for _ in range(16):
        nxt = _single_pass(text, profile)
        if nxt == text:
            break
        text = nxt
    return " ".join(text.split())


def char_tokenize(text: str) -> list:
    """One symbol per extended grapheme cluster; spaces become the word boundary.

    ZWNJ has grapheme-extend semantics, so it stays attached to the preceding
    letter rather than forming its own symbol.
    """
    out = []
    for g in _GRAPHEME.findall(text):
        out.append(WORD_BOUNDARY if g.isspace() else g)
    return out
