import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asrforge.text_normalizer import (
    LANGUAGES,
    ZWNJ,
    char_tokenize,
    load_profile,
    normalize,
    parse_profile,
)
from asrforge.tokens import WORD_BOUNDARY

from .conftest import read_corpus

# strings biased towards the Arabic block, combining marks and format controls
_alphabet = st.one_of(
    st.characters(min_codepoint=0x0600, max_codepoint=0x06FF),
    st.sampled_from(list("  \t\n.,!?«»-") + [ZWNJ, "‍", "‏", "﻿", "ـ", "ٰ", "́", "İ", "ß", "Ä"]),
    st.characters(),
)
fuzz_text = st.text(_alphabet, max_size=40)


@pytest.fixture(params=LANGUAGES)
def profile(request):
    return load_profile(request.param)


def test_arabic_harakat_stripped():
    assert normalize("كَتَبَ", load_profile("arabic")) == "كتب"


def test_persian_yeh_fold():
    assert normalize("علي", load_profile("persian")) == "علی"


def test_persian_punct_and_whitespace():
    assert normalize("  سلام،  دنیا ", load_profile("persian")) == "سلام دنیا"


def test_arabic_alef_variants_and_keheh():
    assert normalize("أإآ کی", load_profile("arabic")) == "ااا كي"


def test_digits_to_ascii(profile):
    assert normalize("۱۲۳ ٤٥٦", profile) == "123 456"


def test_zwnj_policy():
    word = "می" + ZWNJ + "روم"
    assert normalize(word, load_profile("persian")) == word
    assert normalize(word, load_profile("urdu")) == word
    assert normalize(word, load_profile("arabic")) == "میروم".replace("ی", "ي")


def test_tatweel_and_superscript_alef():
    assert normalize("هــذا رحمٰن", load_profile("arabic")) == "هذا رحمن"


def test_latin_lowercased():
    assert normalize("Hello WORLD", load_profile("persian")) == "hello world"


def test_composition_rebuilt_letters_are_folded_again():
    # alef + hamza above + madda: composition makes U+0623 then leaves the madda,
    # folding gives alef + madda which composes to U+0622, which folds again
    assert normalize("\u0627\u0654\u0653", load_profile("arabic")) == "\u0627"


def test_empty():
    assert normalize("", load_profile("persian")) == ""


def test_profile_file_format():
    prof = parse_profile("# comment\n064A\t06CC\n064E\t\n0661\t0031\t# one\n", "persian")
    assert prof.fold_table == {"ي": "ی"}
    assert prof.strip_set == frozenset({"َ"})
    assert prof.digit_map == {"١": "1"}
    assert normalize("عَلي ١", prof) == "علی 1"


def test_non_idempotent_fold_table_rejected():
    with pytest.raises(ValueError):
        parse_profile("0041\t0042\n0042\t0043\n", "persian")


def test_strip_set_must_be_marks():
    with pytest.raises(ValueError):
        parse_profile("0628\t\n", "persian")


def test_shipped_profiles_fold_tables_idempotent(profile):
    for dst in profile.fold_table.values():
        assert profile.fold_table.get(dst, dst) == dst


@settings(max_examples=1000, deadline=None)
@given(fuzz_text, st.sampled_from(LANGUAGES))
def test_idempotent(text, lang):
    prof = load_profile(lang)
    once = normalize(text, prof)
    assert normalize(once, prof) == once


@settings(max_examples=500, deadline=None)
@given(fuzz_text, st.sampled_from(LANGUAGES))
def test_output_alphabet(text, lang):
    prof = load_profile(lang)
    out = normalize(text, prof)
    assert not any(ch in prof.strip_set for ch in out)
    assert not any(unicodedata.category(ch).startswith("P") for ch in out)
    assert out == out.strip() and "  " not in out
    if lang in ("persian", "urdu"):
        assert "ي" not in out and "ك" not in out
    assert len(out) <= len(unicodedata.normalize("NFC", text))


@pytest.mark.parametrize("lang", LANGUAGES)
def test_fixture_corpus_folds(lang):
    prof = load_profile(lang)
    for line in read_corpus(lang):
        out = normalize(line, prof)
        if lang == "arabic":
            assert "ی" not in out and "ک" not in out
        else:
            assert "ي" not in out and "ك" not in out
        assert not any(0x064B <= ord(ch) <= 0x0652 for ch in out)


def test_char_tokenize_basic():
    assert char_tokenize("اب جد") == ["ا", "ب", WORD_BOUNDARY, "ج", "د"]
    assert char_tokenize("") == []


def test_char_tokenize_zwnj_attaches_to_previous_letter():
    # ZWNJ extends the preceding grapheme cluster
    assert char_tokenize("می" + ZWNJ + "روم") == ["م", "ی" + ZWNJ, "ر", "و", "م"]


def test_char_tokenize_combining_mark_stays_with_base():
    assert char_tokenize("é") == ["é"]
