import pytest
from hypothesis import given
from hypothesis import strategies as st

from foodtrends.errors import ValidationError
from foodtrends.text import (
    KeywordList,
    default_keywords,
    default_stopwords,
    load_keywords,
    load_stopwords,
    load_wordlist,
    match_keywords,
    normalize,
    sorted_frequencies,
    strip_food_name_hashtags,
    word_frequencies,
)

KW = KeywordList.of(["ugali", "nyama choma", "mandazi"])


# -- normalize ----------------------------------------------------------------


def test_normalize_splits_tokens_and_hashtags():
    doc = normalize("Best UGALI ever! #NyamaChoma")
    assert doc.tokens == ("best", "ugali", "ever")
    assert doc.hashtags == ("nyamachoma",)


def test_normalize_empty():
    doc = normalize("")
    assert doc.tokens == () and doc.hashtags == ()


def test_normalize_adjacent_hashtags():
    assert normalize("#a#b").hashtags == ("a", "b")


def test_normalize_drops_punctuation_and_emoji():
    doc = normalize("chips, mayai!! \U0001f35f na_chai")
    assert doc.tokens == ("chips", "mayai", "na", "chai")


def test_normalize_idempotent_on_detokenized_output():
    doc = normalize("Best UGALI ever! #NyamaChoma #ugali")
    again = normalize(" ".join(doc.tokens))
    assert again.tokens == doc.tokens


# -- match_keywords -----------------------------------------------------------


def test_match_contiguous_token_sequence():
    assert match_keywords(normalize("fresh nyama choma today"), KW) == ["nyama choma"]


def test_match_concatenated_hashtag():
    assert match_keywords(normalize("dinner #nyamachoma"), KW) == ["nyama choma"]


def test_match_concatenated_single_token():
    assert match_keywords(normalize("nyamachoma is ready"), KW) == ["nyama choma"]


def test_no_match_without_contiguity():
    assert match_keywords(normalize("nyamam choma"), KW) == []


def test_match_order_follows_keyword_list():
    doc = normalize("mandazi then ugali then #nyamachoma")
    assert match_keywords(doc, KW) == ["ugali", "nyama choma", "mandazi"]


def test_match_deduplicates():
    assert match_keywords(normalize("ugali ugali #ugali"), KW) == ["ugali"]


# -- strip_food_name_hashtags -------------------------------------------------


def test_strip_interior_hashtag():
    assert strip_food_name_hashtags("Lunch #ugali with friends", KW) == "Lunch with friends"


def test_strip_leaves_plain_text():
    assert strip_food_name_hashtags("ugali is great", KW) == "ugali is great"


def test_strip_keeps_foreign_hashtags():
    kw = KeywordList.of(["ugali", "mandazi"])
    assert strip_food_name_hashtags("#Ugali #pizza #mandazi", kw) == "#pizza"


def test_strip_edge_positions():
    assert strip_food_name_hashtags("#ugali at home", KW) == "at home"
    assert strip_food_name_hashtags("home of #ugali", KW) == "home of"
    assert strip_food_name_hashtags("a #ugali #mandazi b", KW) == "a b"
    assert strip_food_name_hashtags("#ugali", KW) == ""


def test_strip_collapses_whitespace_only_at_removal_sites():
    got = strip_food_name_hashtags("Lunch  #ugali  today,  friends", KW)
    assert got == "Lunch today,  friends"


def test_strip_concatenated_multiword_form():
    assert strip_food_name_hashtags("smoky #nyamachoma joint", KW) == "smoky joint"


@given(st.text(alphabet=st.characters(blacklist_characters="#"), max_size=80))
def test_strip_without_hashtags_is_identity(caption):
    assert strip_food_name_hashtags(caption, KW) == caption


@given(st.lists(st.sampled_from(sorted(KW.concat_forms)), min_size=1, max_size=6))
def test_hashtag_only_captions_strip_to_nothing(forms):
    caption = " ".join(f"#{form}" for form in forms)
    stripped = strip_food_name_hashtags(caption, KW)
    assert stripped == ""
    assert match_keywords(normalize(stripped), KW) == []


@given(st.lists(st.sampled_from(["#ugali", "#mandazi", "sima", "na", "nyama", "choma"]),
                min_size=1, max_size=8))
def test_matches_after_strip_need_plain_text(pieces):
    caption = " ".join(pieces)
    stripped = strip_food_name_hashtags(caption, KW)
    doc = normalize(stripped)
    for name in match_keywords(doc, KW):
        parts = name.split()
        n = len(parts)
        assert any(
            list(doc.tokens[i : i + n]) == parts
            for i in range(len(doc.tokens) - n + 1)
        ), f"{name!r} matched without a plain-text occurrence in {stripped!r}"


# -- word frequencies ---------------------------------------------------------


def test_word_frequencies_counts():
    assert word_frequencies(["a b", "b c"]) == {"a": 1, "b": 2, "c": 1}


def test_word_frequencies_respects_stopwords():
    assert word_frequencies(["the cat", "the hat"], {"the", "cat", "hat"}) == {}


def test_word_frequencies_repeated_word():
    captions = ["love love this", "so much love, love it", "love #love love"]
    assert word_frequencies(captions)["love"] == 6


def test_sorted_frequencies_order():
    freqs = {"b": 2, "a": 2, "c": 5, "d": 1}
    assert sorted_frequencies(freqs) == [("c", 5), ("a", 2), ("b", 2), ("d", 1)]


# -- word lists ---------------------------------------------------------------


def test_keyword_list_rejects_duplicates():
    with pytest.raises(ValidationError):
        KeywordList.of(["Ugali", "ugali "])


def test_keyword_list_normalizes_names():
    kw = KeywordList.of(["  Nyama   Choma "])
    assert kw.names == ("nyama choma",)
    assert kw.concat_forms == ("nyamachoma",)


def test_load_wordlist_skips_comments(tmp_path):
    path = tmp_path / "words.txt"
    path.write_text("# heading\n\nugali\n  chapati  \n# tail\n", encoding="utf-8")
    assert load_wordlist(path) == ["ugali", "chapati"]
    assert load_keywords(path).names == ("ugali", "chapati")
    with pytest.raises(ValidationError):
        load_wordlist(tmp_path / "missing.txt")


def test_load_stopwords_normalizes(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("The\nNA\n", encoding="utf-8")
    assert load_stopwords(path) == frozenset({"the", "na"})


def test_shipped_keyword_list_has_38_names():
    kw = default_keywords()
    assert len(kw) == 38
    assert "ugali" in kw.names and "nyama choma" in kw.names


def test_shipped_stopwords_nonempty():
    sw = default_stopwords()
    assert "the" in sw and "na" in sw
