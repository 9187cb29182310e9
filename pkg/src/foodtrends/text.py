"""Caption normalization, food-name matching, and word statistics.

Matching is case-insensitive and literal: a multi-word food name matches as
a contiguous token sequence, or through its concatenated (space-free) form
appearing as a hashtag or a single token. No stemming.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources

from .errors import ValidationError

# Alphanumeric runs, optionally '#'-prefixed (then they are hashtags).
# Underscore is a boundary like any other punctuation; emoji are dropped.
_TOKEN_RE = re.compile(r"(#+)?([^\W_]+)", re.UNICODE)


@dataclass(frozen=True)
class CaptionDoc:
    raw: str
    tokens: tuple[str, ...]
    hashtags: tuple[str, ...]


def normalize(raw: str) -> CaptionDoc:
    """Split a caption into lowercase word tokens and hashtag bodies."""
    tokens: list[str] = []
    hashtags: list[str] = []
    for match in _TOKEN_RE.finditer(raw):
        word = match.group(2).lower()
        if match.group(1):
            hashtags.append(word)
        else:
            tokens.append(word)
    return CaptionDoc(raw=raw, tokens=tuple(tokens), hashtags=tuple(hashtags))


def _normalize_name(name: str) -> str:
    return " ".join(name.lower().split())


@dataclass(frozen=True)
class KeywordList:
    """Ordered food-name list with derived space-free forms for hashtag matching."""

    names: tuple[str, ...]
    concat_forms: tuple[str, ...]

    @classmethod
    def of(cls, names) -> "KeywordList":
        normalized = [_normalize_name(n) for n in names if _normalize_name(n)]
        if len(set(normalized)) != len(normalized):
            dupes = sorted({n for n in normalized if normalized.count(n) > 1})
            raise ValidationError(f"duplicate keyword names after normalization: {dupes}")
        return cls(
            names=tuple(normalized),
            concat_forms=tuple(n.replace(" ", "") for n in normalized),
        )

    def __len__(self) -> int:
        return len(self.names)


def match_keywords(doc: CaptionDoc, kw: KeywordList) -> list[str]:
    """Food names present in the caption, in keyword-list order.

    A name matches if its token sequence appears contiguously in the caption
    tokens or if its concatenated form equals any hashtag or single token.
    """
    token_set = set(doc.tokens)
    hashtag_set = set(doc.hashtags)
    matched = []
    for name, concat in zip(kw.names, kw.concat_forms):
        if concat in hashtag_set or concat in token_set:
            matched.append(name)
            continue
        parts = name.split()
        n = len(parts)
        if any(list(doc.tokens[i : i + n]) == parts for i in range(len(doc.tokens) - n + 1)):
            matched.append(name)
    return matched


# Sentinel marking removal sites while whitespace is collapsed around them.
_REMOVED = "\x00"


def strip_food_name_hashtags(raw: str, kw: KeywordList) -> str:
    """Remove hashtags whose body is a food name's concatenated form.

    Plain-text (non-hashtag) occurrences of food names are preserved.
    Whitespace collapses to a single space at interior removal sites and
    disappears at the string's ends; untouched text is preserved verbatim.
    """
    concat_set = set(kw.concat_forms)
    spans = [
        m.span()
        for m in _TOKEN_RE.finditer(raw)
        if m.group(1) and m.group(2).lower() in concat_set
    ]
    if not spans:
        return raw
    out = []
    last = 0
    for start, end in spans:
        out.append(raw[last:start])
        out.append(_REMOVED)
        last = end
    out.append(raw[last:])
    text = "".join(out)
    text = re.sub(rf"^(\s*{_REMOVED})+\s*", "", text)
    text = re.sub(rf"(\s*{_REMOVED})+\s*$", "", text)
    text = re.sub(rf"(\s*{_REMOVED})+\s*", " ", text)
    return text


def word_frequencies(captions, stopwords: set[str] | frozenset[str] = frozenset()) -> dict[str, int]:
    """Token counts over normalized captions, minus stopwords."""
    counts: Counter[str] = Counter()
    for caption in captions:
        counts.update(t for t in normalize(caption).tokens if t not in stopwords)
    return dict(counts)


def sorted_frequencies(freqs: dict[str, int]) -> list[tuple[str, int]]:
    """Deterministic export order: count descending, then word ascending."""
    return sorted(freqs.items(), key=lambda item: (-item[1], item[0]))


def load_wordlist(path) -> list[str]:
    """Read a UTF-8 word list, one entry per line; '#' lines are comments."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ValidationError(f"cannot read word list {path}: {exc}") from exc
    entries = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entries.append(line)
    return entries


def load_keywords(path) -> KeywordList:
    return KeywordList.of(load_wordlist(path))


def load_stopwords(path) -> frozenset[str]:
    return frozenset(_normalize_name(w) for w in load_wordlist(path))


def _data_text(filename: str) -> str:
    return resources.files("foodtrends.data").joinpath(filename).read_text(encoding="utf-8")


def default_keywords() -> KeywordList:
    """The shipped Kiswahili food-name list."""
    lines = [l.strip() for l in _data_text("keywords_kiswahili.txt").splitlines()]
    return KeywordList.of(l for l in lines if l and not l.startswith("#"))


def default_stopwords() -> frozenset[str]:
    """The shipped English + Kiswahili stopword list."""
    lines = [l.strip() for l in _data_text("stopwords.txt").splitlines()]
    return frozenset(_normalize_name(l) for l in lines if l and not l.startswith("#"))
