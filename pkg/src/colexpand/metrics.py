"""Accuracy metrics for predicted expansions against gold expansions.

Provides exact match, word-level F1, and a soft embedding-based F1,
together with synonym-aware variants that treat phrases from the same
equivalence class as interchangeable.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

Embedder = Callable[[str], np.ndarray]

#: Enumeration bound for gold variations before falling back to
#: canonical-form comparison.
DEFAULT_VARIATION_CAP = 1024


def normalize(phrase: str) -> str:
    """Lowercase, unify whitespace, drop everything but letters/digits/spaces.

    Punctuation is removed rather than replaced, so "Day-Time" becomes
    "daytime" (one word), while any whitespace run collapses to one space.
    """
    lowered = phrase.lower()
    kept = []
    for ch in lowered:
        if ch.isspace():
            kept.append(" ")
        elif ch.isalnum():
            kept.append(ch)
    return " ".join("".join(kept).split())


def exact_match(x: str, g: str) -> bool:
    """True iff the two phrases are equal after normalization."""
    return normalize(x) == normalize(g)


def word_f1(x: str, g: str) -> float:
    """2PR/(P+R) over distinct-word overlap between the two phrases.

    P is the fraction of x's distinct words that occur in g, R the
    fraction of g's words that occur in x. Two empty phrases count as a
    perfect match (so exact match always implies F1 = 1).
    """
    xs = set(normalize(x).split())
    gs = set(normalize(g).split())
    if not xs and not gs:
        return 1.0
    if not xs or not gs:
        return 0.0
    overlap = len(xs & gs)
    p = overlap / len(xs)
    r = overlap / len(gs)
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


class TrigramEmbedder:
    """Deterministic offline word embedder.

    Hashes character n-grams (n = 1..3) of a word into a fixed-dimension
    count vector and L2-normalizes it. Shared letters and letter groups
    give related words a positive cosine similarity without any model or
    network dependency.
    """

    def __init__(self, dim: int = 512):
        if dim < 8:
            raise ValueError("embedding dimension too small")
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def __call__(self, word: str) -> np.ndarray:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        vec = np.zeros(self.dim)
        for n in (1, 2, 3):
            for i in range(len(word) - n + 1):
                gram = word[i : i + n]
                digest = hashlib.md5(gram.encode("utf-8")).digest()
                vec[int.from_bytes(digest[:4], "big") % self.dim] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec = vec / norm
        self._cache[word] = vec
        return vec


class RemoteEmbedder:
    """Word embedder backed by an HTTP endpoint.

    POSTs ``{"words": [...]}`` and expects ``{"vectors": [[...], ...]}``.
    Vectors are L2-normalized locally; responses are cached per word.
    """

    def __init__(self, endpoint: str, post: Optional[Callable] = None, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout
        if post is None:
            import requests

            post = requests.post
        self._post = post
        self._cache: dict[str, np.ndarray] = {}

    def __call__(self, word: str) -> np.ndarray:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        response = self._post(
            self.endpoint, json={"words": [word]}, timeout=self.timeout
        )
        response.raise_for_status()
        vec = np.asarray(response.json()["vectors"][0], dtype=float)
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec = vec / norm
        self._cache[word] = vec
        return vec


def make_embedder(spec: str) -> Embedder:
    """Build an embedder from a config string.

    "offline-trigram" gives the deterministic local fallback;
    "remote:<endpoint>" calls out to an embedding service.
    """
    if spec == "offline-trigram":
        return TrigramEmbedder()
    if spec.startswith("remote:"):
        endpoint = spec[len("remote:") :]
        if not endpoint:
            raise ValueError("remote embedder needs an endpoint")
        return RemoteEmbedder(endpoint)
    raise ValueError(f"unknown embedder {spec!r}")


def embedding_f1(x: str, g: str, embedder: Embedder) -> float:
    """Soft F1: each word matches its best cosine partner on the other side."""
    xw = normalize(x).split()
    gw = normalize(g).split()
    if not xw and not gw:
        return 1.0
    if not xw or not gw:
        return 0.0
    xv = [embedder(w) for w in xw]
    gv = [embedder(w) for w in gw]
    sims = np.array([[float(np.dot(a, b)) for b in gv] for a in xv])
    sims = np.clip(sims, 0.0, 1.0)
    p = float(sims.max(axis=1).mean())
    r = float(sims.max(axis=0).mean())
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


@dataclass(frozen=True)
class SynonymLexicon:
    """Disjoint equivalence classes of interchangeable phrases.

    Phrases are normalized (lowercase, single spaces); classes sharing a
    phrase are merged transitively at construction, so the classes held
    here are always pairwise disjoint.
    """

    classes: tuple[frozenset[str], ...]

    @classmethod
    def empty(cls) -> "SynonymLexicon":
        return cls(classes=())

    @classmethod
    def from_classes(cls, raw_classes: Iterable[Iterable[str]]) -> "SynonymLexicon":
        parent: dict[str, str] = {}

        def find(p: str) -> str:
            while parent[p] != p:
                parent[p] = parent[parent[p]]
                p = parent[p]
            return p

        def union(a: str, b: str) -> None:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra

        for raw in raw_classes:
            phrases = []
            for phrase in raw:
                norm = normalize(phrase)
                if not norm:
                    raise ValueError(f"synonym phrase {phrase!r} is empty after normalization")
                phrases.append(norm)
            distinct = sorted(set(phrases))
            if len(distinct) < 2:
                raise ValueError(
                    f"synonym class {sorted(set(raw))!r} needs at least 2 distinct phrases"
                )
            for p in distinct:
                parent.setdefault(p, p)
            for p in distinct[1:]:
                union(distinct[0], p)

        groups: dict[str, set[str]] = {}
        for phrase in parent:
            groups.setdefault(find(phrase), set()).add(phrase)
        classes = tuple(
            frozenset(members)
            for members in sorted(groups.values(), key=lambda m: min(m))
        )
        return cls(classes=classes)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for klass in self.classes:
            if seen & klass:
                raise ValueError("synonym classes must be pairwise disjoint")
            seen |= klass

    @property
    def phrase_to_class(self) -> dict[str, frozenset[str]]:
        mapping = {}
        for klass in self.classes:
            for phrase in klass:
                mapping[phrase] = klass
        return mapping

    @property
    def max_phrase_words(self) -> int:
        longest = 0
        for klass in self.classes:
            for phrase in klass:
                longest = max(longest, len(phrase.split()))
        return longest


def _segments(wordlist: list[str], lexicon: SynonymLexicon) -> list[tuple[str, ...]]:
    """Split a word list into substitution segments.

    Scans left to right taking the longest class phrase at each position
    (non-overlapping). Class segments carry all alternatives sorted;
    non-matching words become singleton segments.
    """
    mapping = lexicon.phrase_to_class
    max_words = lexicon.max_phrase_words
    segments: list[tuple[str, ...]] = []
    i = 0
    while i < len(wordlist):
        matched = None
        for n in range(min(max_words, len(wordlist) - i), 0, -1):
            phrase = " ".join(wordlist[i : i + n])
            klass = mapping.get(phrase)
            if klass is not None:
                matched = (klass, n)
                break
        if matched is not None:
            segments.append(tuple(sorted(matched[0])))
            i += matched[1]
        else:
            segments.append((wordlist[i],))
            i += 1
    return segments


def canonicalize(phrase: str, lexicon: SynonymLexicon) -> str:
    """Replace every class phrase with its class representative.

    The representative is the lexicographically smallest phrase in the
    class, so canonical forms are deterministic.
    """
    segments = _segments(normalize(phrase).split(), lexicon)
    return " ".join(segment[0] for segment in segments)


def gold_variations(
    g: str, lexicon: SynonymLexicon, cap: int = DEFAULT_VARIATION_CAP
) -> set[str]:
    """All phrases reachable from ``g`` by class substitutions, capped.

    Includes ``g`` itself. Enumeration stops once ``cap`` variations have
    been produced; callers that need exactness past the cap should compare
    canonical forms instead (see synonym_aware_em).
    """
    segments = _segments(normalize(g).split(), lexicon)
    variations: set[str] = set()
    for combo in itertools.product(*segments):
        variations.add(" ".join(combo))
        if len(variations) >= cap:
            break
    return variations


def synonym_aware_em(
    x: str, g: str, lexicon: SynonymLexicon, cap: int = DEFAULT_VARIATION_CAP
) -> bool:
    """True iff ``x`` matches any synonym variation of ``g``.

    Enumerates variations while their count stays within ``cap``;
    otherwise falls back to canonical-form comparison. The two strategies
    agree whenever no overlapping multi-word class phrases are involved.
    """
    nx = normalize(x)
    segments = _segments(normalize(g).split(), lexicon)
    count = 1
    for segment in segments:
        count *= len(segment)
        if count > cap:
            return canonicalize(x, lexicon) == canonicalize(g, lexicon)
    return nx in {" ".join(combo) for combo in itertools.product(*segments)}


def synonym_aware_word_f1(x: str, g: str, lexicon: SynonymLexicon) -> float:
    """Word F1 with class members treated as the same word.

    Computed as the plain F1 of the canonicalized phrases, floored by the
    plain F1 of the originals: substitution alone can merge distinct words
    on both sides and lower the score, and synonym awareness must never
    penalize.
    """
    return max(
        word_f1(x, g),
        word_f1(canonicalize(x, lexicon), canonicalize(g, lexicon)),
    )


def synonym_aware_embedding_f1(
    x: str, g: str, lexicon: SynonymLexicon, embedder: Embedder
) -> float:
    """Embedding F1 over canonical forms, floored by the plain score."""
    return max(
        embedding_f1(x, g, embedder),
        embedding_f1(canonicalize(x, lexicon), canonicalize(g, lexicon), embedder),
    )
