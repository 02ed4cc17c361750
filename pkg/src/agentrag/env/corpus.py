"""Document corpus with an inverted index and a cosine TF-IDF retriever."""

from __future__ import annotations

import heapq
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

from ..errors import CorpusParseError, EmptyCorpus

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_TOP_K = 5


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    doc_id: int
    text: str


class Corpus:
    def __init__(self, documents: Iterable[Document]):
        self.documents: tuple[Document, ...] = tuple(documents)
        ids = [d.doc_id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate doc_id in corpus")
        self._by_id = {d.doc_id: d for d in self.documents}
        self._build_index()

    def _build_index(self) -> None:
        self.index: dict[str, list[tuple[int, int]]] = defaultdict(list)
        term_counts = {}
        for doc in self.documents:
            counts = Counter(tokenize(doc.text))
            term_counts[doc.doc_id] = counts
            for term in sorted(counts):
                self.index[term].append((doc.doc_id, counts[term]))
        n = len(self.documents)
        self.idf = {t: math.log(1.0 + n / len(postings)) for t, postings in self.index.items()}
        self._norms = {}
        for doc_id, counts in term_counts.items():
            sq = sum((self._tf(c) * self.idf[t]) ** 2 for t, c in sorted(counts.items()))
            self._norms[doc_id] = math.sqrt(sq)

    @staticmethod
    def _tf(count: int) -> float:
        return 1.0 + math.log(count)

    def __len__(self) -> int:
        return len(self.documents)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Corpus) and self.documents == other.documents

    def __getitem__(self, doc_id: int) -> Document:
        return self._by_id[doc_id]

    def scores(self, query: str) -> dict[int, float]:
        """Cosine similarity between the query and every document sharing a term with it."""
        q_counts = Counter(t for t in tokenize(query) if t in self.idf)
        if not q_counts:
            return {}
        q_weights = {t: self._tf(c) * self.idf[t] for t, c in sorted(q_counts.items())}
        q_norm = math.sqrt(sum(w * w for w in q_weights.values()))
        dots: dict[int, float] = defaultdict(float)
        for term, qw in q_weights.items():
            idf = self.idf[term]
            for doc_id, count in self.index[term]:
                dots[doc_id] += qw * self._tf(count) * idf
        return {
            doc_id: dot / (q_norm * self._norms[doc_id])
            for doc_id, dot in dots.items()
            if self._norms[doc_id] > 0
        }

    def retrieve(self, query: str, k: int = DEFAULT_TOP_K) -> list[Document]:
        return lexical_retrieve(self, query, k)


def lexical_retrieve(corpus: Corpus, query: str, k: int = DEFAULT_TOP_K) -> list[Document]:
    """Top-``k`` documents by descending score, ties (including zero scores) by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(corpus) == 0:
        raise EmptyCorpus("cannot retrieve from an empty corpus")
    scores = corpus.scores(query)
    ranked = heapq.nsmallest(k, scores.items(), key=lambda item: (-item[1], item[0]))
    hits = [corpus[doc_id] for doc_id, _ in ranked]
    if len(hits) < k:
        # pad with zero-score documents in id order
        for doc in sorted(corpus.documents, key=lambda d: d.doc_id):
            if len(hits) >= k:
                break
            if doc.doc_id not in scores:
                hits.append(doc)
    return hits


def save_corpus(corpus: Corpus, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            fh.write(f"{doc.doc_id}\t{doc.text}\n")


def parse_corpus_lines(lines: Sequence[str]) -> Corpus:
    docs = []
    seen = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if "\t" not in line:
            raise CorpusParseError(lineno, "expected 'doc_id<TAB>text'")
        id_part, text = line.split("\t", 1)
        try:
            doc_id = int(id_part)
        except ValueError:
            raise CorpusParseError(lineno, f"doc_id {id_part!r} is not an integer") from None
        if doc_id in seen:
            raise CorpusParseError(lineno, f"duplicate doc_id {doc_id}")
        if "\t" in text:
            raise CorpusParseError(lineno, "document text contains a TAB")
        seen.add(doc_id)
        docs.append(Document(doc_id, text))
    if not docs:
        raise EmptyCorpus("corpus file holds no documents")
    return Corpus(docs)


def load_corpus(path: Union[str, Path]) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus_lines(fh.readlines())
