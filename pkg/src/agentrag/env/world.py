"""Synthetic entity-relation world, its question grammar and the task generator.

Every fact is rendered as one document sentence from a fixed template, so the
world can be recovered from any corpus by pattern matching (``World.from_corpus``).
Questions come in three shapes:

* single fact:   "Where was Mira Kovan born?"
* serial 2-hop:  "Where was the director of Crimson Harbor born?"
  decomposes into "Who directed Crimson Harbor?" then "Where was that person born?"
* parallel pair: "Where was Mira Kovan born and where was Tal Oren born?"
"""

from __future__ import annotations

import enum
import json
import random
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from ..errors import InvalidParams
from .corpus import Corpus, Document


class TaskClass(str, enum.Enum):
    SINGLE_HOP = "SingleHop"
    SERIAL_TWO_HOP = "SerialTwoHop"
    PARALLEL_TWO_FACT = "ParallelTwoFact"

    def __str__(self) -> str:
        return self.value


class GoldPlanClass(str, enum.Enum):
    SOLVE_DIRECT = "SolveDirect"
    QDS = "QDS"
    QDP = "QDP"

    def __str__(self) -> str:
        return self.value


GOLD_PLAN = {
    TaskClass.SINGLE_HOP: GoldPlanClass.SOLVE_DIRECT,
    TaskClass.SERIAL_TWO_HOP: GoldPlanClass.QDS,
    TaskClass.PARALLEL_TWO_FACT: GoldPlanClass.QDP,
}


@dataclass(frozen=True)
class Relation:
    name: str
    subject_type: str
    object_type: str
    doc: str
    question: str
    pair: str  # asks for the objects of two subjects at once


RELATIONS = {
    "directed": Relation("directed", "film", "person", "{s} is a film directed by {o}.", "Who directed {s}?", "Name the directors of {a} and {b}."),
    "born_in": Relation("born_in", "person", "city", "{s} was born in {o}.", "Where was {s} born?", "Name the birthplaces of {a} and {b}."),
    "located_in": Relation("located_in", "city", "country", "{s} is a city in {o}.", "Which country is {s} in?", "Name the countries of {a} and {b}."),
}

PRONOUNS = {"person": "that person", "city": "that city", "film": "that film", "country": "that country"}
_PRONOUN_TYPES = {v: k for k, v in PRONOUNS.items()}


@dataclass(frozen=True)
class SerialTemplate:
    question: str
    first: str
    second: str


SERIAL_TEMPLATES = (
    SerialTemplate("Where was the director of {s} born?", "directed", "born_in"),
    SerialTemplate("Which country was {s} born in?", "born_in", "located_in"),
)

PARALLEL_JOIN = " and "


def single_question(relation: str, subject: str) -> str:
    return RELATIONS[relation].question.format(s=subject)


def parallel_question(relation: str, first: str, second: str) -> str:
    return RELATIONS[relation].pair.format(a=first, b=second)


def _pattern(template: str) -> re.Pattern:
    escaped = re.escape(template).replace(re.escape("{s}"), r"(?P<s>.+?)")
    return re.compile(escaped, re.IGNORECASE)


_DOC_PATTERNS = {name: re.compile(re.escape(r.doc).replace(re.escape("{s}"), r"(?P<s>.+?)").replace(re.escape("{o}"), r"(?P<o>.+?)")) for name, r in RELATIONS.items()}
_SINGLE_PATTERNS = {name: _pattern(r.question) for name, r in RELATIONS.items()}
_PAIR_PATTERNS = {
    name: re.compile(re.escape(r.pair).replace(re.escape("{a}"), r"(?P<a>.+?)").replace(re.escape("{b}"), r"(?P<b>.+?)"), re.IGNORECASE)
    for name, r in RELATIONS.items()
}
_SERIAL_PATTERNS = [(t, _pattern(t.question)) for t in SERIAL_TEMPLATES]


@dataclass(frozen=True)
class Fact:
    relation: str
    subject: str  # entity name, or a pronoun such as "that person"

    @property
    def is_pronoun(self) -> bool:
        return self.subject.lower() in _PRONOUN_TYPES


@dataclass(frozen=True)
class SerialForm:
    first: Fact
    second_relation: str


@dataclass(frozen=True)
class ConjunctionForm:
    facts: tuple[Fact, ...]


QuestionForm = Union[Fact, SerialForm, ConjunctionForm]


def parse_question(text: str) -> Optional[QuestionForm]:
    """Recover the structured form of a generated question, or None if it is off-grammar."""
    text = " ".join((text or "").split())
    if not text:
        return None
    for name, pattern in _PAIR_PATTERNS.items():
        m = pattern.fullmatch(text)
        if m:
            return ConjunctionForm((Fact(name, m.group("a")), Fact(name, m.group("b"))))
    for template, pattern in _SERIAL_PATTERNS:
        m = pattern.fullmatch(text)
        if m:
            return SerialForm(Fact(template.first, m.group("s")), template.second)
    for name, pattern in _SINGLE_PATTERNS.items():
        m = pattern.fullmatch(text)
        if m:
            return Fact(name, m.group("s"))
    return None


class World:
    """Fact table recovered from a corpus: (relation, subject) -> (object, doc_id)."""

    def __init__(self, facts: dict[tuple[str, str], tuple[str, int]]):
        self.facts = facts
        self._canon: dict[str, str] = {}
        self.entities: dict[str, list[str]] = {t: [] for t in ("person", "film", "city", "country")}
        for (rel, subj), (obj, _) in sorted(facts.items()):
            relation = RELATIONS[rel]
            self._register(subj, relation.subject_type)
            self._register(obj, relation.object_type)

    def _register(self, name: str, etype: str) -> None:
        key = name.lower()
        if key not in self._canon:
            self._canon[key] = name
            self.entities[etype].append(name)

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "World":
        facts = {}
        for doc in corpus.documents:
            for name, pattern in _DOC_PATTERNS.items():
                m = pattern.fullmatch(doc.text)
                if m:
                    facts[(name, m.group("s").lower())] = (m.group("o"), doc.doc_id)
                    break
        return cls(facts)

    def canonical(self, name: str) -> Optional[str]:
        return self._canon.get(name.lower())

    def lookup(self, relation: str, subject: str) -> Optional[tuple[str, int]]:
        return self.facts.get((relation, subject.lower()))

    def entity_type(self, name: str) -> Optional[str]:
        canon = self.canonical(name)
        if canon is None:
            return None
        for etype, names in self.entities.items():
            if canon in names:
                return etype
        return None


@dataclass
class SyntheticTask:
    task_id: str
    question: str
    gold_answer: str
    task_class: TaskClass
    gold_plan_class: GoldPlanClass
    supporting_fact_ids: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.task_class = TaskClass(self.task_class)
        self.gold_plan_class = GoldPlanClass(self.gold_plan_class)
        if GOLD_PLAN[self.task_class] is not self.gold_plan_class:
            raise InvalidParams(f"{self.task_class} requires gold plan {GOLD_PLAN[self.task_class]}")

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["task_class"] = self.task_class.value
        rec["gold_plan_class"] = self.gold_plan_class.value
        return rec


def save_tasks(tasks: Iterable[SyntheticTask], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(json.dumps(task.to_record(), sort_keys=True) + "\n")


def load_tasks(path: Union[str, Path]) -> list[SyntheticTask]:
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                tasks.append(SyntheticTask(**json.loads(line)))
            except (TypeError, ValueError) as exc:
                raise InvalidParams(f"{path}:{lineno}: {exc}") from None
    return tasks


# --- generation -----------------------------------------------------------

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kr", "th", "st", "sh"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "io"]
_CODAS = ["", "n", "r", "l", "s", "th", "m", "k"]
_TITLE_ADJ = [
    "Crimson", "Silent", "Hollow", "Golden", "Broken", "Distant", "Frozen", "Hidden", "Burning",
    "Wandering", "Scarlet", "Velvet", "Iron", "Paper", "Glass", "Midnight", "Restless", "Quiet",
    "Amber", "Savage", "Fading", "Lonely", "Electric", "Bitter", "Tender", "Northern", "Endless",
    "Painted", "Shattered", "Wild",
]
_TITLE_NOUN = [
    "Harbor", "Orchard", "Garden", "Mirror", "Lantern", "Canyon", "Voyage", "Meadow", "Kingdom",
    "Carnival", "Empire", "Signal", "Horizon", "Tide", "Compass", "Citadel", "Chorus", "Cathedral",
    "Harvest", "Frontier", "Labyrinth", "Covenant", "Thunder", "Monsoon", "Circus", "Archive",
    "Avalanche", "Sanctuary", "Rhapsody", "Requiem",
]
_RESERVED = {
    "who", "where", "which", "what", "was", "born", "is", "in", "a", "an", "the", "and", "of",
    "film", "city", "country", "director", "directed", "that", "person", "by",
    "name", "directors", "birthplaces", "countries",
}


@dataclass(frozen=True)
class CorpusParams:
    entities: int = 150
    distractors: int = 600

    def __post_init__(self) -> None:
        if self.entities < 4:
            raise InvalidParams("entities must be >= 4")
        if self.distractors < 0:
            raise InvalidParams("distractors must be >= 0")


def _word_factory(rng: random.Random, used: set[str]):
    def make(syllables: int) -> str:
        for _ in range(1000):
            w = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syllables)) + rng.choice(_CODAS)
            if len(w) >= 4 and w not in used and w not in _RESERVED:
                used.add(w)
                return w.capitalize()
        raise InvalidParams("name space exhausted")  # pragma: no cover

    return make


_DISTRACTOR_TEMPLATES = (
    ("{p} attended the premiere of {f}.", ("person", "film")),
    ("{p} once lived near {c}.", ("person", "city")),
    ("{f} was screened in {c}.", ("film", "city")),
    ("{p} admired the work of {q}.", ("person", "person")),
    ("{p} spent a summer in {n}.", ("person", "country")),
)


def generate_tasks(
    seed: int,
    counts: Sequence[int],
    corpus_params: CorpusParams = CorpusParams(),
) -> tuple[Corpus, list[SyntheticTask]]:
    """Build a world, render it as a corpus, and draw tasks of each class.

    ``counts`` is (single, serial, parallel). Deterministic in ``seed``.
    """
    counts = tuple(int(c) for c in counts)
    if len(counts) != 3 or any(c < 0 for c in counts):
        raise InvalidParams("counts must be three non-negative integers")
    rng = random.Random(seed)
    used: set[str] = set()
    word = _word_factory(rng, used)

    n_people = corpus_params.entities
    n_films = corpus_params.entities
    n_cities = max(6, corpus_params.entities // 5)
    n_countries = max(3, n_cities // 4)

    firsts = [word(2) for _ in range(max(8, n_people // 6))]
    lasts = [word(2) for _ in range(max(8, n_people // 4))]
    pairs = [(f, l) for f in firsts for l in lasts]
    if len(pairs) < n_people:
        raise InvalidParams("not enough distinct person names")  # pragma: no cover
    people = [f"{f} {l}" for f, l in rng.sample(pairs, n_people)]
    titles = [(a, b) for a in _TITLE_ADJ for b in _TITLE_NOUN]
    if n_films > len(titles):
        raise InvalidParams(f"entities must be <= {len(titles)}")
    films = [f"{a} {b}" for a, b in rng.sample(titles, n_films)]
    cities = [word(3) for _ in range(n_cities)]
    countries = [word(2) for _ in range(n_countries)]

    triples: list[tuple[str, str, str]] = []
    for i, city in enumerate(cities):
        # every country gets at least one city
        country = countries[i] if i < n_countries else rng.choice(countries)
        triples.append(("located_in", city, country))
    for person in people:
        triples.append(("born_in", person, rng.choice(cities)))
    for film in films:
        triples.append(("directed", film, rng.choice(people)))

    pools = {"person": people, "film": films, "city": cities, "country": countries}
    sentences = [RELATIONS[r].doc.format(s=s, o=o) for r, s, o in triples]
    for _ in range(corpus_params.distractors):
        template, types = rng.choice(_DISTRACTOR_TEMPLATES)
        picks = [rng.choice(pools[t]) for t in types]
        keys = ["p", "f", "c", "q", "n"]
        fill = {}
        for t, value in zip(types, picks):
            key = {"person": "p", "film": "f", "city": "c", "country": "n"}[t]
            if key in fill:
                key = "q"
            fill[key] = value
        for key in keys:
            fill.setdefault(key, "")
        sentences.append(template.format(**fill))
    order = list(range(len(sentences)))
    rng.shuffle(order)
    corpus = Corpus(Document(doc_id, sentences[i]) for doc_id, i in enumerate(order))
    world = World.from_corpus(corpus)

    tasks: list[SyntheticTask] = []
    tasks += _single_tasks(rng, world, counts[0])
    tasks += _serial_tasks(rng, world, counts[1])
    tasks += _parallel_tasks(rng, world, counts[2])
    for i, task in enumerate(tasks):
        task.task_id = f"t{seed}-{i:05d}"
    return corpus, tasks


def _single_tasks(rng: random.Random, world: World, n: int) -> list[SyntheticTask]:
    candidates = sorted(world.facts)
    rng.shuffle(candidates)
    out = []
    for rel, subj in candidates[:n]:
        obj, doc_id = world.facts[(rel, subj)]
        name = world.canonical(subj)
        out.append(SyntheticTask("", single_question(rel, name), obj, TaskClass.SINGLE_HOP, GoldPlanClass.SOLVE_DIRECT, [doc_id]))
    if len(out) < n:
        raise InvalidParams("world too small for requested single-hop tasks")
    return out


def _serial_tasks(rng: random.Random, world: World, n: int) -> list[SyntheticTask]:
    candidates = []
    for template in SERIAL_TEMPLATES:
        for (rel, subj), (mid, doc1) in world.facts.items():
            if rel != template.first:
                continue
            hop2 = world.lookup(template.second, mid)
            if hop2 is None:
                continue
            candidates.append((template.question, world.canonical(subj), hop2[0], doc1, hop2[1]))
    candidates.sort()
    rng.shuffle(candidates)
    if len(candidates) < n:
        raise InvalidParams("world too small for requested serial tasks")
    return [
        SyntheticTask("", q.format(s=s), gold, TaskClass.SERIAL_TWO_HOP, GoldPlanClass.QDS, [d1, d2])
        for q, s, gold, d1, d2 in candidates[:n]
    ]


def _parallel_tasks(rng: random.Random, world: World, n: int) -> list[SyntheticTask]:
    by_rel: dict[str, list[tuple[str, str, int]]] = {}
    for (rel, subj), (obj, doc_id) in sorted(world.facts.items()):
        by_rel.setdefault(rel, []).append((world.canonical(subj), obj, doc_id))
    rels = sorted(r for r, facts in by_rel.items() if len(facts) >= 2)
    out, seen, attempts = [], set(), 0
    while len(out) < n:
        attempts += 1
        if attempts > 100 * (n + 10):
            raise InvalidParams("world too small for requested parallel tasks")
        rel = rng.choice(rels)
        (s1, o1, d1), (s2, o2, d2) = rng.sample(by_rel[rel], 2)
        if o1.lower() == o2.lower() or (s1, s2) in seen:
            continue
        seen.add((s1, s2))
        out.append(
            SyntheticTask("", parallel_question(rel, s1, s2), f"{o1}{PARALLEL_JOIN}{o2}", TaskClass.PARALLEL_TWO_FACT, GoldPlanClass.QDP, [d1, d2])
        )
    return out


STANDARD_COUNTS = (167, 167, 166)
STANDARD_TRAIN_PER_CLASS = 100


def split_by_class(tasks: Sequence[SyntheticTask], train_per_class: int) -> tuple[list[SyntheticTask], list[SyntheticTask]]:
    """First ``train_per_class`` tasks of each class train; the rest are held out."""
    seen: dict[TaskClass, int] = {}
    train, held_out = [], []
    for task in tasks:
        n = seen.get(task.task_class, 0)
        (train if n < train_per_class else held_out).append(task)
        seen[task.task_class] = n + 1
    return train, held_out


def standard_mix(seed: int, corpus_params: CorpusParams = CorpusParams()) -> tuple[Corpus, list[SyntheticTask], list[SyntheticTask]]:
    """100 tasks per class for training plus 200 held-out tasks, over one shared corpus."""
    corpus, tasks = generate_tasks(seed, STANDARD_COUNTS, corpus_params)
    train, held_out = split_by_class(tasks, STANDARD_TRAIN_PER_CLASS)
    return corpus, train, held_out
