from .corpus import Corpus, Document, lexical_retrieve, load_corpus, save_corpus
from .oracle import IDK, OracleConfig, scripted_executor
from .world import (
    CorpusParams,
    GoldPlanClass,
    SyntheticTask,
    TaskClass,
    World,
    generate_tasks,
    load_tasks,
    save_tasks,
    split_by_class,
    standard_mix,
)

__all__ = [
    "Corpus",
    "CorpusParams",
    "Document",
    "GoldPlanClass",
    "IDK",
    "OracleConfig",
    "SyntheticTask",
    "TaskClass",
    "World",
    "generate_tasks",
    "lexical_retrieve",
    "load_corpus",
    "load_tasks",
    "save_corpus",
    "save_tasks",
    "scripted_executor",
    "split_by_class",
    "standard_mix",
]
