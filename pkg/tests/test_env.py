import numpy as np
import pytest

from agentrag.engine import REQUIRED_ROLES, Engine
from agentrag.env.corpus import Corpus, Document, lexical_retrieve, load_corpus, save_corpus
from agentrag.env.oracle import IDK, ORACLE_ROLES, OracleConfig, scripted_executor
from agentrag.env.world import (
    PRONOUNS,
    STANDARD_COUNTS,
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
from agentrag.errors import CorpusParseError, EmptyCorpus, FormatViolation, InvalidParams
from agentrag.policy.backends import ActionSample, OracleBackend
from agentrag.policy.parsing import parse_output
from agentrag.reward import token_f1
from agentrag.trace import DecomposeMode, Observation, Role
from agentrag.workflow import Decompose, ExecutorKind as K, Solve, encode


class FixedPlanner:
    """Emits ``root`` at depth 0. Children get R,AG, or QR,R,AG when they hold a pronoun."""

    def __init__(self, root):
        self.root = root

    def supports(self, role):
        return role is Role.PLANNER

    def act(self, role, obs, rng=None):
        if obs.depth == 0:
            return ActionSample(encode(self.root))
        needs_rewrite = any(p in obs.target_query for p in PRONOUNS.values())
        return ActionSample(encode(Solve((K.QR, K.R, K.AG) if needs_rewrite else (K.R, K.AG))))


def oracle_engine(corpus, planner, oracle=OracleConfig()):
    executors = OracleBackend(World.from_corpus(corpus), oracle)
    backends = {role: executors for role in REQUIRED_ROLES}
    backends[Role.PLANNER] = planner
    return Engine(backends, corpus)


@pytest.fixture(scope="module")
def small():
    return generate_tasks(42, (10, 10, 10), CorpusParams(entities=40, distractors=60))


@pytest.fixture(scope="module")
def standard():
    return standard_mix(7)


# -- retrieval -------------------------------------------------------------

def toy_corpus():
    return Corpus(
        [
            Document(0, "Silent Harbor was directed by Mira Dalton."),
            Document(1, "Mira Dalton was born in Keltheon."),
            Document(2, "Keltheon is a city in Varossa."),
        ]
    )


def test_self_retrieval_ranks_first():
    corpus = toy_corpus()
    for doc in corpus.documents:
        assert lexical_retrieve(corpus, doc.text, 1)[0] == doc


def test_k_larger_than_corpus():
    assert len(lexical_retrieve(toy_corpus(), "Mira Dalton", 5)) == 3


def test_equal_scores_break_ties_by_id():
    corpus = Corpus([Document(7, "alpha beta"), Document(3, "alpha beta"), Document(5, "gamma")])
    ids = [d.doc_id for d in lexical_retrieve(corpus, "alpha", 3)]
    assert ids == [3, 7, 5]


def test_zero_score_padding_is_in_id_order():
    corpus = Corpus([Document(2, "x"), Document(0, "y"), Document(1, "z")])
    assert [d.doc_id for d in lexical_retrieve(corpus, "nothing matches", 2)] == [0, 1]


def test_retrieve_validation():
    with pytest.raises(EmptyCorpus):
        lexical_retrieve(Corpus([]), "q", 1)
    with pytest.raises(ValueError):
        lexical_retrieve(toy_corpus(), "q", 0)


# -- generation ------------------------------------------------------------

def test_generation_is_deterministic(tmp_path):
    blobs = []
    for run in range(2):
        corpus, tasks = generate_tasks(42, (10, 10, 10))
        save_corpus(corpus, tmp_path / f"c{run}.tsv")
        save_tasks(tasks, tmp_path / f"t{run}.jsonl")
        blobs.append(((tmp_path / f"c{run}.tsv").read_bytes(), (tmp_path / f"t{run}.jsonl").read_bytes()))
    assert blobs[0] == blobs[1]


def test_counts_and_gold_classes(small):
    _, tasks = small
    assert len(tasks) == 30
    tally = {c: sum(t.task_class is c for t in tasks) for c in TaskClass}
    assert tally == {TaskClass.SINGLE_HOP: 10, TaskClass.SERIAL_TWO_HOP: 10, TaskClass.PARALLEL_TWO_FACT: 10}
    expected = {
        TaskClass.SINGLE_HOP: GoldPlanClass.SOLVE_DIRECT,
        TaskClass.SERIAL_TWO_HOP: GoldPlanClass.QDS,
        TaskClass.PARALLEL_TWO_FACT: GoldPlanClass.QDP,
    }
    assert all(t.gold_plan_class is expected[t.task_class] for t in tasks)


def test_task_class_fixes_gold_plan():
    with pytest.raises(InvalidParams):
        SyntheticTask("t", "q", "a", TaskClass.SINGLE_HOP, GoldPlanClass.QDS)


def test_supporting_facts_exist(small):
    corpus, tasks = small
    for task in tasks:
        expected = 1 if task.task_class is TaskClass.SINGLE_HOP else 2
        assert len(task.supporting_fact_ids) == expected
        for doc_id in task.supporting_fact_ids:
            corpus[doc_id]


def test_invalid_params():
    with pytest.raises(InvalidParams):
        generate_tasks(1, (1, 1))
    with pytest.raises(InvalidParams):
        CorpusParams(entities=2)


def test_task_round_trip(tmp_path, small):
    _, tasks = small
    save_tasks(tasks, tmp_path / "t.jsonl")
    assert load_tasks(tmp_path / "t.jsonl") == tasks


def test_standard_mix_split(standard):
    corpus, train, held_out = standard
    assert len(train) == 300 and len(held_out) == 200
    for cls in TaskClass:
        assert sum(t.task_class is cls for t in train) == 100
    assert not {t.task_id for t in train} & {t.task_id for t in held_out}
    assert sum(STANDARD_COUNTS) == 500


def test_split_by_class_keeps_order():
    _, tasks = generate_tasks(3, (3, 3, 3), CorpusParams(entities=20, distractors=0))
    train, rest = split_by_class(tasks, 2)
    assert [t.task_id for t in train] == [t.task_id for t in tasks if t not in rest]
    assert len(rest) == 3


@pytest.mark.parametrize(
    "task_class, plan",
    [
        (TaskClass.SERIAL_TWO_HOP, Decompose(DecomposeMode.SERIAL)),
        (TaskClass.PARALLEL_TWO_FACT, Decompose(DecomposeMode.PARALLEL)),
        (TaskClass.SINGLE_HOP, Solve((K.R, K.AG))),
    ],
)
def test_gold_pipeline_recovers_answer_at_zero_noise(standard, task_class, plan):
    corpus, train, held_out = standard
    engine = oracle_engine(corpus, FixedPlanner(plan))
    tasks = [t for t in train + held_out if t.task_class is task_class]
    for task in tasks:
        result = engine.run(task.question, np.random.default_rng(0))
        assert result.final_answer == task.gold_answer, task.question
        assert not any(s.format_violation for s in result.steps)


def test_serial_raw_question_misses_support(standard):
    corpus, train, held_out = standard
    serial = [t for t in train + held_out if t.task_class is TaskClass.SERIAL_TWO_HOP]
    misses = 0
    for task in serial:
        got = {d.doc_id for d in lexical_retrieve(corpus, task.question, 5)}
        misses += not set(task.supporting_fact_ids) <= got
    assert misses / len(serial) >= 0.5


def test_single_round_solve_is_worse_on_compositional_tasks(standard):
    corpus, train, _ = standard
    direct = oracle_engine(corpus, FixedPlanner(Solve((K.R, K.AG))))
    serial = oracle_engine(corpus, FixedPlanner(Decompose(DecomposeMode.SERIAL)))
    tasks = [t for t in train if t.task_class is TaskClass.SERIAL_TWO_HOP]
    f1_direct = np.mean([token_f1(direct.run(t.question).final_answer, t.gold_answer) for t in tasks])
    f1_serial = np.mean([token_f1(serial.run(t.question).final_answer, t.gold_answer) for t in tasks])
    assert f1_serial - f1_direct > 0.5


# -- scripted executors ----------------------------------------------------

def test_ds_selects_the_supporting_document(standard):
    corpus, train, _ = standard
    world = World.from_corpus(corpus)
    task = next(t for t in train if t.task_class is TaskClass.SINGLE_HOP)
    support = corpus[task.supporting_fact_ids[0]]
    others = [d for d in corpus.documents if d.doc_id != support.doc_id][:4]
    docs = (others[0], others[1], support, others[2], others[3])
    obs = Observation(Role.DS, task.question, local_context=((Role.RA, docs),))
    assert scripted_executor(Role.DS, obs, world) == "<id>2</id>"


@pytest.mark.parametrize("role", sorted(ORACLE_ROLES, key=lambda r: r.value))
def test_full_noise_breaks_every_protocol(standard, role):
    corpus, train, _ = standard
    world = World.from_corpus(corpus)
    task = next(t for t in train if t.task_class is TaskClass.SERIAL_TWO_HOP)
    docs = tuple(corpus.documents[:5])
    obs = Observation(role, task.question, local_context=((Role.RA, docs),), global_selection=(("q", "a"),))
    rng = np.random.default_rng(0)
    for _ in range(20):
        text = scripted_executor(role, obs, world, OracleConfig(noise_rate=1.0), rng)
        with pytest.raises(FormatViolation):
            parse_output(role, text, max_id=4)


def test_ag_without_support_says_idk(standard):
    corpus, train, _ = standard
    world = World.from_corpus(corpus)
    task = train[0]
    obs = Observation(Role.AG, task.question)
    assert scripted_executor(Role.AG, obs, world) == f"<answer>{IDK}</answer>"


def test_error_channel_stays_well_formed(standard):
    corpus, train, _ = standard
    world = World.from_corpus(corpus)
    task = train[0]
    support = tuple(corpus[i] for i in task.supporting_fact_ids)
    obs = Observation(Role.AG, task.question, local_context=((Role.DS, support),))
    rng = np.random.default_rng(3)
    answers = {parse_output(Role.AG, scripted_executor(Role.AG, obs, world, OracleConfig(error_rate=1.0), rng)) for _ in range(10)}
    assert task.gold_answer not in answers


def test_oracle_config_bounds():
    with pytest.raises(InvalidParams):
        OracleConfig(noise_rate=1.5)


# -- corpus files ----------------------------------------------------------

def test_load_two_line_corpus(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("0\tfirst document\n1\tsecond document\n", encoding="utf-8")
    corpus = load_corpus(path)
    assert len(corpus) == 2 and corpus[1].text == "second document"


@pytest.mark.parametrize(
    "content, line",
    [
        ("0\tok\nbroken line\n", 2),
        ("x\tnot an id\n", 1),
        ("0\ta\n0\tb\n", 2),
    ],
)
def test_malformed_corpus_reports_line(tmp_path, content, line):
    path = tmp_path / "c.tsv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(CorpusParseError) as info:
        load_corpus(path)
    assert info.value.line == line


def test_empty_corpus_file(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("\n", encoding="utf-8")
    with pytest.raises(EmptyCorpus):
        load_corpus(path)


def test_corpus_round_trip(tmp_path, small):
    corpus, _ = small
    save_corpus(corpus, tmp_path / "c.tsv")
    assert load_corpus(tmp_path / "c.tsv") == corpus
