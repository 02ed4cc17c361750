"""Command-line entry point: infer, train, sweep, evaluate, generate, config.

Exit codes: 0 success, 1 run failure (including any failed sweep point),
2 configuration or input error, 3 backend failure.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import itertools
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, apply, dump_config, load_config
from .engine import Engine, emit_trajectory
from .env.corpus import Corpus, Document, load_corpus, save_corpus
from .env.world import STANDARD_COUNTS, World, generate_tasks, load_tasks, save_tasks, split_by_class
from .errors import AgentRagError, BackendUnavailable, ConfigurationError, CorpusParseError, InvalidParams, WeightsFormatError
from .policy.backends import LLM_ROLES, OracleBackend, RemoteBackend, ReplayBackend, ToyPlannerBackend
from .policy.toy import ToyPlannerPolicy
from .reward import assign_step_rewards
from .rl.metrics import metrics_csv
from .rl.trainer import Setup, evaluate, train
from .trace import Role
from .weights import load_weights, save_weights

log = logging.getLogger("agentrag")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_BACKEND = 0, 1, 2, 3
_CONFIG_ERRORS = (ConfigurationError, InvalidParams, CorpusParseError, WeightsFormatError, FileNotFoundError)



# -- configuration assembly -------------------------------------------------

def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config, args.set or ())
    flags: dict = {}
    if getattr(args, "seed", None) is not None:
        flags["seed"] = args.seed
    for flag, section, key in (
        ("alpha", "reward", "alpha"),
        ("beta", "reward", "beta"),
        ("lr", "rl", "lr"),
        ("jobs", "train", "jobs"),
        ("iterations", "train", "iterations"),
        ("corpus", "env", "corpus"),
        ("tasks", "env", "tasks"),
        ("backend", "backend", "kind"),
        ("endpoint_url", "backend", "endpoint_url"),
        ("script", "backend", "script"),
        ("weights", "backend", "weights"),
        ("entities", "env", "entities"),
        ("distractors", "env", "distractors"),
    ):
        value = getattr(args, flag, None)
        if flag == "backend" and value == "scripted":
            value = "replay"
        if value is not None:
            flags.setdefault(section, {})[key] = value
    return apply(cfg, flags).validate()


def _read_corpus(path: str) -> Corpus:
    if not Path(path).is_file():
        raise ConfigurationError(f"corpus file not found: {path}")
    return load_corpus(path)


def _setup(cfg: RunConfig) -> Setup:
    env = cfg.env
    if bool(env.corpus) != bool(env.tasks):
        raise ConfigurationError("--corpus and --tasks must be given together for training")
    if env.corpus:
        corpus = _read_corpus(env.corpus)
        if not Path(env.tasks).is_file():
            raise ConfigurationError(f"task file not found: {env.tasks}")
        tasks = load_tasks(env.tasks)
    else:
        corpus, tasks = generate_tasks(cfg.seed, STANDARD_COUNTS, cfg.corpus_params())
    train_tasks, held_out = split_by_class(tasks, env.train_per_class)
    if not train_tasks:
        raise ConfigurationError("no training tasks")
    return Setup(
        corpus, train_tasks, held_out,
        cfg.engine_limits(), cfg.reward_config(), cfg.advantage_config(), cfg.ppo_config(),
    )


def _load_fixture(ref: str) -> dict:
    """A replay script: a JSON file path, or the name of a bundled case fixture."""
    path = Path(ref)
    try:
        if path.is_file():
            text = path.read_text(encoding="utf-8")
        else:
            text = resources.files("agentrag.fixtures").joinpath(f"{ref}.json").read_text(encoding="utf-8")
    except (FileNotFoundError, OSError):
        raise ConfigurationError(f"replay script not found: {ref}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"replay script {ref} is not valid JSON: {exc}") from None
    if isinstance(data, list):
        data = {"script": data}
    if not isinstance(data, dict) or "script" not in data:
        raise ConfigurationError(f"replay script {ref} has no 'script' entries")
    return data


def _planner_policy(cfg: RunConfig) -> ToyPlannerPolicy:
    if cfg.backend.weights:
        if not Path(cfg.backend.weights).is_file():
            raise ConfigurationError(f"weights file not found: {cfg.backend.weights}")
        return load_weights(cfg.backend.weights)[0]
    return ToyPlannerPolicy()


# -- commands -----------------------------------------------------------------

def cmd_infer(args) -> int:
    cfg = _effective_config(args)
    kind = cfg.backend.kind
    question = args.question or args.question_flag
    gold = args.gold
    fixture = None
    if kind == "replay":
        if not cfg.backend.script:
            raise ConfigurationError("--backend replay needs --script")
        fixture = _load_fixture(cfg.backend.script)
        question = question or fixture.get("question")
        gold = gold or fixture.get("gold_answer")

    if cfg.env.corpus:
        corpus = _read_corpus(cfg.env.corpus)
    elif fixture and fixture.get("corpus"):
        corpus = Corpus(Document(int(d["doc_id"]), d["text"]) for d in fixture["corpus"])
    elif kind in ("oracle", "toy"):
        corpus, _ = generate_tasks(cfg.seed, STANDARD_COUNTS, cfg.corpus_params())
    else:
        raise ConfigurationError("--corpus is required for this backend")
    if not question:
        raise ConfigurationError("no question given")

    if kind == "replay":
        replay = ReplayBackend(fixture["script"])
        backends = {role: replay for role in LLM_ROLES}
    elif kind == "remote":
        if not cfg.backend.endpoint_url:
            raise ConfigurationError("--backend remote needs --endpoint-url")
        remote = RemoteBackend(
            cfg.backend.endpoint_url,
            model=cfg.backend.model,
            temperature=cfg.backend.temperature,
            max_tokens=cfg.backend.max_tokens,
            timeout=cfg.backend.timeout,
        )
        backends = {role: remote for role in LLM_ROLES}
    else:
        executors = OracleBackend(World.from_corpus(corpus), cfg.oracle_config())
        backends = {role: executors for role in LLM_ROLES}
        backends[Role.PLANNER] = ToyPlannerBackend(_planner_policy(cfg), greedy=True)

    engine = Engine(backends, corpus, cfg.engine_limits())
    result = engine.run(question, np.random.default_rng(cfg.seed), query_id=args.query_id)
    rewards = f1 = r_global = None
    if gold is not None:
        breakdown = assign_step_rewards(result, gold, cfg.reward_config())
        rewards, f1, r_global = breakdown.per_step, breakdown.r_perf, breakdown.r_global
    if args.trace:
        lines = emit_trajectory(result, rewards, None, f1, r_global)
        Path(args.trace).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(result.final_answer)
    if f1 is not None:
        print(f"f1={f1:.4f} rounds={result.rounds_used} retrievals={result.retrievals_used}", file=sys.stderr)
    return EXIT_OK


def _summary_table(rows: Sequence[dict], keys=("step", "f1", "mean_rounds", "mean_retrievals", "ds_ratio", "gold_rate")) -> str:
    header = " ".join(f"{k:>15}" for k in keys)
    lines = [header]
    for row in rows:
        cells = []
        for k in keys:
            v = row.get(k, "")
            cells.append(f"{v:>15.4f}" if isinstance(v, float) else f"{v!s:>15}")
        lines.append(" ".join(cells))
    return "\n".join(lines)


def _default_out(args, name: str) -> Path:
    return Path(getattr(args, "out_dir", None) or ".") / name


def cmd_train(args) -> int:
    cfg = _effective_config(args)
    setup = _setup(cfg)
    policy = None
    value = None
    if cfg.backend.weights:
        if not Path(cfg.backend.weights).is_file():
            raise ConfigurationError(f"weights file not found: {cfg.backend.weights}")
        policy, value = load_weights(cfg.backend.weights)
    started = time.perf_counter()
    report = train(setup, cfg.train_config(), policy, value)
    elapsed = time.perf_counter() - started
    metrics_path = Path(args.metrics_out) if args.metrics_out else _default_out(args, "metrics.csv")
    weights_path = Path(args.weights_out) if args.weights_out else _default_out(args, "weights.bin")
    metrics_path.write_text(metrics_csv(report.rows), encoding="utf-8")
    save_weights(weights_path, report.policy, report.value)
    print(_summary_table(report.rows))
    print(f"updates={report.updates} elapsed={elapsed:.1f}s metrics={metrics_path} weights={weights_path}")
    return EXIT_OK


def _grid(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"--{name} must be a comma-separated list of numbers") from None


def cmd_sweep(args) -> int:
    alphas, betas = _grid(args.alphas, "alphas"), _grid(args.betas, "betas")
    points = list(itertools.product(alphas, betas))
    if not points:
        raise ConfigurationError("empty sweep grid")
    base = _effective_config(args)
    setup = _setup(base)
    rows, failures, summary = [], [], []
    for alpha, beta in points:
        try:
            cfg = copy.deepcopy(base)
            cfg.reward.alpha, cfg.reward.beta = alpha, beta
            cfg.validate()
            report = train(dataclasses.replace(setup, reward=cfg.reward_config()), cfg.train_config())
        except AgentRagError as exc:
            failures.append((alpha, beta))
            print(f"point alpha={alpha:g} beta={beta:g} failed: {exc}", file=sys.stderr)
            continue
        rows.extend({"alpha": alpha, "beta": beta, **row} for row in report.rows)
        summary.append({"alpha": alpha, "beta": beta, **report.rows[-1]})
    out = Path(args.metrics_out) if args.metrics_out else _default_out(args, "sweep.csv")
    out.write_text(metrics_csv(rows, extra_columns=("alpha", "beta")), encoding="utf-8")
    if summary:
        print(_summary_table(summary, ("alpha", "beta", "step", "f1", "mean_rounds", "ds_ratio", "gold_rate")))
    print(f"points={len(points)} failed={len(failures)} metrics={out}")
    return EXIT_FAILED if failures else EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _effective_config(args)
    setup = _setup(cfg)
    policy = _planner_policy(cfg)
    tasks = setup.eval_tasks or setup.train_tasks
    metrics, rollouts = evaluate(
        policy, setup.corpus, tasks, setup.limits, setup.reward, cfg.oracle_config(), cfg.seed, cfg.train.jobs,
    )
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for ro in rollouts:
                lines = emit_trajectory(ro.result, [t.reward for t in ro.transitions], None, ro.f1, ro.r_global)
                fh.write("\n".join(lines) + "\n")
    row = metrics.row(0)
    if args.metrics_out:
        Path(args.metrics_out).write_text(metrics_csv([row]), encoding="utf-8")
    print(_summary_table([row]))
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _effective_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts = tuple(
        default if given is None else given
        for given, default in zip((args.single, args.serial, args.parallel), STANDARD_COUNTS)
    )
    corpus, tasks = generate_tasks(cfg.seed, counts, cfg.corpus_params())
    save_corpus(corpus, out / "corpus.tsv")
    save_tasks(tasks, out / "tasks.jsonl")
    print(f"wrote {len(corpus)} documents and {len(tasks)} tasks to {out}")
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = _effective_config(args)
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--corpus", help="corpus file (one 'id<TAB>text' line per document)")
    p.add_argument("--tasks", help="task file (JSON lines)")
    p.add_argument("--backend", choices=("oracle", "replay", "scripted", "remote", "toy"))
    p.add_argument("--endpoint-url", dest="endpoint_url")
    p.add_argument("--jobs", type=int, help="concurrent rollouts")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--weights", help="toy planner weights to start from / evaluate")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentrag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"agentrag {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="answer one question")
    _common(p)
    p.add_argument("question", nargs="?")
    p.add_argument("--question", dest="question_flag", help="same as the positional question")
    p.add_argument("--script", help="replay script JSON, or a bundled fixture name (case1, case2)")
    p.add_argument("--trace", help="write the trajectory as JSON lines")
    p.add_argument("--gold", help="gold answer, to score the trajectory")
    p.add_argument("--query-id", dest="query_id", default="q0")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("train", help="train the toy planner")
    _common(p)
    p.add_argument("--lr", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--metrics-out", dest="metrics_out")
    p.add_argument("--weights-out", dest="weights_out")
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train once per (alpha, beta) grid point")
    _common(p)
    p.add_argument("--alphas", default="0,0.1,0.5")
    p.add_argument("--betas", default="0")
    p.add_argument("--lr", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--metrics-out", dest="metrics_out")
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="greedy evaluation on held-out tasks")
    _common(p)
    p.add_argument("--trace")
    p.add_argument("--metrics-out", dest="metrics_out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", help="write a synthetic corpus and task file")
    _common(p)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--single", type=int, help=f"single-hop tasks (default {STANDARD_COUNTS[0]})")
    p.add_argument("--serial", type=int, help=f"serial two-hop tasks (default {STANDARD_COUNTS[1]})")
    p.add_argument("--parallel", type=int, help=f"parallel two-fact tasks (default {STANDARD_COUNTS[2]})")
    p.add_argument("--entities", type=int)
    p.add_argument("--distractors", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("config", help="print the effective configuration as YAML")
    _common(p)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches the config-error code
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except BackendUnavailable as exc:
        print(f"error: backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AgentRagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
