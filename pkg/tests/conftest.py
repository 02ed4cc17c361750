import json
from importlib import resources

import pytest

from agentrag.engine import REQUIRED_ROLES
from agentrag.env.corpus import Corpus, Document
from agentrag.policy.backends import ReplayBackend

_ACCEPTANCE: list[tuple[str, str]] = []


def load_case(name):
    text = resources.files("agentrag.fixtures").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def case_setup(name):
    """(question, gold, corpus, backends) for a bundled replay fixture."""
    data = load_case(name)
    corpus = Corpus(Document(d["doc_id"], d["text"]) for d in data["corpus"])
    replay = ReplayBackend(data["script"])
    return data["question"], data["gold_answer"], corpus, {role: replay for role in REQUIRED_ROLES}


@pytest.fixture
def case1():
    return case_setup("case1")


@pytest.fixture
def case2():
    return case_setup("case2")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): top-level acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    name = dict(report.user_properties).get("criterion")
    if name:
        _ACCEPTANCE.append((name, "PASS" if report.passed else "FAIL"))


def pytest_runtest_setup(item):
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _ACCEPTANCE:
        terminalreporter.write_line(f"{status}  {name}")
