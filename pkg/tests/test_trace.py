import pytest
from hypothesis import given, strategies as st

from agentrag.env.corpus import Document
from agentrag.errors import AlreadyResolved, EmptyQuestion, MissingContext, TooManySubQueries, UnknownNode, UnknownParent
from agentrag.trace import (
    DecomposeMode,
    ExecutionTrace,
    GlobalState,
    Role,
    RoundContext,
    TraceNode,
    build_observation,
    new_state,
)

CASE1_Q = "Something's Gotta Give was first performed by an actor of what heritage?"
SUB1 = "Who is the actor that first performed Something's Gotta Give?"
SUB2 = "What is the heritage of this actor?"


def case1_state():
    state = new_state(CASE1_Q)
    state.append_children(0, [SUB1, SUB2], DecomposeMode.SERIAL)
    state.resolve_node(1, "Fred Astaire")
    state.resolve_node(2, "American")
    return state


def test_new_state_single_unsolved_root():
    state = new_state("when did canada become fully independent from britain?")
    assert len(state.trace) == 1
    assert state.round == 0
    assert state.first_unsolved_node().node_id == 0


def test_minimal_question():
    state = new_state("x")
    assert [n.sub_query for n in state.trace] == ["x"]
    assert state.round == 0


@pytest.mark.parametrize("q", ["", "   "])
def test_blank_question_rejected(q):
    with pytest.raises(EmptyQuestion):
        new_state(q)


def test_first_unsolved_examples():
    state = GlobalState("q0", ExecutionTrace([TraceNode(0, "q0")]))
    assert state.first_unsolved_node().node_id == 0

    state = GlobalState("q0", ExecutionTrace([TraceNode(0, "q0", "a"), TraceNode(1, "q1"), TraceNode(2, "q2")]))
    assert state.first_unsolved_node().node_id == 1

    state = GlobalState("q0", ExecutionTrace([TraceNode(0, "q0", "a"), TraceNode(1, "q1", "b")]))
    assert state.first_unsolved_node() is None


def test_append_children_case1():
    state = new_state(CASE1_Q)
    state.append_children(0, [SUB1, SUB2])
    assert len(state.trace) == 3
    assert [n.node_id for n in state.trace if n.pending] == [1, 2]
    assert all(n.depth == 1 and n.parent_id == 0 for n in list(state.trace)[1:])
    # the decomposed parent is no longer a planning target
    assert state.first_unsolved_node().node_id == 1


def test_append_children_limits():
    state = new_state("q")
    with pytest.raises(TooManySubQueries):
        state.append_children(0, ["a", "b", "c", "d", "e"])
    assert len(state.trace) == 1
    state.append_children(0, ["a"])
    assert len(state.trace) == 2


def test_append_children_unknown_parent():
    with pytest.raises(UnknownParent):
        new_state("q").append_children(5, ["a"])


def test_resolve_node_write_once():
    state = new_state(CASE1_Q).append_children(0, [SUB1, SUB2])
    state.resolve_node(1, "Fred Astaire")
    assert state.trace.get(1).answer == "Fred Astaire"
    with pytest.raises(AlreadyResolved):
        state.resolve_node(1, "Ginger Rogers")
    state.resolve_node(2, "American")
    assert state.trace.get(2).answer == "American"
    with pytest.raises(UnknownNode):
        state.resolve_node(9, "x")


def test_as_observation_holds_origin_and_sub_answers():
    state = case1_state()
    obs = build_observation(state, RoundContext(), state.trace.root, Role.AS)
    assert obs.target_query == CASE1_Q
    assert obs.global_selection == ((SUB1, "Fred Astaire"), (SUB2, "American"))
    assert obs.mode is DecomposeMode.SERIAL


def test_ds_without_retrieval_is_missing_context():
    state = new_state("q")
    with pytest.raises(MissingContext):
        build_observation(state, RoundContext(), state.trace.root, Role.DS)


def test_qr_sees_earlier_serial_sibling():
    state = new_state(CASE1_Q).append_children(0, [SUB1, SUB2])
    state.resolve_node(1, "Fred Astaire")
    obs = build_observation(state, RoundContext(), state.trace.get(2), Role.QR)
    assert (SUB1, "Fred Astaire") in obs.global_selection


def test_qr_parallel_siblings_are_independent():
    state = new_state("q").append_children(0, ["a?", "b?"], DecomposeMode.PARALLEL)
    state.resolve_node(1, "A")
    obs = build_observation(state, RoundContext(), state.trace.get(2), Role.QR)
    assert obs.global_selection == ()


def test_ag_prefers_selected_documents_and_rewrite():
    state = new_state("q")
    ctx = RoundContext()
    docs = (Document(0, "a"), Document(1, "b"))
    ctx.append(Role.QR, "rewritten q")
    ctx.append(Role.RA, docs)
    ctx.append(Role.DS, docs[1:])
    obs = build_observation(state, ctx, state.trace.root, Role.AG)
    assert obs.documents == docs[1:]
    assert obs.effective_query == "rewritten q"
    assert obs.target_query == "q"


def test_planner_observation_is_query_only():
    state = case1_state()
    obs = build_observation(state, RoundContext(), state.trace.get(2), Role.PLANNER)
    assert obs.local_context == () and obs.global_selection == ()
    assert obs.depth == 1


queries = st.text(alphabet=st.characters(min_codepoint=33, max_codepoint=126), min_size=1, max_size=12)


@given(st.lists(st.lists(queries, min_size=1, max_size=4), min_size=1, max_size=5))
def test_ids_increase_and_depth_follows_parent(batches):
    state = new_state("root question")
    for subs in batches:
        target = state.first_unsolved_node()
        if target is None:
            break
        state.append_children(target.node_id, subs)
        # answer the first child so the next batch attaches elsewhere
        state.resolve_node(state.first_unsolved_node().node_id, "ans")
    ids = [n.node_id for n in state.trace]
    assert ids == sorted(ids) and len(set(ids)) == len(ids)
    for node in state.trace:
        if node.parent_id is not None:
            assert node.depth == state.trace.get(node.parent_id).depth + 1


@given(st.lists(st.booleans(), min_size=1, max_size=8))
def test_first_unsolved_matches_linear_scan(answered):
    nodes = [TraceNode(i, f"q{i}", "a" if done else None) for i, done in enumerate(answered)]
    state = GlobalState("q0", ExecutionTrace(nodes))
    expected = next((i for i, done in enumerate(answered) if not done), None)
    got = state.first_unsolved_node()
    assert (got.node_id if got else None) == expected
