import pytest
from hypothesis import given
from hypothesis import strategies as st

from planact.errors import ContractError, ParseError
from planact.plans import PlanDocument, PlanStep, parse_plan, render_plan

CUP_EXAMPLE = (
    "Task: pick up a cup on the table\n"
    "plans: grasp the handle of the cup with the gripper and lift it up\n"
    "Actions:\n"
    "1. grasp(handle of the cup, gripper)\n"
    "2. lift up(cup)"
)


class TestParse:
    def test_cup_worked_example(self):
        doc = parse_plan(CUP_EXAMPLE)
        assert doc.task == "pick up a cup on the table"
        assert doc.plan == "grasp the handle of the cup with the gripper and lift it up"
        assert [(s.index, s.verb, s.args) for s in doc.actions] == [
            (1, "grasp", ["handle of the cup", "gripper"]),
            (2, "lift up", ["cup"]),
        ]

    def test_bare_verb_action(self):
        doc = parse_plan("Task: t\nPlan: p\nActions:\n1. turn left")
        assert [(s.index, s.verb, s.args) for s in doc.actions] == [(1, "turn left", [])]

    def test_inline_actions_and_case(self):
        doc = parse_plan("task: t PLANS: walk actions: 1. grasp(handle,gripper) 2. pull(handle)")
        assert [s.verb for s in doc.actions] == ["grasp", "pull"]
        assert doc.actions[0].args == ["handle", "gripper"]

    def test_trailing_period_tolerated(self):
        doc = parse_plan("Task: t\nPlan: p\nActions:\n1. pull(handle).")
        assert doc.actions[0].args == ["handle"]

    def test_missing_actions_section(self):
        with pytest.raises(ParseError, match="Actions"):
            parse_plan("Task: t\nPlan: p")

    def test_malformed_action_line_named(self):
        with pytest.raises(ParseError, match="line 4"):
            parse_plan("Task: t\nPlan: p\nActions:\n1. ()")

    def test_nonconsecutive_indices_rejected(self):
        with pytest.raises(ParseError):
            parse_plan("Task: t\nPlan: p\nActions:\n1. go\n3. stop")

    def test_three_arguments_rejected(self):
        with pytest.raises(ParseError):
            parse_plan("Task: t\nPlan: p\nActions:\n1. put(a, b, c)")


class TestRender:
    def test_empty_action_list_rejected(self):
        with pytest.raises(ContractError):
            render_plan(PlanDocument(task="t", plan="p", actions=[]))

    def test_single_action_roundtrip(self):
        doc = PlanDocument("open a drawer", "pull the handle", [PlanStep(1, "pull", ["handle"])])
        assert parse_plan(render_plan(doc)) == doc

    def test_render_of_parse_is_normal_form(self):
        normalised = render_plan(parse_plan(CUP_EXAMPLE))
        assert parse_plan(normalised) == parse_plan(CUP_EXAMPLE)


_WORD = st.sampled_from(
    "grasp lift pull push open close cup drawer handle gripper door knife "
    "table plate shelf box move wipe stir turn".split()
)
_PHRASE = st.lists(_WORD, min_size=1, max_size=4).map(" ".join)


@st.composite
def plan_documents(draw):
    steps = [
        PlanStep(index=i + 1, verb=draw(_PHRASE), args=draw(st.lists(_PHRASE, max_size=2)))
        for i in range(draw(st.integers(1, 6)))
    ]
    return PlanDocument(task=draw(_PHRASE), plan=draw(_PHRASE), actions=steps)


class TestRoundtripProperty:
    @given(plan_documents())
    def test_parse_render_identity(self, doc):
        assert parse_plan(render_plan(doc)) == doc

    def test_hundred_random_documents(self):
        import random

        words = "grasp lift pull push open cup drawer handle gripper door".split()
        rnd = random.Random(7)
        for _ in range(100):
            steps = [
                PlanStep(
                    index=i + 1,
                    verb=" ".join(rnd.sample(words, rnd.randint(1, 2))),
                    args=[" ".join(rnd.sample(words, rnd.randint(1, 3)))
                          for _ in range(rnd.randint(0, 2))],
                )
                for i in range(rnd.randint(1, 5))
            ]
            doc = PlanDocument(
                task=" ".join(rnd.sample(words, 3)),
                plan=" ".join(rnd.sample(words, 4)),
                actions=steps,
            )
            assert parse_plan(render_plan(doc)) == doc
