import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onlinerel.ftree import (
    BasicEvent,
    FaultTree,
    Gate,
    ModelError,
    canonicalize,
    check_source,
    fingerprint,
    parse_model,
    validate,
)

from conftest import random_tree

BLADE_PRIORS = {
    "BE1": 0.0830, "BE2": 0.0458, "BE3": 0.0324, "BE4": 0.0219,
    "BE5": 0.0785, "BE6": 0.0296, "BE7": 0.0193, "BE8": 0.0787,
    "BE9": 0.0196, "BE10": 0.0116, "BE11": 0.0425, "BE12": 0.0965,
    "BE13": 0.0590, "BE14": 0.0466, "BE15": 0.0294, "BE16": 0.0305,
}


def messages(exc_info):
    return [d.message for d in exc_info.value.diagnostics]


def test_minimal_model():
    ft = parse_model('event E1 "x" p=0.2\ntop E1\n')
    assert ft.top == "E1"
    assert list(ft.events) == ["E1"]
    assert ft.events["E1"] == BasicEvent("E1", "x", 0.2)
    assert not ft.gates


def test_blade_model_priors(blade):
    assert len(blade.events) == 16
    assert {e: blade.prior(e) for e in blade.events} == BLADE_PRIORS
    assert validate(blade) == []


def test_self_reference_is_cycle():
    text = 'event BE1 "a" p=0.1\nevent BE2 "b" p=0.1\ngate G1 OR G1 BE1\ngate G2 AND G1 BE2\ntop G2\n'
    with pytest.raises(ModelError) as exc:
        parse_model(text)
    cyc = [d for d in exc.value.diagnostics if "cycle" in d.message]
    assert cyc and cyc[0].id == "G1"
    assert (cyc[0].line, cyc[0].column) == (3, 6)


def test_longer_cycle():
    text = "\n".join([
        'event A "a" p=0.1', 'event B "b" p=0.1',
        "gate G1 OR G2 A", "gate G2 AND G1 B", "gate G3 OR G1 G2", "top G3",
    ])
    with pytest.raises(ModelError) as exc:
        parse_model(text)
    assert {d.id for d in exc.value.diagnostics if "cycle" in d.message} == {"G1", "G2"}


@pytest.mark.parametrize(
    "text, fragment, pos",
    [
        ('event E1 "x" p=1.5\ntop E1', "outside [0, 1]", (1, 16)),
        ('event E1 "x" p=-0.1\ntop E1', "outside [0, 1]", (1, 16)),
        ('event E1 "x" p=0.2\n', "missing top", None),
        ('event E1 "x" p=0.2\nevent E1 "y" p=0.3\ntop E1', "duplicate id", (2, 7)),
        ('event E1 "x" p=0.2\ngate G1 OR E1 E9\ntop G1', "unresolved reference 'E9'", (2, 15)),
        ('event E1 "x" p=abc\ntop E1', "expected decimal probability", (1, 16)),
        ('event E1 x p=0.2\ntop E1', "expected quoted name", (1, 10)),
        ('event E1 "x\ntop E1', "unterminated", None),
        ('evnt E1 "x" p=0.2\ntop E1', "expected 'event', 'gate' or 'top'", (1, 1)),
        ('event E1 "x" p=0.2\nevent E2 "y" p=0.2\ngate G1 XOR E1 E2\ntop G1', "AND or OR", (3, 9)),
        ('event E1 "x" p=0.2\ntop E1 E2', "trailing", None),
        ('event E1 "x" p=nan\ntop E1', "expected decimal probability", None),
    ],
)
def test_parse_errors(text, fragment, pos):
    with pytest.raises(ModelError) as exc:
        parse_model(text)
    hits = [d for d in exc.value.diagnostics if fragment in d.message]
    assert hits, messages(exc)
    if pos is not None:
        assert (hits[0].line, hits[0].column) == pos


def test_comments_blank_lines_and_escapes():
    text = '# header\n\n  event E1 "say \\"hi\\"" p=.5  # trailing\nevent E2 "b" p=1\ngate G OR E1 E2 # x\ntop G\n'
    ft = parse_model(text)
    assert ft.events["E1"].name == 'say "hi"'
    assert ft.events["E2"].prior == 1.0
    assert parse_model(canonicalize(ft)) == ft


def test_shared_namespace_rejected():
    ft = FaultTree(
        {"X": BasicEvent("X", "x", 0.1), "Y": BasicEvent("Y", "y", 0.1)},
        {"X": Gate("X", "AND", ("Y", "Y"))},
        "X",
    )
    assert any("both an event and a gate" in d.message for d in validate(ft))


def test_unary_gate_is_error():
    ft = FaultTree.build([BasicEvent("A", "a", 0.1)], [Gate("G", "OR", ("A",))], "G")
    diags = validate(ft)
    assert [d.severity for d in diags] == ["error"]
    assert "at least 2 inputs" in diags[0].message


def test_unreachable_is_warning():
    text = 'event A "a" p=0.1\nevent B "b" p=0.2\nevent C "c" p=0.3\ngate G AND A B\ntop G\n'
    ft = parse_model(text)
    diags = validate(ft)
    assert [(d.severity, d.id) for d in diags] == [("warning", "C")]
    _, diags = check_source(text)
    assert diags[0].line == 3


def test_canonical_is_order_independent(rng):
    lines = [
        'event B2 "b" p=0.25', 'event B10 "c" p=0.125', 'event A "a" p=0.5',
        "gate G2 OR G1 B10", "gate G1 AND A B2", "top G2",
    ]
    texts = set()
    for _ in range(10):
        rng.shuffle(lines)
        texts.add(canonicalize(parse_model("\n".join(lines))))
    assert len(texts) == 1
    assert texts.pop().splitlines() == [
        'event A "a" p=0.5', 'event B2 "b" p=0.25', 'event B10 "c" p=0.125',
        "gate G1 AND A B2", "gate G2 OR G1 B10", "top G2",
    ]


def test_fingerprint_stable(blade):
    digest = fingerprint(blade)
    assert digest == fingerprint(parse_model(canonicalize(blade)))
    assert len(digest) == 64 and digest == digest.lower()
    assert fingerprint(blade.with_priors({"BE1": 0.1})) != digest


def test_canonicalize_rejects_invalid():
    ft = FaultTree.build([BasicEvent("A", "a", 0.1)], [Gate("G", "OR", ("A",))], "G")
    with pytest.raises(ModelError):
        canonicalize(ft)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 16))
def test_round_trip_random_trees(seed, n):
    if n == 1:
        ft = FaultTree.build([BasicEvent("E1", "only", 0.3)], [], "E1")
    else:
        ft = random_tree(random.Random(seed), n)
    assert validate(ft) == []
    text = canonicalize(ft)
    back = parse_model(text)
    assert back == ft
    assert canonicalize(back) == text


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=400))
def test_parser_total_on_bytes(data):
    ft, diags = check_source(data)
    assert ft is not None or any(d.severity == "error" for d in diags)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from([
    "event", "gate", "top", "AND", "OR", "E1", "E2", "G1", '"n"', "p=0.5", "p=2", "#", "\n", " ", '"',
]), max_size=40))
def test_parser_total_on_token_soup(tokens):
    ft, diags = check_source(" ".join(tokens))
    assert ft is not None or diags
