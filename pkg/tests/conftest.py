import random

import pytest

from onlinerel import load_blade_model
from onlinerel.ftree import BasicEvent, FaultTree, Gate


def random_tree(rng: random.Random, n_events: int, max_arity: int = 4) -> FaultTree:
    """Random coherent AND/OR DAG over ``n_events`` events; every node reaches the top.

    Inputs may be shared between gates, so the result is generally not a tree.
    """
    events = [BasicEvent(f"E{i}", f"event {i}", rng.random()) for i in range(1, n_events + 1)]
    pool = [e.id for e in events]
    unused = list(pool)
    gates = []
    n_gates = rng.randint(1, max(1, n_events - 1))
    for i in range(1, n_gates + 1):
        k = rng.randint(2, min(max_arity, len(pool)))
        fresh = rng.sample(unused, min(len(unused), rng.randint(1, k)))
        rest = [x for x in pool if x not in fresh]
        inputs = fresh + rng.sample(rest, min(len(rest), k - len(fresh)))
        if len(inputs) < 2:
            continue
        rng.shuffle(inputs)
        gid = f"G{i}"
        gates.append(Gate(gid, rng.choice(("AND", "OR")), tuple(inputs)))
        unused = [x for x in unused if x not in inputs] + [gid]
        pool.append(gid)
    if len(unused) == 1 and unused[0].startswith("G"):
        top = unused[0]
    else:
        top = "TOP"
        if len(unused) == 1:
            unused.append(rng.choice([x for x in pool if x != unused[0]]))
        gates.append(Gate(top, rng.choice(("AND", "OR")), tuple(unused)))
    return FaultTree.build(events, gates, top)


@pytest.fixture(scope="session")
def blade():
    return load_blade_model()


@pytest.fixture
def rng():
    return random.Random(20210601)
