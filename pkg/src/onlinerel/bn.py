"""Binary Bayesian networks compiled from fault trees, with exact inference.

Two independent inference routes are provided:

* :func:`enumerate_probability` sums the full joint over every root
  assignment. It is exponential in the number of roots and serves as the
  oracle.
* :func:`eliminate_probability` runs variable elimination over explicit
  factors with a greedy min-fill order.

Both condition only on root (basic event) nodes.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ftree import FaultTree, natural_key, require_valid

__all__ = [
    "Node",
    "BayesNet",
    "QueryResult",
    "InferenceError",
    "ContradictoryEvidence",
    "TooManyRoots",
    "compile_to_bn",
    "enumerate_probability",
    "eliminate_probability",
    "min_fill_order",
    "total_probability_check",
]

MAX_ENUMERATION_ROOTS = 24
MAX_PARTITION_ROOTS = 12


class InferenceError(ValueError):
    pass


class ContradictoryEvidence(InferenceError):
    """The evidence has probability zero under the model."""


class TooManyRoots(InferenceError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    kind: str  # "ROOT" | "AND" | "OR"
    prior: float = 0.0
    parents: tuple[str, ...] = ()

    @property
    def is_root(self) -> bool:
        return self.kind == "ROOT"

    def cpt(self) -> np.ndarray:
        """Conditional table indexed ``[parent_1, ..., parent_k, self]``."""
        if self.is_root:
            return np.array([1.0 - self.prior, self.prior])
        k = len(self.parents)
        table = np.zeros((2,) * (k + 1))
        for states in itertools.product((0, 1), repeat=k):
            value = all(states) if self.kind == "AND" else any(states)
            table[states + (int(value),)] = 1.0
        return table


@dataclass(frozen=True)
class BayesNet:
    nodes: tuple[Node, ...]  # topological: parents before children
    top: str

    def __post_init__(self):
        object.__setattr__(self, "_index", {n.id: n for n in self.nodes})

    def node(self, node_id: str) -> Node:
        return self._index[node_id]  # type: ignore[attr-defined]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._index  # type: ignore[attr-defined]

    @property
    def roots(self) -> list[Node]:
        return [n for n in self.nodes if n.is_root]

    def ancestors(self, node_id: str) -> set[str]:
        seen = {node_id}
        stack = [node_id]
        while stack:
            for p in self.node(stack.pop()).parents:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen


@dataclass(frozen=True)
class QueryResult:
    probability: float
    method: str  # "enumeration" | "elimination"
    elapsed: float  # seconds


def compile_to_bn(ft: FaultTree) -> BayesNet:
    """One root node per basic event, one deterministic node per gate."""
    require_valid(ft)
    nodes = [Node(eid, "ROOT", float(ft.events[eid].prior)) for eid in sorted(ft.events, key=natural_key)]
    for g in ft.topological_gates():
        # AND(a, a) == a and OR(a, a) == a, so repeated inputs collapse.
        nodes.append(Node(g.id, g.kind, parents=tuple(dict.fromkeys(g.inputs))))
    return BayesNet(tuple(nodes), ft.top)


def _check_evidence(bn: BayesNet, evidence: Mapping[str, bool]) -> dict[str, int]:
    ev = {}
    for nid, value in evidence.items():
        if nid not in bn:
            raise InferenceError(f"evidence target {nid!r} is not in the network")
        if not bn.node(nid).is_root:
            raise InferenceError(f"evidence target {nid!r} is not a root node")
        ev[nid] = int(bool(value))
    return ev


# --------------------------------------------------------------------------
# enumeration oracle


def enumerate_probability(bn: BayesNet, evidence: Mapping[str, bool] | None = None) -> QueryResult:
    """P(top=True | evidence) by summing the joint over all root assignments."""
    start = time.perf_counter()
    ev = _check_evidence(bn, evidence or {})
    roots = bn.roots
    n = len(roots)
    if n > MAX_ENUMERATION_ROOTS:
        raise TooManyRoots(f"{n} roots exceeds enumeration limit of {MAX_ENUMERATION_ROOTS}")

    # Bit i of code r is the state of root i, so codes cover every joint root state once.
    codes = np.arange(2**n, dtype=np.int64)
    values: dict[str, np.ndarray] = {}
    weight = np.ones(2**n)
    consistent = np.ones(2**n, dtype=bool)
    for i, node in enumerate(roots):
        x = ((codes >> i) & 1).astype(bool)
        values[node.id] = x
        weight *= np.where(x, node.prior, 1.0 - node.prior)
        if node.id in ev:
            consistent &= x == bool(ev[node.id])
    for node in bn.nodes:
        if node.is_root:
            continue
        parents = [values[p] for p in node.parents]
        values[node.id] = np.logical_and.reduce(parents) if node.kind == "AND" else np.logical_or.reduce(parents)

    p_evidence = float(weight[consistent].sum())
    if p_evidence == 0.0:
        raise ContradictoryEvidence("evidence has zero probability")
    p_joint = float(weight[consistent & values[bn.top]].sum())
    return QueryResult(p_joint / p_evidence, "enumeration", time.perf_counter() - start)


# --------------------------------------------------------------------------
# variable elimination


class Factor:
    """Table over binary variables, one axis per variable in ``scope``."""

    __slots__ = ("scope", "table")

    def __init__(self, scope: Sequence[str], table: np.ndarray):
        self.scope = tuple(scope)
        self.table = np.asarray(table, dtype=float)
        assert self.table.shape == (2,) * len(self.scope)

    def __mul__(self, other: "Factor") -> "Factor":
        scope = list(self.scope) + [v for v in other.scope if v not in self.scope]
        axis = {v: i for i, v in enumerate(scope)}
        table = np.einsum(
            self.table, [axis[v] for v in self.scope],
            other.table, [axis[v] for v in other.scope],
            list(range(len(scope))),
        )
        return Factor(scope, table)

    def sum_out(self, var: str) -> "Factor":
        i = self.scope.index(var)
        return Factor(self.scope[:i] + self.scope[i + 1:], self.table.sum(axis=i))


def min_fill_order(scopes: Sequence[Sequence[str]], keep: Sequence[str] = ()) -> list[str]:
    """Greedy min-fill elimination order over the interaction graph of ``scopes``.

    Ties are broken by lexicographic id. Variables in ``keep`` are not
    eliminated.
    """
    adj: dict[str, set[str]] = {}
    for scope in scopes:
        for v in scope:
            adj.setdefault(v, set()).update(u for u in scope if u != v)
    for v in keep:
        adj.pop(v, None)
    for v in adj:
        adj[v] -= set(keep)

    order = []
    while adj:
        best, best_key = None, None
        for v in adj:
            nbrs = sorted(adj[v])
            fill = sum(
                1 for a, b in itertools.combinations(nbrs, 2) if b not in adj[a]
            )
            key = (fill, v)
            if best_key is None or key < best_key:
                best, best_key = v, key
        nbrs = adj.pop(best)
        for a in nbrs:
            adj[a] |= nbrs - {a}
            adj[a].discard(best)
        order.append(best)
    return order


MAX_FACTOR_ARITY = 4


def _gate_factors(node: Node) -> list[Factor]:
    """Deterministic factors for a gate.

    Gates wider than MAX_FACTOR_ARITY inputs are split into a chain of
    narrower gates of the same kind joined by auxiliary variables, which
    keeps every table small. ``#`` cannot occur in model ids, so auxiliary
    names never collide.
    """
    parents = list(node.parents)
    if len(parents) <= MAX_FACTOR_ARITY:
        return [Factor(node.parents + (node.id,), node.cpt())]
    factors = []
    i = 0
    while len(parents) > MAX_FACTOR_ARITY:
        aux = f"{node.id}#{i}"
        chunk, parents = parents[:MAX_FACTOR_ARITY], [aux] + parents[MAX_FACTOR_ARITY:]
        part = Node(aux, node.kind, parents=tuple(chunk))
        factors.append(Factor(part.parents + (aux,), part.cpt()))
        i += 1
    last = Node(node.id, node.kind, parents=tuple(parents))
    factors.append(Factor(last.parents + (node.id,), last.cpt()))
    return factors


def eliminate_probability(bn: BayesNet, evidence: Mapping[str, bool] | None = None) -> QueryResult:
    """P(top=True | evidence) by variable elimination.

    Hard evidence on a root replaces its prior factor with an indicator.
    Roots are marginally independent, so the product of factors is already
    the conditional joint and no normalization step is needed.
    """
    start = time.perf_counter()
    ev = _check_evidence(bn, evidence or {})
    for nid, value in ev.items():
        p = bn.node(nid).prior
        if (p if value else 1.0 - p) == 0.0:
            raise ContradictoryEvidence(f"evidence {nid}={bool(value)} has zero prior probability")

    relevant = bn.ancestors(bn.top)
    factors: list[Factor] = []
    for node in bn.nodes:
        if node.id not in relevant:
            continue
        if node.is_root:
            if node.id in ev:
                table = np.zeros(2)
                table[ev[node.id]] = 1.0
            else:
                table = node.cpt()
            factors.append(Factor((node.id,), table))
        else:
            factors.extend(_gate_factors(node))

    for var in min_fill_order([f.scope for f in factors], keep=(bn.top,)):
        touching = [f for f in factors if var in f.scope]
        factors = [f for f in factors if var not in f.scope]
        product = touching[0]
        for f in touching[1:]:
            product = product * f
        factors.append(product.sum_out(var))

    result = factors[0]
    for f in factors[1:]:
        result = result * f
    marginal = result.table
    if result.scope != (bn.top,):
        raise AssertionError(f"unexpected residual scope {result.scope}")
    return QueryResult(float(marginal[1]), "elimination", time.perf_counter() - start)


def probability(bn: BayesNet, evidence: Mapping[str, bool] | None = None) -> float:
    return eliminate_probability(bn, evidence).probability


def total_probability_check(bn: BayesNet, partition_roots: Sequence[str]) -> float:
    """|P(top) - sum_s P(s) P(top | s)| over all joint states of ``partition_roots``."""
    roots = list(dict.fromkeys(partition_roots))
    for r in roots:
        if r not in bn or not bn.node(r).is_root:
            raise InferenceError(f"{r!r} is not a root node")
    if len(roots) > MAX_PARTITION_ROOTS:
        raise InferenceError(f"at most {MAX_PARTITION_ROOTS} partition roots allowed")

    total = probability(bn)
    mixture = 0.0
    for states in itertools.product((False, True), repeat=len(roots)):
        weight = 1.0
        for r, s in zip(roots, states):
            p = bn.node(r).prior
            weight *= p if s else 1.0 - p
        if weight == 0.0:
            continue
        mixture += weight * probability(bn, dict(zip(roots, states)))
    return abs(total - mixture)
