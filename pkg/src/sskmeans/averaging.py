"""Distributed averaging over a graph with exact rational node state.

Three interchangeable protocols compute the network mean of per-node vectors:
synchronous Metropolis consensus, randomized pairwise gossip, and an exact
spanning-tree sum. Node values are kept as integer numerators over a per-node
integer denominator, so every round is exact and the mass of the network never
drifts.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .sharing import node_stream
from .topology import Topology, TopologyError
from .transcript import TranscriptStore

Number = Union[int, Fraction]


class AveragingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SyncConsensus:
    max_rounds: int = 10_000

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")


@dataclass(frozen=True)
class RandomGossip:
    max_pairings: int = 2_000_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_pairings < 1:
            raise ValueError("max_pairings must be positive")


@dataclass(frozen=True)
class ExactTreeSum:
    pass


ProtocolChoice = Union[SyncConsensus, RandomGossip, ExactTreeSum]


def parse_protocol(name: str, budget: int | None = None, seed: int = 0) -> ProtocolChoice:
    if name in ("sync", "sync_consensus"):
        return SyncConsensus(budget) if budget else SyncConsensus()
    if name in ("gossip", "random_gossip"):
        return RandomGossip(budget, seed) if budget else RandomGossip(seed=seed)
    if name in ("tree", "exact_tree_sum"):
        return ExactTreeSum()
    raise ValueError(f"unknown averaging protocol {name!r}")


def protocol_name(choice: ProtocolChoice) -> str:
    return {SyncConsensus: "sync", RandomGossip: "gossip", ExactTreeSum: "tree"}[type(choice)]


class AveragingState:
    """Per-node value vectors ``num[i] / den[i]`` plus a round counter."""

    __slots__ = ("num", "den", "rounds")

    def __init__(self, num: np.ndarray, den: Sequence[int], rounds: int = 0):
        self.num = num
        self.den = np.array([int(d) for d in den], dtype=object)
        self.rounds = rounds

    @classmethod
    def from_values(cls, values: Sequence[Number] | Sequence[Sequence[Number]]) -> "AveragingState":
        rows = [list(v) if isinstance(v, (list, tuple, np.ndarray)) else [v] for v in values]
        width = len(rows[0]) if rows else 0
        if all(isinstance(x, (int, np.integer)) for row in rows for x in row):
            num = np.empty((len(rows), width), dtype=object)
            for i, row in enumerate(rows):
                num[i, :] = [int(x) for x in row]
            return cls(num, [1] * len(rows))
        fracs = [[Fraction(x) for x in row] for row in rows]
        dens = [math.lcm(*(f.denominator for f in row)) if row else 1 for row in fracs]
        num = np.empty((len(rows), width), dtype=object)
        for i, row in enumerate(fracs):
            for c, f in enumerate(row):
                num[i, c] = f.numerator * (dens[i] // f.denominator)
        return cls(num, dens)

    @property
    def n(self) -> int:
        return self.num.shape[0]

    @property
    def width(self) -> int:
        return self.num.shape[1]

    def copy(self) -> "AveragingState":
        return AveragingState(self.num.copy(), list(self.den), self.rounds)

    def value(self, i: int) -> tuple[Fraction, ...]:
        d = self.den[i]
        return tuple(Fraction(int(x), d) for x in self.num[i])

    def values(self) -> list[tuple[Fraction, ...]]:
        return [self.value(i) for i in range(self.n)]

    def column(self, c: int = 0) -> list[Fraction]:
        return [Fraction(int(self.num[i, c]), self.den[i]) for i in range(self.n)]

    def total(self) -> tuple[Fraction, ...]:
        """Exact column sums."""
        dens = [int(x) for x in self.den]
        d = math.lcm(*dens) if dens else 1
        scale = np.array([d // x for x in dens], dtype=object)
        return tuple(Fraction(int(s), d) for s in (self.num * scale[:, None]).sum(axis=0))

    def spread(self, c: int = 0) -> Fraction:
        col = self.column(c)
        return max(col) - min(col)

    def common_denominator(self) -> "AveragingState":
        d = math.lcm(*(int(x) for x in self.den)) if self.n else 1
        scale = np.array([d // int(x) for x in self.den], dtype=object)
        return AveragingState(self.num * scale[:, None], [d] * self.n, self.rounds)


@dataclass(frozen=True)
class ConsensusWeights:
    """Metropolis weights, also held as integers over a common denominator."""

    self_weight: tuple[Fraction, ...]
    edge: Mapping[tuple[int, int], Fraction]
    denominator: int
    # integer form: directed edges grouped by receiving node (CSR layout)
    self_int: np.ndarray
    src: np.ndarray
    edge_int: np.ndarray
    indptr: np.ndarray
    receivers: np.ndarray

    def weight(self, i: int, j: int) -> Fraction:
        if i == j:
            return self.self_weight[i]
        return self.edge.get((i, j), Fraction(0))


def metropolis_weights(g: Topology) -> ConsensusWeights:
    """``W_ij = 1 / (1 + max(deg_i, deg_j))`` on edges, self-weight takes the remainder."""
    if not g.is_connected():
        raise TopologyError("consensus weights need a connected graph")
    edge: dict[tuple[int, int], Fraction] = {}
    for i, j in g.sorted_edges():
        w = Fraction(1, 1 + max(g.degree(i), g.degree(j)))
        edge[(i, j)] = edge[(j, i)] = w
    self_weight = tuple(
        1 - sum((edge[(i, j)] for j in g.neighbors(i)), Fraction(0)) for i in range(g.n)
    )
    denom = math.lcm(*(w.denominator for w in (*edge.values(), *self_weight))) if g.n else 1
    src, wts, indptr, receivers = [], [], [], []
    for i in range(g.n):
        nbrs = sorted(g.neighbors(i))
        if nbrs:
            receivers.append(i)
            indptr.append(len(src))
        for j in nbrs:
            src.append(j)
            wts.append(int(edge[(i, j)] * denom))
    self_int = np.array([[int(w * denom)] for w in self_weight], dtype=object).reshape(g.n, 1)
    return ConsensusWeights(
        self_weight, edge, denom, self_int,
        np.array(src, dtype=np.intp),
        np.array(wts, dtype=object).reshape(-1, 1),
        np.array(indptr, dtype=np.intp),
        np.array(receivers, dtype=np.intp),
    )


def _sync_step(state: AveragingState, weights: ConsensusWeights) -> AveragingState:
    if len(set(state.den)) > 1:
        state = state.common_denominator()
    num = state.num
    acc = num * weights.self_int
    if weights.src.size:
        incoming = num[weights.src] * weights.edge_int
        acc[weights.receivers] += np.add.reduceat(incoming, weights.indptr, axis=0)
    den = int(state.den[0]) * weights.denominator if state.n else 1
    return AveragingState(acc, [den] * state.n, state.rounds + 1)


def sync_round(state: AveragingState, weights: ConsensusWeights) -> AveragingState:
    """One synchronous consensus step: ``v_i <- W_ii v_i + sum_j W_ij v_j``."""
    return _sync_step(state, weights)


def _gossip_pair(state: AveragingState, i: int, j: int) -> None:
    di, dj = int(state.den[i]), int(state.den[j])
    d = math.lcm(di, dj)
    merged = state.num[i] * (d // di) + state.num[j] * (d // dj)
    state.num[i] = merged
    state.num[j] = merged.copy()
    state.den[i] = state.den[j] = 2 * d
    state.rounds += 1


def gossip_round(state: AveragingState, g: Topology, rng) -> AveragingState:
    """Average the two endpoints of one uniformly drawn edge."""
    edges = g.sorted_edges()
    if not edges:
        raise TopologyError("gossip needs at least one edge")
    i, j = edges[rng.randrange(len(edges))]
    out = state.copy()
    _gossip_pair(out, i, j)
    return out


def _spanning_tree(g: Topology) -> tuple[list[int], dict[int, int]]:
    order, parent = [0], {0: -1}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in sorted(g.neighbors(u)):
            if v not in parent:
                parent[v] = u
                order.append(v)
                queue.append(v)
    if len(order) != g.n:
        raise TopologyError("tree aggregation needs a connected graph")
    return order, parent


def tree_sum(
    g: Topology,
    values: Sequence[Number] | Sequence[Sequence[Number]],
    *,
    on_message=None,
) -> tuple[Fraction, ...] | Fraction:
    """Exact network mean via convergecast to node 0 and broadcast back.

    Scalar inputs give a scalar mean; vector inputs give a tuple.
    ``on_message(sender, receiver, payload)`` sees every message sent.
    """
    if g.n == 0:
        raise TopologyError("empty graph")
    scalar = not isinstance(values[0], (list, tuple, np.ndarray))
    rows = [[Fraction(v)] if scalar else [Fraction(x) for x in v] for v in values]
    order, parent = _spanning_tree(g)
    partial = {i: list(rows[i]) for i in range(g.n)}
    for v in reversed(order[1:]):
        up = parent[v]
        if on_message:
            on_message(v, up, partial[v])
        partial[up] = [a + b for a, b in zip(partial[up], partial[v])]
    mean = tuple(s / g.n for s in partial[0])
    if on_message:
        for v in order[1:]:
            on_message(parent[v], v, list(mean))
    return mean[0] if scalar else mean


@dataclass
class AveragingOutcome:
    state: AveragingState
    rounds: int
    converged: bool

    @property
    def s_bar(self) -> list[tuple[Fraction, ...]]:
        return self.state.values()


def _exact_sum(state: AveragingState) -> list[Fraction]:
    return list(state.total())


def is_converged(state: AveragingState, true_sum: Sequence[Number]) -> bool:
    """Every node within 1/2 of the true sum once multiplied by n."""
    n = state.n
    s = [Fraction(x) for x in true_sum]
    # |num/den * n - S| < 1/2  <=>  |2 (num * n * S.den - S.num * den)| < den * S.den
    for c, target in enumerate(s):
        col = state.num[:, c] * (n * target.denominator) - state.den * target.numerator
        bound = state.den * target.denominator
        if not all(2 * abs(int(x)) < int(b) for x, b in zip(col, bound)):
            return False
    return True


def _trace(transcript: TranscriptStore | None, iteration: int):
    if transcript is None:
        return None

    def log(rnd: int, sender: int, receiver: int, num, den) -> None:
        transcript.record(
            receiver, "avg", iteration, round=rnd, peer=sender,
            num=[int(x) for x in num], den=int(den),
        )
    return log


def run_protocol(
    g: Topology,
    values: Sequence[Number] | Sequence[Sequence[Number]] | AveragingState,
    choice: ProtocolChoice,
    *,
    weights: ConsensusWeights | None = None,
    transcript: TranscriptStore | None = None,
    iteration: int = 0,
) -> AveragingOutcome:
    """Run one averaging protocol to its budget or to certified convergence.

    Convergence is judged against the exact initial sum, which nodes cannot
    see; iterative protocols stop as soon as it is certified.
    """
    if not g.is_connected():
        raise TopologyError("averaging needs a connected graph")
    state = values.copy() if isinstance(values, AveragingState) else AveragingState.from_values(values)
    true_sum = _exact_sum(state)
    log = _trace(transcript, iteration)

    if isinstance(choice, ExactTreeSum):
        rows = state.values()

        def on_message(sender, receiver, payload):
            if log:
                fr = [Fraction(x) for x in payload]
                d = math.lcm(*(f.denominator for f in fr))
                log(1, sender, receiver, [f.numerator * (d // f.denominator) for f in fr], d)

        mean = tree_sum(g, [list(r) for r in rows], on_message=on_message)
        final = AveragingState.from_values([list(mean)] * g.n)
        final.rounds = 1
        return AveragingOutcome(final, 1, True)

    if isinstance(choice, SyncConsensus):
        w = weights if weights is not None else metropolis_weights(g)
        converged = is_converged(state, true_sum)
        while not converged and state.rounds < choice.max_rounds:
            if log:
                for i in range(g.n):
                    for j in g.neighbors(i):
                        log(state.rounds + 1, j, i, state.num[j], state.den[j])
            state = _sync_step(state, w)
            converged = is_converged(state, true_sum)
        return AveragingOutcome(state, state.rounds, converged)

    if isinstance(choice, RandomGossip):
        edges = g.sorted_edges()
        if not edges:
            if g.n == 1:
                return AveragingOutcome(state, 0, True)
            raise TopologyError("gossip needs at least one edge")
        rng = node_stream(choice.seed, "gossip", iteration)
        check_every = max(1, g.n)
        converged = is_converged(state, true_sum)
        while not converged and state.rounds < choice.max_pairings:
            for _ in range(min(check_every, choice.max_pairings - state.rounds)):
                i, j = edges[rng.randrange(len(edges))]
                if log:
                    log(state.rounds + 1, j, i, state.num[j], state.den[j])
                    log(state.rounds + 1, i, j, state.num[i], state.den[i])
                _gossip_pair(state, i, j)
            converged = is_converged(state, true_sum)
        return AveragingOutcome(state, state.rounds, converged)

    raise TypeError(f"unknown protocol choice {choice!r}")
