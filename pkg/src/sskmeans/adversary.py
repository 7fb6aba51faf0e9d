"""What a passive coalition learns from a recorded secure k-means run.

The coalition pools its own transcripts, the public log and the graph. Each
honest connected component then behaves like one party: pairwise masks inside
it cancel, and masks on edges into the coalition are known, so the coalition
recovers every component's per-cluster sums and counts in every iteration and
nothing finer. From those it can read off singleton clusters and, by
differencing iterations, the value of a lone node that switched clusters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .kmeans import split_units
from .topology import HonestPartition, Topology, connected_components
from .transcript import TranscriptError, TranscriptStore

PERFECT, BOUNDED, FULL = "perfect", "bounded", "full"


@dataclass(frozen=True)
class ComponentView:
    """Per-cluster sums (field units, k x d) and counts of one honest component."""

    sums: tuple[tuple[int, ...], ...]
    counts: tuple[int, ...]


@dataclass(frozen=True)
class CoalitionKnowledge:
    k: int
    d: int
    scale: int
    corrupted: frozenset[int]
    components: tuple[frozenset[int], ...]
    views: Mapping[int, tuple[ComponentView, ...]]  # iteration -> one view per component
    centers: Mapping[int, tuple[tuple[float, ...], ...]] = field(default_factory=dict)

    @property
    def n_h(self) -> int:
        return sum(len(c) for c in self.components)

    @property
    def iterations(self) -> list[int]:
        return sorted(self.views)

    def is_empty(self) -> bool:
        return not self.views


def _by_peer(records: Iterable[dict]) -> dict[int, dict[int, list[int]]]:
    out: dict[int, dict[int, list[int]]] = {}
    for r in records:
        out.setdefault(r["t"], {})[r["peer"]] = r["values"]
    return out


def coalition_knowledge(
    transcripts: TranscriptStore,
    part: HonestPartition,
    g: Topology,
) -> CoalitionKnowledge:
    """Per-component honest sums and counts, per iteration, from the coalition's view.

    Only the public log and the corrupted nodes' own logs are read.
    """
    setup = transcripts.setup()
    n, k, d, p, scale = (setup[key] for key in ("n", "k", "d", "p", "scale"))
    if g.n != n:
        raise TranscriptError(f"graph has {g.n} nodes, transcript has {n}")
    part.validate(n)
    if not part.corrupted:
        return CoalitionKnowledge(k, d, scale, frozenset(), (), {})

    components = tuple(connected_components(g, part.honest))
    received = {c: _by_peer(transcripts.node_records(c, "recv")) for c in part.corrupted}
    sent = {c: _by_peer(transcripts.node_records(c, "sent")) for c in part.corrupted}
    public_shares = {r["t"]: r["values"] for r in transcripts.public_records("shares")}
    centers = {
        r["t"]: tuple(tuple(row) for row in r["values"])
        for r in transcripts.public_records("centers")
    }

    def lift(v: int) -> int:
        v %= p
        return v if v <= (p - 1) // 2 else v - p

    views: dict[int, tuple[ComponentView, ...]] = {}
    for t in sorted(public_shares):
        shares = public_shares[t]
        per_comp = []
        for comp in components:
            total = [0] * (k * d + k)
            for i in comp:
                total = [a + b for a, b in zip(total, shares[i])]
                for c in g.neighbors(i) & part.corrupted:
                    try:
                        r_ic = received[c][t][i]
                        r_ci = sent[c][t][i]
                    except KeyError:
                        raise TranscriptError(
                            f"node {c} has no record of the randoms exchanged with {i} in iteration {t}"
                        ) from None
                    # s_i^i + s_i^c restores node i's contribution on the edge to c
                    total = [a + x - y for a, x, y in zip(total, r_ic, r_ci)]
            sums, counts = split_units([lift(v) for v in total], k, d)
            if sum(counts) != len(comp) or min(counts) < 0:
                raise TranscriptError(
                    f"iteration {t}: counts {counts} inconsistent with a component of {len(comp)} nodes"
                )
            per_comp.append(ComponentView(tuple(tuple(s) for s in sums), tuple(counts)))
        views[t] = tuple(per_comp)
    return CoalitionKnowledge(k, d, scale, part.corrupted, components, views, centers)


@dataclass(frozen=True)
class Exposure:
    """A value the coalition can compute that belongs to a single honest node."""

    kind: str  # "singleton" or "mover"
    component: int
    iterations: tuple[int, int]
    cluster: int  # occupied cluster (singleton) or cluster left (mover)
    value_units: tuple[int, ...]
    to_cluster: int | None = None


def singleton_attack(knowledge: CoalitionKnowledge) -> list[Exposure]:
    """Singleton clusters, plus single movers found by differencing every iteration pair."""
    out: list[Exposure] = []
    its = knowledge.iterations
    for t in its:
        for ci, view in enumerate(knowledge.views[t]):
            for j, cnt in enumerate(view.counts):
                if cnt == 1:
                    out.append(Exposure("singleton", ci, (t, t), j, view.sums[j]))

    for m, q in combinations(its, 2):
        for ci, (a, b) in enumerate(zip(knowledge.views[m], knowledge.views[q])):
            de = [x - y for x, y in zip(a.counts, b.counts)]
            if sorted(de) != [-1] + [0] * (len(de) - 2) + [1]:
                continue
            u, v = de.index(1), de.index(-1)
            dy = [tuple(x - y for x, y in zip(sa, sb)) for sa, sb in zip(a.sums, b.sums)]
            others_zero = all(not any(dy[j]) for j in range(len(dy)) if j not in (u, v))
            if others_zero and dy[u] == tuple(-x for x in dy[v]):
                out.append(Exposure("mover", ci, (m, q), u, dy[u], to_cluster=v))
    return out


@dataclass(frozen=True)
class Occupancy:
    """Ground-truth labels of every node per iteration, plus final labels."""

    labels: Mapping[int, Sequence[int]]
    final: Sequence[int]

    @classmethod
    def from_transcripts(cls, transcripts: TranscriptStore, nodes: Iterable[int]) -> "Occupancy":
        labels: dict[int, dict[int, int]] = {}
        final: dict[int, int] = {}
        for i in nodes:
            for r in transcripts.node_records(i, "label"):
                labels.setdefault(r["t"], {})[i] = r["label"]
            for r in transcripts.node_records(i, "final_label"):
                final[i] = r["label"]
        width = transcripts.n

        def dense(m: Mapping[int, int]) -> list[int]:
            return [m.get(i, -1) for i in range(width)]

        return cls({t: dense(m) for t, m in labels.items()}, dense(final))


@dataclass(frozen=True)
class NodeLeakage:
    node: int
    classification: str
    component_size: int
    coefficient: Fraction | None  # leakage bound as a multiple of h(X_i); None when perfect
    evidence: tuple[tuple[int, int], ...]
    value_units: tuple[int, ...] | None
    value: tuple[float, ...] | None
    final_label_exposed: bool

    def as_record(self) -> dict:
        return {
            "node": self.node,
            "class": self.classification,
            "component_size": self.component_size,
            "coefficient": None if self.coefficient is None else str(self.coefficient),
            "evidence": [list(e) for e in self.evidence],
            "value_units": None if self.value_units is None else list(self.value_units),
            "value": None if self.value is None else list(self.value),
            "final_label_exposed": self.final_label_exposed,
        }


@dataclass(frozen=True)
class LeakageReport:
    nodes: Mapping[int, NodeLeakage]
    unattributed: tuple[Exposure, ...] = ()

    def summary(self) -> dict[str, int]:
        counts = {PERFECT: 0, BOUNDED: 0, FULL: 0}
        for entry in self.nodes.values():
            counts[entry.classification] += 1
        return counts

    def of_class(self, cls: str) -> list[int]:
        return sorted(i for i, e in self.nodes.items() if e.classification == cls)

    def to_text(self) -> str:
        """One JSON record per honest node, in node order."""
        lines = [
            json.dumps(self.nodes[i].as_record(), sort_keys=True, separators=(",", ":"))
            for i in sorted(self.nodes)
        ]
        return "".join(line + "\n" for line in lines)


def leakage_report(
    knowledge: CoalitionKnowledge,
    occupancy: Occupancy,
    honest: Iterable[int] | None = None,
) -> LeakageReport:
    """Classify every honest node as perfect, bounded or full.

    ``occupancy`` is ground truth and is only used to attribute exposures to
    the node they belong to; the exposures themselves come from the
    coalition's knowledge alone. With no coalition every node is perfect.
    """
    if knowledge.is_empty():
        nodes = sorted(honest) if honest is not None else []
        return LeakageReport({
            i: NodeLeakage(i, PERFECT, len(nodes), None, (), None, None, False) for i in nodes
        })

    exposures = singleton_attack(knowledge)
    hits: dict[int, list[Exposure]] = {}
    touched: set[int] = set()
    unattributed = []
    for ex in exposures:
        comp = knowledge.components[ex.component]
        touched.add(ex.component)
        m, q = ex.iterations
        if ex.kind == "singleton":
            who = [i for i in comp if occupancy.labels[m][i] == ex.cluster]
        else:
            who = [i for i in comp if occupancy.labels[m][i] != occupancy.labels[q][i]]
        if len(who) == 1:
            hits.setdefault(who[0], []).append(ex)
        else:
            unattributed.append(ex)

    nodes = {}
    for ci, comp in enumerate(knowledge.components):
        finals = {occupancy.final[i] for i in comp}
        size = len(comp)
        for i in sorted(comp):
            exposed = len(finals) == 1
            if i in hits:
                first = hits[i][0]
                nodes[i] = NodeLeakage(
                    i, FULL, size, Fraction(1),
                    tuple(e.iterations for e in hits[i]),
                    first.value_units,
                    tuple(u / knowledge.scale for u in first.value_units),
                    exposed,
                )
            elif ci in touched:
                nodes[i] = NodeLeakage(i, BOUNDED, size, Fraction(1, size), (), None, None, exposed)
            else:
                nodes[i] = NodeLeakage(i, PERFECT, size, None, (), None, None, exposed)
    return LeakageReport(nodes, tuple(unattributed))


def same_cluster_probability(M: int, k: int) -> float:
    """``(1/k)^M``: chance that ``M`` nodes with independent uniform labels all land in one given cluster.

    Summed over the ``k`` possible clusters this becomes
    ``label_exposure_probability``.
    """
    if M < 1 or k < 1:
        raise ValueError("M and k must be >= 1")
    return float(Fraction(1, k) ** M)


def label_exposure_probability(M: int, k: int) -> float:
    """Chance that all ``M`` nodes of a component share some final label, ``k^(1-M)``.

    This is when the final labels of the component are exposed.
    """
    if M < 1 or k < 1:
        raise ValueError("M and k must be >= 1")
    return float(k * Fraction(1, k) ** M)


@dataclass(frozen=True)
class UniformityResult:
    statistic: float
    p_value: float
    reject: bool


def share_uniformity_test(samples: Sequence[int], p: int, alpha: float = 0.01) -> UniformityResult:
    """Chi-square goodness of fit of ``samples`` against uniform on ``[0, p)``."""
    if p > 101:
        raise ValueError("uniformity test is meant for small moduli (p <= 101)")
    if len(samples) < 100 * p:
        raise ValueError(f"need at least {100 * p} samples, got {len(samples)}")
    arr = np.asarray([int(s) for s in samples])
    if arr.min() < 0 or arr.max() >= p:
        raise ValueError("samples outside [0, p)")
    observed = np.bincount(arr, minlength=p)
    stat, pval = stats.chisquare(observed)
    return UniformityResult(float(stat), float(pval), bool(pval < alpha))
