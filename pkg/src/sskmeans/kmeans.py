"""Fully distributed k-means with a secret-shared center update.

Each node labels itself locally against the public centers, then the whole
network computes per-cluster sums and counts through one masked averaging
pass per iteration. ``centralized_oracle`` runs plain Lloyd iterations with
the same tie-break and empty-cluster rules, for equivalence checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .averaging import (
    AveragingError,
    ExactTreeSum,
    ProtocolChoice,
    metropolis_weights,
    protocol_name,
    run_protocol,
    SyncConsensus,
)
from .field import FixedPointCodec
from .sharing import exchange_randoms, make_shares, reconstruct_ratio
from .topology import Topology, TopologyError
from .transcript import TranscriptStore


class AveragingFailure(AveragingError):
    def __init__(self, iteration: int, rounds: int, protocol: str):
        super().__init__(
            f"averaging ({protocol}) did not converge in iteration {iteration} after {rounds} rounds"
        )
        self.iteration = iteration
        self.rounds = rounds


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    x_max: float

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ValueError("points must be an (n, d) array")
        if self.x_max <= 0:
            raise ValueError("x_max must be positive")
        if pts.size and np.abs(pts).max() > self.x_max:
            raise ValueError(f"observations exceed x_max={self.x_max}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_rows(cls, rows, x_max: float | None = None) -> "Dataset":
        pts = np.asarray(rows, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if x_max is None:
            x_max = float(np.abs(pts).max()) if pts.size else 1.0
            x_max = x_max or 1.0
        return cls(pts, float(x_max))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def as_centers(centers) -> np.ndarray:
    c = np.asarray(centers, dtype=float)
    if c.ndim == 1:
        c = c.reshape(-1, 1)
    if c.shape[0] < 1:
        raise ValueError("need at least one center")
    if not np.isfinite(c).all():
        raise ValueError("centers must be finite")
    return c


def assign_cluster(x, centers) -> int:
    """Index of the nearest center by squared distance; ties go to the lowest index."""
    c = as_centers(centers)
    dist = ((c - np.asarray(x, dtype=float).reshape(1, -1)) ** 2).sum(axis=1)
    return int(np.argmin(dist))  # argmin returns the first minimum


def assign_all(points: np.ndarray, centers) -> tuple[int, ...]:
    c = as_centers(centers)
    dist = ((points[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    return tuple(int(v) for v in np.argmin(dist, axis=1))


@dataclass(frozen=True)
class ExtendedVectors:
    y: np.ndarray  # (d, k): the observation in column l, zeros elsewhere
    e: np.ndarray  # (k,): one-hot at l


def build_extended(x, label: int, k: int) -> ExtendedVectors:
    if not 0 <= label < k:
        raise ValueError(f"label {label} outside [0, {k})")
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.zeros((xv.size, k))
    y[:, label] = xv
    e = np.zeros(k, dtype=int)
    e[label] = 1
    return ExtendedVectors(y, e)


def extended_units(x, label: int, k: int, codec: FixedPointCodec) -> list[int]:
    """Signed field-unit vector for one node: y flattened cluster-major, then e.

    Counts in ``e`` are plain integers, not scaled.
    """
    ext = build_extended(x, label, k)
    out = [codec.to_units(v) for v in ext.y.T.ravel()]
    return out + [int(v) for v in ext.e]


def split_units(vec: Sequence[int], k: int, d: int) -> tuple[list[list[int]], list[int]]:
    """Inverse of the flattening in ``extended_units``: (k x d sums, k counts)."""
    sums = [list(vec[j * d : (j + 1) * d]) for j in range(k)]
    return sums, list(vec[k * d : k * d + k])


@dataclass
class SecureConfig:
    scale: int = 1
    protocol: ProtocolChoice = field(default_factory=ExactTreeSum)
    seed: int = 0
    record_transcripts: bool = True
    trace_averaging: bool = False


@dataclass(frozen=True)
class UpdateRecord:
    iteration: int
    sums: list[list[int]]  # per-cluster network sums, field units (n * Y-bar)
    counts: list[int]  # per-cluster sizes (n * N-bar)
    rounds: int
    converged: bool


@dataclass
class RunResult:
    centers: np.ndarray
    labels: tuple[int, ...]
    iterations: int
    center_history: list[np.ndarray]
    label_history: list[tuple[int, ...]]
    converged: bool
    transcripts: TranscriptStore | None = None
    updates: list[UpdateRecord] = field(default_factory=list)
    modulus: int | None = None


def secure_center_update(
    g: Topology,
    dataset: Dataset,
    labels: Sequence[int],
    prev_centers,
    cfg: SecureConfig,
    *,
    codec: FixedPointCodec | None = None,
    iteration: int = 0,
    transcript: TranscriptStore | None = None,
    weights=None,
) -> tuple[np.ndarray, UpdateRecord]:
    prev = as_centers(prev_centers)
    k, d, n = prev.shape[0], dataset.d, dataset.n
    if codec is None:
        codec = FixedPointCodec.for_network(n, dataset.x_max, cfg.scale)
    p = codec.p
    width = k * d + k

    inputs = {
        i: [u % p for u in extended_units(dataset.points[i], labels[i], k, codec)]
        for i in range(n)
    }
    randoms = exchange_randoms(g, cfg.seed, codec.modulus, width, iteration=iteration, transcript=transcript)
    shares = make_shares(inputs, randoms, g, iteration=iteration, transcript=transcript)
    own = shares.own_matrix(n)
    if transcript is not None:
        transcript.publish("shares", iteration, values=[list(s) for s in own])

    outcome = run_protocol(
        g, own, cfg.protocol, weights=weights, iteration=iteration,
        transcript=transcript if cfg.trace_averaging else None,
    )
    if not outcome.converged:
        raise AveragingFailure(iteration, outcome.rounds, protocol_name(cfg.protocol))

    share_sum = [sum(col) for col in zip(*own)]
    state = outcome.state
    results = {
        tuple(
            reconstruct_ratio(int(state.num[i, c]), int(state.den[i]), n, codec.modulus, share_sum[c])
            for c in range(width)
        )
        for i in range(n)
    }
    if len(results) != 1:
        raise AveragingError(f"nodes disagree on the reconstructed aggregate in iteration {iteration}")
    lifted = [codec.modulus.lift(v) for v in results.pop()]
    sums, counts = split_units(lifted, k, d)
    if any(c < 0 for c in counts) or sum(counts) != n:
        raise AveragingError(f"cluster counts {counts} do not reconstruct to {n} nodes")

    centers = prev.copy()
    for j in range(k):
        if counts[j] > 0:
            centers[j] = [float(Fraction(s, codec.scale * counts[j])) for s in sums[j]]
    if transcript is not None:
        transcript.publish("aggregate", iteration, sums=sums, counts=counts)
    record = UpdateRecord(iteration, sums, counts, outcome.rounds, outcome.converged)
    return centers, record


def _lloyd(points: np.ndarray, init, T: int, update: Callable) -> RunResult:
    centers = as_centers(init).copy()
    labels = assign_all(points, centers)
    center_history = [centers.copy()]
    label_history: list[tuple[int, ...]] = []
    converged = False
    for t in range(T):
        label_history.append(labels)
        centers = update(t, labels, centers)
        center_history.append(centers.copy())
        new = assign_all(points, centers)
        if new == labels:
            converged = True
            break
        labels = new
    return RunResult(
        centers=centers,
        labels=labels,
        iterations=len(label_history),
        center_history=center_history,
        label_history=label_history,
        converged=converged,
    )


def _check_instance(g: Topology, dataset: Dataset, init) -> None:
    if g.n != dataset.n:
        raise ValueError(f"graph has {g.n} nodes but dataset has {dataset.n}")
    c = as_centers(init)
    if c.shape[1] != dataset.d:
        raise ValueError(f"centers have dimension {c.shape[1]}, data has {dataset.d}")
    if c.shape[0] > dataset.n:
        warnings.warn(f"k={c.shape[0]} exceeds n={dataset.n}", stacklevel=3)
    if not g.is_connected():
        raise TopologyError("secure k-means needs a connected graph")


def run_kmeans(g: Topology, dataset: Dataset, init_centers, T: int, cfg: SecureConfig | None = None) -> RunResult:
    """Alternate local assignment and secure center updates for at most ``T`` iterations.

    Stops when an update leaves every label unchanged.
    """
    cfg = cfg or SecureConfig()
    _check_instance(g, dataset, init_centers)
    init = as_centers(init_centers)
    codec = FixedPointCodec.for_network(dataset.n, dataset.x_max, cfg.scale)
    transcript = TranscriptStore(dataset.n) if cfg.record_transcripts else None
    weights = metropolis_weights(g) if isinstance(cfg.protocol, SyncConsensus) else None
    if transcript is not None:
        transcript.publish(
            "setup", 0, n=dataset.n, k=init.shape[0], d=dataset.d, p=codec.p,
            scale=codec.scale, x_max=dataset.x_max, protocol=protocol_name(cfg.protocol), T=T,
        )
    updates: list[UpdateRecord] = []

    def update(t, labels, centers):
        if transcript is not None:
            transcript.publish("centers", t, values=centers.tolist())
        new, rec = secure_center_update(
            g, dataset, labels, centers, cfg,
            codec=codec, iteration=t, transcript=transcript, weights=weights,
        )
        updates.append(rec)
        return new

    result = _lloyd(dataset.points, init, T, update)
    if transcript is not None:
        transcript.publish("final", result.iterations, centers=result.centers.tolist())
        for t, labels in enumerate(result.label_history):
            for i, l in enumerate(labels):
                transcript.record(i, "label", t, label=l)
        for i, l in enumerate(result.labels):
            transcript.record(i, "final_label", result.iterations, label=l)
        transcript.freeze()
    result.transcripts = transcript
    result.updates = updates
    result.modulus = codec.p
    return result


def oracle_update(points: np.ndarray, labels: Sequence[int], centers: np.ndarray) -> np.ndarray:
    """Plain per-cluster means, exact before the final rounding to float."""
    out = centers.copy()
    for j in range(centers.shape[0]):
        members = [i for i, l in enumerate(labels) if l == j]
        if members:
            out[j] = [
                float(sum((Fraction(float(points[i, c])) for i in members), Fraction(0)) / len(members))
                for c in range(points.shape[1])
            ]
    return out


def centralized_oracle(dataset: Dataset, init_centers, T: int) -> RunResult:
    init = as_centers(init_centers)
    if init.shape[1] != dataset.d:
        raise ValueError("center dimension does not match data")
    return _lloyd(dataset.points, init, T, lambda t, labels, c: oracle_update(dataset.points, labels, c))


def random_init(dataset: Dataset, k: int, seed: int) -> np.ndarray:
    """Uniform draws from the data's bounding box."""
    rng = np.random.default_rng(seed)
    lo, hi = dataset.points.min(axis=0), dataset.points.max(axis=0)
    return rng.uniform(lo, hi, size=(k, dataset.d))


def within_cluster_ss(points: np.ndarray, labels: Sequence[int], centers: np.ndarray) -> float:
    c = as_centers(centers)
    return float(sum(((points[i] - c[l]) ** 2).sum() for i, l in enumerate(labels)))
