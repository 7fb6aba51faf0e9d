"""Additive randomization of node inputs and reconstruction of their sum.

Every node ``i`` draws a fresh uniform ``r_i^k`` for each neighbor ``k`` and
masks its input with the antisymmetric differences ``r_i^k - r_k^i``. The masks
cancel across the network, so the obfuscated shares still sum to the inputs'
sum mod ``p`` while each share alone is uniform.

All values are vectors (tuples of ints in ``[0, p)``) so a whole batch of
entries shares one exchange round; scalar inputs are width-1 vectors.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .field import FieldElement, FieldModulus, ModulusMismatchError
from .topology import Topology
from .transcript import TranscriptStore

Vector = tuple[int, ...]
InputValue = Union[FieldElement, int, Sequence[int]]


class ReconstructionError(ArithmeticError):
    """The averaged value is too far from an integer multiple of 1/n to round safely."""


def node_stream(seed: int, *keys: int | str) -> random.Random:
    """Deterministic per-purpose stream derived from a master seed.

    ``random.Random`` is used because ``randrange`` draws exactly uniform
    integers of any size, which numpy's generators cannot do past 64 bits.
    """
    digest = hashlib.sha256(repr((int(seed),) + tuple(keys)).encode()).digest()
    return random.Random(int.from_bytes(digest, "big"))


@dataclass(frozen=True)
class PairwiseRandoms:
    modulus: FieldModulus
    values: Mapping[tuple[int, int], Vector]

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, key: tuple[int, int]) -> Vector:
        return self.values[key]


@dataclass(frozen=True)
class ShareSet:
    modulus: FieldModulus
    edge: Mapping[tuple[int, int], Vector]
    own: Mapping[int, Vector]

    def own_matrix(self, n: int) -> list[Vector]:
        return [self.own[i] for i in range(n)]


def exchange_randoms(
    g: Topology,
    seed: int,
    modulus: FieldModulus,
    width: int = 1,
    *,
    iteration: int = 0,
    transcript: TranscriptStore | None = None,
) -> PairwiseRandoms:
    """One uniform draw per ordered edge direction (per vector entry).

    Node ``i``'s draws come from its own stream keyed by ``(iteration, i)``,
    taken over its neighbors in increasing id order.
    """
    p = modulus.p
    values: dict[tuple[int, int], Vector] = {}
    for i in range(g.n):
        rng = node_stream(seed, "randoms", iteration, i)
        for k in sorted(g.neighbors(i)):
            values[(i, k)] = tuple(rng.randrange(p) for _ in range(width))
    if transcript is not None:
        for (i, k), r in values.items():
            transcript.record(i, "sent", iteration, peer=k, values=list(r))
            transcript.record(k, "recv", iteration, peer=i, values=list(r))
    return PairwiseRandoms(modulus, values)


def _as_vector(value: InputValue, modulus: FieldModulus) -> Vector:
    if isinstance(value, FieldElement):
        if value.modulus != modulus:
            raise ModulusMismatchError(f"input is mod {value.modulus.p}, expected mod {modulus.p}")
        return (value.value,)
    if isinstance(value, int):
        return (value % modulus.p,)
    return tuple(int(v) % modulus.p for v in value)


def make_shares(
    inputs: Mapping[int, InputValue],
    randoms: PairwiseRandoms,
    g: Topology,
    *,
    iteration: int = 0,
    transcript: TranscriptStore | None = None,
) -> ShareSet:
    """``s_i^k = r_i^k - r_k^i`` per neighbor, ``s_i^i = a_i - sum_k s_i^k`` (mod p)."""
    modulus = randoms.modulus
    p = modulus.p
    missing = set(range(g.n)) - set(inputs)
    if missing:
        raise ValueError(f"no input for nodes {sorted(missing)}")
    vectors = {i: _as_vector(inputs[i], modulus) for i in range(g.n)}
    widths = {len(v) for v in vectors.values()}
    if len(widths) > 1:
        raise ValueError(f"inputs have mixed widths {sorted(widths)}")
    width = widths.pop() if widths else 1

    edge: dict[tuple[int, int], Vector] = {}
    own: dict[int, Vector] = {}
    for i in range(g.n):
        acc = list(vectors[i])
        for k in sorted(g.neighbors(i)):
            r_ik, r_ki = randoms[(i, k)], randoms[(k, i)]
            s = tuple((a - b) % p for a, b in zip(r_ik, r_ki))
            if len(s) != width:
                raise ValueError(f"random vector on edge ({i}, {k}) has wrong width")
            edge[(i, k)] = s
            acc = [a - b for a, b in zip(acc, s)]
        own[i] = tuple(a % p for a in acc)
        if transcript is not None:
            transcript.record(i, "input", iteration, values=list(vectors[i]))
            transcript.record(i, "share", iteration, values=list(own[i]))
    return ShareSet(modulus, edge, own)


def reconstruct_ratio(
    num: int,
    den: int,
    n: int,
    modulus: FieldModulus,
    true_sum: int | None = None,
) -> int:
    """``round(n * num / den) mod p`` with exact integer arithmetic."""
    top = num * n
    if true_sum is not None and 2 * abs(top - true_sum * den) >= den:
        raise ReconstructionError(
            f"averaged value {top / den:.6g} is not within 1/2 of the share sum {true_sum}"
        )
    q, r = divmod(2 * top + den, 2 * den)
    if r == 0:
        raise ReconstructionError(f"{top}/{den} is exactly halfway between integers")
    return q % modulus.p


def reconstruct_average(
    s_bar: Fraction | int,
    n: int,
    modulus: FieldModulus,
    true_sum: int | None = None,
) -> FieldElement:
    """Recover ``sum(a_i) mod p`` from the averaged obfuscated shares.

    ``true_sum`` is the exact integer sum of the obfuscated shares, known only
    to the simulator; when given, insufficient convergence raises instead of
    rounding to a wrong value.
    """
    f = Fraction(s_bar)
    return modulus.element(reconstruct_ratio(f.numerator, f.denominator, n, modulus, true_sum))


def reconstruct_vector(
    s_bar: Sequence[Fraction],
    n: int,
    modulus: FieldModulus,
    true_sum: Sequence[int] | None = None,
) -> Vector:
    sums = true_sum if true_sum is not None else [None] * len(s_bar)
    return tuple(reconstruct_average(v, n, modulus, t).value for v, t in zip(s_bar, sums))
