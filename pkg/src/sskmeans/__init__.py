"""Distributed k-means with additive secret sharing, plus a passive-adversary audit."""

from .adversary import (
    CoalitionKnowledge,
    LeakageReport,
    Occupancy,
    coalition_knowledge,
    label_exposure_probability,
    leakage_report,
    same_cluster_probability,
    share_uniformity_test,
    singleton_attack,
)
from .averaging import (
    AveragingState,
    ExactTreeSum,
    RandomGossip,
    SyncConsensus,
    gossip_round,
    metropolis_weights,
    run_protocol,
    sync_round,
    tree_sum,
)
from .field import (
    FieldElement,
    FieldModulus,
    FixedPointCodec,
    choose_modulus,
    decode_sum,
    encode,
    field_add,
    field_scale,
    field_sub,
)
from .kmeans import (
    Dataset,
    RunResult,
    SecureConfig,
    assign_cluster,
    build_extended,
    centralized_oracle,
    run_kmeans,
    secure_center_update,
)
from .sharing import exchange_randoms, make_shares, reconstruct_average
from .topology import (
    HonestPartition,
    Topology,
    connected_components,
    erdos_renyi,
    honest_neighbor_condition,
    neighbors,
    random_geometric,
    ring,
)
from .transcript import TranscriptStore

__version__ = "0.1.0"
