"""Simulation state and the round-0 data-center setup."""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..attacks.adversary import select_malicious
from ..channel.energy import setup_energy
from ..channel.physics import model_bits
from ..config import ScenarioConfig
from ..constellation.clustering import cluster_satellites
from ..constellation.geometry import EARTH_RADIUS_M, Satellite, build_constellation
from ..constellation.roles import Cluster, assign_roles, with_roles
from ..errors import ConfigurationError
from ..fl.data import LabeledDataset
from ..fl.model import ModelLayout, ParamVector
from ..fl.partition import partition_non_iid
from ..ledger.chain import ChainSet, LightClient
from ..ledger.signing import KeyRegistry
from ..utils.seeding import CLUSTERING, CONSTELLATION, INIT_MODEL, PARTITION, derive_seed, rng_for

log = logging.getLogger(__name__)

DC_POSITION = np.array([EARTH_RADIUS_M, 0.0, 0.0])


@dataclass
class SimState:
    cfg: ScenarioConfig
    layout: ModelLayout
    satellites: dict[int, Satellite]
    groups: list[list[int]]          # DC clustering, fixed for the run
    clusters: list[Cluster]          # staffed clusters of the coming round
    w: ParamVector
    test: LabeledDataset
    malicious: frozenset[int] = frozenset()
    registry: KeyRegistry | None = None
    chains: ChainSet | None = None
    light_client: LightClient | None = None
    round: int = 0
    setup_energy: float = 0.0

    @property
    def heads(self) -> dict[int, int]:
        return {c.id: c.head for c in self.clusters}

    @property
    def bits(self) -> int:
        return model_bits(self.layout.dim, self.cfg.physics)


def staff_clusters(
    satellites: Mapping[int, Satellite],
    groups: Sequence[Sequence[int]],
    cfg: ScenarioConfig,
    incumbents: Mapping[int, int] | None = None,
) -> list[Cluster]:
    """Role assignment for every DC group; groups without 3 eligible satellites sit the round out."""
    p = cfg.protocol
    out = []
    for cid, group in enumerate(groups):
        members = [satellites[s] for s in group]
        if not cfg.method.uses_protocol:
            head = min(members, key=lambda s: (-s.reputation, s.id))
            learners = tuple(sorted(s.id for s in members if s.id != head.id))
            out.append(Cluster(cid, head.id, (), learners, {l: head.id for l in learners}))
            continue
        try:
            out.append(assign_roles(
                members, p.miner_fraction, cluster_id=cid,
                incumbent=(incumbents or {}).get(cid), removal_threshold=p.removal_threshold,
            ))
        except ConfigurationError as e:
            log.warning("cluster %d inactive: %s", cid, e)
    return out


def initial_state(cfg: ScenarioConfig, train: LabeledDataset, test: LabeledDataset) -> SimState:
    """DC setup: constellation, non-IID partitions, clustering, initial roles, accounts and w⁰."""
    c = cfg.constellation
    sats = build_constellation(
        c.orbits, c.sats_per_orbit, c.altitude_m, derive_seed(cfg.seed, CONSTELLATION),
        inclination_deg=c.inclination_deg, phasing=c.phasing,
        cpu_freq_range=(c.cpu_freq_min, c.cpu_freq_max), tx_power=c.tx_power,
        initial_reputation=cfg.protocol.initial_reputation,
    )
    parts = partition_non_iid(
        train, len(sats), c.orbits, cfg.dataset.labels_per_orbit, derive_seed(cfg.seed, PARTITION),
    )
    sats = [s.with_data(d) for s, d in zip(sats, parts)]
    groups = cluster_satellites(sats, cfg.protocol.clusters, derive_seed(cfg.seed, CLUSTERING))
    sat_map = {s.id: s for s in sats}
    clusters = staff_clusters(sat_map, groups, cfg)
    sat_map = with_roles(sat_map, clusters)

    layout = ModelLayout(train.feature_dim, train.class_count, cfg.model.hidden)
    w0 = layout.initial(rng_for(cfg.seed, INIT_MODEL), cfg.model.init_scale)

    attack = cfg.effective_attack
    malicious = frozenset()
    if attack is not None:
        holders = [sid for sid, s in sat_map.items() if s.role is attack.kind.target_role]
        malicious = select_malicious(holders, attack)
    registry = chains = light = None
    if cfg.method.uses_protocol and cfg.ledger.enabled:
        registry = KeyRegistry.for_accounts(sat_map, cfg.seed, cfg.ledger.digest)
        chains = ChainSet(registry)
        light = LightClient(cfg.ledger.digest)

    bits = model_bits(layout.dim, cfg.physics)
    size_of = {sid: len(g) for g in groups for sid in g}
    e_setup = setup_energy(
        DC_POSITION, [s.position for s in sats],
        [cfg.physics.bits_per_param * size_of[s.id] + bits for s in sats], cfg.physics,
    )
    log.info(
        "setup: %d satellites, %d clusters, model dim %d, %d malicious",
        len(sats), len(groups), layout.dim, len(malicious),
    )
    return SimState(
        cfg=cfg, layout=layout, satellites=sat_map, groups=groups, clusters=clusters,
        w=w0, test=test, malicious=malicious, registry=registry, chains=chains,
        light_client=light, setup_energy=e_setup,
    )
