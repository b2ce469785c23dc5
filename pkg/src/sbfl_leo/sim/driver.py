"""Round-driven orchestration of the protocol and the FedAvg baselines."""
from __future__ import annotations
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import __version__
from ..attacks.adversary import (
    AttackKind,
    LearnerContext,
    corrupt_ballot,
    corrupt_local_model,
    corrupt_vote,
)
from ..channel.energy import ClusterTraffic, EnergyBreakdown, Hop, Workload, round_energy
from ..channel.physics import isl_rate, train_energy
from ..config import ScenarioConfig
from ..consensus.aggregation import (
    aggregate_global,
    cluster_weights,
    global_loss,
    settle_round,
)
from ..consensus.voting import (
    HeadBallot,
    MinerVote,
    TallyResult,
    agreed_suspects,
    cast_ballot,
    cluster_outcomes,
    honest_heads,
    tally_cluster,
)
from ..constellation.geometry import Role
from ..constellation.roles import Cluster, apply_reputation_delta, with_roles
from ..constellation.snapshot import to_snapshot, write_snapshot
from ..dataio import load_dataset
from ..defense.grouping import Grouping, GroupingStrategy, similarity_profile
from ..defense.scoring import (
    ModelGroup,
    aggregate_group,
    finetune_score,
    learner_scores,
    score_groups,
    suspects_from_choice,
)
from ..errors import DomainError, RoundFailure
from ..fl.data import LabeledDataset, TrainConfig
from ..fl.model import ParamVector, evaluate, local_loss
from ..fl.training import train_local
from ..ledger import codec
from ..ledger.chain import RoundArtifacts, Transaction, TxKind, dump_chains, make_tx, prove_inclusion
from ..reporting.metrics import RoundReport, emit_metrics, energy_summary, rounds_to_target
from ..utils.seeding import HEAD_SCORE, LOCAL_TRAIN, MINER_SCORE, derive_seed
from .methods import strategy_for
from .state import SimState, initial_state, staff_clusters

log = logging.getLogger(__name__)


@dataclass
class ClusterRound:
    """One cluster's intra-cluster result."""

    cluster: Cluster
    model: ParamVector
    claim: float
    suspects: frozenset[int]         # 𝓛_h
    contributors: tuple[int, ...]    # learners whose models formed the cluster model
    votes: list[MinerVote]
    tally: TallyResult
    local_txs: list[Transaction] = field(default_factory=list)
    trace: dict = field(default_factory=dict)


@dataclass
class ScenarioResult:
    reports: list[RoundReport]
    model: ParamVector
    state: SimState
    manifest: dict


# ---------- helpers ----------

def _train_cfg(cfg: ScenarioConfig, seed: int) -> TrainConfig:
    t = cfg.training
    return TrainConfig(t.epochs, t.batch_size, t.learning_rate, t.energy_penalty, seed)


def _hop(state: SimState, u: int, v: int) -> Hop:
    su, sv = state.satellites[u], state.satellites[v]
    return Hop(u, v, su.tx_power, isl_rate(su.position, sv.position, su.tx_power, state.cfg.physics))


def _workload(state: SimState, sid: int) -> Workload:
    s = state.satellites[sid]
    return Workload(sid, s.cpu_freq, s.data_size)


def _holdout(data: LabeledDataset, fraction: float) -> LabeledDataset:
    _, tail = data.split_tail(fraction)
    return tail if tail.size else data


def _concat(parts: Sequence[LabeledDataset]) -> LabeledDataset:
    return LabeledDataset(
        np.concatenate([p.features for p in parts]),
        np.concatenate([p.labels for p in parts]),
        parts[0].class_count,
        np.concatenate([p.index for p in parts]),
    )


def _attack_on(state: SimState, r: int) -> bool:
    attack = state.cfg.effective_attack
    return attack is not None and attack.is_active(r)


def _acts(state: SimState, r: int, sid: int, role: Role) -> bool:
    """True when `sid` is malicious, its attack is scheduled and it holds the targeted role."""
    attack = state.cfg.effective_attack
    return (
        _attack_on(state, r) and sid in state.malicious and attack.kind.target_role is role
    )


def local_models(state: SimState, r: int, trainers: Sequence[int]) -> tuple[dict[int, ParamVector], list[int], list[float]]:
    """Local training of every trainer; scheduled attackers submit their poisoned model instead."""
    cfg, layout = state.cfg, state.layout
    attack = cfg.effective_attack
    models, attackers, losses = {}, [], []
    for sid in trainers:
        s = state.satellites[sid]
        tc = _train_cfg(cfg, derive_seed(cfg.seed, LOCAL_TRAIN, r, sid))
        poisoned = _acts(state, r, sid, Role.LEARNER)
        _, e_cmp = train_energy(s.cpu_freq, cfg.training.epochs, s.data_size, cfg.physics)
        honest = None
        if not (poisoned and attack.kind is AttackKind.LABEL_FLIP):
            honest = train_local(layout, state.w, s.data, tc, e_cmp)
        if poisoned:
            models[sid] = corrupt_local_model(honest, attack, LearnerContext(layout, state.w, s.data, tc))
            attackers.append(sid)
        else:
            models[sid] = honest
        losses.append(local_loss(layout, models[sid], s.data, e_cmp, cfg.training.energy_penalty))
    return models, attackers, losses


# ---------- protocol stages ----------

def cluster_round(
    state: SimState,
    r: int,
    cluster: Cluster,
    models: dict[int, ParamVector],
    strategy: GroupingStrategy,
) -> tuple[ClusterRound, list[int]]:
    """Miner defense, voting and the head's tally for one cluster."""
    cfg, layout = state.cfg, state.layout
    alg = cfg.ledger.digest
    submitted = {l: models[l] for l in cluster.learners}
    profile, degenerate = similarity_profile(submitted, state.w)
    grouping = strategy(profile) if profile else Grouping(())
    noise = set(grouping.noise) | set(degenerate)

    inputs = {}
    for l in cluster.learners:
        s, m = state.satellites[l], state.satellites[cluster.learner_to_miner[l]]
        inputs[l] = (isl_rate(s.position, m.position, s.tx_power, cfg.physics), s.data_size)
    groups = []
    for members in grouping.groups:
        agg = aggregate_group({i: submitted[i] for i in members}, inputs)
        groups.append(ModelGroup(tuple(members), agg, codec.vector_digest(agg, alg)))
    if not groups:
        log.warning("round %d cluster %d: no model group survived, reusing the global model", r, cluster.id)
        groups.append(ModelGroup((), state.w.copy(), codec.vector_digest(state.w, alg)))

    votes, attackers = [], []
    scored: list[ModelGroup] = groups
    holdout, margin = cfg.protocol.holdout_fraction, cfg.defense.score_margin
    for m in cluster.miners:
        tc = _train_cfg(cfg, derive_seed(cfg.seed, MINER_SCORE, r, m))
        data = state.satellites[m].data
        scored, best = score_groups(groups, layout, data, tc, holdout)
        singles = {l: finetune_score(layout, submitted[l], data, tc, holdout) for l in sorted(grouping.noise)}
        by_choice = {g.choice: g for g in scored}
        choice = scored[best].choice
        if _acts(state, r, m, Role.MINER):
            choice = corrupt_vote(choice, {g.choice: g.score for g in scored})
            attackers.append(m)
        picked = by_choice[choice]
        suspects = suspects_from_choice(
            submitted, picked.members, noise, learner_scores(scored, singles), picked.score - margin,
        )
        votes.append(MinerVote(m, choice, picked.score, tuple(suspects)))

    tally = tally_cluster(votes)
    winner = next(g for g in groups if g.choice == tally.winner)
    _warn_split_brain(state, r, cluster, votes, tally, groups)
    l_h = agreed_suspects(votes, tally.winner) | frozenset(tally.dissenters)

    local_txs = []
    if state.registry is not None:
        for l in cluster.learners:
            payload = codec.local_model_payload(submitted[l], state.satellites[l].data_size)
            local_txs.append(make_tx(state.registry, TxKind.LOCAL_MODEL, l, r, payload))
        for v in votes:
            payload = codec.miner_vote_payload(v.choice, v.score, v.suspects)
            local_txs.append(make_tx(state.registry, TxKind.MINER_VOTE, v.miner, r, payload))

    trace = {
        "theta": {str(k): float(v) for k, v in sorted(profile.items())},
        "groups": [list(g.members) for g in groups],
        "scores": [None if g.score is None else float(g.score) for g in scored],
        "noise": sorted(noise),
        "suspects": sorted(l_h),
    }
    log.debug("round %d cluster %d: groups %s, tally %s", r, cluster.id, trace["groups"], tally.counts_hex())
    return ClusterRound(
        cluster=cluster, model=winner.aggregate, claim=tally.claimed_score, suspects=l_h,
        contributors=winner.members, votes=votes, tally=tally, local_txs=local_txs, trace=trace,
    ), attackers


def _warn_split_brain(state, r, cluster, votes, tally, groups) -> None:
    members = {g.choice: set(g.members) for g in groups}
    for v in votes:
        if v.choice == tally.winner or _acts(state, r, v.miner, Role.MINER):
            continue
        poisoned = {l for l in members.get(v.choice, ()) if _acts(state, r, l, Role.LEARNER)}
        if not poisoned:
            log.warning("round %d cluster %d: miner %d dissented toward a group without attackers",
                        r, cluster.id, v.miner)


def head_ballots(state: SimState, r: int, rounds: Sequence[ClusterRound]) -> tuple[list[HeadBallot], list[int]]:
    """Every head fine-tunes and scores the peer cluster models on its own data, then votes."""
    cfg = state.cfg
    claims = {cr.cluster.id: cr.claim for cr in rounds}
    ballots, attackers = [], []
    for own in rounds:
        h = own.cluster.head
        data = state.satellites[h].data
        measured = {}
        for peer in rounds:
            if peer.cluster.id == own.cluster.id:
                continue
            tc = _train_cfg(cfg, derive_seed(cfg.seed, HEAD_SCORE, r, h, peer.cluster.id))
            measured[peer.cluster.id] = finetune_score(state.layout, peer.model, data, tc, cfg.protocol.holdout_fraction)
        ballot = cast_ballot(h, measured, {cid: claims[cid] for cid in measured}, cfg.protocol.sigma)
        if _acts(state, r, h, Role.HEAD):
            ballot = corrupt_ballot(ballot)
            attackers.append(h)
        ballots.append(ballot)
    return ballots, attackers


def protocol_traffic(state: SimState, cluster: Cluster) -> ClusterTraffic:
    """Traffic over the distribution tree, in both directions.

    Down: head → miners → attached learners. Up: each learner to its miner, each miner
    to the head. Every member sits on exactly one hop each way, as in the FedAvg star.
    """
    attach = cluster.learner_to_miner
    dist = [_hop(state, cluster.head, m) for m in cluster.miners]
    dist += [_hop(state, attach[l], l) for l in cluster.learners]
    uploads = [_hop(state, l, attach[l]) for l in cluster.learners]
    uploads += [_hop(state, m, cluster.head) for m in cluster.miners]
    return ClusterTraffic(
        cluster.id, dist, uploads,
        trainers=[_workload(state, l) for l in cluster.learners],
        evaluators=[_workload(state, m) for m in cluster.miners],
        head=_workload(state, cluster.head),
    )


def star_traffic(state: SimState, cluster: Cluster) -> ClusterTraffic:
    """FedAvg: the head broadcasts and collects; every member trains, the head included."""
    others = list(cluster.learners)
    return ClusterTraffic(
        cluster.id,
        distribution=[_hop(state, cluster.head, s) for s in others],
        uploads=[_hop(state, s, cluster.head) for s in others],
        trainers=[_workload(state, s) for s in cluster.members],
    )


def inter_hops(state: SimState, heads: Sequence[int]) -> list[Hop]:
    return [_hop(state, a, b) for a in heads for b in heads if a != b]


def _global_loss(state: SimState, w_g: ParamVector, heads: dict[int, int], weights: dict[int, float]) -> float:
    frac = state.cfg.protocol.holdout_fraction
    slices = {cid: _holdout(state.satellites[h].data, frac) for cid, h in heads.items()}
    if state.cfg.protocol.global_loss == "pooled":
        return evaluate(state.layout, w_g, _concat(list(slices.values())))[1]
    cids = sorted(slices)
    losses = [evaluate(state.layout, w_g, slices[c])[1] for c in cids]
    return global_loss(losses, [weights.get(c, 0.0) for c in cids])


def _producers(state: SimState, heads: dict[int, int], honest: frozenset[int]) -> tuple[int, int]:
    """(model chain producer, reputation chain producer)."""
    pool = sorted(h for h in heads.values() if h in honest) or sorted(heads.values())
    model = min(pool, key=lambda h: (-state.satellites[h].reputation, h))
    return model, pool[0]


def _record(state, r, rounds, ballots, w_g, accepted, loss, deltas, honest) -> int:
    """Append the round to the ledger and check learners' inclusion proofs; returns proofs verified."""
    reg, chains = state.registry, state.chains
    heads = {cr.cluster.id: cr.cluster.head for cr in rounds}
    model_producer, rep_producer = _producers(state, heads, honest)
    art = RoundArtifacts(round=r, model_producer=model_producer, reputation_producer=rep_producer)
    for cr in rounds:
        cid, h = cr.cluster.id, cr.cluster.head
        art.side_txs[cid] = list(cr.local_txs)
        art.side_producers[cid] = h
        art.model_txs.append(make_tx(reg, TxKind.CLUSTER_MODEL, h, r,
                                     codec.cluster_model_payload(cr.model, cr.claim, cr.suspects)))
    for b in ballots:
        art.model_txs.append(make_tx(reg, TxKind.HEAD_BALLOT, b.head, r,
                                     codec.head_ballot_payload(b.approvals, b.scores)))
    art.model_txs.append(make_tx(reg, TxKind.GLOBAL_MODEL, model_producer, r,
                                 codec.global_model_payload(w_g, accepted, loss)))
    art.reputation_txs.append(make_tx(reg, TxKind.REPUTATION_UPDATE, rep_producer, r,
                                      codec.reputation_payload(deltas)))
    chains.append_round(art)

    state.light_client.sync(chains.chains())
    verified = 0
    for cr in rounds:
        chain = chains.side_chain(cr.cluster.id)
        for tx in cr.local_txs:
            if tx.kind is not TxKind.LOCAL_MODEL:
                continue
            height, proof = prove_inclusion(chain, tx)
            if state.light_client.verify(chain.name, height, proof):
                verified += 1
            else:
                log.error("round %d: inclusion proof failed for learner %d", r, tx.sender)
    return verified


# ---------- rounds ----------

def _protocol_round(state: SimState, r: int, strategy: GroupingStrategy) -> RoundReport:
    cfg = state.cfg
    t0 = time.perf_counter()
    clusters = state.clusters
    learners = [l for c in clusters for l in c.learners]
    models, attackers, local_losses = local_models(state, r, learners)

    rounds = []
    for c in clusters:
        cr, miner_attackers = cluster_round(state, r, c, models, strategy)
        rounds.append(cr)
        attackers += miner_attackers
    ballots, head_attackers = head_ballots(state, r, rounds)
    attackers += head_attackers

    heads = {cr.cluster.id: cr.cluster.head for cr in rounds}
    outcomes = cluster_outcomes(ballots, heads)
    honest = honest_heads(ballots, outcomes)
    claims = {cr.cluster.id: cr.claim for cr in rounds}
    weights = cluster_weights(ballots, claims, honest)
    settlement = settle_round(
        {cr.cluster.id: cr.suspects for cr in rounds}, heads, honest,
        {cr.cluster.id: cr.contributors for cr in rounds}, outcomes,
        [s for c in clusters for s in c.members],
        reward=cfg.protocol.reward, penalty=cfg.protocol.penalty,
    )
    accepted = {cr.cluster.id: (cr.model, weights[cr.cluster.id]) for cr in rounds if outcomes[cr.cluster.id]}
    failed = False
    try:
        w_g = aggregate_global(accepted, settlement.suspects, heads)
        kept = tuple(cid for cid in sorted(accepted) if heads[cid] not in settlement.suspects)
    except (RoundFailure, DomainError) as e:
        log.warning("round %d failed: %s; keeping the previous global model", r, e)
        w_g, kept, failed = state.w.copy(), (), True

    loss = _global_loss(state, w_g, heads, weights)
    proofs = 0
    if state.chains is not None:
        proofs = _record(state, r, rounds, ballots, w_g, kept, loss, settlement.deltas, honest)

    single = round_energy(
        [protocol_traffic(state, c) for c in clusters],
        inter_hops(state, list(heads.values())),
        cfg.training.epochs, state.bits, cfg.physics, verify_evaluations=1,
    )
    per_peer = single.with_head_verify(single.head_verify * (len(heads) - 1))
    energy = per_peer if cfg.protocol.head_verify_per_peer else single

    # reputation and next round's roles
    sats = dict(state.satellites)
    for sid, delta in settlement.deltas.items():
        sats[sid] = apply_reputation_delta(sats[sid], delta)
    incumbents = {cid: h for cid, h in heads.items() if h not in settlement.suspects}
    state.clusters = staff_clusters(sats, state.groups, cfg, incumbents)
    state.satellites = with_roles(sats, state.clusters)

    acc, test_loss = evaluate(state.layout, w_g, state.test)
    state.w = w_g
    return RoundReport(
        round=r, method=cfg.method.value, accuracy=acc, loss=loss, test_loss=test_loss,
        local_loss=float(np.mean(local_losses)) if local_losses else 0.0,
        energy=energy, suspects=tuple(sorted(settlement.suspects)), attackers=tuple(sorted(attackers)),
        accepted_clusters=kept, round_failed=failed, seconds=time.perf_counter() - t0,
        tallies={str(cr.cluster.id): cr.tally.counts_hex() for cr in rounds},
        ballots={str(b.head): {str(k): bool(v) for k, v in sorted(b.approvals.items())} for b in ballots},
        defense={str(cr.cluster.id): cr.trace for cr in rounds},
        proofs_verified=proofs,
        total_single_verify=single.total, total_per_peer_verify=per_peer.total,
    )


def _fedavg_round(state: SimState, r: int) -> RoundReport:
    """Plain FedAvg over the same clusters: data-size weighted, no defense, votes or ledger."""
    cfg = state.cfg
    t0 = time.perf_counter()
    clusters = state.clusters
    trainers = [s for c in clusters for s in c.members]
    models, attackers, local_losses = local_models(state, r, trainers)
    sizes = {s: (1.0, state.satellites[s].data_size) for s in trainers}
    w_g = aggregate_group(models, sizes)
    heads = {c.id: c.head for c in clusters}
    loss = _global_loss(state, w_g, heads, {})
    energy = round_energy(
        [star_traffic(state, c) for c in clusters],
        inter_hops(state, list(heads.values())),
        cfg.training.epochs, state.bits, cfg.physics, verify_evaluations=0,
    )
    acc, test_loss = evaluate(state.layout, w_g, state.test)
    state.w = w_g
    return RoundReport(
        round=r, method=cfg.method.value, accuracy=acc, loss=loss, test_loss=test_loss,
        local_loss=float(np.mean(local_losses)), energy=energy,
        attackers=tuple(sorted(attackers)), accepted_clusters=tuple(sorted(heads)),
        seconds=time.perf_counter() - t0,
    )


def _idle_round(state: SimState, r: int) -> RoundReport:
    acc, test_loss = evaluate(state.layout, state.w, state.test)
    return RoundReport(
        round=r, method=state.cfg.method.value, accuracy=acc, loss=test_loss, test_loss=test_loss,
        local_loss=0.0, energy=EnergyBreakdown(), round_failed=True,
    )


def run_round(state: SimState) -> tuple[SimState, RoundReport]:
    """Advance `state` by one communication round (mutated in place and returned)."""
    r = state.round + 1
    strategy = strategy_for(state.cfg, r)
    if not state.clusters:
        log.warning("round %d failed: no cluster has enough eligible satellites", r)
        report = _idle_round(state, r)
    elif strategy is None:
        report = _fedavg_round(state, r)
    else:
        report = _protocol_round(state, r, strategy)
    state.round = r
    log.info(
        "round %d %s: acc %.4f loss %.4f E %.2f J, %d suspects, clusters %s%s",
        r, report.method, report.accuracy, report.loss, report.energy.total,
        len(report.suspects), list(report.accepted_clusters), " FAILED" if report.round_failed else "",
    )
    return state, report


# ---------- scenarios ----------

def setup(cfg: ScenarioConfig, data: tuple[LabeledDataset, LabeledDataset] | None = None) -> SimState:
    train, test = data if data is not None else load_dataset(cfg.dataset, cfg.seed)
    return initial_state(cfg, train, test)


def build_manifest(cfg: ScenarioConfig, state: SimState, reports: Sequence[RoundReport]) -> dict:
    return {
        "version": __version__,
        "seed": cfg.seed,
        "method": cfg.method.value,
        "digest": cfg.ledger.digest,
        "rounds_run": len(reports),
        "rounds_to_target": rounds_to_target(reports, cfg.target_accuracy),
        "final_accuracy": reports[-1].accuracy if reports else None,
        "malicious": sorted(state.malicious),
        "energy": energy_summary(reports, state.setup_energy),
        "config": cfg.to_dict(),
    }


def run_scenario(
    cfg: ScenarioConfig,
    out_dir: str | Path | None = None,
    data: tuple[LabeledDataset, LabeledDataset] | None = None,
    *,
    stop_at_target: bool = True,
) -> ScenarioResult:
    """Run up to `cfg.rounds` rounds (stopping at target accuracy) and write the run's files."""
    state = setup(cfg, data)
    reports: list[RoundReport] = []
    for _ in range(cfg.rounds):
        state, report = run_round(state)
        reports.append(report)
        if stop_at_target and cfg.target_accuracy is not None and report.accuracy >= cfg.target_accuracy:
            log.info("target accuracy %.3f reached in round %d", cfg.target_accuracy, report.round)
            break
    manifest = build_manifest(cfg, state, reports)
    if out_dir is not None:
        write_outputs(Path(out_dir), state, reports, manifest)
    return ScenarioResult(reports, state.w, state, manifest)


def write_outputs(out: Path, state: SimState, reports: Sequence[RoundReport], manifest: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if reports:
        emit_metrics(reports, out)
    np.save(out / "model.npy", state.w)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    sats = [state.satellites[s] for s in sorted(state.satellites)]
    write_snapshot(out / "snapshot.json", to_snapshot(sats, state.clusters, state.groups))
    if state.chains is not None:
        dump_chains(state.chains, out / "chain")
    log.info("wrote run outputs to %s", out)
