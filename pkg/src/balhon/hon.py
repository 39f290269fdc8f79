"""Higher-order species-flow network.

Ballast taken up at a port is released over the next few calls of the same
vessel, so each uptake produces several source-to-sink paths, each carrying
its leg spread probability. Those paths are turned into variable-order rules:
a rule ``(A, B) -> C`` says that flow which reached B from A continues to C
with a next-step distribution different enough from plain ``B -> C`` to be
worth its own state. Rules become a network whose nodes are ``(port,
history)`` states, and the network is projected back onto a port-by-port
risk matrix.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .aggregate import aggregate_pair_risk
from .ingest import Dataset, DischargeProfile, RiskParams, VoyageRecord, voyage_duration
from .riskcore import LegContext, spread_probability

Context = tuple[str, ...]


class DanglingRule(ValueError):
    """A higher-order rule whose history state cannot be reached."""


@dataclass(frozen=True)
class PathObservation:
    port_sequence: tuple[str, ...]
    weight: float

    def __post_init__(self):
        seq = tuple(self.port_sequence)
        object.__setattr__(self, "port_sequence", seq)
        if len(seq) < 2:
            raise ValueError(f"path needs at least two ports: {seq}")
        if any(a == b for a, b in zip(seq, seq[1:])):
            raise ValueError(f"path has an immediate self-loop: {seq}")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"path weight must lie in [0, 1], got {self.weight!r}")

    @property
    def source(self) -> str:
        return self.port_sequence[0]

    @property
    def sink(self) -> str:
        return self.port_sequence[-1]


@dataclass(frozen=True)
class HonParams:
    """Rule-growth settings.

    ``support`` picks what ``min_support`` is compared against: the summed
    path weight (``"weight"``) or the number of observations (``"count"``).
    """

    max_order: int = 3
    min_support: float = 5
    divergence_threshold_scale: float = 1.0
    support: str = "weight"

    def __post_init__(self):
        if int(self.max_order) != self.max_order or self.max_order < 1:
            raise ValueError(f"max_order must be an integer >= 1, got {self.max_order!r}")
        if self.min_support < 1:
            raise ValueError(f"min_support must be >= 1, got {self.min_support!r}")
        if not self.divergence_threshold_scale > 0:
            raise ValueError("divergence_threshold_scale must be > 0")
        if self.support not in ("weight", "count"):
            raise ValueError(f"support must be 'weight' or 'count', got {self.support!r}")


@dataclass(frozen=True)
class HonRule:
    """``context -> next_port``; the most recent port is ``context[-1]``.

    ``weight`` is the summed path weight behind the transition, ``count`` the
    number of observations. ``risk`` aggregates the spread probabilities of
    the paths that end with this transition.
    """

    context: Context
    next_port: str
    weight: float
    probability: float
    count: int = 0
    risk: float = 0.0

    @property
    def order(self) -> int:
        return len(self.context)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


def _chains(legs: list[VoyageRecord]) -> list[list[VoyageRecord]]:
    # consecutive legs only share ballast when the vessel really continues from the last port
    out: list[list[VoyageRecord]] = []
    for leg in legs:
        if out and out[-1][-1].dest_port == leg.origin_port:
            out[-1].append(leg)
        else:
            out.append([leg])
    return out


def extract_paths(dataset: Dataset, profile: DischargeProfile, params: RiskParams) -> list[PathObservation]:
    """Source-to-sink ballast paths for every vessel itinerary.

    The volume a voyage discharges is taken up at its origin and released over
    the following calls according to ``profile``; when fewer calls remain the
    profile is truncated and rescaled to keep its total. Each path's weight is
    the leg spread probability for its share of the volume, the summed sailing
    time, and the source/sink environments.
    """
    paths = []
    adjacency = dataset.adjacency
    for _, legs in dataset.vessel_voyages().items():
        for chain in _chains(legs):
            durations = [voyage_duration(v) for v in chain]
            for m, uptake in enumerate(chain):
                source = dataset.port(uptake.origin_port)
                n_after = min(profile.horizon, len(chain) - m)
                shares = profile.truncated(n_after)
                seq = [uptake.origin_port]
                elapsed = 0.0
                for s in range(n_after):
                    leg = chain[m + s]
                    seq.append(leg.dest_port)
                    elapsed += durations[m + s]
                    ctx = LegContext.between(source, dataset.port(leg.dest_port),
                                             uptake.discharge_volume * shares[s], elapsed,
                                             adjacency, params)
                    paths.append(PathObservation(tuple(seq), spread_probability(ctx)))
    return paths


# ---------------------------------------------------------------------------
# rule growth
# ---------------------------------------------------------------------------


class _Table:
    """Transition observations for every context up to ``max_order`` long."""

    def __init__(self, paths: Iterable[PathObservation], max_order: int):
        self.weight: dict[Context, dict[str, float]] = defaultdict(lambda: defaultdict(float))
        self.count: dict[Context, dict[str, int]] = defaultdict(lambda: defaultdict(int))
        self.sink_probs: dict[tuple[Context, str], list[float]] = defaultdict(list)
        for path in sorted(paths, key=lambda p: (p.port_sequence, p.weight)):
            seq, w = path.port_sequence, path.weight
            last = len(seq) - 1
            for t in range(1, len(seq)):
                nxt = seq[t]
                for k in range(1, min(t, max_order) + 1):
                    ctx = seq[t - k:t]
                    self.weight[ctx][nxt] += w
                    self.count[ctx][nxt] += 1
                    if t == last:
                        self.sink_probs[ctx, nxt].append(w)
        self.extensions: dict[Context, list[Context]] = defaultdict(list)
        for ctx in sorted(self.count):
            if len(ctx) > 1:
                self.extensions[ctx[1:]].append(ctx)

    def total_weight(self, ctx: Context) -> float:
        return math.fsum(self.weight[ctx].values())

    def total_count(self, ctx: Context) -> int:
        return sum(self.count[ctx].values())

    def distribution(self, ctx: Context) -> dict[str, float]:
        total = self.total_weight(ctx)
        if total > 0:
            return {n: w / total for n, w in sorted(self.weight[ctx].items())}
        # no mass at all (e.g. only zero-discharge paths): fall back to counts
        n_total = self.total_count(ctx)
        return {n: c / n_total for n, c in sorted(self.count[ctx].items())}

    def support(self, ctx: Context, mode: str) -> float:
        return self.total_weight(ctx) if mode == "weight" else float(self.total_count(ctx))


def kl_divergence(p: dict[str, float], q: dict[str, float]) -> float:
    """KL divergence of ``p`` from ``q`` in bits."""
    total = 0.0
    for k, pk in p.items():
        if pk > 0:
            qk = q.get(k, 0.0)
            if qk <= 0:
                return math.inf
            total += pk * math.log2(pk / qk)
    return total


def divergence_threshold(order: int, support: float, scale: float = 1.0) -> float:
    """Minimum divergence for a rule of ``order`` observed with ``support``."""
    denom = math.log2(1.0 + support)
    return math.inf if denom <= 0 else scale * order / denom


def _grow_from(first: Context, table: _Table, hp: HonParams) -> set[Context]:
    kept: set[Context] = set()

    def extend(valid: Context, curr: Context, order: int):
        if order >= hp.max_order:
            return
        distr = table.distribution(valid)
        valid_has_mass = table.total_weight(valid) > 0
        positive = [v for v in distr.values() if v > 0]
        ceiling = -math.log2(min(positive)) if positive else 0.0
        for ext in table.extensions.get(curr, ()):
            support = table.support(ext, hp.support)
            if support < hp.min_support:
                continue
            if valid_has_mass and table.total_weight(ext) == 0:
                continue
            threshold = divergence_threshold(order + 1, support, hp.divergence_threshold_scale)
            if ceiling <= threshold:
                # no extension can diverge further than -log2(min q) from this parent
                continue
            if kl_divergence(table.distribution(ext), distr) > threshold:
                kept.update(ext[:i] for i in range(1, len(ext) + 1))
                extend(ext, ext, order + 1)
            else:
                extend(valid, ext, order + 1)

    kept.add(first)
    extend(first, first, 1)
    return kept


def grow_rules(paths: Sequence[PathObservation], hp: HonParams = HonParams(),
               threads: int = 1) -> tuple[HonRule, ...]:
    """Variable-order rules from weighted paths.

    All first-order transitions become rules. A longer history is kept when
    its support reaches ``min_support`` and its next-step distribution
    diverges from that of the nearest kept shorter history by more than
    ``scale * order / log2(1 + support)`` bits. Histories leading up to a kept
    one are kept too, so every state stays reachable.

    Growth runs independently per first-order context; results are merged in
    sorted order, so ``threads`` never changes the output.
    """
    if not paths:
        raise ValueError("grow_rules needs at least one path")
    table = _Table(paths, hp.max_order)
    firsts = sorted(ctx for ctx in table.count if len(ctx) == 1)
    if threads > 1 and hp.max_order > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda f: _grow_from(f, table, hp), firsts))
    else:
        parts = [_grow_from(f, table, hp) for f in firsts]
    contexts = sorted(set().union(*parts), key=lambda c: (len(c), c))

    rules = []
    for ctx in contexts:
        distr = table.distribution(ctx)
        for nxt in sorted(table.count[ctx]):
            rules.append(HonRule(
                ctx, nxt,
                weight=table.weight[ctx][nxt],
                probability=distr[nxt],
                count=table.count[ctx][nxt],
                risk=aggregate_pair_risk(table.sink_probs.get((ctx, nxt), ())),
            ))
    return tuple(rules)


def first_order_rules(paths: Sequence[PathObservation]) -> tuple[HonRule, ...]:
    return grow_rules(paths, HonParams(max_order=1))


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------


def state_name(ctx: Context) -> str:
    """``(A, B)`` renders as ``B|A``; the history is listed most recent first."""
    if len(ctx) == 1:
        return ctx[0]
    return ctx[-1] + "|" + ".".join(reversed(ctx[:-1]))


@dataclass(frozen=True)
class HonEdge:
    source: Context
    target: Context
    weight: float
    probability: float
    risk: float


@dataclass(frozen=True)
class HonNetwork:
    states: tuple[Context, ...]
    edges: tuple[HonEdge, ...]
    first_order_edges: tuple[HonEdge, ...]

    @property
    def ports(self) -> tuple[str, ...]:
        return tuple(sorted({s[-1] for s in self.states}))

    def out_edges(self, state: Context) -> list[HonEdge]:
        return [e for e in self.edges if e.source == state]


def _highest_match(history: Context, states: set[Context], max_len: int) -> Context:
    for k in range(min(len(history), max_len), 0, -1):
        cand = history[-k:]
        if cand in states:
            return cand
    raise DanglingRule(f"no state for {history}")


def build_hon_network(rules: Iterable[HonRule]) -> HonNetwork:
    """States are rule contexts plus a plain state for every port named.

    Each rule becomes an edge from its context state. The edge first points at
    the plain state of ``next_port`` and is then rewired to the longest
    history ending in ``next_port`` that exists as a state.
    """
    rules = sorted(rules, key=lambda r: (len(r.context), r.context, r.next_port))
    contexts = {r.context for r in rules}
    for ctx in contexts:
        if len(ctx) > 1 and ctx[:-1] not in contexts:
            raise DanglingRule(f"state {state_name(ctx)} has no parent state {state_name(ctx[:-1])}")
    states = set(contexts)
    for r in rules:
        states.add((r.next_port,))
    max_len = max((len(s) for s in states), default=1)

    plain, rewired = [], []
    for r in rules:
        plain.append(HonEdge(r.context, (r.next_port,), r.weight, r.probability, r.risk))
        target = _highest_match(r.context + (r.next_port,), states, max_len)
        rewired.append(HonEdge(r.context, target, r.weight, r.probability, r.risk))
    return HonNetwork(tuple(sorted(states, key=lambda c: (len(c), c))), tuple(rewired), tuple(plain))


# ---------------------------------------------------------------------------
# physical projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PhysicalAdjacency:
    """Port-by-port spread risk; ``matrix[i, j]`` is the risk from ``ports[i]`` to ``ports[j]``."""

    ports: tuple[str, ...]
    matrix: np.ndarray
    normalized: bool = False
    max_weight: float | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (len(self.ports), len(self.ports)):
            raise ValueError(f"matrix shape {m.shape} does not match {len(self.ports)} ports")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def index(self, port_id: str) -> int:
        return self.ports.index(port_id)

    def get(self, i: str, j: str) -> float:
        return float(self.matrix[self.index(i), self.index(j)])

    def incoming(self, port_id: str) -> list[float]:
        col = self.matrix[:, self.index(port_id)]
        return [float(x) for x in col if x > 0]

    def __eq__(self, other):
        if not isinstance(other, PhysicalAdjacency):
            return NotImplemented
        return (self.ports == other.ports and self.normalized == other.normalized
                and self.max_weight == other.max_weight and np.array_equal(self.matrix, other.matrix))


def project_physical(hon: HonNetwork, ports: Sequence[str] | None = None) -> PhysicalAdjacency:
    """Mean edge risk over all higher-order edges joining each port pair."""
    port_list = tuple(sorted(set(ports) if ports is not None else hon.ports))
    pos = {p: i for i, p in enumerate(port_list)}
    sums: dict[tuple[int, int], list[float]] = defaultdict(list)
    for e in hon.edges:
        sums[pos[e.source[-1]], pos[e.target[-1]]].append(e.risk)
    m = np.zeros((len(port_list), len(port_list)))
    for (i, j), risks in sorted(sums.items()):
        m[i, j] = math.fsum(risks) / len(risks)
    return PhysicalAdjacency(port_list, m)


def normalize_edges(adj: PhysicalAdjacency) -> PhysicalAdjacency:
    if adj.normalized:
        raise ValueError("adjacency is already normalized")
    top = float(adj.matrix.max()) if adj.matrix.size else 0.0
    if top <= 0:
        return PhysicalAdjacency(adj.ports, adj.matrix, True, 0.0)
    return PhysicalAdjacency(adj.ports, adj.matrix / top, True, top)


def first_order_adjacency(paths: Sequence[PathObservation], ports: Sequence[str]) -> PhysicalAdjacency:
    """Port-pair risk straight from the final hop of every path, no rules involved."""
    port_list = tuple(sorted(set(ports)))
    pos = {p: i for i, p in enumerate(port_list)}
    n = len(port_list)
    log_survive = np.zeros((n, n))
    saturated = np.zeros((n, n), dtype=bool)
    rows = np.array([pos[p.port_sequence[-2]] for p in paths], dtype=int)
    cols = np.array([pos[p.port_sequence[-1]] for p in paths], dtype=int)
    w = np.array([p.weight for p in paths], dtype=float)
    full = w >= 1.0
    np.logical_or.at(saturated, (rows[full], cols[full]), True)
    np.add.at(log_survive, (rows[~full], cols[~full]), np.log1p(-w[~full]))
    m = -np.expm1(log_survive)
    m[saturated] = 1.0
    return PhysicalAdjacency(port_list, m)


def flow_by_port(edges: Iterable[HonEdge]) -> dict[str, float]:
    """Summed outgoing edge weight per physical port."""
    out: dict[str, list[float]] = defaultdict(list)
    for e in edges:
        out[e.source[-1]].append(e.weight)
    return {p: math.fsum(ws) for p, ws in sorted(out.items())}


def write_rules_csv(rules: Iterable[HonRule], fh) -> None:
    """Debug dump: one row per rule, history joined with ``>``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("context", "next", "support", "probability"))
    for r in sorted(rules, key=lambda r: (len(r.context), r.context, r.next_port)):
        w.writerow((">".join(r.context), r.next_port, f"{r.weight:.6f}", f"{r.probability:.6f}"))
