"""
Inter-satellite link (ISL) messaging for the decentralized solver.

This module provides the ISL graph, lossless synchronous channels between
neighboring satellites, and the signaling-overhead ledger. Messages sent
during a consensus round stay pending until the network-wide barrier
commits them, so every satellite computes against the same pre-round data.
"""

import threading
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from src.common.exceptions import OverheadMismatchError, TopologyError
from src.common.interfaces import OverheadLedgerLike, SchedulingMask
from src.common.utils import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class IslTopology:
    """Undirected connected ISL graph over satellites 0..n_sats-1."""
    kind: str
    n_sats: int
    edges: FrozenSet[Tuple[int, int]]

    def neighbors(self, s: int) -> Tuple[int, ...]:
        """Neighbor set G_s, ascending."""
        return tuple(sorted({b for a, b in self.edges if a == s} | {a for a, b in self.edges if b == s}))

    @property
    def neighbor_sets(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(self.neighbors(s) for s in range(self.n_sats))

    def degrees(self) -> np.ndarray:
        return np.array([len(n) for n in self.neighbor_sets], dtype=int)


def _is_connected(n_sats: int, edges: Iterable[Tuple[int, int]]) -> bool:
    adjacency: Dict[int, List[int]] = {s: [] for s in range(n_sats)}
    for a, b in edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    seen = {0}
    frontier: Deque[int] = deque([0])
    while frontier:
        node = frontier.popleft()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return len(seen) == n_sats


def build_topology(kind: str, n_sats: int,
                   edges: Optional[Iterable[Tuple[int, int]]] = None) -> IslTopology:
    """Build a ring, star (hub 0), mesh or custom ISL graph.

    Raises:
        TopologyError: On fewer than 2 satellites, an unknown kind, self-loops,
            out-of-range endpoints or a disconnected graph.
    """
    if n_sats < 2:
        raise TopologyError(f"an ISL graph needs at least 2 satellites, got {n_sats}")
    if kind == "ring":
        pairs = {(s, (s + 1) % n_sats) for s in range(n_sats)}
    elif kind == "star":
        pairs = {(0, s) for s in range(1, n_sats)}
    elif kind == "mesh":
        pairs = {(a, b) for a in range(n_sats) for b in range(a + 1, n_sats)}
    elif kind == "custom":
        if not edges:
            raise TopologyError("custom topology requires edges")
        pairs = {(int(a), int(b)) for a, b in edges}
    else:
        raise TopologyError(f"unknown topology kind {kind!r}")
    normalized = set()
    for a, b in pairs:
        if a == b:
            raise TopologyError(f"self-loop at satellite {a}")
        if not (0 <= a < n_sats and 0 <= b < n_sats):
            raise TopologyError(f"edge ({a}, {b}) outside 0..{n_sats - 1}")
        normalized.add((min(a, b), max(a, b)))
    if not _is_connected(n_sats, normalized):
        raise TopologyError(f"{kind} topology over {n_sats} satellites is disconnected")
    topology = IslTopology(kind=kind, n_sats=n_sats, edges=frozenset(normalized))
    logger.debug(f"Built {kind} topology, degrees {topology.degrees().tolist()}")
    return topology


def transmit_mask(delta: np.ndarray) -> np.ndarray:
    """U x U x S mask of the non-zero entries g[u, l, i] (l served by i)."""
    S, U = delta.shape
    return np.broadcast_to(delta.T.astype(bool)[None, :, :], (U, U, S))


def pack_gains(g: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Flatten the entries of a consensus copy that are not scheduler zeros."""
    return np.asarray(g)[transmit_mask(delta)].copy()


def unpack_gains(values: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Inverse of pack_gains; scheduler-zero entries come back as exact zeros."""
    mask = transmit_mask(delta)
    out = np.zeros(mask.shape, dtype=complex)
    out[mask] = values
    return out


@dataclass(frozen=True)
class ConsensusMessage:
    """Packed consensus copy sent from one satellite to a neighbor."""
    sender: int
    receiver: int
    round_index: int
    payload: np.ndarray

    @property
    def size(self) -> int:
        """Number of complex scalars carried."""
        return int(self.payload.size)


class IslChannel:
    """
    Lossless one-way link between two satellites.

    Messages sent during a round are held as pending and become receivable
    only after commit().
    """

    def __init__(self, sender: int, receiver: int):
        self.name = f"isl_{sender}->{receiver}"
        self.sender = sender
        self.receiver = receiver
        self._lock = threading.Lock()
        self._pending: List[ConsensusMessage] = []
        self._delivered: List[ConsensusMessage] = []

    def send(self, message: ConsensusMessage) -> None:
        with self._lock:
            self._pending.append(message)
        logger.debug(f"Queued {message.size} scalars on channel '{self.name}'")

    def commit(self) -> int:
        """Deliver pending messages; returns the number of scalars delivered."""
        with self._lock:
            delivered = sum(m.size for m in self._pending)
            self._delivered.extend(self._pending)
            self._pending = []
        return delivered

    def receive(self) -> Optional[ConsensusMessage]:
        """Latest delivered message, or None; clears the delivered buffer."""
        with self._lock:
            if not self._delivered:
                return None
            message = self._delivered[-1]
            self._delivered = []
        return message


class OverheadLedger(OverheadLedgerLike):
    """Complex scalars transmitted per satellite per consensus round."""

    def __init__(self, n_sats: int):
        self.n_sats = n_sats
        self.per_round: List[np.ndarray] = []

    def record(self, counts: np.ndarray) -> None:
        self.per_round.append(np.asarray(counts, dtype=np.int64).copy())

    @property
    def rounds(self) -> int:
        return len(self.per_round)

    @property
    def cumulative(self) -> np.ndarray:
        if not self.per_round:
            return np.zeros(self.n_sats, dtype=np.int64)
        return np.sum(self.per_round, axis=0)

    def last_round(self) -> np.ndarray:
        if not self.per_round:
            return np.zeros(self.n_sats, dtype=np.int64)
        return self.per_round[-1]


class IslNetwork:
    """
    Synchronous message passing over an ISL topology.

    One channel per directed edge. commit() is the round barrier: it
    delivers every pending message at once and, when counted, records the
    transmitted scalars per sender in the ledger.
    """

    def __init__(self, topology: IslTopology):
        self.topology = topology
        self.channels: Dict[Tuple[int, int], IslChannel] = {}
        for a, b in sorted(topology.edges):
            self.channels[(a, b)] = IslChannel(a, b)
            self.channels[(b, a)] = IslChannel(b, a)
        self.ledger = OverheadLedger(topology.n_sats)
        self.round_index = 0
        logger.info(f"ISL network over {topology.kind} topology with {len(self.channels)} channels")

    def send(self, sender: int, receiver: int, payload: np.ndarray) -> None:
        """Queue a packed payload on the link sender -> receiver.

        Raises:
            TopologyError: If the two satellites are not neighbors.
        """
        channel = self.channels.get((sender, receiver))
        if channel is None:
            raise TopologyError(f"no ISL between satellites {sender} and {receiver}")
        channel.send(ConsensusMessage(sender, receiver, self.round_index, payload))

    def broadcast(self, sender: int, payload: np.ndarray) -> None:
        """Send the same payload to every neighbor of sender."""
        for receiver in self.topology.neighbors(sender):
            self.send(sender, receiver, payload)

    def commit(self, counted: bool = True) -> np.ndarray:
        """Round barrier; returns the scalars sent per satellite."""
        counts = np.zeros(self.topology.n_sats, dtype=np.int64)
        for (sender, _), channel in self.channels.items():
            counts[sender] += channel.commit()
        if counted:
            self.ledger.record(counts)
        self.round_index += 1
        return counts

    def receive(self, receiver: int) -> Dict[int, np.ndarray]:
        """Payloads delivered to receiver, keyed by sender."""
        inbox: Dict[int, np.ndarray] = {}
        for sender in self.topology.neighbors(receiver):
            message = self.channels[(sender, receiver)].receive()
            if message is not None:
                inbox[sender] = message.payload
        return inbox


def overhead_formula(topology: IslTopology, mask: SchedulingMask) -> np.ndarray:
    """Closed-form per-round overhead |G_s| |U_s| S U per satellite."""
    return (topology.degrees() * mask.served_count() * mask.n_sats * mask.n_uts).astype(np.int64)


def packed_overhead(topology: IslTopology, mask: SchedulingMask) -> np.ndarray:
    """Scalars actually sent per round: |G_s| U sum_i |U_i| per satellite.

    Equals overhead_formula whenever every satellite serves the same number
    of users, which is the case for CS and RS scheduling.
    """
    return (topology.degrees() * mask.n_uts * int(mask.served_count().sum())).astype(np.int64)


def check_overhead_layout(topology: IslTopology, mask: SchedulingMask) -> np.ndarray:
    """Per-round overhead of the mask, which must equal |G_s| |U_s| S U.

    Raises:
        OverheadMismatchError: If the packed messages would differ from the
            closed form, which happens when served-set sizes are unequal.
    """
    formula = overhead_formula(topology, mask)
    packed = packed_overhead(topology, mask)
    if not np.array_equal(formula, packed):
        raise OverheadMismatchError(
            f"served-set sizes {mask.served_count().tolist()} give per-round messages "
            f"{packed.tolist()} instead of {formula.tolist()}"
        )
    return formula


def overhead_report(ledger: OverheadLedger, topology: IslTopology,
                    mask: SchedulingMask) -> List[Dict[str, int]]:
    """Per-satellite overhead table comparing the formula with the counts.

    Raises:
        OverheadMismatchError: If the mask cannot match the closed form or
            any counted round differs from it.
    """
    formula = check_overhead_layout(topology, mask)
    for index, counts in enumerate(ledger.per_round):
        if not np.array_equal(counts, formula):
            raise OverheadMismatchError(
                f"round {index}: counted {counts.tolist()} != closed form {formula.tolist()}"
            )
    cumulative = ledger.cumulative
    rows = []
    for s in range(topology.n_sats):
        rows.append({
            "sat": s,
            "degree": int(topology.degrees()[s]),
            "served": int(mask.served_count()[s]),
            "per_round_formula": int(formula[s]),
            "per_round_counted": int(ledger.last_round()[s]),
            "cumulative": int(cumulative[s]),
            "rounds": ledger.rounds,
        })
    return rows
