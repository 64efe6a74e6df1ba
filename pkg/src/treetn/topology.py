"""Tree bookkeeping for bond-labelled tensor networks.

A network over ``N`` sites has ``Nt = N - 2`` three-leg tensors and
``2 Nt + 1`` bonds labelled ``0 .. 2 Nt``. Labels below ``N`` are physical
(bare sites); the rest are auxiliary. Each tensor stores a triple
``(e1, e2, e3)``; the canonical center is the unique bond appearing as the
third slot of exactly two tensors.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import InvariantViolation

__all__ = [
    "Topology",
    "set_distance",
    "candidate_edge_indices",
    "local_two_tensor",
    "build_mpn",
    "build_pbt",
    "build_initial_topology",
    "subtree_sites",
    "region_sites",
    "audit_topology",
]


@dataclass
class Topology:
    """Edge-label bookkeeping for a tree of three-leg tensors."""

    n_sites: int
    edges: list[list[int]]
    center: int
    origin: int = field(default=-1)

    def __post_init__(self):
        if self.origin < 0:
            self.origin = self.center

    @property
    def n_tensors(self) -> int:
        return len(self.edges)

    @property
    def n_bonds(self) -> int:
        return 2 * self.n_tensors + 1

    @property
    def bonds(self) -> range:
        return range(self.n_bonds)

    def is_physical(self, bond: int) -> bool:
        return 0 <= bond < self.n_sites

    def auxiliary_bonds(self) -> list[int]:
        return list(range(self.n_sites, self.n_bonds))

    def center_tensors(self) -> tuple[int, int]:
        """The unique pair of tensors sharing the canonical center in slot 3."""
        pair = [i for i, e in enumerate(self.edges) if e[2] == self.center]
        if len(pair) != 2:
            raise InvariantViolation(
                f"canonical center {self.center} owned by {len(pair)} tensors"
            )
        return pair[0], pair[1]

    def tensors_of_bond(self, bond: int) -> list[int]:
        return [i for i, e in enumerate(self.edges) if bond in e]

    def defining_tensor(self, bond: int) -> int:
        """The tensor whose third slot is ``bond`` (away-from-center side)."""
        owners = [i for i, e in enumerate(self.edges) if e[2] == bond]
        if len(owners) != 1:
            raise InvariantViolation(f"bond {bond} has {len(owners)} slot-3 owners")
        return owners[0]

    def copy(self) -> "Topology":
        return Topology(
            n_sites=self.n_sites,
            edges=[list(e) for e in self.edges],
            center=self.center,
            origin=self.origin,
        )

    def snapshot(self) -> tuple[tuple[int, int, int], ...]:
        return tuple(tuple(e) for e in self.edges)

    def shape_snapshot(self) -> tuple[tuple[int, ...], ...]:
        """Slot-order-free form: each tensor's bond labels sorted. Invariant
        under center relocation, changed only by actual reconnection."""
        return tuple(tuple(sorted(e)) for e in self.edges)

    def to_graph_lines(self) -> str:
        return "".join(f"{e[0]} {e[1]} {e[2]}\n" for e in self.edges)

    @classmethod
    def from_graph_lines(cls, text: str, n_sites: int) -> "Topology":
        edges = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise InvariantViolation(f"malformed graph line: {line!r}")
            edges.append([int(p) for p in parts])
        center = _find_center(edges)
        return cls(n_sites=n_sites, edges=edges, center=center)


def _find_center(edges) -> int:
    seen: dict[int, int] = {}
    for e in edges:
        seen[e[2]] = seen.get(e[2], 0) + 1
    centers = [b for b, c in seen.items() if c == 2]
    if len(centers) != 1:
        raise InvariantViolation(f"expected one shared slot-3 bond, found {centers}")
    return centers[0]


def bond_adjacency(topology: Topology) -> dict[int, set[int]]:
    """Bonds adjacent to each bond (sharing a tensor)."""
    adj: dict[int, set[int]] = {b: set() for b in topology.bonds}
    for e in topology.edges:
        for a in e:
            for b in e:
                if a != b:
                    adj[a].add(b)
    return adj


def set_distance(topology: Topology, root: int) -> dict[int, int]:
    """Breadth-first distances of every bond from ``root``.

    The distance counts the minimum number of tensors traversed.
    """
    if root not in topology.bonds:
        raise ValueError(f"root bond {root} out of range")
    adj = bond_adjacency(topology)
    dist = {root: 0}
    queue = deque([root])
    while queue:
        e = queue.popleft()
        for u in adj[e]:
            if u not in dist:
                dist[u] = dist[e] + 1
                queue.append(u)
    if len(dist) != topology.n_bonds:
        raise InvariantViolation("topology is disconnected")
    return dist


def candidate_edge_indices(
    topology: Topology, e_c: int, flags: dict[int, int]
) -> list[int]:
    """Unflagged bonds in slots 1-2 of the tensors whose slot 3 is ``e_c``.

    Returned in ascending label order.
    """
    cands = set()
    for e in topology.edges:
        if e[2] == e_c:
            cands.update(e[:2])
    return sorted(c for c in cands if flags[c] == 0)


def local_two_tensor(
    topology: Topology, e_c: int, flags: dict[int, int], distances: dict[int, int]
) -> tuple[int, int, int, int]:
    """Choose the next canonical center among the candidate bonds.

    Picks the first candidate (smallest label) of maximal distance and
    resolves the three surrounding tensors: ``t`` holds both the current and
    the next center, ``t_conn`` only the next, ``t_prev`` only the current.
    """
    cands = candidate_edge_indices(topology, e_c, flags)
    if not cands:
        raise InvariantViolation("no candidate bonds at the canonical center")
    d_max = max(distances[c] for c in cands)
    e_new = next(c for c in cands if distances[c] == d_max)
    t = t_conn = t_prev = -1
    for i, e in enumerate(topology.edges):
        has_c = e_c in e
        has_n = e_new in e
        if has_c and has_n:
            t = i
        elif has_n:
            t_conn = i
        elif has_c:
            t_prev = i
    if min(t, t_conn, t_prev) < 0:
        raise InvariantViolation(
            f"could not resolve tensors around bonds {e_c} -> {e_new}"
        )
    return e_new, t, t_conn, t_prev


def build_mpn(n_sites: int) -> Topology:
    """Chain-shaped network with the center on the middle auxiliary bond."""
    if n_sites < 4:
        raise ValueError(f"need at least 4 sites, got {n_sites}")
    n = n_sites
    nt = n - 2
    p = (nt - 1) // 2  # left tensor of the center pair
    edges: list[list[int]] = []
    for t in range(nt):
        if t == 0:
            edges.append([0, 1, n])
        elif t == nt - 1:
            edges.append([n - 2, n - 1, n + nt - 2])
        elif t <= p:
            edges.append([n + t - 1, t + 1, n + t])
        else:
            edges.append([n + t, t + 1, n + t - 1])
    return Topology(n_sites=n, edges=edges, center=n + p)


def build_pbt(n_sites: int) -> Topology:
    """Perfect binary tree over ``n_sites = 2**d`` leaves, center at the root."""
    if n_sites < 4 or n_sites & (n_sites - 1) != 0:
        raise ValueError(f"perfect binary tree needs a power-of-2 size, got {n_sites}")
    edges: list[list[int]] = []
    next_aux = [n_sites]

    def grow(lo: int, hi: int, parent: int | None) -> int:
        if hi - lo == 1:
            return lo
        mid = (lo + hi) // 2
        left = grow(lo, mid, None)
        right = grow(mid, hi, None)
        if parent is None:
            parent = next_aux[0]
            next_aux[0] += 1
        edges.append([left, right, parent])
        return parent

    half = n_sites // 2
    center = grow(0, half, None)
    grow(half, n_sites, center)
    return Topology(n_sites=n_sites, edges=edges, center=center)


def build_initial_topology(n_sites: int, kind: str = "mpn") -> Topology:
    """Initial network layout; falls back to the chain when a perfect
    binary tree is requested for a size that is not a power of two."""
    if n_sites < 4:
        raise ValueError(f"fewer than two tensors: n_sites={n_sites}")
    kind = kind.lower()
    if kind not in ("mpn", "pbt"):
        raise ValueError(f"unknown initial topology kind {kind!r}")
    if kind == "pbt" and n_sites & (n_sites - 1) == 0:
        return build_pbt(n_sites)
    return build_mpn(n_sites)


def subtree_sites(topology: Topology, bond: int, via_tensor: int) -> tuple[int, ...]:
    """Physical sites reachable from ``bond`` through ``via_tensor``,
    never crossing ``bond`` again. Sorted ascending."""
    if topology.is_physical(bond):
        return (bond,)
    sites: list[int] = []
    stack = [(bond, via_tensor)]
    seen = set()
    while stack:
        blocked, tensor = stack.pop()
        if tensor in seen:
            continue
        seen.add(tensor)
        for leg in topology.edges[tensor]:
            if leg == blocked:
                continue
            if topology.is_physical(leg):
                sites.append(leg)
            else:
                for j in topology.tensors_of_bond(leg):
                    if j != tensor:
                        stack.append((leg, j))
    return tuple(sorted(sites))


def region_sites(topology: Topology, bond: int) -> tuple[int, ...]:
    """Sites renormalized into ``bond`` by its defining (slot-3) tensor."""
    if topology.is_physical(bond):
        return (bond,)
    return subtree_sites(topology, bond, topology.defining_tensor(bond))


def audit_topology(topology: Topology) -> None:
    """Validate connectivity, acyclicity, label ranges, and the center rule.

    Raises InvariantViolation on the first failed check.
    """
    n, nt = topology.n_sites, topology.n_tensors
    if nt != n - 2:
        raise InvariantViolation(f"expected {n - 2} tensors, found {nt}")
    slot3_count: dict[int, int] = {}
    usage: dict[int, int] = {b: 0 for b in topology.bonds}
    for e in topology.edges:
        if len(set(e)) != 3:
            raise InvariantViolation(f"repeated bond label within tensor: {e}")
        for b in e:
            if not 0 <= b < topology.n_bonds:
                raise InvariantViolation(f"bond label {b} out of range")
            usage[b] += 1
        slot3_count[e[2]] = slot3_count.get(e[2], 0) + 1

    centers = [b for b, c in slot3_count.items() if c == 2]
    if centers != [topology.center]:
        raise InvariantViolation(
            f"canonical center mismatch: recorded {topology.center}, found {centers}"
        )
    if topology.is_physical(topology.center):
        raise InvariantViolation("canonical center on a physical bond")

    for b in topology.bonds:
        expected = 1 if topology.is_physical(b) else 2
        if usage[b] != expected:
            raise InvariantViolation(f"bond {b} used {usage[b]} times, want {expected}")
        if not topology.is_physical(b) and b != topology.center:
            if slot3_count.get(b, 0) != 1:
                raise InvariantViolation(f"auxiliary bond {b} lacks a slot-3 owner")

    # connected and therefore acyclic, since edge count matches a tree
    set_distance(topology, topology.center)
