"""Renormalized-operator machinery for the ground-state engine.

A cache holds, per bond, the renormalized spin operators of every physical
site inside the bond's region and, per auxiliary bond, the intra-region
Hamiltonian projected into the kept basis. Only ``z`` and ``+`` matrices are
stored; lowering operators come from the conjugate transpose. Single-site
squared operators are renormalized only as part of a block Hamiltonian,
never as standalone matrices, so products survive truncation exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import InvariantViolation
from .spinmodel import SpinModel
from .state import TTNState

__all__ = [
    "OperatorCache",
    "init_cache",
    "get_operator",
    "renormalize_spin",
    "build_block_interaction",
    "build_block_two_child",
    "project_block_h",
    "refresh_bond",
    "SuperblockPlan",
    "build_superblock_plan",
]


@dataclass
class OperatorCache:
    """Renormalized spin operators per bond and block Hamiltonians."""

    spin_ops: dict[int, dict[int, dict[str, np.ndarray]]] = field(default_factory=dict)
    block_h: dict[int, np.ndarray] = field(default_factory=dict)
    sites: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def dimension(self, bond: int) -> int:
        ops = self.spin_ops[bond]
        return next(iter(ops.values()))["z"].shape[0]


def init_cache(model: SpinModel) -> OperatorCache:
    """Bare operators and single-site Hamiltonians on the physical bonds."""
    cache = OperatorCache()
    for r in range(model.n_sites):
        cache.spin_ops[r] = {r: model.bare_operators(r)}
        cache.sites[r] = (r,)
        h = _site_block(model, cache, r)
        if h is not None:
            cache.block_h[r] = h
    return cache


def get_operator(cache: OperatorCache, bond: int, site: int, kind: str) -> np.ndarray:
    """Fetch or derive a renormalized operator on ``bond`` for ``site``."""
    base = cache.spin_ops[bond][site]
    if kind == "z":
        return base["z"]
    if kind == "+":
        return base["+"]
    if kind == "-":
        return base["+"].conj().T
    if kind == "x":
        return (base["+"] + base["+"].conj().T) / 2
    if kind == "y":
        return (base["+"] - base["+"].conj().T) / 2j
    if kind == "z2":
        if bond != site:
            raise InvariantViolation(
                "squared operators are only available on bare bonds"
            )
        return base["z"] @ base["z"]
    raise ValueError(f"unknown operator kind {kind!r}")


def _site_block(model: SpinModel, cache: OperatorCache, site: int):
    terms = model.site_terms.get(site)
    if not terms:
        return None
    dim = model.site_dimension(site)
    h = np.zeros((dim, dim), dtype=model.dtype)
    for kind, coef in terms:
        h += coef * get_operator(cache, site, site, kind)
    return h


def renormalize_spin(op: np.ndarray, v: np.ndarray, child_slot: int) -> np.ndarray:
    """Project an operator on one child leg into the parent bond basis."""
    if child_slot == 1:
        if op.shape[0] != v.shape[0]:
            raise InvariantViolation(
                f"operator dim {op.shape[0]} vs slot-1 dim {v.shape[0]}"
            )
        return np.einsum("aec,ab,bed->cd", v.conj(), op, v, optimize=True)
    if child_slot == 2:
        if op.shape[0] != v.shape[1]:
            raise InvariantViolation(
                f"operator dim {op.shape[0]} vs slot-2 dim {v.shape[1]}"
            )
        return np.einsum("eac,ab,ebd->cd", v.conj(), op, v, optimize=True)
    raise ValueError(f"child_slot must be 1 or 2, got {child_slot}")


def _cross_rows(model: SpinModel, sites_a, sites_b):
    """Coupling rows between two disjoint regions, grouped by operator kinds.

    Yields ``(kind_a, kind_b) -> list of (site_a, site_b, coef)`` entries
    oriented so the first kind acts on the first region.
    """
    groups: dict[tuple[str, str], list[tuple[int, int, complex]]] = {}
    set_b = set(sites_b)
    for ia in sites_a:
        for jb in sites_b:
            key = (ia, jb) if ia < jb else (jb, ia)
            terms = model.pair_terms.get(key)
            if not terms:
                continue
            for k1, k2, coef in terms:
                if ia < jb:
                    groups.setdefault((k1, k2), []).append((ia, jb, coef))
                else:
                    groups.setdefault((k2, k1), []).append((ia, jb, coef))
    if set(sites_a) & set_b:
        raise InvariantViolation("regions overlap; coupling assembly is ambiguous")
    return groups


def build_block_interaction(
    model: SpinModel, cache: OperatorCache, e_left: int, e_right: int
) -> np.ndarray:
    """All Hamiltonian terms coupling the two regions, as a dense matrix on
    the product space (left-region index fastest-varying last)."""
    sites_l = cache.sites[e_left]
    sites_r = cache.sites[e_right]
    dim_l = cache.dimension(e_left)
    dim_r = cache.dimension(e_right)
    h = np.zeros((dim_l * dim_r, dim_l * dim_r), dtype=model.dtype)
    for (ka, kb), rows in _cross_rows(model, sites_l, sites_r).items():
        for sa, sb, coef in rows:
            a = get_operator(cache, e_left, sa, ka)
            b = get_operator(cache, e_right, sb, kb)
            h += coef * np.kron(a, b)
    return h


def build_block_two_child(
    model: SpinModel, cache: OperatorCache, e_left: int, e_right: int
):
    """Intra-region Hamiltonian of the two-child space: both child blocks
    lifted by identities plus every cross coupling. Returns None when no
    term touches the region."""
    dim_l = cache.dimension(e_left)
    dim_r = cache.dimension(e_right)
    pieces = []
    if e_left in cache.block_h:
        pieces.append(np.kron(cache.block_h[e_left], np.eye(dim_r)))
    if e_right in cache.block_h:
        pieces.append(np.kron(np.eye(dim_l), cache.block_h[e_right]))
    cross = build_block_interaction(model, cache, e_left, e_right)
    if np.any(cross):
        pieces.append(cross)
    if not pieces:
        return None
    h = pieces[0]
    for p in pieces[1:]:
        h = h + p
    return h.astype(model.dtype, copy=False)


def project_block_h(h_two_child: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Project a two-child-space Hamiltonian through an isometry."""
    d1, d2, k = v.shape
    if h_two_child.shape != (d1 * d2, d1 * d2):
        raise InvariantViolation(
            f"block shape {h_two_child.shape} vs isometry {(d1 * d2,)}"
        )
    w = v.reshape(d1 * d2, k)
    return w.conj().T @ h_two_child @ w


def refresh_bond(
    cache: OperatorCache, model: SpinModel, state: TTNState, tensor_idx: int
) -> None:
    """Renormalize operators and block Hamiltonian through one isometry
    into its slot-3 bond."""
    e1, e2, e3 = state.topology.edges[tensor_idx]
    v = state.tensors[tensor_idx]
    new_ops: dict[int, dict[str, np.ndarray]] = {}
    for slot, e in ((1, e1), (2, e2)):
        for r, ops in cache.spin_ops[e].items():
            new_ops[r] = {
                key: renormalize_spin(op, v, slot) for key, op in ops.items()
            }
    cache.spin_ops[e3] = new_ops
    cache.sites[e3] = tuple(sorted(cache.sites[e1] + cache.sites[e2]))
    h = build_block_two_child(model, cache, e1, e2)
    if h is None:
        cache.block_h.pop(e3, None)
    else:
        cache.block_h[e3] = project_block_h(h, v)


def _apply_axis(phi: np.ndarray, m: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(m, phi, axes=[[1], [axis]])
    return np.moveaxis(out, 0, axis)


@dataclass
class SuperblockPlan:
    """Precombined term list for repeatedly applying the superblock
    Hamiltonian to a 4-leg tensor without forming the dense matrix."""

    single: list[tuple[int, np.ndarray]]
    double: list[tuple[int, int, np.ndarray, np.ndarray]]
    dtype: np.dtype

    def apply(self, phi: np.ndarray) -> np.ndarray:
        out = np.zeros(phi.shape, dtype=np.result_type(phi.dtype, self.dtype))
        for axis, m in self.single:
            out += _apply_axis(phi, m, axis)
        for ax_a, ax_b, ma, mb in self.double:
            out += _apply_axis(_apply_axis(phi, mb, ax_b), ma, ax_a)
        return out


def build_superblock_plan(
    model: SpinModel, cache: OperatorCache, leg_bonds
) -> SuperblockPlan:
    """Assemble the superblock Hamiltonian around four bonds.

    Couplings between two legs are grouped by operator kind; within a group
    the sum over the larger region is folded into a single matrix first, so
    each group costs ``min(g, g')`` two-leg applications.
    """
    single = [
        (axis, cache.block_h[b])
        for axis, b in enumerate(leg_bonds)
        if b in cache.block_h
    ]
    double: list[tuple[int, int, np.ndarray, np.ndarray]] = []
    for ax_a, ax_b in combinations(range(4), 2):
        ba, bb = leg_bonds[ax_a], leg_bonds[ax_b]
        groups = _cross_rows(model, cache.sites[ba], cache.sites[bb])
        for (ka, kb), rows in groups.items():
            sites_a = sorted({r[0] for r in rows})
            sites_b = sorted({r[1] for r in rows})
            if len(sites_a) <= len(sites_b):
                for sa in sites_a:
                    mb = sum(
                        coef * get_operator(cache, bb, sb, kb)
                        for s, sb, coef in rows
                        if s == sa
                    )
                    double.append(
                        (ax_a, ax_b, get_operator(cache, ba, sa, ka), mb)
                    )
            else:
                for sb in sites_b:
                    ma = sum(
                        coef * get_operator(cache, ba, sa, ka)
                        for sa, s, coef in rows
                        if s == sb
                    )
                    double.append(
                        (ax_a, ax_b, ma, get_operator(cache, bb, sb, kb))
                    )
    return SuperblockPlan(single=single, double=double, dtype=model.dtype)
