"""The flag-driven two-tensor sweep walk shared by all update modes.

One sweep starts and ends at the origin bond. Each step moves the canonical
center across the unflagged candidate bond of largest distance from the
origin, merges the two adjacent tensors, optionally updates the merged
tensor (eigensolver or environment embedding), and decomposes it back with
structural selection. A bond's flag is raised once the subtree behind it is
complete, which steers the walk over every tensor and back to the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvariantViolation
from .state import (
    PAIRINGS,
    ReconnectChoice,
    TTNState,
    decompose_tensor,
    merge_center,
    merge_moving,
    site_ee,
)
from .topology import candidate_edge_indices, local_two_tensor, set_distance

__all__ = ["SelectionSettings", "SweepReport", "StepInfo", "run_sweep"]


@dataclass
class SelectionSettings:
    """Bond dimension cap and structural-selection knobs for one sweep."""

    chi: int
    mode: int = 0
    temperature: float = 0.0
    rng: np.random.Generator | None = None
    eps_s: float = 1e-8
    sigma: float = 0.0
    delta_s: float = 1e-8


@dataclass
class SweepReport:
    """Per-bond quantities recorded along one sweep."""

    energies: dict[int, float] = field(default_factory=dict)
    entropies: dict[int, float] = field(default_factory=dict)
    truncation_errors: dict[int, float] = field(default_factory=dict)
    fidelities: dict[int, float] = field(default_factory=dict)
    structure_snapshot: tuple = ()


@dataclass
class StepInfo:
    """Everything an observer needs about one completed sweep step."""

    e_c: int
    e_new: int
    t: int
    t_conn: int
    t_prev: int | None
    merge_bonds: tuple[int, int, int, int]
    center_bonds: tuple[int, int, int, int]
    choice: ReconnectChoice
    psi_center: np.ndarray
    extras: dict


UpdateFn = Callable[[np.ndarray, "StepInfo"], tuple[np.ndarray, dict]]
PrepareFn = Callable[[TTNState, int, int], None]
Observer = Callable[[TTNState, StepInfo], None]


def run_sweep(
    state: TTNState,
    selection: SelectionSettings,
    update_psi: UpdateFn | None = None,
    prepare_step: PrepareFn | None = None,
    observers: Sequence[Observer] = (),
) -> SweepReport:
    """Execute one full sweep and return the recorded bond quantities.

    ``prepare_step(state, tensor_prev, e_c)`` runs before each merge, after
    the previously updated tensor is known (operator-cache refresh hook).
    ``update_psi(psi, info)`` replaces the merged tensor (Lanczos step,
    environment embedding); returning extras ``{"energy": E}`` or
    ``{"fidelity_scale": s}`` records them per bond.
    """
    topo = state.topology
    o_c = topo.origin
    if topo.center != o_c:
        raise InvariantViolation(
            f"sweep must start at the origin bond {o_c}, center is {topo.center}"
        )
    flags = {e: 1 if topo.is_physical(e) else 0 for e in topo.bonds}
    dist = set_distance(topo, o_c)
    report = SweepReport()

    if not candidate_edge_indices(topo, o_c, flags):
        # two-tensor networks have no walk; update the center pair in place
        _static_step(state, selection, update_psi, observers, report)
        report.structure_snapshot = topo.snapshot()
        return report

    e_c = o_c
    steps = 0
    max_steps = 4 * topo.n_tensors
    while candidate_edge_indices(topo, e_c, flags):
        steps += 1
        if steps > max_steps:
            raise InvariantViolation(
                f"sweep did not terminate within {max_steps} steps"
            )
        e_new, t, t_conn, t_prev = local_two_tensor(topo, e_c, flags, dist)
        prev_children = topo.edges[t_prev][:2]
        if all(flags[e] == 1 for e in prev_children) and e_c != o_c:
            flags[e_c] = 1
        if prepare_step is not None:
            prepare_step(state, t_prev, e_c)

        psi, new_et = merge_moving(state, t, t_conn, e_c, e_new)
        merge_bonds = (new_et[0], new_et[1], *topo.edges[t_conn][:2])
        info = StepInfo(
            e_c=e_c,
            e_new=e_new,
            t=t,
            t_conn=t_conn,
            t_prev=t_prev,
            merge_bonds=merge_bonds,
            center_bonds=merge_bonds,
            choice=None,
            psi_center=psi,
            extras={},
        )
        if update_psi is not None:
            psi, info.extras = update_psi(psi, info)

        _decompose_and_record(
            state, psi, t, t_conn, e_new, merge_bonds, selection, info, report
        )
        for obs in observers:
            obs(state, info)
        e_c = e_new
        dist = set_distance(topo, o_c)

    if e_c != o_c:
        raise InvariantViolation(
            f"sweep terminated at bond {e_c}, expected the origin {o_c}"
        )
    report.structure_snapshot = topo.snapshot()
    return report


def _static_step(state, selection, update_psi, observers, report):
    topo = state.topology
    t, t_conn = topo.center_tensors()
    psi = merge_center(state, t, t_conn)
    merge_bonds = (*topo.edges[t][:2], *topo.edges[t_conn][:2])
    info = StepInfo(
        e_c=topo.center,
        e_new=topo.center,
        t=t,
        t_conn=t_conn,
        t_prev=None,
        merge_bonds=merge_bonds,
        center_bonds=merge_bonds,
        choice=None,
        psi_center=psi,
        extras={},
    )
    if update_psi is not None:
        psi, info.extras = update_psi(psi, info)
    _decompose_and_record(
        state, psi, t, t_conn, topo.center, merge_bonds, selection, info, report
    )
    for obs in observers:
        obs(state, info)


def _decompose_and_record(
    state, psi, t, t_conn, e_new, merge_bonds, selection, info, report
):
    topo = state.topology
    v_left, weights, v_right, choice = decompose_tensor(
        psi,
        selection.chi,
        mode=selection.mode,
        temperature=selection.temperature,
        rng=selection.rng,
        eps_s=selection.eps_s,
        sigma=selection.sigma,
        delta_s=selection.delta_s,
    )
    perm = PAIRINGS[choice.pairing]
    state.tensors[t] = v_left
    state.tensors[t_conn] = v_right
    state.center_weights = weights
    topo.edges[t] = [merge_bonds[perm[0]], merge_bonds[perm[1]], e_new]
    topo.edges[t_conn] = [merge_bonds[perm[2]], merge_bonds[perm[3]], e_new]
    topo.center = e_new

    info.choice = choice
    info.center_bonds = tuple(merge_bonds[p] for p in perm)
    info.psi_center = merge_center(state, t, t_conn)

    err = choice.truncation_errors[choice.pairing]
    report.entropies[e_new] = choice.selected_entropy
    report.truncation_errors[e_new] = err
    if "energy" in info.extras:
        report.energies[e_new] = info.extras["energy"]
    if "fidelity_scale" in info.extras:
        report.fidelities[e_new] = info.extras["fidelity_scale"] * math.sqrt(
            max(0.0, 1.0 - err)
        )
    for axis, bond in enumerate(info.center_bonds):
        if topo.is_physical(bond):
            report.entropies[bond] = site_ee(info.psi_center, axis)
