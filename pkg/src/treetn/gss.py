"""Variational ground-state search with adaptive network structure.

The search initializes tensors leaf-to-root by keeping the lowest block
eigenvectors (degeneracy-aware), solves the origin-bond superblock with
Lanczos, then runs flag-driven two-tensor sweeps with optional structural
reconnection, staged over an ascending bond-dimension schedule.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import InvariantViolation
from .linalg import full_eigh, lanczos_lowest
from .operators import (
    OperatorCache,
    build_block_two_child,
    build_superblock_plan,
    get_operator,
    init_cache,
    refresh_bond,
)
from .spinmodel import SpinModel, local_spin_matrices
from .state import TTNState, cooled_temperature, decompose_tensor
from .sweeps import SelectionSettings, StepInfo, SweepReport, run_sweep
from .topology import Topology, build_initial_topology, set_distance

__all__ = [
    "GssConfig",
    "GssResult",
    "StageResult",
    "Observables",
    "initialize_ttn",
    "sweep",
    "run",
    "one_site_expectations",
    "two_site_correlations",
    "ObservableCollector",
    "CORRELATION_ORDER",
]

# column order of the two-site correlation components
CORRELATION_ORDER = ("xx", "yy", "zz", "yz", "zy", "zx", "xz", "xy", "yx")


@dataclass
class GssConfig:
    """Numerical settings for one ground-state search."""

    chi_init: int
    chi_schedule: list[int]
    sweep_limits: list[int]
    init_tree: str = "mpn"
    opt_mode: int = 0
    t0: float = 0.0
    n_tau: int | None = None
    seed: int = 0
    eps_e: float = 1e-8
    eps_s: float = 1e-8
    delta_e: float = 1e-8
    delta_s: float = 1e-8
    convergence_streak: int = 2
    lanczos_tol: float = 1e-12
    max_krylov: int = 200
    lanczos_noise: float = 1e-7

    def __post_init__(self):
        if len(self.chi_schedule) != len(self.sweep_limits):
            raise ValueError("bond-dimension and sweep-limit lists differ in length")
        if any(b <= a for a, b in zip(self.chi_schedule, self.chi_schedule[1:])):
            raise ValueError("bond-dimension schedule must be strictly ascending")
        for name in ("eps_e", "eps_s", "delta_e", "delta_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_tau is None:
            self.n_tau = max(1, self.sweep_limits[0] // 2)


@dataclass
class Observables:
    """Single-site moments and two-site correlations from one pass."""

    single: dict[int, tuple[float, float, float]] = field(default_factory=dict)
    pairs: dict[tuple[int, int], dict[str, float]] = field(default_factory=dict)
    energy: float | None = None


@dataclass
class StageResult:
    chi: int
    reports: list[SweepReport]
    final_report: SweepReport
    observables: Observables | None = None
    converged: bool = False


@dataclass
class GssResult:
    state: TTNState
    cache: OperatorCache
    stages: list[StageResult]
    initial_energy: float

    @property
    def energy(self) -> float:
        rep = self.stages[-1].final_report
        return rep.energies[self.state.topology.origin]

    @property
    def observables(self) -> Observables | None:
        return self.stages[-1].observables


def degenerate_keep_count(eigenvalues: np.ndarray, chi: int, delta_e: float) -> int:
    """Number of lowest eigenvectors to keep without splitting a multiplet.

    Walks the cut down while the boundary gap is below ``delta_e``; if the
    walk exhausts the spectrum the hard cap wins with a warning.
    """
    dim = len(eigenvalues)
    m = min(chi, dim)
    if m == dim:
        return m
    while m > 0 and abs(eigenvalues[m] - eigenvalues[m - 1]) < delta_e:
        m -= 1
    if m == 0:
        warnings.warn(
            "degenerate block multiplet exceeds the initial bond dimension; "
            f"keeping {min(chi, dim)} states of a tied group",
            RuntimeWarning,
            stacklevel=2,
        )
        m = min(chi, dim)
    return m


def _perturb(psi: np.ndarray, scale: float) -> np.ndarray:
    """Mix a fixed pseudo-random direction into a normalized vector.

    Symmetric Hamiltonians trap an exactly symmetric start vector in its
    invariant subspace, where Lanczos converges to an excited sector; a tiny
    deterministic admixture lets the solver reach the true ground state
    while changing the Rayleigh quotient only at second order.
    """
    if scale <= 0.0:
        return psi
    rng = np.random.Generator(np.random.Philox(0x5EED))
    noise = rng.standard_normal(psi.shape)
    if np.iscomplexobj(psi):
        noise = noise + 1j * rng.standard_normal(psi.shape)
    noise /= np.linalg.norm(noise)
    out = psi + scale * noise.astype(psi.dtype)
    return out / np.linalg.norm(out)


def _rsrg_isometry(model, cache, e1, e2, chi_init, delta_e):
    d1 = cache.dimension(e1)
    d2 = cache.dimension(e2)
    h = build_block_two_child(model, cache, e1, e2)
    if h is None:
        h = np.zeros((d1 * d2, d1 * d2), dtype=model.dtype)
    spec = full_eigh(h)
    keep = degenerate_keep_count(spec.eigenvalues, chi_init, delta_e)
    return spec.eigenvectors[:, :keep].reshape(d1, d2, keep).astype(model.dtype)


def initialize_ttn(
    model: SpinModel,
    topology: Topology,
    chi_init: int,
    delta_e: float = 1e-8,
    delta_s: float = 1e-8,
    lanczos_tol: float = 1e-12,
    max_krylov: int = 200,
    lanczos_noise: float = 1e-7,
) -> tuple[TTNState, OperatorCache, float]:
    """Real-space renormalization-group initialization.

    Isometries are chosen leaf-to-root as the lowest block-Hamiltonian
    eigenvectors with degeneracy-aware counts; the origin-bond superblock is
    then solved by Lanczos and split by SVD to place the center weights.
    Returns the state, the populated operator cache, and the initial energy.
    """
    cache = init_cache(model)
    dist = set_distance(topology, topology.origin)
    state = TTNState(
        topology=topology,
        tensors=[None] * topology.n_tensors,  # type: ignore[list-item]
        center_weights=np.ones(1),
    )
    p, q = topology.center_tensors()
    sequence = sorted(
        (i for i in range(topology.n_tensors) if i not in (p, q)),
        key=lambda i: (-dist[topology.edges[i][2]], topology.edges[i][2]),
    )
    for i in sequence:
        e1, e2, _ = topology.edges[i]
        state.tensors[i] = _rsrg_isometry(model, cache, e1, e2, chi_init, delta_e)
        refresh_bond(cache, model, state, i)

    for i in (p, q):
        e1, e2, _ = topology.edges[i]
        state.tensors[i] = _rsrg_isometry(model, cache, e1, e2, chi_init, delta_e)

    legs = (*topology.edges[p][:2], *topology.edges[q][:2])
    plan = build_superblock_plan(model, cache, legs)
    k = min(state.tensors[p].shape[2], state.tensors[q].shape[2])
    phi0 = np.tensordot(
        state.tensors[p][:, :, :k], state.tensors[q][:, :, :k], axes=[2, 2]
    )
    phi0 = _perturb(phi0 / np.linalg.norm(phi0), lanczos_noise)
    energy, psi = lanczos_lowest(plan.apply, phi0, max_krylov, lanczos_tol)

    v_p, weights, v_q, _ = decompose_tensor(
        psi, chi_init, mode=0, sigma=0.0, delta_s=delta_s
    )
    state.tensors[p] = v_p
    state.tensors[q] = v_q
    state.center_weights = weights
    return state, cache, energy


def sweep(
    state: TTNState,
    cache: OperatorCache,
    model: SpinModel,
    selection: SelectionSettings,
    lanczos_tol: float = 1e-12,
    max_krylov: int = 200,
    lanczos_noise: float = 1e-7,
    observers=(),
) -> SweepReport:
    """One ground-state sweep: cache refreshes plus Lanczos updates."""

    def prepare(state_, t_prev, _e_c):
        refresh_bond(cache, model, state_, t_prev)

    def update(psi, info: StepInfo):
        plan = build_superblock_plan(model, cache, info.merge_bonds)
        psi = _perturb(psi / np.linalg.norm(psi), lanczos_noise)
        energy, psi = lanczos_lowest(plan.apply, psi, max_krylov, lanczos_tol)
        return psi, {"energy": energy}

    return run_sweep(
        state, selection, update_psi=update, prepare_step=prepare, observers=observers
    )


def _structure_same(a: SweepReport, b: SweepReport) -> bool:
    return a.structure_snapshot == b.structure_snapshot


def _energies_converged(prev, cur, eps_e) -> bool:
    shared = prev.energies.keys() & cur.energies.keys()
    return all(
        abs(1.0 - prev.energies[b] / cur.energies[b]) < eps_e for b in shared
    )


def _entropies_converged(prev, cur, eps_s) -> bool:
    shared = prev.entropies.keys() & cur.entropies.keys()
    return all(abs(cur.entropies[b] - prev.entropies[b]) < eps_s for b in shared)


def run(
    model: SpinModel,
    config: GssConfig,
    observers=(),
    want_observables: bool = False,
) -> GssResult:
    """Full staged ground-state search.

    Structural optimization is active only during the first stage. When
    observables are requested, each stage ends with one extra fixed-structure
    sweep that collects them (the structure is frozen there by contract).
    """
    topology = build_initial_topology(model.n_sites, config.init_tree)
    state, cache, e_init = initialize_ttn(
        model,
        topology,
        config.chi_init,
        delta_e=config.delta_e,
        delta_s=config.delta_s,
        lanczos_tol=config.lanczos_tol,
        max_krylov=config.max_krylov,
        lanczos_noise=config.lanczos_noise,
    )
    rng = np.random.Generator(np.random.Philox(config.seed))
    stages: list[StageResult] = []
    for m, (chi, n_max) in enumerate(zip(config.chi_schedule, config.sweep_limits), 1):
        mode = config.opt_mode if m == 1 else 0
        reports: list[SweepReport] = []
        streak = 0
        converged = False
        prev: SweepReport | None = None
        for n in range(n_max):
            temp = 0.0
            if mode == 1 and config.t0 > 0.0:
                temp = cooled_temperature(config.t0, n, config.n_tau)
            sel = SelectionSettings(
                chi=chi,
                mode=mode,
                temperature=temp,
                rng=rng,
                eps_s=config.eps_s,
                delta_s=config.delta_s,
            )
            rep = sweep(
                state,
                cache,
                model,
                sel,
                lanczos_tol=config.lanczos_tol,
                max_krylov=config.max_krylov,
                lanczos_noise=config.lanczos_noise,
                observers=observers,
            )
            reports.append(rep)
            if prev is not None:
                if _structure_same(prev, rep):
                    if _energies_converged(
                        prev, rep, config.eps_e
                    ) and _entropies_converged(prev, rep, config.eps_s):
                        streak += 1
                        if streak > config.convergence_streak:
                            converged = True
                else:
                    streak = 0
            prev = rep
            if converged:
                break

        observables = None
        final_report = reports[-1]
        if want_observables:
            collector = ObservableCollector(model, cache)
            sel = SelectionSettings(
                chi=chi, mode=0, eps_s=config.eps_s, delta_s=config.delta_s
            )
            final_report = sweep(
                state,
                cache,
                model,
                sel,
                lanczos_tol=config.lanczos_tol,
                max_krylov=config.max_krylov,
                lanczos_noise=config.lanczos_noise,
                observers=(*observers, collector.on_step),
            )
            reports.append(final_report)
            observables = collector.finish(
                final_report.energies[state.topology.origin]
            )
        stages.append(
            StageResult(
                chi=chi,
                reports=reports,
                final_report=final_report,
                observables=observables,
                converged=converged,
            )
        )
    return GssResult(state=state, cache=cache, stages=stages, initial_energy=e_init)


def _apply_axis(psi, m, axis):
    return np.moveaxis(np.tensordot(m, psi, axes=[[1], [axis]]), 0, axis)


def _real_expectation(value: complex, what: str) -> float:
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise InvariantViolation(f"{what} has imaginary part {value.imag:.3e}")
    return float(value.real)


def one_site_expectations(psi: np.ndarray, leg: int, spin_size: float):
    """Spin moments (x, y, z) of one physical leg of a center tensor."""
    sz, _, sx, sy = local_spin_matrices(spin_size)
    out = []
    for alpha, op in (("x", sx), ("y", sy), ("z", sz)):
        val = complex(np.vdot(psi, _apply_axis(psi, op, leg)))
        out.append(_real_expectation(val, f"<s^{alpha}>"))
    return tuple(out)


def two_site_correlations(
    psi: np.ndarray, leg_i: int, ops_i: dict, leg_j: int, ops_j: dict
):
    """All nine correlation components between operators on two legs.

    ``ops_i`` and ``ops_j`` map axis names to the operators of the two
    physical sites renormalized onto the respective legs. Component ``ab``
    means the ``a`` operator acting on site ``i`` and ``b`` on site ``j``.
    """
    out = {}
    for comp in CORRELATION_ORDER:
        a, b = comp
        val = complex(
            np.vdot(
                psi,
                _apply_axis(_apply_axis(psi, ops_j[b], leg_j), ops_i[a], leg_i),
            )
        )
        out[comp] = _real_expectation(val, f"<s^{a} s^{b}>")
    return out


class ObservableCollector:
    """Gathers one- and two-site expectations along a fixed-structure sweep.

    Each site is measured the first time it appears as a physical leg of the
    center tensor; each pair is measured the first time the two sites fall
    into different legs. The final step at the origin splits every remaining
    pair, so one sweep always achieves full coverage.
    """

    def __init__(self, model: SpinModel, cache: OperatorCache):
        self.model = model
        self.cache = cache
        self.single: dict[int, tuple[float, float, float]] = {}
        self.pairs: dict[tuple[int, int], dict[str, float]] = {}
        self._snapshot = None

    def on_step(self, state: TTNState, info: StepInfo):
        if self._snapshot is None:
            self._snapshot = state.topology.shape_snapshot()
        elif state.topology.shape_snapshot() != self._snapshot:
            raise InvariantViolation("structure changed during an observable pass")
        psi = info.psi_center
        bonds = info.center_bonds
        topo = state.topology
        for axis, b in enumerate(bonds):
            if topo.is_physical(b) and b not in self.single:
                self.single[b] = one_site_expectations(
                    psi, axis, self.model.spin_sizes[b]
                )
        for ax_a, ax_b in combinations(range(4), 2):
            sites_a = self.cache.sites[bonds[ax_a]]
            sites_b = self.cache.sites[bonds[ax_b]]
            for ra in sites_a:
                for rb in sites_b:
                    key = (ra, rb) if ra < rb else (rb, ra)
                    if key in self.pairs:
                        continue
                    if ra < rb:
                        leg_i, leg_j = ax_a, ax_b
                        site_i, site_j = ra, rb
                    else:
                        leg_i, leg_j = ax_b, ax_a
                        site_i, site_j = rb, ra
                    ops_i = {
                        k: get_operator(self.cache, bonds[leg_i], site_i, k)
                        for k in ("x", "y", "z")
                    }
                    ops_j = {
                        k: get_operator(self.cache, bonds[leg_j], site_j, k)
                        for k in ("x", "y", "z")
                    }
                    self.pairs[key] = two_site_correlations(
                        psi, leg_i, ops_i, leg_j, ops_j
                    )

    def finish(self, energy: float) -> Observables:
        n = self.model.n_sites
        missing_sites = set(range(n)) - self.single.keys()
        if missing_sites:
            raise InvariantViolation(f"sites never measured: {sorted(missing_sites)}")
        expected = {(i, j) for i in range(n) for j in range(i + 1, n)}
        missing = expected - self.pairs.keys()
        if missing:
            raise InvariantViolation(f"pairs never measured: {sorted(missing)[:5]}")
        extra = self.pairs.keys() - expected
        if extra:
            raise InvariantViolation(f"unexpected pair keys: {sorted(extra)[:5]}")
        return Observables(single=dict(self.single), pairs=dict(self.pairs), energy=energy)
