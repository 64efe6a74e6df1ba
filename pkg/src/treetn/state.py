"""Tree tensor network states in mixed canonical form.

Tensors are 3-index arrays ``v[i1, i2, i3]`` satisfying the isometric
condition: contracting the first two indices of ``v`` with its conjugate
yields the identity on the third. The singular-value vector lives on the
canonical center bond and sums to one in square.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .linalg import SingularSpectrum, entanglement_entropy, full_svd, truncate_spectrum
from .topology import Topology, set_distance, subtree_sites

__all__ = [
    "TTNState",
    "ReconnectChoice",
    "PAIRINGS",
    "merge_center",
    "merge_moving",
    "decompose_tensor",
    "site_ee",
    "cooled_temperature",
    "selection_probabilities",
    "isometry_defect",
    "audit_state",
    "to_dense",
    "dense_bipartition_entropy",
]

# the three ways to split the merged 4-leg tensor (p1 p2 q1 q2):
# axis groupings of the left factor; the right factor takes the rest
PAIRINGS = ((0, 1, 2, 3), (0, 3, 1, 2), (0, 2, 1, 3))
PAIRING_NAMES = ("p1p2|q1q2", "p1q2|p2q1", "p1q1|p2q2")


@dataclass
class ReconnectChoice:
    """Outcome of a structural selection among the three pairings."""

    pairing: int
    entropies: tuple[float, float, float]
    truncation_errors: tuple[float, float, float]
    selected_entropy: float
    probabilities: tuple[float, float, float] | None = None

    @property
    def name(self) -> str:
        return PAIRING_NAMES[self.pairing]


@dataclass
class TTNState:
    """Isometric tensors plus the center singular values and topology."""

    topology: Topology
    tensors: list[np.ndarray]
    center_weights: np.ndarray
    norm_scale: float = 1.0

    @property
    def dtype(self):
        return np.result_type(*(t.dtype for t in self.tensors))

    def bond_dimensions(self) -> dict[int, int]:
        dims: dict[int, int] = {}
        for e, t in zip(self.topology.edges, self.tensors):
            for label, d in zip(e, t.shape):
                prev = dims.get(label)
                if prev is not None and prev != d:
                    raise InvariantViolation(
                        f"bond {label} carries dims {prev} and {d}"
                    )
                dims[label] = d
        return dims

    def max_bond_dimension(self) -> int:
        return max(max(t.shape) for t in self.tensors)

    def copy(self) -> "TTNState":
        return TTNState(
            topology=self.topology.copy(),
            tensors=[t.copy() for t in self.tensors],
            center_weights=self.center_weights.copy(),
            norm_scale=self.norm_scale,
        )


def cooled_temperature(t0: float, n: int, n_tau: int) -> float:
    """Annealed selection temperature, halved every ``n_tau`` sweeps."""
    if t0 < 0:
        raise ValueError("temperature must be non-negative")
    if n_tau < 1:
        raise ValueError("decay interval must be at least 1")
    return float(2.0 ** (-n / n_tau) * t0)


def merge_center(state: TTNState, t: int, t_conn: int) -> np.ndarray:
    """Contract the two center tensors with the weights on the shared bond.

    Returns a 4-leg tensor indexed by (e1(t), e2(t), e1(t'), e2(t')).
    """
    et, ec = state.topology.edges[t], state.topology.edges[t_conn]
    if et[2] != ec[2] or et[2] != state.topology.center:
        raise InvariantViolation(
            f"tensors {t},{t_conn} do not share the canonical center"
        )
    a = state.tensors[t] * state.center_weights
    return np.tensordot(a, state.tensors[t_conn], axes=[2, 2])


def merge_moving(
    state: TTNState, t: int, t_conn: int, e_c: int, e_new: int
) -> tuple[np.ndarray, list[int]]:
    """Contract across ``e_new`` while absorbing the weights on ``e_c``.

    ``t`` is a center tensor (slot 3 = ``e_c``) holding ``e_new`` in a child
    slot; ``t_conn`` is the tensor pointing at ``t`` through ``e_new``. The
    child slot of ``t`` that held ``e_new`` is taken over by ``e_c``, so the
    merged tensor is indexed by the post-move legs
    (e1(t), e2(t), e1(t'), e2(t')). Returns the tensor and the new triple
    for ``t``.
    """
    et = state.topology.edges[t]
    ec = state.topology.edges[t_conn]
    if et[2] != e_c:
        raise InvariantViolation(f"tensor {t} does not point at bond {e_c}")
    if ec[2] != e_new:
        raise InvariantViolation(f"tensor {t_conn} does not point at bond {e_new}")
    weighted = state.tensors[t] * state.center_weights
    if et[0] == e_new:
        psi = np.tensordot(weighted, state.tensors[t_conn], axes=[0, 2])
        # axes now (e2(t), e_c, e1(t'), e2(t')) -> bring e_c first
        psi = psi.transpose(1, 0, 2, 3)
        new_et = [e_c, et[1], e_new]
    elif et[1] == e_new:
        psi = np.tensordot(weighted, state.tensors[t_conn], axes=[1, 2])
        new_et = [et[0], e_c, e_new]
    else:
        raise InvariantViolation(f"bond {e_new} is not a child of tensor {t}")
    return psi, new_et


def selection_probabilities(entropies, temperature: float) -> np.ndarray:
    """Heat-bath weights proportional to exp(-S / T), normalized to one."""
    s = np.asarray(entropies, dtype=float)
    w = np.exp(-(s - s.min()) / temperature)
    return w / w.sum()


def _choose_pairing(
    entropies: np.ndarray,
    trunc_errors: np.ndarray,
    mode: int,
    temperature: float,
    rng: np.random.Generator | None,
    eps_s: float,
) -> tuple[int, tuple[float, float, float] | None]:
    if mode == 0:
        return 0, None
    if mode == 1:
        if temperature > 0.0:
            if rng is None:
                raise ValueError("stochastic selection requires a random generator")
            probs = selection_probabilities(entropies, temperature)
            return int(rng.choice(3, p=probs)), tuple(probs)
        best = int(np.argmin(entropies))
        if abs(entropies[0] - entropies[best]) < eps_s:
            return 0, None
        return best, None
    if mode == 2:
        best = int(np.argmin(trunc_errors))
        tied = np.flatnonzero(trunc_errors - trunc_errors[best] < 1e-13)
        if len(tied) > 1:
            # secondary criterion: least entanglement among the tied set
            best = int(tied[np.argmin(entropies[tied])])
        return best, None
    raise ValueError(f"unknown structure-selection mode {mode}")


def decompose_tensor(
    psi: np.ndarray,
    chi: int,
    mode: int = 0,
    temperature: float = 0.0,
    rng: np.random.Generator | None = None,
    eps_s: float = 1e-8,
    sigma: float = 0.0,
    delta_s: float = 1e-8,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, ReconnectChoice]:
    """Split a normalized 4-leg tensor into two isometries and weights.

    All three index pairings are decomposed by full SVD; the kept structure
    is chosen by ``mode`` (0: keep the original split, 1: least entanglement,
    2: least truncation error). With ``mode == 1`` and a positive temperature
    the pairing is sampled with heat-bath probabilities. The kept spectrum is
    truncated to ``chi`` values (degeneracy-aware) and rescaled.

    Returns ``(v_left, weights, v_right, choice)`` where the left isometry
    carries the pairing's first two legs and the right one the other two.
    """
    if chi < 1:
        raise ValueError(f"bond dimension must be positive, got {chi}")
    if psi.ndim != 4:
        raise ValueError(f"expected a 4-leg tensor, got ndim={psi.ndim}")

    dims = psi.shape
    spectra: list[SingularSpectrum] = []
    entropies = np.empty(3)
    previews: list[tuple[SingularSpectrum, float]] = []
    for perm in PAIRINGS:
        mat = psi.transpose(perm).reshape(
            dims[perm[0]] * dims[perm[1]], dims[perm[2]] * dims[perm[3]]
        )
        spec = full_svd(mat)
        spectra.append(spec)
        entropies[len(spectra) - 1] = entanglement_entropy(spec.values)
        previews.append(truncate_spectrum(spec, chi, sigma=sigma, delta_s=delta_s))
    trunc_errors = np.array([p[1] for p in previews])

    pairing, probs = _choose_pairing(
        entropies, trunc_errors, mode, temperature, rng, eps_s
    )
    kept, error = previews[pairing]
    perm = PAIRINGS[pairing]
    chi_kept = kept.rank
    v_left = kept.left_vectors.reshape(dims[perm[0]], dims[perm[1]], chi_kept)
    v_right = np.moveaxis(
        kept.right_vectors.reshape(chi_kept, dims[perm[2]], dims[perm[3]]), 0, 2
    )
    choice = ReconnectChoice(
        pairing=pairing,
        entropies=tuple(entropies),
        truncation_errors=tuple(trunc_errors),
        selected_entropy=entanglement_entropy(kept.values),
        probabilities=probs,
    )
    return v_left, kept.values, v_right, choice


def site_ee(psi: np.ndarray, leg: int) -> float:
    """Entanglement entropy of one leg of a normalized 4-leg tensor.

    Diagonalizes the single-leg reduced density matrix obtained by tracing
    the other three legs.
    """
    if not 0 <= leg < psi.ndim:
        raise ValueError(f"leg {leg} out of range for ndim={psi.ndim}")
    others = [a for a in range(psi.ndim) if a != leg]
    rho = np.tensordot(psi, psi.conj(), axes=[others, others])
    lam = np.linalg.eigvalsh(rho)
    lam = lam[lam > 0.0]
    if lam.size == 0:
        return 0.0
    return float(-np.sum(lam * np.log(lam)))


def isometry_defect(tensor: np.ndarray) -> float:
    """Largest deviation from the isometric condition on the third leg."""
    w = tensor.reshape(-1, tensor.shape[2])
    gram = w.conj().T @ w
    return float(np.max(np.abs(gram - np.eye(tensor.shape[2]))))


def audit_state(
    state: TTNState,
    iso_tol: float = 1e-10,
    weight_tol: float = 1e-12,
    tensors: list[int] | None = None,
) -> None:
    """Check isometric conditions and weight normalization.

    ``tensors`` restricts the isometry check to a subset (used per sweep
    step, where only two tensors changed).
    """
    indices = range(len(state.tensors)) if tensors is None else tensors
    for i in indices:
        defect = isometry_defect(state.tensors[i])
        if defect > iso_tol:
            raise InvariantViolation(f"tensor {i} isometry defect {defect:.3e}")
    w = state.center_weights
    if abs(float(np.sum(w**2)) - 1.0) > weight_tol:
        raise InvariantViolation("center weights do not square-sum to one")
    if np.any(np.diff(w) > 1e-14):
        raise InvariantViolation("center weights are not sorted descending")
    dims = state.bond_dimensions()
    if len(w) != dims[state.topology.center]:
        raise InvariantViolation("center weight count does not match bond dimension")


def to_dense(state: TTNState) -> np.ndarray:
    """Contract the full network into a dense array with site-ordered legs."""
    topo = state.topology
    order = sorted(
        range(topo.n_tensors),
        key=lambda i: -set_distance(topo, topo.center)[topo.edges[i][2]],
    )
    p, q = topo.center_tensors()
    # start from the weighted center tensor of p, fold everything else in
    legs = list(topo.edges[p][:2]) + [topo.center]
    acc = state.tensors[p] * state.center_weights
    remaining = [i for i in order if i != p]
    while remaining:
        progressed = False
        for i in list(remaining):
            e = topo.edges[i]
            join = e[2] if e[2] in legs else None
            if i == q:
                join = topo.center
            if join is None:
                continue
            ax = legs.index(join)
            t_axis = 2
            acc = np.tensordot(acc, state.tensors[i], axes=[ax, t_axis])
            legs.pop(ax)
            legs.extend(e[:2])
            remaining.remove(i)
            progressed = True
        if not progressed:
            raise InvariantViolation("dense contraction stalled; broken topology")
    perm = [legs.index(s) for s in range(topo.n_sites)]
    return acc.transpose(perm)


def dense_bipartition_entropy(
    dense: np.ndarray, sites_a: tuple[int, ...]
) -> float:
    """Entanglement entropy of a site bipartition of a dense state."""
    n = dense.ndim
    a = sorted(sites_a)
    b = [s for s in range(n) if s not in sites_a]
    mat = dense.transpose(a + b).reshape(
        int(np.prod([dense.shape[s] for s in a])), -1
    )
    vals = np.linalg.svd(mat, compute_uv=False)
    return entanglement_entropy(vals)


def state_bond_entropy_dense(state: TTNState, bond: int) -> float:
    """Oracle: bond entropy from a dense bipartition SVD of the full state."""
    topo = state.topology
    if topo.is_physical(bond):
        sites = (bond,)
    else:
        owners = topo.tensors_of_bond(bond)
        sites = subtree_sites(topo, bond, owners[0])
    return dense_bipartition_entropy(to_dense(state), sites)
