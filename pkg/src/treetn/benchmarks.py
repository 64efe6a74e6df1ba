"""Benchmark generators and an exact-diagonalization oracle.

The oracle assembles Hamiltonians directly from the raw model tables with
dense/sparse Kronecker products, independently of the renormalized-operator
engine, so the two routes check each other.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .gss import CORRELATION_ORDER
from .spinmodel import SpinModel, local_spin_matrices

__all__ = [
    "gen_hierarchical_chain",
    "hierarchical_chain_model",
    "gen_quantics_function",
    "quantics_value",
    "gen_multivariate_normal",
    "tree_covariance",
    "balanced_tree_edges",
    "EdResult",
    "ed_oracle",
]

DENSE_GUARD = 24  # log2 of the largest dense tensor we will materialize
ED_DIM_GUARD = 1 << 16


def gen_hierarchical_chain(d: int, j: float, alpha: float) -> list[tuple]:
    """Nearest-neighbor Heisenberg rows whose strength decays by level.

    Level ``h`` couples the pairs (i, i+1) with i = 2^h (2k + 1) - 1 at
    strength ``j * alpha**h``; the union over levels covers every adjacent
    pair of the 2^d-site chain exactly once.
    """
    if d < 2:
        raise ValueError("need at least 4 sites (d >= 2)")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    rows = []
    for h in range(d):
        strength = j * alpha**h
        for k in range(2 ** (d - h - 1)):
            i = 2**h * (2 * k + 1) - 1
            rows.append((i, i + 1, strength, 1.0))
    return sorted(rows)


def hierarchical_chain_model(d: int, j: float = 1.0, alpha: float = 0.5) -> SpinModel:
    n = 2**d
    return SpinModel(
        n_sites=n,
        spin_sizes=[0.5] * n,
        exchange_type="XXZ",
        exchange_rows=gen_hierarchical_chain(d, j, alpha),
    )


def _bit_grid(bits: int) -> np.ndarray:
    return np.arange(2**bits) / 2**bits


def gen_quantics_function(
    n_waves: int,
    bits: int,
    n_vars: int = 3,
    seed: int = 0,
    wave_vectors: np.ndarray | None = None,
) -> np.ndarray:
    """Dense quantics tensor of a sum of cosines of random plane waves.

    Each variable in [0, 1) is expanded over ``bits`` binary legs, most
    significant first, grouped variable by variable. Wave vectors are drawn
    i.i.d. standard normal from the seeded generator unless supplied.
    """
    if n_vars * bits > DENSE_GUARD:
        raise ValueError(
            f"dense tensor of 2^{n_vars * bits} entries exceeds the guard; "
            f"lower the bit count"
        )
    if wave_vectors is None:
        rng = np.random.Generator(np.random.Philox(seed))
        wave_vectors = rng.standard_normal((n_waves, n_vars))
    else:
        wave_vectors = np.asarray(wave_vectors, dtype=float)
        if wave_vectors.shape != (n_waves, n_vars):
            raise ValueError(
                f"wave vectors must have shape {(n_waves, n_vars)}, "
                f"got {wave_vectors.shape}"
            )
    grid = _bit_grid(bits)
    axes = np.meshgrid(*([grid] * n_vars), indexing="ij")
    out = np.zeros((2**bits,) * n_vars)
    for jj in range(1, n_waves + 1):
        phase = np.zeros_like(out)
        for a in range(n_vars):
            phase = phase + wave_vectors[jj - 1, a] * axes[a]
        out += np.cos(jj * phase)
    return out.reshape((2,) * (n_vars * bits))


def quantics_value(
    bit_index: tuple[int, ...], n_waves: int, bits: int, wave_vectors: np.ndarray
) -> float:
    """Point evaluation used as the oracle for the quantics generator."""
    n_vars = wave_vectors.shape[1]
    x = np.zeros(n_vars)
    for a in range(n_vars):
        for l in range(1, bits + 1):
            x[a] += bit_index[a * bits + (l - 1)] / 2**l
    return float(
        sum(np.cos(jj * np.dot(wave_vectors[jj - 1], x)) for jj in range(1, n_waves + 1))
    )


def balanced_tree_edges(n_leaves: int) -> list[tuple[int, int]]:
    """Edges of a balanced binary tree; leaves 0..n_leaves-1, internal after."""
    if n_leaves < 2 or n_leaves & (n_leaves - 1) != 0:
        raise ValueError("leaf count must be a power of two, at least 2")
    edges = []
    level = list(range(n_leaves))
    nxt = n_leaves
    while len(level) > 2:
        parents = []
        for a, b in zip(level[::2], level[1::2]):
            edges.append((a, nxt))
            edges.append((b, nxt))
            parents.append(nxt)
            nxt += 1
        level = parents
    edges.append((level[0], level[1]))
    return edges


def tree_covariance(
    n_vars: int, rho: float, tree_edges: list[tuple[int, int]]
) -> np.ndarray:
    """Covariance with entries decaying as rho^(path length) on a tree."""
    nodes = {a for e in tree_edges for a in e}
    adj: dict[int, list[int]] = {v: [] for v in nodes}
    for a, b in tree_edges:
        adj[a].append(b)
        adj[b].append(a)
    k = np.eye(n_vars)
    for start in range(n_vars):
        dist = {start: 0}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if u not in dist:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        for other in range(n_vars):
            if other != start:
                k[start, other] = rho ** dist[other]
    return k


def gen_multivariate_normal(
    n_vars: int, bits: int, rho: float, tree_edges: list[tuple[int, int]]
) -> np.ndarray:
    """Dense quantics tensor of an unnormalized zero-mean normal density.

    Components are discretized over [-5, 5) with ``bits`` binary legs each
    (value at pattern b is -5 + 10 b / 2^bits), grouped variable by
    variable, most significant bit first.
    """
    if n_vars * bits > DENSE_GUARD:
        raise ValueError(
            f"dense tensor of 2^{n_vars * bits} entries exceeds the guard"
        )
    k = tree_covariance(n_vars, rho, tree_edges)
    eigvals = np.linalg.eigvalsh(k)
    if eigvals[0] <= 0.0:
        raise ValueError(
            f"covariance is not positive definite (eigenvalue {eigvals[0]:.3e})"
        )
    k_inv = np.linalg.inv(k)
    grid = -5.0 + 10.0 * np.arange(2**bits) / 2**bits
    axes = np.meshgrid(*([grid] * n_vars), indexing="ij")
    pts = np.stack([a.ravel() for a in axes], axis=1)
    quad = np.einsum("pa,ab,pb->p", pts, k_inv, pts)
    out = np.exp(-0.5 * quad).reshape((2**bits,) * n_vars)
    return out.reshape((2,) * (n_vars * bits))


def _site_matrices(model: SpinModel):
    mats = []
    for s in model.spin_sizes:
        sz, sp_, sx, sy = local_spin_matrices(s)
        mats.append({"x": sx, "y": sy, "z": sz, "z2": sz @ sz})
    return mats


def _embed_one(dims, i, op):
    left = int(np.prod(dims[:i], initial=1))
    right = int(np.prod(dims[i + 1 :], initial=1))
    return sp.kron(
        sp.kron(sp.identity(left, format="csr"), sp.csr_matrix(op)),
        sp.identity(right, format="csr"),
        format="csr",
    )


def _embed_two(dims, i, op_i, j, op_j):
    left = int(np.prod(dims[:i], initial=1))
    mid = int(np.prod(dims[i + 1 : j], initial=1))
    right = int(np.prod(dims[j + 1 :], initial=1))
    out = sp.kron(sp.identity(left, format="csr"), sp.csr_matrix(op_i), format="csr")
    out = sp.kron(out, sp.identity(mid, format="csr"), format="csr")
    out = sp.kron(out, sp.csr_matrix(op_j), format="csr")
    return sp.kron(out, sp.identity(right, format="csr"), format="csr")


def dense_hamiltonian(model: SpinModel) -> sp.csr_matrix:
    """Assemble the full Hamiltonian from the raw tables."""
    dims = [model.site_dimension(i) for i in range(model.n_sites)]
    dim = int(np.prod(dims))
    if dim > ED_DIM_GUARD:
        raise ValueError(f"Hilbert dimension {dim} exceeds the oracle guard")
    mats = _site_matrices(model)
    h = sp.csr_matrix((dim, dim), dtype=complex)

    for row in model.exchange_rows:
        if model.exchange_type == "XXZ":
            i, j, jc, dz = row
            couplings = [("x", "x", jc), ("y", "y", jc), ("z", "z", jc * dz)]
        else:
            i, j, jx, jy, jz = row
            couplings = [("x", "x", jx), ("y", "y", jy), ("z", "z", jz)]
        for a, b, c in couplings:
            if c != 0.0:
                h = h + c * _embed_two(dims, i, mats[i][a], j, mats[j][b])

    cross_axes = {"x": ("y", "z"), "y": ("z", "x"), "z": ("x", "y")}
    for axis, rows in model.dm_tables.items():
        zeta, eta = cross_axes[axis]
        for i, j, c in rows:
            if c != 0.0:
                h = h + c * _embed_two(dims, i, mats[i][zeta], j, mats[j][eta])
                h = h - c * _embed_two(dims, i, mats[i][eta], j, mats[j][zeta])
    for axis, rows in model.sod_tables.items():
        zeta, eta = cross_axes[axis]
        for i, j, c in rows:
            if c != 0.0:
                h = h + c * _embed_two(dims, i, mats[i][zeta], j, mats[j][eta])
                h = h + c * _embed_two(dims, i, mats[i][eta], j, mats[j][zeta])

    for axis, table in model.field_tables.items():
        for i, val in table.items():
            if val != 0.0:
                h = h - val * _embed_one(dims, i, mats[i][axis])
    for i, val in model.sia_table.items():
        if val != 0.0:
            h = h + val * _embed_one(dims, i, mats[i]["z2"])

    if model.dtype == np.dtype(float):
        imag_max = abs(h.imag).max() if h.nnz else 0.0
        if imag_max > 1e-12:
            raise ValueError(f"real model produced imaginary entries ({imag_max:.1e})")
        h = h.real
    return h.tocsr()


@dataclass
class EdResult:
    """Exact ground state plus observable evaluation helpers."""

    energy: float
    vector: np.ndarray
    energies: np.ndarray
    model: SpinModel

    def single_site(self, i: int) -> tuple[float, float, float]:
        dims = [self.model.site_dimension(k) for k in range(self.model.n_sites)]
        mats = _site_matrices(self.model)
        out = []
        for axis in ("x", "y", "z"):
            op = _embed_one(dims, i, mats[i][axis])
            out.append(float(np.vdot(self.vector, op @ self.vector).real))
        return tuple(out)

    def correlation(self, i: int, j: int) -> dict[str, float]:
        dims = [self.model.site_dimension(k) for k in range(self.model.n_sites)]
        mats = _site_matrices(self.model)
        out = {}
        for comp in CORRELATION_ORDER:
            a, b = comp
            op = _embed_two(dims, i, mats[i][a], j, mats[j][b])
            out[comp] = float(np.vdot(self.vector, op @ self.vector).real)
        return out

    @property
    def gap(self) -> float:
        if len(self.energies) < 2:
            return np.inf
        return float(self.energies[1] - self.energies[0])


def ed_oracle(model: SpinModel, n_states: int = 2) -> EdResult:
    """Exact lowest eigenpair by dense or sparse diagonalization."""
    h = dense_hamiltonian(model)
    dim = h.shape[0]
    if dim <= 2048:
        dense = h.toarray()
        vals, vecs = np.linalg.eigh(dense)
        return EdResult(
            energy=float(vals[0]),
            vector=vecs[:, 0],
            energies=vals[: max(n_states, 1)],
            model=model,
        )
    v0 = np.random.Generator(np.random.Philox(1234)).standard_normal(dim)
    vals, vecs = eigsh(h, k=max(n_states, 1), which="SA", v0=v0)
    order = np.argsort(vals)
    return EdResult(
        energy=float(vals[order[0]]),
        vector=vecs[:, order[0]],
        energies=vals[order],
        model=model,
    )
