"""Shared fixtures and oracle helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from treetn.spinmodel import SpinModel
from treetn.state import TTNState, audit_state
from treetn.topology import audit_topology, subtree_sites


def random_isometry(rng, d1, d2, k, complex_=False):
    """Haar-ish random isometry with the orthonormality on the third leg."""
    m = rng.standard_normal((d1 * d2, k))
    if complex_:
        m = m + 1j * rng.standard_normal((d1 * d2, k))
    q, _ = np.linalg.qr(m)
    return q[:, :k].reshape(d1, d2, k)


def heisenberg_chain(n, j=1.0, delta=1.0, spin=0.5):
    return SpinModel(
        n_sites=n,
        spin_sizes=[spin] * n,
        exchange_type="XXZ",
        exchange_rows=[(i, i + 1, j, delta) for i in range(n - 1)],
    )


def leaf_partitions(topology):
    """Canonical structure fingerprint: the smaller site set of each
    auxiliary-bond bipartition."""
    full = frozenset(range(topology.n_sites))
    parts = set()
    for b in topology.auxiliary_bonds():
        owners = topology.tensors_of_bond(b)
        side = frozenset(subtree_sites(topology, b, owners[0]))
        comp = full - side
        parts.add(min(side, comp, key=lambda s: (len(s), sorted(s))))
    return parts


class AuditObserver:
    """Per-step invariant audit used across integration tests.

    Checks the isometric condition of the two updated tensors, weight
    normalization, topology validity, and heat-bath probability sums.
    """

    def __init__(self, iso_tol=1e-10, weight_tol=1e-12, prob_tol=1e-14):
        self.iso_tol = iso_tol
        self.weight_tol = weight_tol
        self.prob_tol = prob_tol
        self.steps = 0
        self.stochastic_steps = 0

    def __call__(self, state: TTNState, info):
        self.steps += 1
        audit_state(
            state,
            iso_tol=self.iso_tol,
            weight_tol=self.weight_tol,
            tensors=[info.t, info.t_conn],
        )
        audit_topology(state.topology)
        probs = info.choice.probabilities
        if probs is not None:
            self.stochastic_steps += 1
            assert abs(sum(probs) - 1.0) <= self.prob_tol


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
