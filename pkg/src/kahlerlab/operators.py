"""Divergence-form discrete Laplacian, self-adjoint in the metric measure.

The operator is assembled from symmetric edge conductances, so the weighted
symmetry <Lu, v> = <u, Lv>, the kernel on constants, and the Green identity
(Dirichlet energy = -<Lu, u>) hold exactly, not just to truncation order.

The stencil spans axis neighbors and, where the gradient form has
off-diagonal entries, the corresponding diagonal neighbors.  The splitting
keeps conductances nonnegative whenever the gradient form is diagonally
dominant; negative conductances are permitted and counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, InvalidParameterError


@dataclass
class EdgeGradient:
    """Per-edge differences of a nodal field with their conductances.

    The energy identity sum(c * diff^2) = -<Lu, u> holds exactly.
    """

    left: np.ndarray
    right: np.ndarray
    conductance: np.ndarray
    difference: np.ndarray

    def energy(self):
        return float(np.sum(self.conductance * self.difference**2))


@dataclass
class SparseOperator:
    """Discrete Laplacian data: stiffness form, measure weights, edge table.

    ``stiffness`` is the positive semidefinite matrix S with
    u S v = sum over edges of c (u_i - u_j)(v_i - v_j); the Laplacian acts as
    Lu = -(S u) / mu and is self-adjoint for the inner product with weights
    ``mass_weights`` (which sum to the total volume).
    """

    domain: object
    stiffness: sp.csr_matrix
    mass_weights: np.ndarray
    edge_left: np.ndarray
    edge_right: np.ndarray
    edge_conductance: np.ndarray
    negative_conductance_count: int
    _solver_cache: dict = field(default_factory=dict, repr=False)

    @property
    def num_nodes(self):
        return self.mass_weights.size

    @property
    def total_volume(self):
        return float(np.sum(self.mass_weights))

    def apply(self, u):
        """Laplacian of a nodal field (zero on constants)."""
        return -(self.stiffness @ np.asarray(u, dtype=float)) / self.mass_weights

    def energy(self, u):
        """Dirichlet energy -<Lu, u> = u S u."""
        u = np.asarray(u, dtype=float)
        return float(u @ (self.stiffness @ u))

    def pairing(self, u, v):
        """Edge gradient pairing u S v = <grad u, grad v> in the metric measure."""
        return float(np.asarray(u, dtype=float) @ (self.stiffness @ np.asarray(v, dtype=float)))

    def inner(self, u, v):
        """Weighted L2 inner product sum(u v mu)."""
        return float(np.sum(np.asarray(u) * np.asarray(v) * self.mass_weights))

    def mean(self, u):
        return self.inner(u, np.ones_like(self.mass_weights)) / self.total_volume

    def gradient_field(self, u):
        u = np.asarray(u, dtype=float)
        return EdgeGradient(
            left=self.edge_left,
            right=self.edge_right,
            conductance=self.edge_conductance,
            difference=u[self.edge_right] - u[self.edge_left],
        )

    def grad_squared(self, u):
        """Lumped pointwise squared gradient.

        Each edge contributes half of c (u_i - u_j)^2 to both endpoints, so
        the mass-weighted sum equals the Dirichlet energy exactly.
        """
        u = np.asarray(u, dtype=float)
        contrib = 0.5 * self.edge_conductance * (u[self.edge_right] - u[self.edge_left]) ** 2
        out = np.zeros(self.num_nodes)
        np.add.at(out, self.edge_left, contrib)
        np.add.at(out, self.edge_right, contrib)
        return out / self.mass_weights

    def neighbors(self):
        """Adjacency lists of the assembled stencil (both edge directions)."""
        if "neighbors" not in self._solver_cache:
            adj = sp.coo_matrix(
                (
                    np.ones(2 * self.edge_left.size, dtype=bool),
                    (
                        np.concatenate([self.edge_left, self.edge_right]),
                        np.concatenate([self.edge_right, self.edge_left]),
                    ),
                ),
                shape=(self.num_nodes, self.num_nodes),
            ).tocsr()
            self._solver_cache["neighbors"] = adj
        return self._solver_cache["neighbors"]

    def to_csv(self, path):
        """Coordinate-list export: (row, col, value) triplets then weights."""
        coo = self.stiffness.tocoo()
        with open(path, "w", newline="") as fh:
            fh.write("row,col,value\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r},{c},{v:.12g}\n")
            fh.write("node,mass_weight\n")
            for i, w in enumerate(self.mass_weights):
                fh.write(f"{i},{w:.12g}\n")


def assemble_laplacian(metric, positivity_margin=0.0):
    """Assemble the divergence-form Laplacian of a metric field.

    Edge conductances are face averages of (volume density) x (gradient-form
    weight); the construction makes the operator exactly self-adjoint for
    the metric measure with constants in the kernel.
    """
    domain = metric.domain
    min_eig, worst = metric.min_metric_eigenvalue()
    if min_eig <= positivity_margin:
        raise AssemblyError(
            f"metric not positive definite at node {worst} "
            f"(min eigenvalue {min_eig:.6g})"
        )

    gradform = metric.gradient_form()
    rho = metric.volume_density
    h = domain.spacings
    cell = domain.cell_volume
    axes = domain.num_axes
    nnodes = domain.num_nodes

    # per-node weights of the directional-difference decomposition
    axis_w = np.empty((axes, nnodes))
    for a in range(axes):
        resid = gradform[:, a, a].copy()
        for b in range(axes):
            if b != a:
                resid -= np.abs(gradform[:, a, b]) * (h[a] / h[b])
        axis_w[a] = resid / h[a] ** 2

    lefts, rights, conds = [], [], []
    base = np.arange(nnodes)

    def add_direction(offsets, node_weight):
        dens = rho * node_weight
        neighbor = domain.neighbor_indices(offsets)
        shifted = dens.reshape(domain.shape)
        for ax, st in enumerate(offsets):
            if st:
                shifted = np.roll(shifted, -st, axis=ax)
        cond = 0.5 * (dens + shifted.ravel()) * cell
        keep = cond != 0.0
        if np.any(keep):
            lefts.append(base[keep])
            rights.append(neighbor[keep])
            conds.append(cond[keep])

    for a in range(axes):
        offsets = [0] * axes
        offsets[a] = 1
        add_direction(tuple(offsets), axis_w[a])

    for a, b in domain.axis_pairs():
        mab = gradform[:, a, b]
        if not np.any(mab):
            continue
        w_plus = np.maximum(mab, 0.0) / (h[a] * h[b])
        w_minus = np.maximum(-mab, 0.0) / (h[a] * h[b])
        for sign, w in ((1, w_plus), (-1, w_minus)):
            if not np.any(w):
                continue
            offsets = [0] * axes
            offsets[a] = 1
            offsets[b] = sign
            add_direction(tuple(offsets), w)

    left = np.concatenate(lefts)
    right = np.concatenate(rights)
    cond = np.concatenate(conds)
    negative = int(np.sum(cond < 0))

    rows = np.concatenate([left, right, left, right])
    cols = np.concatenate([left, right, right, left])
    vals = np.concatenate([cond, cond, -cond, -cond])
    stiffness = sp.coo_matrix((vals, (rows, cols)), shape=(nnodes, nnodes)).tocsr()
    stiffness.sum_duplicates()

    return SparseOperator(
        domain=domain,
        stiffness=stiffness,
        mass_weights=rho * cell,
        edge_left=left,
        edge_right=right,
        edge_conductance=cond,
        negative_conductance_count=negative,
    )


def dirichlet_energy(op, u):
    """Dirichlet energy of a nodal field, -<Lu, u> in the metric measure."""
    return op.energy(u)


def weighted_inner_product(op, u, v):
    """L2 pairing of two nodal fields against the metric measure."""
    return op.inner(u, v)


def edge_lengths(metric, offsets_list=None):
    """Metric lengths of the lattice steps, face-averaged per edge.

    Lengths are taken in the tangent metric dual to the gradient form, so a
    distance function built from them is 1-Lipschitz for the same gradient
    norm that enters the Dirichlet energy.  Returns (left, right, length)
    arrays over the axis + diagonal stencil.
    """
    domain = metric.domain
    tangent = metric.tangent_metric()
    h = domain.spacings
    axes = domain.num_axes
    base = np.arange(domain.num_nodes)

    if offsets_list is None:
        offsets_list = []
        for a in range(axes):
            off = [0] * axes
            off[a] = 1
            offsets_list.append(tuple(off))
        for a, b in domain.axis_pairs():
            for sign in (1, -1):
                off = [0] * axes
                off[a] = 1
                off[b] = sign
                offsets_list.append(tuple(off))

    lefts, rights, lengths = [], [], []
    for offsets in offsets_list:
        v = np.array([st * h[ax] for ax, st in enumerate(offsets)])
        quad = np.einsum("a,iab,b->i", v, tangent, v)
        node_len = np.sqrt(quad)
        shifted = node_len.reshape(domain.shape)
        for ax, st in enumerate(offsets):
            if st:
                shifted = np.roll(shifted, -st, axis=ax)
        lefts.append(base)
        rights.append(domain.neighbor_indices(offsets))
        lengths.append(0.5 * (node_len + shifted.ravel()))
    return np.concatenate(lefts), np.concatenate(rights), np.concatenate(lengths)
