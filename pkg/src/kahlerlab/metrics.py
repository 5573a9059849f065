"""Model metrics on periodic grids: flat tori, potential perturbations,
degenerating product families, and their scalar invariants.

Conventions
-----------
A metric is stored through its inverse Hermitian matrix field ``g^{jk}`` per
node.  The Laplacian convention is the complex one, ``g^{jk} d_j d_kbar``,
which is 1/4 of the Euclidean Laplacian for the identity metric.  Volume
densities are densities of the top wedge power against the coordinate
measure; ``normalize_volume`` rescales the density only, leaving the matrix
field (and hence the spectrum's scale) untouched.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DivisionSingularityError,
    InvalidParameterError,
    PositivityError,
)
from .grid import GridDomain


class FamilyKind(Enum):
    PRODUCT_COLLAPSE = "product_collapse"
    POTENTIAL_PINCH = "potential_pinch"
    SCALING = "scaling"


@dataclass(frozen=True)
class FamilyParameter:
    """Degeneration parameter of a one-parameter metric family."""

    t: float
    family_kind: FamilyKind = FamilyKind.PRODUCT_COLLAPSE

    def __post_init__(self):
        if self.t <= 0:
            raise InvalidParameterError(f"family parameter must be > 0, got {self.t}")
        if self.family_kind is FamilyKind.PRODUCT_COLLAPSE and self.t > 1:
            raise InvalidParameterError(
                f"product collapse parameter must lie in (0, 1], got {self.t}"
            )


@dataclass(frozen=True)
class KahlerPotential:
    """Scalar potential sampled on the grid nodes."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size != self.domain.num_nodes:
            raise InvalidParameterError(
                f"potential has {values.size} samples, domain has "
                f"{self.domain.num_nodes} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("potential contains non-finite samples")
        object.__setattr__(self, "values", values)


def realify(h):
    """Real 2n x 2n representation of a Hermitian matrix field (..., n, n).

    Interleaved axis order: block (2j, 2k) = (2j+1, 2k+1) = Re h_jk,
    (2j, 2k+1) = -Im h_jk, (2j+1, 2k) = +Im h_jk.  Respects products and
    inverses, and maps positive definite Hermitian to symmetric positive
    definite.
    """
    h = np.asarray(h)
    n = h.shape[-1]
    out = np.zeros(h.shape[:-2] + (2 * n, 2 * n))
    re, im = h.real, h.imag
    out[..., 0::2, 0::2] = re
    out[..., 1::2, 1::2] = re
    out[..., 0::2, 1::2] = -im
    out[..., 1::2, 0::2] = im
    return out


@dataclass(frozen=True)
class MetricField:
    """Discretized metric and its measure data on a grid domain.

    Attributes
    ----------
    inverse_metric : (N, n, n) complex
        Hermitian positive definite inverse metric per node.
    volume_density : (N,) float
        Density of the metric volume measure against coordinate measure.
    reference_density : (N,) float
        Density of the fixed reference measure; integrates to 1.
    relative_density : (N,) float
        Normalized volume ratio e^F (integrates to 1 against the reference).
    gamma_floor : (N,) float
        Admissibility floor, relative_density >= gamma_floor pointwise.
    """

    domain: GridDomain
    inverse_metric: np.ndarray
    volume_density: np.ndarray
    reference_density: np.ndarray
    relative_density: np.ndarray
    gamma_floor: np.ndarray

    @property
    def total_volume(self):
        return self.domain.integrate(self.volume_density)

    def metric_matrices(self):
        """Per-node metric matrices g_jk (inverse of ``inverse_metric``)."""
        return np.linalg.inv(self.inverse_metric)

    def gradient_form(self):
        """Real symmetric matrix field of the gradient quadratic form.

        |grad u|^2 = sum_ab M_ab d_a u d_b u with M = realify(g^{jk}) / 4.
        """
        return 0.25 * realify(self.inverse_metric)

    def tangent_metric(self):
        """Real metric for edge lengths, the inverse of ``gradient_form``.

        In this norm Lipschitz functions of the distance have gradient <= 1,
        so heat-kernel Gaussians carry the canonical exp(-d^2/4t) profile.
        """
        return 4.0 * realify(self.metric_matrices())

    def min_metric_eigenvalue(self):
        """Smallest eigenvalue of the metric over all nodes, with its node."""
        eigs = np.linalg.eigvalsh(self.metric_matrices())
        worst = int(np.argmin(eigs[:, 0]))
        return float(eigs[worst, 0]), worst

    def scaled(self, c):
        """The metric scaled by c > 0 (inverse metric /c, density *c^n)."""
        if c <= 0:
            raise InvalidParameterError(f"scale factor must be > 0, got {c}")
        n = self.domain.complex_dim
        return MetricField(
            domain=self.domain,
            inverse_metric=self.inverse_metric / c,
            volume_density=self.volume_density * c**n,
            reference_density=self.reference_density,
            relative_density=self.relative_density,
            gamma_floor=self.gamma_floor,
        )

    def to_csv(self, path):
        """Debug dump: node index, inverse metric entries, densities."""
        n = self.domain.complex_dim
        header = ["node"]
        for j in range(n):
            for k in range(n):
                header += [f"ginv_{j}{k}_re", f"ginv_{j}{k}_im"]
        header += ["volume_density", "reference_density", "relative_density",
                   "gamma_floor"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.domain.num_nodes):
                row = [i]
                for j in range(n):
                    for k in range(n):
                        row += [f"{self.inverse_metric[i, j, k].real:.12g}",
                                f"{self.inverse_metric[i, j, k].imag:.12g}"]
                row += [f"{self.volume_density[i]:.12g}",
                        f"{self.reference_density[i]:.12g}",
                        f"{self.relative_density[i]:.12g}",
                        f"{self.gamma_floor[i]:.12g}"]
                writer.writerow(row)


def _wedge_constant(n):
    # density of the top power of the identity-coefficient form
    return 2.0**n * math.factorial(n)


def build_flat_torus(domain, normalize_volume=True):
    """Flat reference metric on the domain.

    The inverse metric is the identity at every node; with
    ``normalize_volume`` the volume density is rescaled so the total volume
    is exactly 1.  The relative density and admissibility floor are both 1.
    """
    n = domain.complex_dim
    nodes = domain.num_nodes
    ginv = np.broadcast_to(np.eye(n, dtype=complex), (nodes, n, n)).copy()
    density = np.full(nodes, _wedge_constant(n))
    raw_volume = domain.integrate(density)
    if normalize_volume:
        density = density / raw_volume
    reference = density / domain.integrate(density)
    ones = np.ones(nodes)
    return MetricField(
        domain=domain,
        inverse_metric=ginv,
        volume_density=density,
        reference_density=reference,
        relative_density=ones.copy(),
        gamma_floor=ones.copy(),
    )


def complex_hessian(domain, values):
    """Discrete complex Hessian d_j d_kbar of a nodal scalar field.

    Centered second differences per real axis pair; the result is exactly
    Hermitian at every node.  Returns an (N, n, n) complex array.
    """
    n = domain.complex_dim
    h = domain.spacings
    u = np.asarray(values, dtype=float).ravel()

    def d2(a, b):
        if a == b:
            return (domain.shift(u, a, 1) - 2.0 * u + domain.shift(u, a, -1)) / h[a] ** 2
        upp = domain.shift(domain.shift(u, a, 1), b, 1)
        upm = domain.shift(domain.shift(u, a, 1), b, -1)
        ump = domain.shift(domain.shift(u, a, -1), b, 1)
        umm = domain.shift(domain.shift(u, a, -1), b, -1)
        return (upp - upm - ump + umm) / (4.0 * h[a] * h[b])

    hess = np.zeros((domain.num_nodes, n, n), dtype=complex)
    for j in range(n):
        xj, yj = 2 * j, 2 * j + 1
        for k in range(j, n):
            xk, yk = 2 * k, 2 * k + 1
            re = 0.25 * (d2(xj, xk) + d2(yj, yk))
            im = 0.25 * (d2(xj, yk) - d2(yj, xk))
            hess[:, j, k] = re + 1j * im
            if k != j:
                hess[:, k, j] = re - 1j * im
    return hess


def perturb_with_potential(base, phi, positivity_margin=1e-10):
    """Perturb a metric by the complex Hessian of a potential.

    The volume density is recomputed from the determinant ratio, so a zero
    potential returns data identical to ``base``.  Raises
    ``PositivityError`` naming the worst node if the perturbed metric has an
    eigenvalue below ``positivity_margin``.
    """
    if isinstance(phi, KahlerPotential):
        if phi.domain is not base.domain and phi.domain != base.domain:
            raise InvalidParameterError("potential sampled on a different domain")
        values = phi.values
    else:
        values = np.asarray(phi, dtype=float).ravel()
        if values.size != base.domain.num_nodes:
            raise InvalidParameterError("potential size does not match domain")

    g0 = base.metric_matrices()
    g_new = g0 + complex_hessian(base.domain, values)
    eigs = np.linalg.eigvalsh(g_new)
    worst = int(np.argmin(eigs[:, 0]))
    min_eig = float(eigs[worst, 0])
    if min_eig < positivity_margin:
        raise PositivityError(
            f"perturbation breaks metric positivity at node {worst}: "
            f"min eigenvalue {min_eig:.6g} < margin {positivity_margin:.6g}",
            node=worst,
            value=min_eig,
        )

    det_ratio = np.linalg.det(g_new).real / np.linalg.det(g0).real
    density = base.volume_density * det_ratio
    volume = base.domain.integrate(density)
    relative = density / (volume * base.reference_density)
    gamma = np.full_like(relative, 0.9 * float(np.min(relative)))
    return MetricField(
        domain=base.domain,
        inverse_metric=np.linalg.inv(g_new),
        volume_density=density,
        reference_density=base.reference_density,
        relative_density=relative,
        gamma_floor=gamma,
    )


def build_degenerating_product_family(t, domain, fiber_dim):
    """Product-collapse member: fiber block scaled by t, base block by 1+t.

    The domain splits as the first ``fiber_dim`` complex axes (the fiber)
    times the rest (the base).  The admissibility floor carries the constant
    Jacobian density of the projection, scaled to sit below the relative
    density.
    """
    if isinstance(t, FamilyParameter):
        param = t
    else:
        param = FamilyParameter(float(t), FamilyKind.PRODUCT_COLLAPSE)
    n = domain.complex_dim
    if n < 2:
        raise InvalidParameterError("product family needs complex dimension >= 2")
    if not 1 <= fiber_dim < n:
        raise InvalidParameterError(
            f"fiber dimension must be in [1, {n - 1}], got {fiber_dim}"
        )
    tval = param.t
    base_dim = n - fiber_dim

    reference = build_flat_torus(domain, normalize_volume=True)
    diag = np.concatenate(
        [np.full(fiber_dim, 1.0 / tval), np.full(base_dim, 1.0 / (1.0 + tval))]
    )
    ginv = np.zeros((domain.num_nodes, n, n), dtype=complex)
    ginv[:, np.arange(n), np.arange(n)] = diag

    det_factor = tval**fiber_dim * (1.0 + tval) ** base_dim
    density = reference.volume_density * det_factor
    volume = domain.integrate(density)
    relative = density / (volume * reference.reference_density)

    # constant Jacobian density of the product projection, normalized so the
    # floor sits at 0.9 of the pointwise minimum of e^F
    jacobian = np.ones(domain.num_nodes)
    gamma = 0.9 * float(np.min(relative)) * jacobian / float(np.max(jacobian))

    return MetricField(
        domain=domain,
        inverse_metric=ginv,
        volume_density=density,
        reference_density=reference.reference_density,
        relative_density=relative,
        gamma_floor=gamma,
    )


def relative_volume_density(omega, reference):
    """Pointwise normalized volume ratio e^F of omega against a reference.

    Satisfies integral(e^F * reference density) = 1 up to quadrature
    roundoff whenever the total volume of omega is computed from its own
    density.
    """
    if omega.domain != reference.domain:
        raise InvalidParameterError("metrics live on different domains")
    ref = reference.volume_density
    if np.any(ref == 0):
        node = int(np.argmin(np.abs(ref)))
        raise DivisionSingularityError(
            f"reference density vanishes at node {node}"
        )
    return omega.volume_density / (omega.total_volume * ref)


def intersection_number(omega, reference):
    """Class pairing of omega with the (n-1)-st power of the reference.

    Pointwise wedge-density quadrature; equals the volume of omega when
    n = 1, and is linear under scaling of omega.
    """
    if omega.domain != reference.domain:
        raise InvalidParameterError("metrics live on different domains")
    n = omega.domain.complex_dim
    g_omega = omega.metric_matrices()
    # trace of g_X^{-1} g_omega; the reference inverse metric is g_X^{-1}
    tr = np.einsum("ijk,ikj->i", reference.inverse_metric, g_omega).real
    integrand = reference.volume_density * tr / n
    return omega.domain.integrate(integrand)
