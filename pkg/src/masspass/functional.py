"""Constrained functionals and their second-order objects on the mass sphere.

The central quantity is the constrained second form

    D2(u)[a, b] = phi''(u)[a, b] - (phi'(u).u / |u|^2) (a, b),

which equals the second time-derivative of the functional along the explicit
arcs of the weak spray and, at constrained critical points, the Hessian of
the restriction to the sphere.  On top of it sit the sphere gradient, the
constrained dual norm, the multiplier estimate, approximate Morse counting
at a threshold, and the stability radius of certified negative subspaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, solve_triangular

from .errors import HypothesisViolated
from .geometry import GeometryConstants
from .hilbert import HilbertPair, SpherePoint, TangentVector

EIG_TOL = 1e-10


class ConstrainedFunctional:
    """Interface consumed by the geometry, descent, and min-max layers.

    Concrete functionals provide the value, the coordinate vector of the
    first derivative viewed as a linear form, the action of the second
    derivative, and analytic Hoelder / boundedness data per radius.
    Evaluation must be pure and re-entrant.
    """

    alpha: float = 1.0

    def value(self, u: np.ndarray) -> float:
        raise NotImplementedError

    def grad_dual(self, u: np.ndarray) -> np.ndarray:
        """Coordinates of the first derivative as a linear form."""
        raise NotImplementedError

    def hess_action(self, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Coordinates of the linear form phi''(u)[w, .]."""
        raise NotImplementedError

    def hess_matrix(self, u: np.ndarray) -> np.ndarray:
        d = u.shape[0]
        cols = [self.hess_action(u, col) for col in np.eye(d)]
        mat = np.column_stack(cols)
        return 0.5 * (mat + mat.T)

    def holder_m(self, radius: float) -> float:
        """Hoelder constant of the first and second derivative on B(0, radius)."""
        raise NotImplementedError

    def bound_k(self, radius: float, mu: float) -> float:
        """Bound (>= 1) for the first derivative and the constrained second
        form on the radius ball intersected with the mass-mu sphere."""
        raise NotImplementedError


# ---------------------------------------------------------------------------
# second-order objects
# ---------------------------------------------------------------------------

def second_variation(f: ConstrainedFunctional, point: SpherePoint, a, b) -> float:
    """Constrained second form at a sphere point, evaluated on two vectors."""
    pair = point.pair
    av = a.v if isinstance(a, TangentVector) else np.asarray(a, dtype=float)
    bv = b.v if isinstance(b, TangentVector) else np.asarray(b, dtype=float)
    hessian_term = float(av @ f.hess_action(point.u, bv))
    shift = float(f.grad_dual(point.u) @ point.u) / point.mu
    return hessian_term - shift * pair.inner_h(av, bv)


def constrained_form_matrix(f: ConstrainedFunctional, point: SpherePoint) -> np.ndarray:
    """Full coordinate matrix of the constrained second form at a point."""
    pair = point.pair
    shift = float(f.grad_dual(point.u) @ point.u) / point.mu
    return f.hess_matrix(point.u) - shift * pair.gram_h


def sphere_gradient(f: ConstrainedFunctional, point: SpherePoint) -> TangentVector:
    """Strong-metric gradient of the restriction to the sphere.

    The strong representative of the derivative is projected, strongly
    orthogonally, onto the tangent space; the result represents the
    constrained derivative against every tangent direction.
    """
    pair = point.pair
    grad_e = pair.solve_e(f.grad_dual(point.u))
    g = pair.riesz_map(point.u)
    coeff = pair.inner_e(grad_e, g) / pair.inner_e(g, g)
    raw = grad_e - coeff * g
    # Scrub the weakly normal roundoff component so tiny gradients near
    # critical points still satisfy the tangency invariant.
    return pair.project_tangent_h(point, raw)


def constrained_dual_norm(f: ConstrainedFunctional, point: SpherePoint) -> float:
    """Dual norm of the constrained derivative at a point."""
    return point.pair.norm_e(sphere_gradient(f, point).v)


def lagrange_multiplier(f: ConstrainedFunctional, point: SpherePoint) -> float:
    """Multiplier estimate: the derivative paired with the point, over mu."""
    return float(f.grad_dual(point.u) @ point.u) / point.mu


def free_gradient_residual(f: ConstrainedFunctional, point: SpherePoint,
                           lam: float | None = None) -> float:
    """Dual norm of the derivative minus the multiplier times the weak pairing.

    With the default multiplier estimate this is the full stationarity
    residual; it vanishes exactly at constrained critical points and is
    asymptotically equivalent to the constrained dual norm along bounded
    sequences.
    """
    pair = point.pair
    if lam is None:
        lam = lagrange_multiplier(f, point)
    form = f.grad_dual(point.u) - lam * (pair.gram_h @ point.u)
    return pair.dual_norm_e(form)


# ---------------------------------------------------------------------------
# bases and Morse counting
# ---------------------------------------------------------------------------

def tangent_basis(pair: HilbertPair, point: SpherePoint) -> np.ndarray:
    """Strongly orthonormal basis of the tangent space, deterministic.

    Coordinate vectors are projected weakly orthogonally to the base point;
    the smallest candidate (the one most parallel to the removed normal
    direction) is dropped and the rest are orthonormalized in the strong
    metric via a sign-fixed QR factorization.
    """
    u = point.u
    mh_u = pair.gram_h @ u
    cand = np.eye(pair.dim) - np.outer(u, mh_u) / point.mu
    lifted = pair._chol_e.T @ cand
    drop = int(np.argmin(np.linalg.norm(lifted, axis=0)))
    lifted = np.delete(lifted, drop, axis=1)
    q, r = np.linalg.qr(lifted)
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q = q * signs
    return solve_triangular(pair._chol_e.T, q, lower=False)


def full_basis(pair: HilbertPair) -> np.ndarray:
    """Strongly orthonormal basis of the whole coordinate space."""
    return solve_triangular(pair._chol_e.T, np.eye(pair.dim), lower=False)


@dataclass
class MorseReport:
    """Certified count of strongly-negative directions at a threshold."""

    theta: float
    count: int
    eigenvalues: np.ndarray
    directions: list = field(default_factory=list)
    free: bool = False


def approx_morse_index(f: ConstrainedFunctional, point: SpherePoint,
                       theta: float, *, free: bool = False) -> MorseReport:
    """Largest certified dimension on which the constrained second form is
    below -theta times the strong norm squared.

    The form is assembled in a strongly orthonormal basis of the tangent
    space (or of the whole space when ``free``), the symmetric eigenproblem
    is solved densely, and eigenvalues strictly below -theta are counted.
    """
    if theta < 0:
        raise ValueError("threshold must be nonnegative")
    pair = point.pair
    basis = full_basis(pair) if free else tangent_basis(pair, point)
    form = constrained_form_matrix(f, point)
    projected = basis.T @ form @ basis
    projected = 0.5 * (projected + projected.T)
    vals, vecs = eigh(projected)
    count = int(np.sum(vals < -theta - EIG_TOL))
    directions = []
    for j in range(count):
        vec = basis @ vecs[:, j]
        directions.append(vec if free else TangentVector(point, vec))
    return MorseReport(theta=theta, count=count, eigenvalues=vals,
                       directions=directions, free=free)


def negative_frame(f: ConstrainedFunctional, point: SpherePoint, theta: float,
                   size: int) -> list[TangentVector] | None:
    """Strongly orthonormal frame of ``size`` directions below -theta, if any."""
    report = approx_morse_index(f, point, theta)
    if report.count < size:
        return None
    return report.directions[:size]


# ---------------------------------------------------------------------------
# stability radius of negative subspaces
# ---------------------------------------------------------------------------

def frame_form(f: ConstrainedFunctional, point: SpherePoint, frame) -> np.ndarray:
    """Constrained second form restricted to a frame of tangent vectors."""
    cols = np.column_stack([w.v if isinstance(w, TangentVector) else w for w in frame])
    form = constrained_form_matrix(f, point)
    small = cols.T @ form @ cols
    return 0.5 * (small + small.T)


def stability_radius(f: ConstrainedFunctional, point: SpherePoint, frame,
                     beta: float, radius: float) -> float:
    """Ball radius on which a certified -beta subspace stays below -3 beta/4.

    The frame must be strongly orthonormal and uniformly negative at the
    base point; otherwise the hypothesis is rejected.
    """
    small = frame_form(f, point, frame)
    top = float(eigh(small, eigvals_only=True)[-1])
    if top >= -beta:
        raise HypothesisViolated(
            f"subspace not uniformly below -beta: top eigenvalue {top:.6g} >= {-beta:.6g}"
        )
    constants = GeometryConstants(radius, point.mu,
                                  max(1.0, f.bound_k(radius, point.mu)))
    return constants.negativity_radius(beta, f.alpha, f.holder_m(radius))
