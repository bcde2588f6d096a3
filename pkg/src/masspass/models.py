"""Closed-form model functionals for tests and verification suites.

The plain quadratic on a small sphere gives closed-form saddles and
mountain-pass levels.  The block-saddle model localizes a saturating
quadratic in a few leading coordinates of a high-mass sphere; its
derivative stays bounded on the whole sphere, so the quantitative descent
radii come out large enough for certificate margins to be measured in
floating point rather than drowned by roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .functional import ConstrainedFunctional
from .hilbert import HilbertPair, SpherePoint, TangentVector


class QuadraticFunctional(ConstrainedFunctional):
    """phi(u) = u.S u / 2 + b.u with analytic Hoelder and bound data."""

    alpha = 1.0

    def __init__(self, pair: HilbertPair, matrix: np.ndarray, offset=None):
        self.pair = pair
        self.matrix = 0.5 * (np.asarray(matrix, dtype=float)
                             + np.asarray(matrix, dtype=float).T)
        self.offset = np.zeros(pair.dim) if offset is None else np.asarray(offset, dtype=float)
        vals = eigh(self.matrix, pair.gram_e, eigvals_only=True)
        self._kappa = float(np.abs(vals).max())
        self._offset_dual = pair.dual_norm_e(self.offset) if offset is not None else 0.0

    def value(self, u):
        return 0.5 * float(u @ self.matrix @ u) + float(self.offset @ u)

    def grad_dual(self, u):
        return self.matrix @ u + self.offset

    def hess_action(self, u, w):
        return self.matrix @ w

    def hess_matrix(self, u):
        return self.matrix

    def holder_m(self, radius):
        return self._kappa

    def bound_k(self, radius, mu):
        grad = self._kappa * radius + self._offset_dual
        return max(1.0, grad, self._kappa + grad * radius / mu)


class LinearFunctional(ConstrainedFunctional):
    """phi(u) = form.u; the second derivative vanishes identically."""

    alpha = 1.0

    def __init__(self, pair: HilbertPair, form: np.ndarray):
        self.pair = pair
        self.form = np.asarray(form, dtype=float)
        self._dual = pair.dual_norm_e(self.form)

    def value(self, u):
        return float(self.form @ u)

    def grad_dual(self, u):
        return self.form.copy()

    def hess_action(self, u, w):
        return np.zeros_like(np.asarray(w, dtype=float))

    def hess_matrix(self, u):
        return np.zeros((self.pair.dim, self.pair.dim))

    def holder_m(self, radius):
        return 0.0

    def bound_k(self, radius, mu):
        return max(1.0, self._dual, self._dual * radius / mu)


class DifferenceFunctional(ConstrainedFunctional):
    """phi = a - rho * b, combining analytic data conservatively."""

    def __init__(self, a: ConstrainedFunctional, b: ConstrainedFunctional, rho: float):
        self.a = a
        self.b = b
        self.rho = float(rho)
        self.alpha = min(a.alpha, b.alpha)

    def value(self, u):
        return self.a.value(u) - self.rho * self.b.value(u)

    def grad_dual(self, u):
        return self.a.grad_dual(u) - self.rho * self.b.grad_dual(u)

    def hess_action(self, u, w):
        return self.a.hess_action(u, w) - self.rho * self.b.hess_action(u, w)

    def hess_matrix(self, u):
        return self.a.hess_matrix(u) - self.rho * self.b.hess_matrix(u)

    def holder_m(self, radius):
        return self.a.holder_m(radius) + abs(self.rho) * self.b.holder_m(radius)

    def bound_k(self, radius, mu):
        return max(1.0, self.a.bound_k(radius, mu) + abs(self.rho) * self.b.bound_k(radius, mu))


# ---------------------------------------------------------------------------
# closed-form sphere saddle (three coordinates, identity pair)
# ---------------------------------------------------------------------------

SADDLE_DIAG = (0.5, 2.0, 1.5)


def saddle_model():
    """Quadratic on the unit 2-sphere with a closed-form mountain pass.

    With the diagonal (0.5, 2.0, 1.5) the poles along the third axis are
    index-1 saddles of value 0.75; the points along the first axis are the
    minima of value 0.25, and every path joining them crosses level 0.75.
    The tangent spectrum at the saddle is {-1.0, 0.5}.
    """
    pair = HilbertPair(np.eye(3), np.eye(3))
    func = QuadraticFunctional(pair, np.diag(SADDLE_DIAG))
    return pair, func, 1.0


def pencil_model():
    """Four-coordinate diagonal model with tangent spectrum {-1, -0.5, 0.3}.

    The base point sits on the fourth axis of the unit sphere; subtracting
    the multiplier 1.0 from the leading diagonal (0, 0.5, 1.3) yields the
    stated tangent eigenvalues.
    """
    pair = HilbertPair(np.eye(4), np.eye(4))
    func = QuadraticFunctional(pair, np.diag([0.0, 0.5, 1.3, 1.0]))
    point = pair.sphere_point(np.array([0.0, 0.0, 0.0, 1.0]), 1.0)
    return pair, func, point


# ---------------------------------------------------------------------------
# block saddle with saturating tails
# ---------------------------------------------------------------------------

def _chi(s):
    """Even C^2 saturation of s^2/2: quadratic core, linear tails."""
    a = np.abs(s)
    core = 0.5 * a * a
    mid = 0.5 + 0.5 * (a * a - 1.0) - (a - 1.0) ** 3 / 6.0
    tail = (11.0 / 6.0) + 1.5 * (a - 2.0)
    return np.where(a <= 1.0, core, np.where(a <= 2.0, mid, tail))


def _chi_prime(s):
    a = np.abs(s)
    sign = np.sign(s)
    core = a
    mid = a - 0.5 * (a - 1.0) ** 2
    return sign * np.where(a <= 1.0, core, np.where(a <= 2.0, mid, 1.5))


def _chi_second(s):
    a = np.abs(s)
    return np.where(a <= 1.0, 1.0, np.clip(2.0 - a, 0.0, 1.0))


class BlockSaddleFunctional(ConstrainedFunctional):
    """Sum of saturated quadratics in the leading coordinates.

    phi(u) = sum_i a_i chi(u_i) over the first k coordinates.  The gradient
    is globally bounded, the second derivative is diagonal and Lipschitz,
    and near the coordinate origin of the block the functional is exactly
    the quadratic with weights a_i.
    """

    alpha = 1.0

    def __init__(self, pair: HilbertPair, weights: np.ndarray):
        self.pair = pair
        self.weights = np.asarray(weights, dtype=float)
        self.block = self.weights.shape[0]
        vals = eigh(pair.gram_e, eigvals_only=True)
        self._e_min = float(vals[0])
        self._a_max = float(np.abs(self.weights).max())

    def value(self, u):
        return float(self.weights @ _chi(u[: self.block]))

    def grad_dual(self, u):
        out = np.zeros_like(u)
        out[: self.block] = self.weights * _chi_prime(u[: self.block])
        return out

    def hess_action(self, u, w):
        out = np.zeros_like(np.asarray(w, dtype=float))
        out[: self.block] = self.weights * _chi_second(u[: self.block]) * w[: self.block]
        return out

    def hess_matrix(self, u):
        mat = np.zeros((self.pair.dim, self.pair.dim))
        diag = self.weights * _chi_second(u[: self.block])
        mat[: self.block, : self.block] = np.diag(diag)
        return mat

    def holder_m(self, radius):
        return max(self._a_max / self._e_min, self._a_max / self._e_min ** 1.5)

    def bound_k(self, radius, mu):
        grad_sup = 1.5 * self._a_max * math.sqrt(self.block) / math.sqrt(self._e_min)
        second = self._a_max / self._e_min
        return max(1.0, grad_sup, second + grad_sup * radius / mu)


@dataclass
class DescentInstance:
    """One randomized block-saddle configuration for the descent suite."""

    pair: HilbertPair
    functional: BlockSaddleFunctional
    mu: float
    point: SpherePoint
    frame: list
    beta: float
    radius: float


def random_descent_instance(rng: np.random.Generator, *, frame_size: int = 2) -> DescentInstance:
    """Random block saddle at scales where certificate margins are measurable.

    The mass level is large and the negative block weights are order one, so
    the descent radius and travel cap stay far above roundoff while the
    analytic derivative bound stays close to its floor.
    """
    dim = int(rng.integers(frame_size + 2, frame_size + 6))
    mu = float(np.exp(rng.uniform(np.log(2.0e3), np.log(5.0e4))))
    # Mild strong form: identity plus a small random SPD bump (eigenvalues
    # stay in [1, ~1.15]), weak form identity.
    bump = rng.standard_normal((dim, dim))
    bump = bump @ bump.T
    gram_e = np.eye(dim) + 0.15 * bump / max(np.linalg.eigvalsh(bump).max(), 1e-12)
    pair = HilbertPair(gram_e, np.eye(dim))

    weights = np.empty(frame_size + 1)
    weights[:frame_size] = -rng.uniform(0.45, 0.9, size=frame_size)
    weights[frame_size] = rng.uniform(0.2, 0.5)
    func = BlockSaddleFunctional(pair, weights)

    # Base point: block coordinates vanish, mass carried by the tail.
    u0 = np.zeros(dim)
    tail = rng.standard_normal(dim - (frame_size + 1))
    while np.linalg.norm(tail) < 1e-3:
        tail = rng.standard_normal(dim - (frame_size + 1))
    u0[frame_size + 1:] = tail / np.linalg.norm(tail) * math.sqrt(mu)
    point = pair.sphere_point(u0, mu)

    # Strongly orthonormalized frame spanning the negative block directions.
    frame = []
    basis = np.eye(dim)[:, :frame_size]
    for j in range(frame_size):
        vec = basis[:, j].astype(float)
        for w in frame:
            vec = vec - pair.inner_e(vec, w.v) * w.v
        vec = vec / pair.norm_e(vec)
        frame.append(TangentVector(point, vec))

    from .functional import frame_form  # local import to avoid cycle at import time

    top = float(eigh(frame_form(func, point, frame), eigvals_only=True)[-1])
    beta = min(0.9 * (-top), 0.95)
    radius = pair.norm_e(u0) + 1.25
    return DescentInstance(pair=pair, functional=func, mu=mu, point=point,
                           frame=frame, beta=beta, radius=radius)
