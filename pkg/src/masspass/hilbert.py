"""Ambient structure: a nested pair of inner products on one coordinate space.

Two symmetric positive-definite Gram matrices realize the strong product
``<.,.>`` (norm ``||.||``) and the weak product ``(.,.)`` (norm ``|.|``) on
R^d, with the injection (strong -> weak) of norm at most one.  The mass
sphere is the set of vectors whose weak norm squared equals ``mu``; its
tangent space at ``u`` consists of the vectors weakly orthogonal to ``u``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh

from .errors import ConfigError, DimensionMismatch

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12
INJECTION_TOL = 1e-10
SPHERE_RTOL = 1e-9
TANGENT_RTOL = 1e-9


def _check_gram(name: str, mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigError(f"{name} must be a square matrix, got shape {mat.shape}")
    scale = np.abs(mat).max()
    if scale == 0.0 or not np.isfinite(scale):
        raise ConfigError(f"{name} is zero or non-finite")
    if np.abs(mat - mat.T).max() > SYMMETRY_RTOL * scale:
        raise ConfigError(f"{name} is not symmetric to relative {SYMMETRY_RTOL:g}")
    return 0.5 * (mat + mat.T)


class HilbertPair:
    """Two SPD Gram forms on R^d plus the cached strong-form factorization.

    Immutable after construction; every method is a pure function of its
    arguments, so instances are safe to share across threads.
    """

    def __init__(self, gram_e: np.ndarray, gram_h: np.ndarray, *, rescale: bool = True):
        gram_e = _check_gram("gram_e", gram_e)
        gram_h = _check_gram("gram_h", gram_h)
        if gram_e.shape != gram_h.shape:
            raise ConfigError("gram_e and gram_h must have the same shape")
        self.dim = gram_e.shape[0]

        # Injection norm <= 1 means the weak form is dominated by the strong
        # one; enforced by rescaling the strong form when violated.
        top = float(eigh(gram_h, gram_e, eigvals_only=True, subset_by_index=(self.dim - 1, self.dim - 1))[0])
        if top > 1.0 + INJECTION_TOL:
            if not rescale:
                raise ConfigError(f"injection norm {np.sqrt(top):.6g} exceeds 1")
            logger.warning(
                "weak form exceeds strong form (top pencil eigenvalue %.6g); rescaling gram_e", top
            )
            gram_e = gram_e * top
        self.gram_e = gram_e
        self.gram_h = gram_h
        try:
            self._factor_e = cho_factor(gram_e, lower=True)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by eigh above
            raise ConfigError("gram_e is not positive definite") from exc
        try:
            np.linalg.cholesky(gram_h)
        except np.linalg.LinAlgError as exc:
            raise ConfigError("gram_h is not positive definite") from exc
        # Lower-triangular L with gram_e = L L^T, used for strongly
        # orthonormal bases (QR in the strong metric).
        self._chol_e = np.tril(self._factor_e[0])

    # -- basic bilinear forms -------------------------------------------------

    def _vec(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape[0] != self.dim:
            raise DimensionMismatch(f"expected length {self.dim}, got {a.shape}")
        return a

    def inner_e(self, a, b) -> float:
        """Strong inner product <a, b>."""
        return float(self._vec(a) @ self.gram_e @ self._vec(b))

    def inner_h(self, a, b) -> float:
        """Weak inner product (a, b)."""
        return float(self._vec(a) @ self.gram_h @ self._vec(b))

    def norm_e(self, a) -> float:
        a = self._vec(a)
        return float(np.sqrt(max(a @ self.gram_e @ a, 0.0)))

    def norm_h(self, a) -> float:
        a = self._vec(a)
        return float(np.sqrt(max(a @ self.gram_h @ a, 0.0)))

    # -- linear maps ----------------------------------------------------------

    def solve_e(self, rhs: np.ndarray) -> np.ndarray:
        """Solve gram_e @ x = rhs with the cached factorization."""
        return cho_solve(self._factor_e, np.asarray(rhs, dtype=float))

    def riesz_map(self, u) -> np.ndarray:
        """Strong-form representative of the weak pairing (u, .).

        Returns the unique g with <g, h> = (u, h) for every h; its strong
        norm is at most the weak norm of u, and on the mass sphere it is
        bounded below by mu / ||u||.
        """
        return self.solve_e(self.gram_h @ self._vec(u))

    def dual_norm_e(self, form: np.ndarray) -> float:
        """Dual norm of a linear form given by its coordinate vector."""
        form = self._vec(form)
        return float(np.sqrt(max(form @ self.solve_e(form), 0.0)))

    def renormalize(self, u, mu: float) -> np.ndarray:
        """Scale u onto the mass-mu sphere."""
        nh = self.norm_h(u)
        if nh == 0.0:
            raise ConfigError("cannot renormalize the zero vector")
        return self._vec(u) * np.sqrt(mu) / nh

    # -- sphere membership ----------------------------------------------------

    def sphere_point(self, u, mu: float) -> "SpherePoint":
        return SpherePoint(self, np.array(u, dtype=float), float(mu))

    def tangent_vector(self, point: "SpherePoint", v) -> "TangentVector":
        return TangentVector(point, np.array(v, dtype=float))

    def project_tangent_h(self, point: "SpherePoint", x) -> "TangentVector":
        """Weakly orthogonal projection of x onto the tangent space at point."""
        u = point.u
        coeff = self.inner_h(u, x) / point.mu
        return TangentVector(point, self._vec(x) - coeff * u)

    def project_tangent_e(self, point: "SpherePoint", x) -> np.ndarray:
        """Strongly orthogonal projection onto the tangent space at point.

        The tangent space is the strong orthogonal complement of the Riesz
        image of the base point, so the result is also weakly orthogonal to
        the base point.
        """
        g = self.riesz_map(point.u)
        denom = self.inner_e(g, g)
        x = self._vec(x)
        return x - (self.inner_e(x, g) / denom) * g

    # -- (de)serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "gramE": [float(x) for x in self.gram_e.ravel()],
            "gramH": [float(x) for x in self.gram_h.ravel()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HilbertPair":
        try:
            dim = int(data["dim"])
            gram_e = np.array(data["gramE"], dtype=float).reshape(dim, dim)
            gram_h = np.array(data["gramH"], dtype=float).reshape(dim, dim)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"malformed pair data: {exc}") from exc
        return cls(gram_e, gram_h)

    @classmethod
    def from_json(cls, path) -> "HilbertPair":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class SpherePoint:
    """A vector on the mass sphere of level mu."""

    pair: HilbertPair = field(repr=False)
    u: np.ndarray
    mu: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigError("mass level must be positive")
        residual = abs(self.pair.inner_h(self.u, self.u) - self.mu)
        if residual > SPHERE_RTOL * self.mu:
            raise ConfigError(
                f"point off the sphere: |(u,u) - mu| = {residual:.3e} > {SPHERE_RTOL:g}*mu"
            )
        self.u.setflags(write=False)


@dataclass(frozen=True)
class TangentVector:
    """A vector weakly orthogonal to its base point."""

    base: SpherePoint
    v: np.ndarray

    def __post_init__(self):
        pair = self.base.pair
        nv = pair.norm_h(self.v)
        drift = abs(pair.inner_h(self.base.u, self.v))
        if drift > TANGENT_RTOL * np.sqrt(self.base.mu) * max(nv, 1e-300):
            raise ConfigError(
                f"vector not tangent: |(u,v)| = {drift:.3e} exceeds tolerance"
            )
        self.v.setflags(write=False)

    @property
    def pair(self) -> HilbertPair:
        return self.base.pair


def random_pair(dim: int, rng: np.random.Generator, *, cond: float = 4.0) -> HilbertPair:
    """Random well-conditioned pair for test and verification suites.

    Strong-form eigenvalues are drawn log-uniformly in [1, cond] and weak
    ones in [1/cond, 1], so the injection condition holds without rescaling.
    """
    def spd(lo, hi):
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        vals = np.exp(rng.uniform(np.log(lo), np.log(hi), size=dim))
        return (q * vals) @ q.T

    return HilbertPair(spd(1.0, cond), spd(1.0 / cond, 1.0))
