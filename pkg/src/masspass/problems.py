"""Mass-constrained nonlinear Schroedinger discretizations.

Piecewise-linear finite elements on a 1-D interval (Neumann or Dirichlet
ends) or on a three-edge star graph with a common vertex (continuity plus
natural flux balance).  The strong product is the full first-order Sobolev
form (stiffness plus mass), the weak product is the mass form, and the
level family splits as

    A(u) = (1/2) int |u'|^2 + (1/2) int V u^2,     B(u) = (1/p) int |u|^p,

with the power integral evaluated by three-point Gauss quadrature per
element, so the assembled derivatives are the exact derivatives of the
discrete values.  The exponent must be mass-supercritical in one dimension
(p > 6), which makes the energy unbounded below on every mass sphere while
a barrier separates near-constant states from narrow spikes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import ConfigError, GeometryFailure
from .functional import ConstrainedFunctional, approx_morse_index
from .hilbert import HilbertPair
from .minmax import DiscretePath, RhoFamily
from .models import QuadraticFunctional

# Three-point Gauss rule on the reference element [0, 1].
_GPTS = 0.5 * (1.0 + np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)]))
_GWTS = 0.5 * np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
_SHAPE = np.column_stack([1.0 - _GPTS, _GPTS])   # (3, 2) nodal shapes at Gauss points


# ---------------------------------------------------------------------------
# p-power part
# ---------------------------------------------------------------------------

class PowerFunctional(ConstrainedFunctional):
    """B(u) = (1/p) int |u|^p by per-element Gauss quadrature.

    ``elements`` holds node index pairs (-1 marks a homogeneous Dirichlet
    ghost), ``lengths`` the element sizes.  The analytic Hoelder and bound
    data use the discrete sup-norm embedding constant of the strong form.
    """

    def __init__(self, dim: int, elements: np.ndarray, lengths: np.ndarray,
                 p: float, c_emb: float):
        self.dim = dim
        self.elements = np.asarray(elements, dtype=int)
        self.lengths = np.asarray(lengths, dtype=float)
        self.p = float(p)
        self.c_emb = float(c_emb)
        self.alpha = min(1.0, self.p - 2.0)
        self._idx = np.where(self.elements < 0, dim, self.elements)

    def _gauss_values(self, u: np.ndarray) -> np.ndarray:
        ext = np.concatenate([u, [0.0]])
        return ext[self._idx] @ _SHAPE.T          # (E, 3)

    def value(self, u: np.ndarray) -> float:
        vals = self._gauss_values(u)
        return float((self.lengths[:, None] * _GWTS[None, :]
                      * np.abs(vals) ** self.p).sum()) / self.p

    def grad_dual(self, u: np.ndarray) -> np.ndarray:
        vals = self._gauss_values(u)
        force = np.abs(vals) ** (self.p - 2.0) * vals       # (E, 3)
        weights = self.lengths[:, None] * _GWTS[None, :]
        local = (weights * force) @ _SHAPE                   # (E, 2)
        out = np.zeros(self.dim + 1)
        np.add.at(out, self._idx, local)
        return out[: self.dim]

    def hess_action(self, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        vals = self._gauss_values(u)
        wv = self._gauss_values(np.asarray(w, dtype=float))
        curv = (self.p - 1.0) * np.abs(vals) ** (self.p - 2.0)
        weights = self.lengths[:, None] * _GWTS[None, :]
        local = (weights * curv * wv) @ _SHAPE
        out = np.zeros(self.dim + 1)
        np.add.at(out, self._idx, local)
        return out[: self.dim]

    def hess_matrix(self, u: np.ndarray) -> np.ndarray:
        vals = self._gauss_values(u)
        curv = (self.p - 1.0) * np.abs(vals) ** (self.p - 2.0)
        weights = self.lengths[:, None] * _GWTS[None, :] * curv   # (E, 3)
        out = np.zeros((self.dim + 1, self.dim + 1))
        for g in range(3):
            block = weights[:, g][:, None, None] \
                * (_SHAPE[g][:, None] * _SHAPE[g][None, :])[None, :, :]
            np.add.at(out, (self._idx[:, :, None], self._idx[:, None, :]), block)
        return out[: self.dim, : self.dim]

    def holder_m(self, radius: float) -> float:
        p, ce = self.p, self.c_emb
        first = (p - 1.0) * (ce * radius) ** (p - 2.0)
        second = (p - 1.0) * (p - 2.0) * ce ** (p - 2.0) * radius ** (p - 3.0)
        return max(first, second)

    def bound_k(self, radius: float, mu: float) -> float:
        p, ce = self.p, self.c_emb
        grad = (ce * radius) ** (p - 2.0) * math.sqrt(mu)
        hess = (p - 1.0) * (ce * radius) ** (p - 2.0)
        return max(1.0, grad, hess + grad * radius / mu)


# ---------------------------------------------------------------------------
# problem definition and assembly
# ---------------------------------------------------------------------------

@dataclass
class NLSProblem:
    """Configuration of one mass-constrained discretization."""

    kind: str = "interval"               # "interval" | "star"
    length: float = 1.0
    edge_lengths: tuple = (1.0, 1.0, 1.0)
    grid: int = 200                      # interval DOFs / per-edge elements (star)
    bc: str = "neumann"                  # interval: "neumann" | "dirichlet"
    p: float = 8.0
    mu: float = 1.0
    rho_min: float = 1.0
    rho_max: float = 3.0
    rho_steps: int = 21
    well_depth: float = 0.0              # potential -depth on [well_a, well_b]
    well_a: float = 0.0
    well_b: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("interval", "star"):
            raise ConfigError(f"unknown problem kind {self.kind!r}")
        if self.bc not in ("neumann", "dirichlet", "graph-kirchhoff"):
            raise ConfigError(f"unknown boundary condition {self.bc!r}")
        if self.p <= 6.0:
            raise ConfigError("exponent must exceed 6 (mass-supercritical in 1-D)")
        if self.mu <= 0 or self.length <= 0 or self.grid < 8:
            raise ConfigError("mu, length must be positive and grid at least 8")
        if not self.rho_min < self.rho_max:
            raise ConfigError("rho interval is empty")

    @classmethod
    def from_dict(cls, cfg: dict) -> "NLSProblem":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(cfg) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        return cls(**cfg)

    def potential_samples(self, x: np.ndarray) -> np.ndarray:
        v = np.zeros_like(x)
        if self.well_depth != 0.0:
            inside = (x >= self.well_a) & (x <= self.well_b)
            v[inside] = -float(self.well_depth)
        return v


def _interval_mesh(problem: NLSProblem):
    d_full = problem.grid if problem.bc == "neumann" else problem.grid + 2
    x = np.linspace(0.0, problem.length, d_full)
    elements_full = np.column_stack([np.arange(d_full - 1), np.arange(1, d_full)])
    lengths = np.diff(x)
    if problem.bc == "dirichlet":
        keep = np.arange(1, d_full - 1)
        remap = -np.ones(d_full, dtype=int)
        remap[keep] = np.arange(keep.size)
        elements = remap[elements_full]
    else:
        keep = np.arange(d_full)
        elements = elements_full
    return x, elements_full, elements, lengths, keep


def _star_mesh(problem: NLSProblem):
    m = problem.grid
    lengths_all, elements, x_all = [], [], [0.0]
    offset = 1
    for L in problem.edge_lengths:
        h = L / m
        chain = [0] + list(range(offset, offset + m))
        for a, b in zip(chain[:-1], chain[1:]):
            elements.append((a, b))
            lengths_all.append(h)
        x_all.extend((np.arange(1, m + 1) * h).tolist())
        offset += m
    keep = np.arange(1 + 3 * m)
    return (np.array(x_all), np.array(elements, dtype=int),
            np.array(lengths_all), keep)


def _assemble_matrices(dim: int, elements: np.ndarray, lengths: np.ndarray,
                       v_gauss: np.ndarray):
    """Exact stiffness/mass and Gauss-quadrature potential matrices."""
    stiff = np.zeros((dim + 1, dim + 1))
    mass = np.zeros((dim + 1, dim + 1))
    pot = np.zeros((dim + 1, dim + 1))
    idx = np.where(elements < 0, dim, elements)
    ke = np.array([[1.0, -1.0], [-1.0, 1.0]])
    me = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    for g in range(3):
        outer = _SHAPE[g][:, None] * _SHAPE[g][None, :]
        w = lengths * _GWTS[g] * v_gauss[:, g]
        np.add.at(pot, (idx[:, :, None], idx[:, None, :]),
                  w[:, None, None] * outer[None, :, :])
    np.add.at(stiff, (idx[:, :, None], idx[:, None, :]),
              (1.0 / lengths)[:, None, None] * ke[None, :, :])
    np.add.at(mass, (idx[:, :, None], idx[:, None, :]),
              lengths[:, None, None] * me[None, :, :])
    return stiff[:dim, :dim], mass[:dim, :dim], pot[:dim, :dim]


@dataclass
class AssembledNLS:
    """Assembled pair, level family, and mesh data for one problem."""

    problem: NLSProblem
    pair: HilbertPair
    family: RhoFamily
    x: np.ndarray                 # coordinates of retained DOFs
    elements: np.ndarray
    lengths: np.ndarray
    c_emb: float
    quad_part: QuadraticFunctional
    power_part: PowerFunctional
    total_length: float

    def constant_vector(self) -> np.ndarray:
        ones = np.ones(self.pair.dim)
        return self.pair.renormalize(ones, self.problem.mu)


def assemble(problem: NLSProblem) -> AssembledNLS:
    """Build the pair and the level family for a problem configuration."""
    if problem.kind == "interval":
        x_full, elements_full, elements, lengths, keep = _interval_mesh(problem)
        x = x_full[keep]
    else:
        x_full, elements, lengths, keep = _star_mesh(problem)
        elements_full = elements
        x = x_full

    # Potential sampled at the full node set, interpolated linearly inside
    # elements; the quadrature makes the potential matrix exact for that
    # interpolant.
    v_nodes = problem.potential_samples(x_full)
    v_gauss = v_nodes[elements_full] @ _SHAPE.T

    dim = keep.size if problem.kind == "interval" else x_full.size
    stiff, mass, pot = _assemble_matrices(dim, elements, lengths, v_gauss)
    gram_e = stiff + mass
    pair = HilbertPair(gram_e, mass)

    c_emb = float(np.sqrt(np.diagonal(np.linalg.inv(gram_e)).max()))
    quad = QuadraticFunctional(pair, stiff + pot)
    power = PowerFunctional(dim, elements, lengths, problem.p, c_emb)
    family = RhoFamily(a_part=quad, b_part=power, rho_min=problem.rho_min,
                       rho_max=problem.rho_max, modulus_invariant=True)
    total_length = problem.length if problem.kind == "interval" \
        else float(sum(problem.edge_lengths))
    return AssembledNLS(problem=problem, pair=pair, family=family, x=x,
                        elements=elements, lengths=lengths, c_emb=c_emb,
                        quad_part=quad, power_part=power,
                        total_length=total_length)


def holder_constants(assembled: AssembledNLS, radius: float):
    """Analytic Hoelder constant, derivative bound, and exponent at a radius."""
    if radius <= 1.0:
        raise ConfigError("radius must exceed 1")
    rho = assembled.problem.rho_max
    mu = assembled.problem.mu
    m = assembled.quad_part.holder_m(radius) \
        + rho * assembled.power_part.holder_m(radius)
    k = max(1.0, assembled.quad_part.bound_k(radius, mu)
            + rho * assembled.power_part.bound_k(radius, mu))
    alpha = min(assembled.quad_part.alpha, assembled.power_part.alpha)
    return m, k, alpha


# ---------------------------------------------------------------------------
# endpoints
# ---------------------------------------------------------------------------

def _bump(assembled: AssembledNLS, width: float) -> np.ndarray:
    """Spike profile at the energetically cheapest concentration site.

    Natural ends admit monotone half-bumps, so the spike sits at an end of
    the domain (the outer tip of the first edge on a star); a clamped end
    forces an interior bump instead.
    """
    x = assembled.x
    if assembled.problem.kind == "interval":
        center = 0.5 * assembled.problem.length if assembled.problem.bc == "dirichlet" else 0.0
        profile = np.exp(-0.5 * ((x - center) / width) ** 2)
    else:
        m = assembled.problem.grid
        center = assembled.problem.edge_lengths[0]
        profile = np.full(x.size, 1e-9)
        profile[0] = math.exp(-0.5 * (center / width) ** 2)
        profile[1:m + 1] = np.exp(-0.5 * ((x[1:m + 1] - center) / width) ** 2)
    return assembled.pair.renormalize(profile, assembled.problem.mu)


def endpoints(assembled: AssembledNLS, *, margin: float | None = None,
              n_widths: int = 25):
    """Low near-constant state and a narrow spike strictly below it.

    The spike width is scanned from a quarter of the domain down to a few
    mesh cells; the first width whose value at the smallest rho drops below
    the near-constant level by the margin wins.  The endpoints do not depend
    on rho, and since the power part of the spike is positive its value only
    decreases as rho grows.
    """
    problem = assembled.problem
    f_low = assembled.family.functional(problem.rho_min)
    if problem.bc == "dirichlet":
        w1 = assembled.pair.renormalize(
            np.sin(math.pi * assembled.x / problem.length), problem.mu)
    else:
        w1 = assembled.constant_vector()
    v1 = f_low.value(w1)
    if margin is None:
        margin = max(1.0, abs(v1))
    h_min = float(assembled.lengths.min())
    widths = np.geomspace(assembled.total_length / 4.0, 1.5 * h_min, n_widths)
    scan = []
    for width in widths:
        w2 = _bump(assembled, width)
        v2 = f_low.value(w2)
        scan.append((float(width), float(v2)))
        if v2 < v1 - margin:
            return w1, w2
    raise GeometryFailure(
        f"no spike width reaches {v1 - margin:.6e}; scan: "
        + ", ".join(f"({w:.3g}, {v:.3g})" for w, v in scan)
    )


def initial_pool(assembled: AssembledNLS, w1: np.ndarray, w2: np.ndarray,
                 n_nodes: int = 33):
    path = DiscretePath.from_endpoints(assembled.pair, w1, w2,
                                       assembled.problem.mu, n_nodes)
    return [path]


# ---------------------------------------------------------------------------
# constant-solution oracle
# ---------------------------------------------------------------------------

@dataclass
class ConstantSolutionOracle:
    """Exact constant stationary state for potential-free natural ends."""

    u: np.ndarray
    rho: float
    lam_model: float              # multiplier written on the equation side
    lagrange: float               # derivative pairing convention (= -lam_model)
    el_residual: float
    constrained_count: int
    free_count: int
    continuum_count: int | None


def constant_solution(assembled: AssembledNLS, rho: float) -> ConstantSolutionOracle:
    """The flat state, its multiplier, and its Morse data.

    The nodal constant is an exact critical point of the discrete family
    when the potential vanishes and no end is clamped.  Its multiplier in
    the equation-side convention is rho (mu / L)^{(p-2)/2}; the derivative
    pairing returns the negative of that value.  The continuum Morse count
    on an interval counts the cosine modes below (p-2) rho (mu/L)^{(p-2)/2}.
    """
    problem = assembled.problem
    if problem.well_depth != 0.0 or problem.bc == "dirichlet":
        raise ConfigError("constant oracle needs a potential-free natural problem")
    mu, L, p = problem.mu, assembled.total_length, problem.p
    u = assembled.constant_vector()
    f = assembled.family.functional(rho)
    lam = float(f.grad_dual(u) @ u) / mu
    lam_model = rho * (mu / L) ** ((p - 2.0) / 2.0)
    residual = assembled.pair.dual_norm_e(f.grad_dual(u) - lam * (assembled.pair.gram_h @ u))
    point = assembled.pair.sphere_point(u, mu)
    constrained = approx_morse_index(f, point, 0.0).count
    free = approx_morse_index(f, point, 0.0, free=True).count
    continuum = None
    if problem.kind == "interval":
        threshold = (p - 2.0) * rho * (mu / L) ** ((p - 2.0) / 2.0)
        continuum = 0
        k = 1
        while (k * math.pi / L) ** 2 < threshold:
            continuum += 1
            k += 1
    return ConstantSolutionOracle(u=u, rho=rho, lam_model=lam_model, lagrange=lam,
                                  el_residual=residual, constrained_count=constrained,
                                  free_count=free, continuum_count=continuum)
