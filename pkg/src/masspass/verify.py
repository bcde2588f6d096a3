"""Randomized verification suites for the geometric and descent guarantees.

Each suite draws seeded instances, measures the quantities the library
certifies (sphere preservation, transport isometry, quantitative radii,
descent decreases, covering multiplicities, Hoelder bounds), and reports
maxima and violation counts against the stated tolerances.  All suites are
deterministic functions of their seed and sizes; the orchestrator assembles
their dictionaries into one pass/fail report.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .deformation import build_cover, descent_step
from .functional import (approx_morse_index, constrained_form_matrix,
                         frame_form, second_variation, sphere_gradient)
from .geometry import (Geodesic, GeometryConstants, RadialTransport, exp_map,
                       geodesic_eval, holonomy_defect, log_map,
                       parallel_transport, transport_frame)
from .hilbert import HilbertPair, TangentVector, random_pair
from .models import (QuadraticFunctional, random_descent_instance, saddle_model)

GEOMETRY_TOLS = {
    "sphere_preservation": 1e-10,     # relative to mu
    "speed_conservation": 1e-10,
    "log_norm_identity": 1e-10,
    "exp_log_roundtrip": 1e-9,
    "homogeneity": 1e-12,
    "curve_residual": 1e-6,           # finite-difference oracle plateau
    "transport_isometry": 1e-6,       # relative
    "transport_tangency": 1e-6,
    "transport_inverse": 1e-6,
    "frame_orthonormality": 1e-5,
}


def _max(d, key, value):
    d[key] = max(d.get(key, 0.0), value)


def geometry_suite(seeds: int = 500, dims=(3, 50, 400), *, base_seed: int = 1000,
                   threads: int = 1) -> dict:
    """Geodesic, exponential, and transport invariants on random pairs.

    One random pair and configuration per seed, cycling through the
    dimension list.  Also checks the two quantitative transport statements:
    the per-length transport bound and the containment of capped-time arcs,
    plus the velocity drift along arcs.
    """
    t_start = time.time()

    def one(s: int) -> dict:
        rng = np.random.default_rng(base_seed + s)
        dim = dims[s % len(dims)]
        pair = random_pair(dim, rng)
        mu = float(np.exp(rng.uniform(np.log(0.2), np.log(5.0))))
        res: dict = {"violations": 0}

        u0 = pair.renormalize(rng.standard_normal(dim), mu)
        p0 = pair.sphere_point(u0, mu)
        raw = pair.project_tangent_h(p0, rng.standard_normal(dim))
        speed = rng.uniform(0.1, 0.8) * math.sqrt(mu) * math.pi
        v = TangentVector(p0, raw.v * speed / pair.norm_h(raw.v))
        geo = Geodesic(p0, v)

        for t in np.linspace(0.0, 1.0, 7):
            sig = geo.point(t)
            dsig = geo.derivative(t)
            _max(res, "sphere_preservation",
                 abs(pair.inner_h(sig, sig) - mu) / mu)
            _max(res, "speed_conservation",
                 abs(pair.norm_h(dsig) - pair.norm_h(v.v)))
            # Second-order arc equation residual, scaled by the data size.
            om2 = (pair.norm_h(dsig) / math.sqrt(mu)) ** 2
            h = 1e-4
            second = (geo.point(t + h) - 2.0 * sig + geo.point(t - h)) / (h * h)
            _max(res, "curve_residual",
                 pair.norm_h(second + om2 * sig) / max(om2 * math.sqrt(mu), 1.0))

        a = float(rng.uniform(0.2, 1.8))
        t = float(rng.uniform(0.1, 0.9))
        left = Geodesic(p0, v).point(a * t)
        right = Geodesic(p0, TangentVector(p0, a * v.v)).point(t)
        _max(res, "homogeneity", pair.norm_e(left - right) / math.sqrt(mu))

        q = exp_map(p0, v)
        if pair.inner_h(q.u, u0) / mu > -0.9:
            lv = log_map(p0, q)
            _max(res, "log_norm_identity",
                 abs(pair.norm_h(lv.v)
                     - math.sqrt(mu) * math.acos(np.clip(pair.inner_h(q.u, u0) / mu, -1, 1))))
            back = exp_map(p0, lv)
            _max(res, "exp_log_roundtrip", pair.norm_e(back.u - q.u))

        w0 = pair.project_tangent_h(p0, rng.standard_normal(dim))
        rt = RadialTransport(p0, q)
        tw = parallel_transport(rt, w0)
        scale = max(pair.norm_e(w0.v), 1e-30)
        _max(res, "transport_isometry",
             abs(pair.norm_e(tw.v) - pair.norm_e(w0.v)) / scale)
        _max(res, "transport_tangency", abs(pair.inner_h(q.u, tw.v)) / scale)
        back_w = parallel_transport(RadialTransport(q, p0), tw)
        _max(res, "transport_inverse", pair.norm_e(back_w.v - w0.v) / scale)

        # Frame orthonormality after transport.
        k = min(3, dim - 1)
        frame = []
        for _ in range(k):
            cand = pair.project_tangent_h(p0, rng.standard_normal(dim)).v
            for w in frame:
                cand = cand - pair.inner_e(cand, w.v) * w.v
            frame.append(TangentVector(p0, cand / pair.norm_e(cand)))
        moved = transport_frame(p0, frame, q)
        for i in range(k):
            for j in range(k):
                target = 1.0 if i == j else 0.0
                _max(res, "frame_orthonormality",
                     abs(pair.inner_e(moved[i].v, moved[j].v) - target))

        # Per-length transport bound inside the base radius.
        radius = pair.norm_e(u0) + 1.0 + rng.uniform(0.1, 1.0)
        constants = GeometryConstants(radius, mu, 1.0)
        d0 = constants.base_radius
        step = pair.project_tangent_h(p0, rng.standard_normal(dim))
        step = TangentVector(p0, step.v * (0.3 * d0 / pair.norm_e(step.v)))
        near = exp_map(p0, step)
        if pair.norm_e(near.u - u0) <= d0:
            lvn = log_map(p0, near)
            tw2 = parallel_transport(RadialTransport(p0, near), w0)
            lhs = pair.norm_e(tw2.v - w0.v)
            rhs = constants.transport_factor * pair.norm_h(lvn.v) * pair.norm_e(w0.v)
            if lhs > rhs * (1.0 + 1e-9) + 1e-12:
                res["violations"] += 1

        # Containment of capped-time arcs and velocity drift.
        delta = float(rng.uniform(0.2, 1.0))
        mid = exp_map(p0, TangentVector(p0, step.v * rng.uniform(0.0, 0.4)))
        if pair.norm_e(mid.u - u0) < delta / 2.0:
            dirn = pair.project_tangent_h(mid, rng.standard_normal(dim))
            dirn = TangentVector(mid, dirn.v / max(pair.norm_e(dirn.v), 1e-30))
            cap = min(2.0 * mu / radius, delta / 4.0)
            arc = Geodesic(mid, dirn)
            for tt in np.linspace(0.0, cap * (1.0 - 1e-9), 5):
                if pair.norm_e(arc.point(tt) - u0) >= delta:
                    res["violations"] += 1
                drift = pair.norm_e(arc.derivative(tt) - dirn.v)
                if drift > radius * cap / mu + 1e-12:
                    res["violations"] += 1
        return res

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(seeds)))
    else:
        rows = [one(s) for s in range(seeds)]

    out: dict = {"seeds": seeds, "dims": list(dims), "violations": 0}
    for row in rows:
        out["violations"] += row.pop("violations")
        for key, val in row.items():
            _max(out, key, val)
    out["checks"] = {key: bool(out.get(key, 0.0) <= tol)
                     for key, tol in GEOMETRY_TOLS.items()}
    out["passed"] = bool(all(out["checks"].values()) and out["violations"] == 0)
    out["runtime_s"] = round(time.time() - t_start, 3)
    return out


def second_order_suite(probes: int = 200, *, base_seed: int = 3000,
                       rel_tol: float = 1e-4) -> dict:
    """Constrained second form against arc finite differences.

    Random quadratic functionals on random pairs; the oracle is the central
    second difference of the value along the explicit arc.
    """
    t_start = time.time()
    worst = 0.0
    for s in range(probes):
        rng = np.random.default_rng(base_seed + s)
        dim = int(rng.integers(3, 9))
        pair = random_pair(dim, rng)
        mu = float(np.exp(rng.uniform(np.log(0.3), np.log(3.0))))
        mat = rng.standard_normal((dim, dim))
        func = QuadraticFunctional(pair, mat + mat.T, offset=rng.standard_normal(dim))
        u = pair.renormalize(rng.standard_normal(dim), mu)
        point = pair.sphere_point(u, mu)
        raw = pair.project_tangent_h(point, rng.standard_normal(dim))
        a = TangentVector(point, raw.v / pair.norm_h(raw.v))
        exact = second_variation(func, point, a, a)
        geo = Geodesic(point, a)
        h = 1e-3
        fd = (func.value(geo.point(h)) - 2.0 * func.value(u)
              + func.value(geo.point(-h))) / (h * h)
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1.0))
    return {"probes": probes, "max_rel_error": worst,
            "passed": bool(worst <= rel_tol),
            "runtime_s": round(time.time() - t_start, 3)}


def descent_suite(instances: int = 500, *, base_seed: int = 5000,
                  slack: float = 1e-12) -> dict:
    """Certified decreases, persistence radii, and holonomy on block saddles.

    Per instance: descent certificates in both cases at several step times,
    the three-quarter persistence of the anchored subspace inside its
    radius, the one-half persistence of transported frames, the near-anchor
    variant with its gradient-continuity radius, and the frame-projection
    defect along one extra arc leg.
    """
    t_start = time.time()
    out = {
        "instances": instances,
        "violations": 0,
        "certificates": 0,
        "min_margin": np.inf,
        "persistence_checks": 0,
        "holonomy_checks": 0,
        "max_holonomy_ratio": 0.0,
    }
    for s in range(instances):
        rng = np.random.default_rng(base_seed + s)
        inst = random_descent_instance(rng)
        f, pair, mu = inst.functional, inst.pair, inst.mu
        beta, radius = inst.beta, inst.radius
        alpha, holder = f.alpha, f.holder_m(radius)
        constants = GeometryConstants(radius, mu, max(1.0, f.bound_k(radius, mu)))
        n = len(inst.frame) - 1
        d1 = constants.negativity_radius(beta, alpha, holder)
        d2 = constants.frame_radius(beta, alpha, holder)
        d3 = constants.descent_radius(beta, n, alpha, holder)
        cap = constants.travel_cap(d3)

        # Fixed-subspace persistence at three quarters within d1.
        probe = pair.project_tangent_h(inst.point, rng.standard_normal(pair.dim))
        probe = TangentVector(inst.point, probe.v / pair.norm_e(probe.v))
        for frac in (0.3, 0.9):
            z = exp_map(inst.point, TangentVector(inst.point, frac * d1 * probe.v))
            if pair.norm_e(z.u - inst.point.u) >= d1:
                continue
            zp = pair.sphere_point(z.u, mu)
            for w in inst.frame:
                val = second_variation(f, zp, w.v, w.v)
                out["persistence_checks"] += 1
                if val >= -0.75 * beta * pair.inner_e(w.v, w.v) + slack:
                    out["violations"] += 1

        # Transported-frame persistence at one half within d2.
        z = exp_map(inst.point, TangentVector(inst.point, 0.7 * d2 * probe.v))
        if pair.norm_e(z.u - inst.point.u) < d2:
            moved = transport_frame(inst.point, inst.frame, z)
            for w in moved:
                val = second_variation(f, z, w.v, w.v)
                out["persistence_checks"] += 1
                if val >= -0.5 * beta * pair.inner_e(w.v, w.v) + slack:
                    out["violations"] += 1

        # Descent certificates: frame case at the anchor, gradient case near it.
        for t in (cap / 8.0, cap / 4.0, float(rng.uniform(0.05, 0.95)) * cap):
            cert = descent_step(f, inst.point, inst.point, inst.frame, beta, t, radius)
            out["certificates"] += 1
            out["min_margin"] = min(out["min_margin"], cert.margin)
            if not cert.valid:
                out["violations"] += 1
        u_off = exp_map(inst.point, TangentVector(inst.point, 0.35 * d3 * probe.v))
        frame_off = transport_frame(inst.point, inst.frame, u_off)
        for t in (cap / 8.0, cap / 4.0):
            cert = descent_step(f, inst.point, u_off, frame_off, beta, t, radius)
            out["certificates"] += 1
            out["min_margin"] = min(out["min_margin"], cert.margin)
            if not cert.valid:
                out["violations"] += 1

        # Near-anchor variant: find a gradient-continuity radius, then check
        # the halved decrease from the shifted point at times past the floor.
        t0 = cap / 8.0
        delta_u = 0.4 * d3
        grad_here = f.grad_dual(inst.point.u)
        for _ in range(40):
            z = exp_map(inst.point, TangentVector(inst.point, delta_u * probe.v))
            gap = pair.dual_norm_e(f.grad_dual(z.u) - grad_here)
            if gap < beta * t0 / 48.0:
                break
            delta_u *= 0.5
        else:
            z = inst.point
        frame_z = transport_frame(inst.point, inst.frame, z)
        w = frame_z[0]
        wn = TangentVector(z, w.v / pair.norm_e(w.v))
        for t in (t0, 0.5 * (t0 + cap)):
            before = f.value(z.u)
            after = f.value(exp_map(z, TangentVector(z, t * wn.v)).u)
            out["certificates"] += 1
            margin = (before - after) - beta * t * t / 24.0
            out["min_margin"] = min(out["min_margin"], margin)
            if margin <= -slack:
                out["violations"] += 1

        # Frame-projection defect after one arc leg, against beta / (24 K).
        u_mid = exp_map(inst.point, TangentVector(inst.point, 0.3 * d3 * probe.v))
        coeffs = rng.standard_normal((2, len(inst.frame)))
        defect = holonomy_defect(inst.point, u_mid, inst.frame,
                                 travel=0.5 * cap, directions=coeffs)
        ratio = defect / (beta / (24.0 * constants.deriv_bound))
        out["holonomy_checks"] += 1
        out["max_holonomy_ratio"] = max(out["max_holonomy_ratio"], ratio)
        if ratio > 1.0 + 1e-9:
            out["violations"] += 1

    out["min_margin"] = float(out["min_margin"])
    out["passed"] = bool(out["violations"] == 0)
    out["runtime_s"] = round(time.time() - t_start, 3)
    return out


def covering_suite(boxes: int = 100, *, base_seed: int = 7000) -> dict:
    """Random compact boxes in one and two parameters, audited covers."""
    t_start = time.time()
    out = {"boxes": boxes, "violations": 0, "max_multiplicity": {1: 0, 2: 0},
           "theory_bound": {}}
    for s in range(boxes):
        rng = np.random.default_rng(base_seed + s)
        n = 1 + (s % 2)
        lo = rng.uniform(-3.0, 3.0, size=n)
        span = rng.uniform(0.2, 2.5, size=n)
        eps = float(rng.uniform(0.15, 1.2))
        box = [(float(l), float(l + w)) for l, w in zip(lo, span)]
        report = build_cover(box, eps)
        out["theory_bound"][n] = report.theory_bound
        out["max_multiplicity"][n] = max(out["max_multiplicity"][n],
                                         report.multiplicity_bound)
        if report.multiplicity_bound > report.theory_bound or not report.coverage_checked:
            out["violations"] += 1
    out["passed"] = bool(out["violations"] == 0)
    out["runtime_s"] = round(time.time() - t_start, 3)
    return out


def power_iteration_norm(pair: HilbertPair, form: np.ndarray, *, iters: int = 60,
                         seed: int = 0) -> float:
    """Operator norm of a symmetric coordinate form in the strong metric."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(pair.dim)
    x /= pair.norm_e(x)
    lam = 0.0
    for _ in range(iters):
        y = pair.solve_e(form @ x)
        lam = abs(pair.inner_e(x, y))
        ny = pair.norm_e(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
    return lam


def holder_suite(assembled, *, pairs: int = 200, radius: float | None = None,
                 base_seed: int = 9000) -> dict:
    """Sampled Hoelder quotients of a problem family against analytic bounds.

    Also validates the two-branch bound for the constrained second form with
    the composite constant, with operator norms estimated by power
    iteration on the difference form.
    """
    t_start = time.time()
    pair = assembled.pair
    mu = assembled.problem.mu
    rho = assembled.problem.rho_max
    f = assembled.family.functional(rho)
    if radius is None:
        radius = 2.0 + math.sqrt(mu)
    from .problems import holder_constants
    m_analytic, k_analytic, alpha = holder_constants(assembled, radius)
    composite = m_analytic * (1.0 + (radius + radius ** alpha) / mu)

    out = {"pairs": pairs, "radius": radius, "alpha": alpha,
           "m_analytic": m_analytic, "k_analytic": k_analytic,
           "max_first_quotient": 0.0, "max_second_quotient": 0.0,
           "max_constrained_quotient": 0.0, "max_bound_ratio": 0.0,
           "violations": 0}
    rng = np.random.default_rng(base_seed)
    for _ in range(pairs):
        x = rng.standard_normal(pair.dim)
        x = x * rng.uniform(0.1, 0.95) * radius / pair.norm_e(x)
        y = x + rng.standard_normal(pair.dim) * rng.uniform(0.01, 0.3)
        if pair.norm_e(y) > radius:
            y = y * 0.95 * radius / pair.norm_e(y)
        gap = pair.norm_e(x - y)
        if gap < 1e-9:
            continue
        q1 = pair.dual_norm_e(f.grad_dual(x) - f.grad_dual(y)) / gap ** alpha
        dh = f.hess_matrix(x) - f.hess_matrix(y)
        q2 = power_iteration_norm(pair, dh, seed=rng.integers(2 ** 31)) / gap ** alpha
        out["max_first_quotient"] = max(out["max_first_quotient"], q1)
        out["max_second_quotient"] = max(out["max_second_quotient"], q2)
        if q1 > m_analytic * (1.0 + 1e-9) or q2 > m_analytic * (1.0 + 1e-9):
            out["violations"] += 1

        # Two-branch bound for the constrained form between sphere points.
        ux = pair.renormalize(np.abs(x) + 0.05, mu)
        uy = pair.renormalize(np.abs(y) + 0.05, mu)
        if max(pair.norm_e(ux), pair.norm_e(uy)) > radius:
            continue
        px, py = pair.sphere_point(ux, mu), pair.sphere_point(uy, mu)
        diff = constrained_form_matrix(f, px) - constrained_form_matrix(f, py)
        nrm = power_iteration_norm(pair, diff, seed=rng.integers(2 ** 31))
        d = pair.norm_e(ux - uy)
        if d < 1e-12:
            continue
        bound = composite * d ** alpha if d <= 1.0 else composite * d
        ratio = nrm / bound
        out["max_bound_ratio"] = max(out["max_bound_ratio"], ratio)
        out["max_constrained_quotient"] = max(out["max_constrained_quotient"],
                                              nrm / (d ** alpha if d <= 1 else d))
        if ratio > 1.0 + 1e-9:
            out["violations"] += 1

        q_k = pair.dual_norm_e(f.grad_dual(ux))
        d2 = power_iteration_norm(pair, constrained_form_matrix(f, px),
                                  seed=rng.integers(2 ** 31))
        if max(q_k, d2) > k_analytic * (1.0 + 1e-9):
            out["violations"] += 1

    out["passed"] = bool(out["violations"] == 0)
    out["runtime_s"] = round(time.time() - t_start, 3)
    return out


def run_verification(seed: int = 0, *, geometry_seeds: int = 500,
                     descent_instances: int = 500, probes: int = 200,
                     boxes: int = 100, holder_pairs: int = 120,
                     threads: int = 1, dims=(3, 50, 400)) -> dict:
    """Aggregate verification report across all randomized suites."""
    from .problems import NLSProblem, assemble

    report = {"seed": seed}
    report["geometry"] = geometry_suite(geometry_seeds, dims,
                                        base_seed=1000 + seed, threads=threads)
    report["second_order"] = second_order_suite(probes, base_seed=3000 + seed)
    report["descent"] = descent_suite(descent_instances, base_seed=5000 + seed)
    report["covering"] = covering_suite(boxes, base_seed=7000 + seed)
    assembled = assemble(NLSProblem(kind="interval", length=1.0, grid=48,
                                    p=8.0, mu=1.0, rho_min=1.0, rho_max=2.0))
    report["holder"] = holder_suite(assembled, pairs=holder_pairs,
                                    base_seed=9000 + seed)
    report["passed"] = bool(all(report[k]["passed"] for k in
                                ("geometry", "second_order", "descent",
                                 "covering", "holder")))
    return report
