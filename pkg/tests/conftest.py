import numpy as np
import pytest

from masspass.problems import NLSProblem, assemble, endpoints, initial_pool


@pytest.fixture(scope="session")
def small_nls():
    problem = NLSProblem(kind="interval", length=1.0, grid=48, p=8.0, mu=1.0,
                         rho_min=1.0, rho_max=3.0, rho_steps=11)
    return assemble(problem)


@pytest.fixture(scope="session")
def small_solution(small_nls):
    """One converged mini pipeline shared across minmax tests."""
    from masspass.minmax import (extract_palais_smale,
                                 find_differentiability_point,
                                 refine_and_certify, rho_sweep)

    w1, w2 = endpoints(small_nls)
    pool = initial_pool(small_nls, w1, w2, n_nodes=21)
    sweep = rho_sweep(small_nls.family, np.linspace(1.0, 3.0, 9), pool, rounds=100)
    rho, c_rho, slope, pool = find_differentiability_point(
        small_nls.family, sweep, rounds=80)
    records, info = extract_palais_smale(
        small_nls.family, rho, pool, slope=slope, c_rho=c_rho, count=4,
        rng=np.random.default_rng(5), rounds=50, positivization=True)
    report = refine_and_certify(small_nls.family, small_nls.pair, rho,
                                records[-1].u, 1.0)
    return {"assembled": small_nls, "sweep": sweep, "rho": rho, "c_rho": c_rho,
            "slope": slope, "records": records, "info": info, "report": report}
