import pytest

from fluctspd import units
from fluctspd.jellium import SlabSpec, scf_solve
from fluctspd.physical import aluminum


@pytest.fixture(scope="session")
def mat():
    return aluminum()


@pytest.fixture(scope="session")
def slab_spec(mat):
    return SlabSpec.for_material(mat, units.nm_to_bohr(4.0), tol=1e-9)


@pytest.fixture(scope="session")
def al_solution(mat, slab_spec):
    return scf_solve(slab_spec, mat)


@pytest.fixture(scope="session")
def small_solution(mat):
    """A thin 1 nm slab: cheap enough for brute-force comparisons."""
    spec = SlabSpec.for_material(mat, units.nm_to_bohr(1.0), n_basis=24, n_grid=129, tol=1e-9)
    return scf_solve(spec, mat)


@pytest.fixture(scope="session")
def default_config():
    from fluctspd.experiments import ExperimentConfig

    return ExperimentConfig.from_dict({})


@pytest.fixture(scope="session")
def fig1_table(default_config):
    from fluctspd.experiments import run_fig1

    return run_fig1(default_config)


@pytest.fixture(scope="session")
def fig2_table(default_config):
    from fluctspd.experiments import run_fig2

    return run_fig2(default_config)


@pytest.fixture(scope="session")
def fig3_result(default_config, al_solution):
    """fig3 pipeline at the default settings (about half a minute)."""
    import time

    from fluctspd.experiments import run_fig3

    t0 = time.perf_counter()
    table, responses = run_fig3(default_config, solution=al_solution)
    return table, responses, time.perf_counter() - t0
