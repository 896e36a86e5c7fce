import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slflab.counterexample import closed_form_height
from slflab.errors import DegenerateFit
from slflab.fields import (CoefficientField, CounterexampleParams, MollifierSpec, constant_field,
                           counterexample_field, mollify, ou_field, rotation_field)
from slflab.fpe import GridFunction, gaussian_density, solve_fpe
from slflab.grid import GridSpec
from slflab.particles import (Observer, ParticleEnsemble, Phi_eps, StepOptions, coupling_diagnostic,
                              density_histogram, evolve, histogram_noise_floor, krylov_scaling,
                              maximal_field, phi_eps, restricted_maximal, superposition_check)
from slflab.particles.io import write_ensemble_csv, write_path_csv


def brownian(d=2):
    return constant_field(d, diffusion=1.0)  # sigma = sqrt(2) I


# ---------------------------------------------------------------- ensembles

def test_ensemble_validation():
    with pytest.raises(ValueError):
        ParticleEnsemble(np.zeros((3, 2)), [0.5, 0.5, 0.5], 0, [0, 1, 2])
    with pytest.raises(ValueError):
        ParticleEnsemble(np.zeros((2, 2)), [0.5, 0.5], 0, [1, 1])
    e = ParticleEnsemble.at_point([1.0, 2.0], 4, seed=3, id_offset=10)
    assert e.ids.tolist() == [10, 11, 12, 13] and e.weights.sum() == 1.0


def test_from_density_stays_in_support():
    grid = GridSpec(2, 1.0, 0.5)
    vals = np.zeros(grid.shape)
    vals[1, 2] = 1 / grid.cell_volume
    e = ParticleEnsemble.from_density(GridFunction(grid, vals, density=True), 500, seed=1)
    assert np.all((e.positions[:, 0] >= -0.5) & (e.positions[:, 0] < 0.0))
    assert np.all((e.positions[:, 1] >= 0.0) & (e.positions[:, 1] < 0.5))


# ---------------------------------------------------------------- evolve

def test_brownian_variance():
    M, t = 100_000, 0.5
    e = evolve(ParticleEnsemble.at_point([0.0, 0.0], M, seed=11), brownian(), 0.05, t)
    var = e.positions.var(axis=0, ddof=1)
    se = 2 * t * np.sqrt(2 / (M - 1))
    assert np.all(np.abs(var - 2 * t) <= 3 * se)


def test_constant_drift_deterministic_exact():
    c = np.array([0.75, -1.25])
    fld = constant_field(2, c, diffusion=0.0)
    T, dt = 1.0, 1 / 64
    e = evolve(ParticleEnsemble.at_point([0.5, 0.5], 10, seed=0), fld, dt, T)
    assert np.all(e.positions == np.array([0.5, 0.5]) + c * T)
    assert e.stats["tamed"] is False


def test_deterministic_skeleton_through_stepper():
    p = CounterexampleParams(d=3, p=1.8, alpha=1.5, N=16, kappa=1.2, sigma=0.0)
    t_x = 0.25 ** 2.5 / 16
    e = evolve(ParticleEnsemble.at_point([0.0, 0.0, 0.25], 1, seed=0), counterexample_field(p),
               1e-4 * t_x, t_x, options=StepOptions(substep=False))
    exact = closed_form_height(p, 0.25, t_x)
    assert abs(e.positions[0, 2] / exact - 1) <= 1e-4
    assert np.all(e.positions[0, :2] == 0)


def test_thread_and_chunk_independence():
    fld = counterexample_field(CounterexampleParams(N=4.0))
    start = ParticleEnsemble.at_point([0.01, 0.0, 0.2], 400, seed=5)
    ref = evolve(start, fld, 2 ** -6, 0.125)
    for threads, chunk in ((4, 64), (3, 150), (1, 7)):
        e = evolve(start, fld, 2 ** -6, 0.125, threads=threads, options=StepOptions(chunk_size=chunk))
        assert np.array_equal(e.positions, ref.positions)
        assert np.array_equal(e.frozen, ref.frozen)


def test_reflection_equivariance():
    fld = counterexample_field(CounterexampleParams(N=8.0))
    rng = np.random.default_rng(3)
    pos = rng.uniform(-0.3, 0.3, (400, 3))
    pos[:, 2] = rng.uniform(0.01, 0.3, 400)
    ens = ParticleEnsemble(pos, np.full(400, 1 / 400), 9, np.arange(400))
    a = evolve(ens, fld, 2 ** -7, 0.5, record=True).path
    b = evolve(ens.reflect(), fld, 2 ** -7, 0.5, record=True).path
    ra = a.reflect()
    assert np.abs(ra.states - b.states).max() <= 1e-12
    assert np.abs(ra.noise - b.noise).max() <= 1e-12


def test_path_record_alignment():
    e = evolve(ParticleEnsemble.at_point([0.0, 0.0], 5, seed=2), brownian(), 0.1, 1.0, record=True)
    rec = e.path
    assert rec.K == 10 and rec.states.shape == (5, 11, 2) and rec.noise.shape == (5, 10, 2)
    assert np.allclose(rec.states[:, -1], e.positions)
    # zero drift: the state is sqrt(2) times the recorded Brownian path
    assert np.allclose(rec.states, np.sqrt(2) * rec.brownian(), atol=1e-14)


def test_nonfinite_particles_frozen_and_counted():
    def drift(t, x):
        out = np.zeros_like(x)
        out[x[:, 0] > 0.5] = np.nan
        return out

    fld = CoefficientField(2, drift, 0.0, name="nan", divergence_free=True)
    pos = np.array([[0.0, 0.0], [1.0, 0.0]])
    e = evolve(ParticleEnsemble(pos, [0.5, 0.5], 0, [0, 1]), fld, 0.1, 1.0)
    assert e.stats["nonfinite"] == 1 and e.frozen.tolist() == [False, True]
    assert np.all(np.isfinite(e.positions))


# ---------------------------------------------------------------- histograms

def test_histogram_single_particle():
    grid = GridSpec(2, 1.0, 0.1)
    rho = density_histogram(ParticleEnsemble.at_point([0.23, -0.41], 1, seed=0), grid)
    assert np.count_nonzero(rho.values) == 1 and rho.values.max() == pytest.approx(grid.h ** -2)


def test_histogram_uniform_box():
    grid = GridSpec(2, 1.0, 0.25)
    M = 64_000
    pos = np.random.default_rng(4).uniform(-1, 1, (M, 2))
    rho = density_histogram(ParticleEnsemble(pos, np.full(M, 1 / M), 0, np.arange(M)), grid)
    p = grid.cell_volume / 4
    se = np.sqrt(p * (1 - p) / M) / grid.cell_volume
    assert np.all(np.abs(rho.values - 0.25) <= 5 * se)


@settings(max_examples=30)
@given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 500))
def test_histogram_mass_plus_overflow(seed, M):
    grid = GridSpec(2, 1.0, 0.2)
    rng = np.random.default_rng(seed)
    w = rng.uniform(0, 1, M)
    w /= w.sum()
    rho = density_histogram(ParticleEnsemble(rng.normal(0, 1, (M, 2)), w, 0, np.arange(M)), grid)
    assert abs(rho.total_mass - 1) <= 1e-12
    assert rho.mass() <= 1 + 1e-12


def test_histogram_vs_gaussian():
    grid = GridSpec(2, 4.0, 0.1)
    M, t = 100_000, 0.25
    e = evolve(ParticleEnsemble.at_point([0.0, 0.0], M, seed=21), brownian(), t, t)
    rho = density_histogram(e, grid)
    u = gaussian_density(grid, 2 * t)
    l1 = np.abs(rho.values - u.values).sum() * grid.cell_volume + rho.overflow
    floor = histogram_noise_floor(u, M)
    # sampling noise dominates; see the notes on the histogram floor
    assert l1 <= floor + 0.02


# ---------------------------------------------------------------- superposition

def test_superposition_deterministic_rerun():
    grid = GridSpec(2, 2.0, 0.1)
    phi = gaussian_density(grid, 0.3)
    kw = dict(M=5000, dt=1e-2, times=[0.1, 0.2], seed=3)
    a = superposition_check(rotation_field(2), phi, grid, **kw)
    b = superposition_check(rotation_field(2), phi, grid, threads=3, **kw)
    assert np.array_equal(a.l1, b.l1)
    assert np.all(a.l1 >= 0) and np.all(a.noise_floor > 0)


def test_upwind_diffusion_shrinks_with_h():
    # sigma = 0, constant drift: particles translate exactly, so the gap is the scheme's smearing
    fld = constant_field(2, [1.0, 0.0], diffusion=0.0)
    errs = []
    for h in (0.1, 0.05):
        grid = GridSpec(2, 2.0, h)
        sol = solve_fpe(fld, gaussian_density(grid, 0.1), times=[0.5])
        exact = gaussian_density(grid, 0.1, mean=(0.5, 0.0)).values
        errs.append(np.abs(sol.at(0.5).values - exact).sum() * grid.cell_volume)
    assert errs[1] < errs[0]


# ---------------------------------------------------------------- Krylov

def test_krylov_unit_function():
    fit = krylov_scaling(brownian(), lambda t, x: np.ones(len(x)), [0.01, 0.02, 0.04, 0.08], M=50, dt=1e-3)
    assert np.allclose(fit.estimates, fit.deltas, rtol=1e-13)
    assert abs(fit.theta - 1) <= 1e-12


def test_krylov_ball_indicator():
    ball = lambda t, x: (np.sum(x * x, axis=1) < 1.0).astype(float)
    fit = krylov_scaling(brownian(), ball, [0.01, 0.02, 0.05, 0.1], M=20_000, dt=1e-3, seed=4)
    assert 0.8 <= fit.theta <= 1.2


def test_krylov_zero_function_degenerate():
    with pytest.raises(DegenerateFit):
        krylov_scaling(brownian(), lambda t, x: np.zeros(len(x)), [0.01, 0.02], M=10, dt=1e-3)


# ---------------------------------------------------------------- coupling

def test_phi_eps_spot_values():
    assert Phi_eps(np.array([0.05, 0.0]), 0.1) == pytest.approx(np.log(1.25), abs=1e-12)
    assert Phi_eps(np.array([0.4, 0.0]), 0.1) == pytest.approx(np.log(11), abs=1e-12)
    assert Phi_eps(np.zeros(3), 0.1) == 0.0


@given(eps=st.floats(1e-3, 1.0), s=st.lists(st.floats(0, 5), min_size=2, max_size=20))
def test_phi_eps_monotone_and_bounded(eps, s):
    s = np.sort(np.array(s))
    v = phi_eps(s, eps)
    assert np.all(np.diff(v) >= -1e-15) and np.all(v <= eps + 1e-15) and np.all(v >= 0)
    assert np.all(v >= np.minimum(s, eps) - 1e-15)


def test_coupling_identical_starts():
    c = coupling_diagnostic(ou_field(2), starts_x=[0.3, -0.2], eps=0.1, dt=0.01, T=1.0, M=500, seed=6)
    assert c.max_abs_Z <= 1e-12 and np.all(c.phi_bar == 0)


def test_coupling_different_starts_positive():
    c = coupling_diagnostic(ou_field(2), starts_x=[0.3, 0.0], starts_y=[0.0, 0.0], eps=0.1,
                            dt=0.01, T=1.0, M=200, seed=6)
    assert np.all(c.phi_bar > 0)
    # contraction of the linear drift: |Z_t| = 0.3 e^{-t}
    assert c.max_abs_Z == pytest.approx(0.3)


def test_coupling_mollification_refinement():
    def drift(t, x):
        return np.stack([np.sqrt(np.abs(x[:, 1])) * np.sign(x[:, 1]),
                         -np.sqrt(np.abs(x[:, 0])) * np.sign(x[:, 0])], axis=1)

    base = CoefficientField(2, drift, name="holder")
    phi = gaussian_density(GridSpec(2, 2.0, 0.1), 0.3)
    vals = [coupling_diagnostic(mollify(base, MollifierSpec(2, a)), mollify(base, MollifierSpec(2, b)),
                                eps=0.01, dt=0.01, T=1.0, M=1000, seed=1, phi=phi).phi_bar[-1]
            for a, b in ((8, 16), (16, 32))]
    assert vals[1] < vals[0]


# ---------------------------------------------------------------- maximal functions

def test_maximal_constant():
    f = np.full((40, 40), -0.7)
    data = maximal_field(f, 0.05, 0.25, 0.01, 8)
    assert np.allclose(data.maximal, 0.7, atol=1e-14)
    assert np.abs(data.F).max() <= 1e-10


def test_maximal_linear_brute_force():
    h, R = 0.1, 0.5
    ax = np.arange(-20, 21) * h
    X1 = np.meshgrid(ax, ax, indexing="ij")[0]
    Mf = restricted_maximal(X1, h, R)
    c = 20
    best = 0.0
    for rc in range(0, 6):
        vals = [abs(X1[c + i, c + j]) for i in range(-rc, rc + 1) for j in range(-rc, rc + 1)
                if i * i + j * j <= rc * rc]
        best = max(best, sum(vals) / len(vals))
    assert Mf[c, c] == pytest.approx(best, abs=1e-14)
    assert np.all(Mf >= np.abs(X1) - 1e-14)


def test_two_point_inequality():
    h, eps, n = 1 / 64, 1e-3, 8
    ax = (np.arange(-96, 96) + 0.5) * h
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    f = np.sin(2 * X) * np.cos(3 * Y)
    data = maximal_field(f, h, 0.25, eps, n)
    F = data.F
    inner = f[data.crop:-data.crop, data.crop:-data.crop]
    rng = np.random.default_rng(7)
    m = int(np.sqrt(eps) / h)
    lim = F.shape[0] - m
    i = rng.integers(m, lim, (10_000, 2))
    off = rng.integers(-m, m + 1, (10_000, 2))
    keep = np.sum(off * off, axis=1) * h * h <= eps
    i, j = i[keep], (i + off)[keep]
    lhs = np.abs(inner[i[:, 0], i[:, 1]] - inner[j[:, 0], j[:, 1]]) / np.sqrt(
        np.sum(((i - j) * h) ** 2, axis=1) + eps ** 2)
    rhs = 2 ** 2 * (F[i[:, 0], i[:, 1]] + F[j[:, 0], j[:, 1]])
    assert len(lhs) > 5000 and np.all(lhs <= rhs)


# ---------------------------------------------------------------- io

def test_ensemble_and_path_csv(tmp_path):
    e = evolve(ParticleEnsemble.at_point([0.0, 0.0], 3, seed=1), brownian(), 0.5, 1.0, record=True)
    write_ensemble_csv(tmp_path / "e.csv", e)
    write_path_csv(tmp_path / "p.csv", e.path)
    rows = list(csv.reader(open(tmp_path / "e.csv")))
    assert rows[0] == ["id", "x0", "x1", "weight", "frozen"] and len(rows) == 4
    assert float(rows[1][1]) == e.positions[0, 0]
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert rows[0] == ["id", "t", "x0", "x1"] and len(rows) == 1 + 3 * 3


def test_observer_sees_every_coarse_step():
    class Count(Observer):
        def __init__(self):
            self.k = []

        def coarse(self, rows, k, t, x, dW):
            self.k.append(k)

    obs = Count()
    evolve(ParticleEnsemble.at_point([0.0, 0.0], 10, seed=0), brownian(), 0.1, 1.0, observers=[obs])
    assert sorted(set(obs.k)) == list(range(10))
