import numpy as np
import pytest

from pooldesign import (
    CorruptionKind,
    CorruptionModel,
    GridTooCoarse,
    PhaseDiagram,
    SignalModel,
    corrupt_readout,
    draw_signal,
    load_grid_csv,
    region_check,
    run_phase_diagram,
    write_grid_csv,
)
from pooldesign.simulate import region_contains, run_trial, _trial_rng


def test_signal_zero_prevalence():
    rng = np.random.default_rng(0)
    profile = draw_signal(50, SignalModel(prevalence=0.0), rng)
    assert (profile.loads == 0).all()
    assert profile.sparsity == 0


def test_signal_exact_support_count():
    rng = np.random.default_rng(1)
    profile = draw_signal(961, SignalModel(prevalence=7 / 961), rng)
    assert profile.sparsity == 7
    assert np.count_nonzero(profile.loads) == 7
    assert (profile.loads[profile.support] >= 1).all()


def test_signal_full_prevalence_mean():
    rng = np.random.default_rng(2)
    profile = draw_signal(961, SignalModel(poisson_mean=100.0, prevalence=1.0), rng)
    assert (profile.loads >= 1).all()
    # normal approximation: sd of the sample mean is 10/sqrt(961)
    assert abs(profile.loads.mean() - 100.0) <= 3 * 10 / np.sqrt(961)


def test_signal_conditioning_small_mean():
    rng = np.random.default_rng(3)
    profile = draw_signal(200, SignalModel(poisson_mean=0.2, prevalence=1.0), rng)
    assert (profile.loads >= 1).all()


def test_corrupt_nothing():
    rng = np.random.default_rng(4)
    clean = np.arange(10, dtype=float)
    readout, error = corrupt_readout(clean, CorruptionModel(0.0), rng)
    assert (readout == clean).all()
    assert (error == 0).all()


def test_corrupt_zero_out_everything():
    rng = np.random.default_rng(5)
    clean = np.arange(1.0, 9.0)
    readout, error = corrupt_readout(
        clean, CorruptionModel(1.0, CorruptionKind.ZERO_OUT), rng
    )
    assert (readout == 0).all()
    assert (error == -clean).all()


def test_corrupt_support_size():
    rng = np.random.default_rng(6)
    clean = np.zeros(248)
    clean[:56] = 100.0
    _, error = corrupt_readout(clean, CorruptionModel(0.06), rng)
    assert np.count_nonzero(error) == 15  # round(0.06 * 248)


@pytest.mark.parametrize("kind", list(CorruptionKind))
def test_corrupt_support_conserved(kind):
    # the realized error has exactly round(fraction*M) nonzeros, even when
    # zero-out picks tests that already read zero
    rng = np.random.default_rng(7)
    for clean in (np.zeros(40), np.repeat([0.0, 50.0], 20)):
        for fraction in (0.1, 0.5, 1.0):
            readout, error = corrupt_readout(clean, CorruptionModel(fraction, kind), rng)
            assert np.count_nonzero(error) == round(fraction * clean.size)
            assert (readout >= 0).all()


def test_trial_rng_streams_disjoint():
    a = _trial_rng(123, 0, 0, 0).random(4)
    b = _trial_rng(123, 0, 0, 1).random(4)
    c = _trial_rng(123, 0, 1, 0).random(4)
    d = _trial_rng(124, 0, 0, 0).random(4)
    assert not (a == b).all() and not (a == c).all() and not (a == d).all()
    assert (_trial_rng(123, 0, 0, 0).random(4) == a).all()


def test_phase_diagram_reproducible(design_q5):
    kwargs = dict(p_grid=[0.0, 0.08], pe_grid=[0.0, 0.1], trials=5, seed=99)
    first = run_phase_diagram(design_q5, **kwargs, workers=1)
    second = run_phase_diagram(design_q5, **kwargs, workers=2)
    assert (first.success_counts == second.success_counts).all()
    assert (first.solver_failures == second.solver_failures).all()
    third = run_phase_diagram(design_q5, p_grid=[0.0, 0.08], pe_grid=[0.0, 0.1],
                              trials=5, seed=100)
    assert first.seed != third.seed


def test_phase_diagram_guaranteed_cell(design_q5):
    # p <= s/n and no corruption: the recovery bound makes every trial succeed
    diagram = run_phase_diagram(
        design_q5, p_grid=[2 / 25], pe_grid=[0.0], trials=20, seed=7
    )
    assert diagram.success_counts[0, 0] == 20
    assert diagram.cell_probability(2 / 25, 0.0) == 1.0


def test_phase_diagram_saturated_cell_fails(design_q5):
    diagram = run_phase_diagram(
        design_q5, p_grid=[0.6], pe_grid=[0.2], trials=10, seed=3
    )
    assert diagram.success_counts[0, 0] <= 1


def test_run_trial_success_flag(design_q5):
    ok, failed = run_trial(design_q5, 2 / 25, 0.0, _trial_rng(1, 0, 0, 0))
    assert ok and not failed


def test_region_membership():
    assert region_contains(0.08, 0.0)  # boundary of the line is inside
    assert region_contains(0.01, 0.04)  # 4/3*0.04 + 0.01 = 0.063
    assert not region_contains(0.0, 0.07)  # pe above 0.06
    assert not region_contains(0.09, 0.0)


def synthetic_diagram(step=0.01, trials=10):
    p_grid = np.round(np.arange(0, 0.12 + 1e-9, step), 10)
    pe_grid = np.round(np.arange(0, 0.10 + 1e-9, step), 10)
    counts = np.zeros((p_grid.size, pe_grid.size), dtype=np.int64)
    for i, p in enumerate(p_grid):
        for j, pe in enumerate(pe_grid):
            counts[i, j] = trials if region_contains(p, pe) else 0
    return PhaseDiagram(
        p_grid=p_grid,
        pe_grid=pe_grid,
        trials=trials,
        success_counts=counts,
        seed=0,
        solver_failures=np.zeros_like(counts),
    )


def test_region_check_agreement():
    report = region_check(synthetic_diagram())
    assert report.agreement == 1.0
    assert report.inside_ok == report.inside_total > 0
    assert report.outside_ok == report.outside_total > 0
    assert "region agreement 1.000" in report.summary()


def test_region_check_flags_disagreement():
    diagram = synthetic_diagram()
    counts = diagram.success_counts.copy()
    counts[0, 0] = 0  # (0, 0) is deep inside the region
    bad = PhaseDiagram(
        p_grid=diagram.p_grid,
        pe_grid=diagram.pe_grid,
        trials=diagram.trials,
        success_counts=counts,
        seed=0,
        solver_failures=np.zeros_like(counts),
    )
    report = region_check(bad)
    assert report.inside_ok == report.inside_total - 1
    assert report.agreement < 1.0


def test_region_check_rejects_coarse_grid():
    with pytest.raises(GridTooCoarse):
        region_check(synthetic_diagram(step=0.02))


def test_grid_csv_roundtrip(tmp_path, design_q5):
    diagram = run_phase_diagram(
        design_q5, p_grid=[0.0, 0.04, 0.08], pe_grid=[0.0, 0.05], trials=4, seed=11
    )
    path = tmp_path / "grid.csv"
    write_grid_csv(diagram, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "p,pe,trials,successes,prob"
    assert len(lines) == 1 + 6
    loaded = load_grid_csv(path)
    assert np.allclose(loaded.p_grid, diagram.p_grid)
    assert np.allclose(loaded.pe_grid, diagram.pe_grid)
    assert (loaded.success_counts == diagram.success_counts).all()
    assert loaded.trials == diagram.trials


def test_grid_csv_byte_identical(tmp_path, design_q5):
    kwargs = dict(p_grid=[0.0, 0.08], pe_grid=[0.0], trials=3, seed=5)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_grid_csv(run_phase_diagram(design_q5, **kwargs), a)
    write_grid_csv(run_phase_diagram(design_q5, **kwargs), b)
    assert a.read_bytes() == b.read_bytes()


def test_pe_zero_row_monotone(design_q5):
    # success probability along pe = 0 is nonincreasing in p, up to noise
    trials = 20
    diagram = run_phase_diagram(
        design_q5,
        p_grid=[0.04, 0.08, 0.3, 0.6],
        pe_grid=[0.0],
        trials=trials,
        seed=13,
    )
    probs = diagram.probabilities[:, 0]
    slack = 2 / np.sqrt(trials)
    assert ((probs[1:] - probs[:-1]) <= slack).all()


def test_resolve_workers(monkeypatch):
    from pooldesign.simulate import resolve_workers

    assert resolve_workers(3) == 3
    monkeypatch.setenv("POOLDESIGN_THREADS", "5")
    assert resolve_workers() == 5
    monkeypatch.delenv("POOLDESIGN_THREADS")
    assert resolve_workers() >= 1


def test_model_validation():
    with pytest.raises(ValueError):
        SignalModel(poisson_mean=0.0)
    with pytest.raises(ValueError):
        SignalModel(prevalence=1.5)
    with pytest.raises(ValueError):
        CorruptionModel(fraction=-0.1)
