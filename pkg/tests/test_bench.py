import json
import math
import shutil

import numpy as np
import pytest

from a2ilu import bench
from a2ilu.bench import (
    CSV_COLUMNS,
    HIST_BUCKETS,
    REFERENCE_GRIDS,
    CollectionConfig,
    RunConfig,
    RunRecord,
    emit_collection_report,
    emit_report,
    increase_bucket,
    load_config,
    read_csv_report,
    read_json_report,
    records_with,
    run_collection,
    run_sweep,
    thread_count,
    timings_path,
    validate_report,
)
from a2ilu.errors import ConfigError
from a2ilu.problems import ProblemSpec
from a2ilu.sparse import SparseMatrix, write_matrix_market
from oracles import lap2d, random_sparse


def _cfg(m=8, **kw):
    return RunConfig(problem=ProblemSpec("poisson_jump", m), **kw)


# -- configuration --------------------------------------------------------

def test_reference_grids():
    assert len(REFERENCE_GRIDS["alpha"]) == 11
    assert REFERENCE_GRIDS["alpha"][0] == -0.4 and REFERENCE_GRIDS["alpha"][-1] == 0.6
    assert len(REFERENCE_GRIDS["omega"]) == 17
    assert REFERENCE_GRIDS["omega"][0] == -0.5 and REFERENCE_GRIDS["omega"][-1] == 1.1
    assert 0.1 in REFERENCE_GRIDS["alpha"] and 1.0 in REFERENCE_GRIDS["omega"]
    assert REFERENCE_GRIDS["level_p"] == (1, 2, 3)
    assert REFERENCE_GRIDS["fill_ratio_m"] == (1, 2, 5, 10)
    assert REFERENCE_GRIDS["tol"] == (0.001, 0.002, 0.004, 0.01, 0.02, 0.04, 0.1, 0.2)


@pytest.mark.parametrize("bad", [
    {},  # no source
    {"problem": ProblemSpec(), "matrix": "x.mtx"},
    {"problem": ProblemSpec(), "variants": ()},
    {"problem": ProblemSpec(), "variants": ("ilut",)},
    {"problem": ProblemSpec(), "alphas": ()},
    {"problem": ProblemSpec(), "alphas": (math.nan,)},
    {"problem": ProblemSpec(), "tols": (math.inf,)},
    {"problem": ProblemSpec(), "tols": (-1.0,), "variants": ("crout_ilu",)},
    {"problem": ProblemSpec(), "level_ps": (-1,), "variants": ("level_ilu",)},
    {"problem": ProblemSpec(), "epsilon": 0.0},
    {"problem": ProblemSpec(), "acceleration": "maybe"},
    {"problem": ProblemSpec(), "threads": 0},
])
def test_run_config_rejects(bad):
    with pytest.raises(ConfigError):
        RunConfig(**bad)


def test_fill_ratio_inf_allowed_and_cells():
    cfg = _cfg(variants=("ilu0", "shifted_ilu0", "crout_ilu"), alphas=(0.0, 0.1),
               tols=(0.01, 0.1), fill_ratio_ms=(2.0, math.inf))
    cells = cfg.factor_configs()
    assert len(cells) == 1 + 2 + 4
    assert cells[0].variant == "ilu0"
    assert [c.alpha for c in cells[1:3]] == [0.0, 0.1]


def test_default_iteration_cap():
    assert _cfg(m=8).solver_config(512, 8).max_iters == 80
    assert RunConfig(matrix="a.mtx").solver_config(300).max_iters == 300
    assert _cfg(max_iters=7).solver_config(512, 8).max_iters == 7


def test_from_dict_with_reference_grids_and_problem():
    cfg = RunConfig.from_dict({"problem": {"kind": "advection_diffusion", "m": 4, "velocity": [1, 0, 0]},
                               "variants": ["crout_ilu"], "reference_grids": True,
                               "fill_ratio_ms": ["inf", 2]})
    assert cfg.problem.velocity == (1, 0, 0)
    assert cfg.tols == REFERENCE_GRIDS["tol"]
    assert cfg.fill_ratio_ms == (math.inf, 2.0)
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"problem": {"m": 4}, "colour": "red"})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"problem": {"kind": "nope", "m": 4}})


def test_load_config_json_and_toml(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"problem": {"m": 5}, "variants": ["ilu0"]}))
    (tmp_path / "c.toml").write_text('variants = ["ilu0"]\n[problem]\nm = 5\n')
    a = RunConfig.from_dict(load_config(tmp_path / "c.json"))
    b = RunConfig.from_dict(load_config(tmp_path / "c.toml"))
    assert a == b
    (tmp_path / "bad.toml").write_text("variants = [")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.toml")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_thread_count_env(monkeypatch):
    monkeypatch.delenv(bench.THREADS_ENV, raising=False)
    assert thread_count() == 1
    monkeypatch.setenv(bench.THREADS_ENV, "3")
    assert thread_count() == 3
    for bad in ("zero", "0"):
        monkeypatch.setenv(bench.THREADS_ENV, bad)
        with pytest.raises(ConfigError):
            thread_count()


# -- sweeps ---------------------------------------------------------------

def test_ilu0_pair_on_16_cubed():
    recs = run_sweep(_cfg(m=16))
    assert len(recs) == 2
    base, acc = recs
    assert not base.accelerated and acc.accelerated
    assert base.convergence_class == acc.convergence_class == "convergent"
    assert acc.iterations <= base.iterations
    assert acc.f_final < acc.f_initial == pytest.approx(base.f_initial, rel=1e-12)
    assert base.increase_ratio is None
    assert acc.increase_ratio == pytest.approx((acc.iterations - base.iterations) / base.iterations)
    assert acc.gamma / acc.phi <= 1.0


def test_shifted_alpha_grid_six_records():
    recs = run_sweep(_cfg(variants=("shifted_ilu0",), alphas=(0.0, 0.1, 0.2)))
    assert len(recs) == 6
    assert [r.alpha for r in recs] == [0.0, 0.0, 0.1, 0.1, 0.2, 0.2]
    assert [r.accelerated for r in recs] == [False, True] * 3


def test_milu_omega_one_no_improvement(tmp_path):
    write_matrix_market(tmp_path / "lap.mtx", lap2d(10))
    recs = run_sweep(RunConfig(matrix=str(tmp_path / "lap.mtx"), variants=("milu0",),
                               omegas=(1.0,), acceleration="on"))
    (r,) = recs
    assert r.no_improvement and (r.phi, r.gamma) == (1.0, 1.0)


def test_acceleration_off_and_on_only():
    assert [r.accelerated for r in run_sweep(_cfg(acceleration="off"))] == [False]
    recs = run_sweep(_cfg(acceleration="on"))
    assert [r.accelerated for r in recs] == [True]
    assert recs[0].increase_ratio is None  # unpaired


def test_failures_become_records():
    # shifted ILU with alpha = -1 kills the diagonal of a unit-diagonal matrix
    recs = run_sweep(_cfg(m=4, variants=("shifted_ilu0",), alphas=(-1.0,)))
    assert len(recs) == 2
    assert all(r.error and "Breakdown" in r.error for r in recs)
    assert all(not r.completed for r in recs)


def test_zero_diagonal_source_is_config_error(fixtures_dir):
    with pytest.raises(ConfigError):
        run_sweep(RunConfig(matrix=str(fixtures_dir / "zero_diag.mtx")))
    with pytest.raises(ConfigError):
        run_sweep(RunConfig(matrix=str(fixtures_dir / "does_not_exist.mtx")))


def test_all_variants_sweep_never_increases_f():
    cfg = _cfg(m=8, variants=("ilu0", "shifted_ilu0", "milu0", "level_ilu", "crout_ilu"),
               alphas=(0.0, 0.2), omegas=(0.5, 0.9), level_ps=(1, 2), tols=(0.01,),
               fill_ratio_ms=(2.0, math.inf), acceleration="on")
    recs = run_sweep(cfg)
    assert len(recs) == 1 + 2 + 2 + 2 + 2
    for r in recs:
        assert r.error is None
        assert r.f_final <= r.f_initial
        assert r.gamma <= r.phi * (1 + 1e-15)


def test_threads_preserve_order_and_values():
    cfg = dict(variants=("shifted_ilu0", "level_ilu"), alphas=(0.0, 0.1, 0.3), level_ps=(1, 2))
    a = run_sweep(_cfg(threads=1, **cfg))
    b = run_sweep(_cfg(threads=4, **cfg))
    strip = lambda rs: [{k: v for k, v in vars(r).items() if not k.endswith("_time")} for r in rs]
    assert strip(a) == strip(b)


# -- reports --------------------------------------------------------------

def test_csv_round_trip_and_sidecar(tmp_path):
    recs = run_sweep(_cfg(variants=("ilu0", "crout_ilu"), tols=(0.05,), fill_ratio_ms=(math.inf,)))
    written = emit_report(recs, tmp_path / "r.csv")
    assert written == [tmp_path / "r.csv", timings_path(tmp_path / "r.csv")]
    header = (tmp_path / "r.csv").read_text().splitlines()[0].split(",")
    assert tuple(header) == CSV_COLUMNS
    assert "solve_time" not in header
    back = read_csv_report(tmp_path / "r.csv")
    assert [vars(r) for r in back] == [vars(r) for r in recs]
    text = (tmp_path / "r.csv").read_text()
    assert ",inf," in text  # fill_ratio_m = inf
    base_row = text.splitlines()[1].split(",")
    assert base_row[CSV_COLUMNS.index("increase_ratio")] == ""


def test_csv_determinism_byte_identical(tmp_path):
    cfg = _cfg(variants=("shifted_ilu0",), alphas=(0.0, 0.1))
    emit_report(run_sweep(cfg), tmp_path / "a.csv")
    emit_report(run_sweep(cfg), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_json_report_validates_and_round_trips(tmp_path):
    cfg = _cfg(variants=("crout_ilu",), tols=(0.1,), fill_ratio_ms=(math.inf,))
    recs = run_sweep(cfg)
    emit_report(recs, tmp_path / "r.json", config=cfg)
    doc, back = read_json_report(tmp_path / "r.json")
    assert doc["schema_version"] == "1.0" and doc["kind"] == "sweep"
    assert doc["config"]["fill_ratio_ms"] == ["inf"]
    assert [vars(r) for r in back] == [vars(r) for r in recs]


def test_schema_rejects_bad_documents():
    import jsonschema

    good = {"schema_version": "1.0", "kind": "sweep", "config": None, "records": []}
    validate_report(good)
    with pytest.raises(jsonschema.ValidationError):
        validate_report({**good, "schema_version": "2.0"})
    with pytest.raises(jsonschema.ValidationError):
        validate_report({**good, "records": [{"matrix_id": "x"}]})
    with pytest.raises(ValueError):
        validate_report({**good, "kind": "other"})


def test_empty_report(tmp_path):
    emit_report([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().strip() == ",".join(CSV_COLUMNS)
    assert read_csv_report(tmp_path / "e.csv") == []
    with pytest.raises(ValueError):
        emit_report([], tmp_path / "e2.csv", allow_empty=False)


def test_records_with():
    recs = run_sweep(_cfg(variants=("shifted_ilu0",), alphas=(0.0, 0.1)))
    assert len(records_with(recs, alpha=0.1, accelerated=True)) == 1


# -- collection -----------------------------------------------------------

def _rec(cls, its, acc=False):
    return RunRecord("m", 1, 1, "shifted_ilu0", alpha=0.0, accelerated=acc,
                     convergence_class=cls, iterations=its)


@pytest.mark.parametrize("b, a, bucket", [
    (("convergent", 10), ("convergent", 4), "below_-50%"),
    (("convergent", 10), ("convergent", 5), "-50%_to_0%"),
    (("convergent", 10), ("convergent", 10), "no_change"),
    (("convergent", 10), ("convergent", 15), "0%_to_+50%"),
    (("convergent", 10), ("convergent", 16), "above_+50%"),
    (("not_convergent", 100), ("convergent", 90), "below_-50%"),
    (("convergent", 10), ("pseudo_convergent", 100), "above_+50%"),
    (("not_convergent", 100), ("not_convergent", 100), "no_change"),
])
def test_increase_bucket(b, a, bucket):
    assert increase_bucket(_rec(*b), _rec(*a, acc=True)) == bucket
    assert bucket in HIST_BUCKETS


def test_empty_collection(tmp_path):
    rep = run_collection(tmp_path)
    assert rep.matrices == [] and rep.skipped == []
    assert all(sum(c.values()) == 0 for c in rep.tally(True).values())
    written = emit_collection_report(rep, tmp_path / "c.json")
    validate_report(json.loads(written[0].read_text()))


def test_collection_skip_list_and_counts(tmp_path, fixtures_dir, rng):
    shutil.copy(fixtures_dir / "zero_diag.mtx", tmp_path)
    shutil.copy(fixtures_dir / "malformed.mtx", tmp_path)
    write_matrix_market(tmp_path / "lap.mtx", lap2d(8), symmetric=True)
    a = random_sparse(30, 0.1, rng, symmetric=True)
    write_matrix_market(tmp_path / "rand.mtx", SparseMatrix.from_dense(a), symmetric=True)
    # rows summing to zero everywhere give b = A e = 0
    write_matrix_market(tmp_path / "zerob.mtx", SparseMatrix.from_dense([[1.0, -1.0], [-1.0, 1.0]]))
    cfg = CollectionConfig(alphas=(0.0, 0.1))
    rep = run_collection(tmp_path, cfg)
    assert rep.matrices == ["lap", "rand"]
    skipped = dict(rep.skipped)
    assert set(skipped) == {"zero_diag.mtx", "malformed.mtx", "zerob.mtx"}
    assert "zero diagonal" in skipped["zero_diag.mtx"]
    assert len(rep.records) == 2 * 2 * 2
    for flag in (False, True):
        for counts in rep.tally(flag).values():
            assert sum(counts.values()) == 2
    for alpha in cfg.alphas:
        assert sum(rep.histogram(alpha).values()) == 2
    written = emit_collection_report(rep, tmp_path / "out.json")
    doc = json.loads(written[0].read_text())
    assert set(doc["tally"]["shifted_ilu0"]) == {"0.0", "0.1"}
    assert len(doc["skipped"]) == 3
    assert len(read_csv_report(tmp_path / "out.csv")) == 8


def test_collection_config_validation():
    with pytest.raises(ConfigError):
        CollectionConfig(alphas=())
    with pytest.raises(ConfigError):
        CollectionConfig.from_dict({"alphas": [0.0], "bogus": 1})
    assert CollectionConfig().alphas == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    assert CollectionConfig().epsilon == 1e-8
    with pytest.raises(ConfigError):
        run_collection("/nonexistent/dir")


def test_scalability_row_small():
    row = bench.scalability_row(8)
    assert row["a2_iterations"] <= row["ilu_iterations"]
    assert 0 < row["f_ratio"] < 1
    assert row["norm_ratio"] == pytest.approx(np.sqrt(row["f_ratio"]))
