import csv
import io
import json

import numpy as np
import pytest

from jamloc.cli import main
from jamloc.gridworld import Cell, GridMap, load_map
from jamloc.harness import (
    ConfigError,
    Method,
    TrialConfig,
    _scene,
    compute_boe,
    compute_sme,
    kappa_sweep,
    quantiles,
    run_experiment,
    run_trial,
)
from jamloc.surrogate import Dataset, Posterior

SMALL_MAP = {"width": 24, "height": 24, "n_buildings": 4, "building_size_range": [3, 6], "height_range": [10.0, 40.0], "cell_size": 2.0}


def small_cfg(**kw):
    base = dict(iterations=4, b0=10, gp_restarts=2, gp_max_evals=40, map_spec=SMALL_MAP, delta=10, seed=5)
    base.update(kw)
    return TrialConfig(**base)


def comparable(r):
    d = r.to_dict()
    d.pop("wallclock")
    return d


def test_one_iteration_ris_bookkeeping():
    r = run_trial(TrialConfig(method=Method.RIS, iterations=1, seed=1, gp_restarts=2, gp_max_evals=40))
    assert len(r.sme_per_iter) == len(r.boe_per_iter) == 1
    assert r.dataset_size == 35 + 2
    assert len(r.visited) == 1 and len(r.measured[0]) == 2


@pytest.mark.parametrize("method", list(Method))
def test_trial_deterministic(method):
    a = run_trial(small_cfg(method=method))
    b = run_trial(small_cfg(method=method))
    assert comparable(a) == comparable(b)


@pytest.mark.parametrize("method", list(Method))
def test_trial_invariants(method):
    cfg = small_cfg(method=method, iterations=12)
    r = run_trial(cfg)
    assert r.dataset_size == cfg.b0 + cfg.iterations * cfg.bn
    assert all(b2 <= b1 for b1, b2 in zip(r.boe_per_iter, r.boe_per_iter[1:]))
    assert r.boe_per_iter[-1] <= r.boe_per_iter[0]
    assert all(b <= raw for b, raw in zip(r.boe_per_iter, r.boe_raw_per_iter))
    sc, _ = _scene(cfg)
    gmap = sc.gmap
    for it, cells in enumerate(r.visited):
        assert all(gmap.is_feasible(c) for c in cells)
        if method in (Method.AUCB_BUDGET, Method.RM):
            assert len(cells) - 1 <= cfg.delta
        if method is not Method.RIS:
            for a, b in zip(cells, cells[1:]):
                assert abs(a.ix - b.ix) + abs(a.iy - b.iy) <= 1
            prev_end = r.start if it == 0 else r.visited[it - 1][-1]
            assert cells[0] == prev_end
    assert r.posterior_argmax_cell in set(gmap.feasible_cells)


def test_compute_sme_examples():
    gmap = GridMap.from_heights(np.zeros((5, 5)), 2.0)
    cells = gmap.feasible_cells
    mu = np.array([-(abs(c.ix - 2) + abs(c.iy - 2)) for c in cells], dtype=float)
    assert compute_sme(Posterior(mu, np.zeros(25)), gmap, (2, 2)) == 0.0
    mu = np.array([-(abs(c.ix - 3) + abs(c.iy - 2)) for c in cells], dtype=float)
    assert compute_sme(Posterior(mu, np.zeros(25)), gmap, (2, 2)) == 2.0
    rng = np.random.default_rng(0)
    for _ in range(20):
        mu = rng.integers(0, 5, 25).astype(float)
        top = max(mu)
        best = min((c for c, v in zip(cells, mu) if v == top), key=lambda c: (c.iy, c.ix))
        assert compute_sme(mu, gmap, (1, 3)) == pytest.approx(2.0 * np.hypot(best.ix - 1, best.iy - 3))


def test_compute_boe_examples():
    gmap = GridMap.from_heights(np.zeros((8, 8)), 2.0)
    one = Dataset([[0, 0, 0]], [1.0], [(4, 4)], [0])
    assert compute_boe(one, gmap, (4, 4)) == 0.0
    d = Dataset(np.zeros((3, 3)), [1.0, 5.0, 2.0], [(0, 0), (4, 1), (1, 1)], [0, 1, 1])
    assert compute_boe(d, gmap, (1, 1)) == 6.0
    tied = Dataset(np.zeros((2, 3)), [5.0, 5.0], [(0, 1), (7, 1)], [0, 1])
    assert compute_boe(tied, gmap, (0, 1)) == 0.0
    with pytest.raises(ValueError):
        compute_boe(Dataset(), gmap, (0, 0))
    rng = np.random.default_rng(1)
    for _ in range(20):
        cells = [Cell(*map(int, rng.integers(0, 8, 2))) for _ in range(15)]
        y = rng.integers(0, 6, 15).astype(float)
        data = Dataset(np.zeros((15, 3)), y, cells, [0] * 15)
        j = next(i for i in range(15) if y[i] == y.max())
        assert compute_boe(data, gmap, (3, 3)) == pytest.approx(2.0 * np.hypot(cells[j].ix - 3, cells[j].iy - 3))


def test_experiment_shares_scene_across_methods():
    cfg = small_cfg(iterations=2)
    ex = run_experiment(cfg, [Method.AUCB_BUDGET, Method.RIS], trials=2)
    for t in range(2):
        a, b = ex.results[Method.AUCB_BUDGET][t], ex.results[Method.RIS][t]
        assert a.jammer == b.jammer and a.start == b.start and a.seed == b.seed
    assert ex.results[Method.RIS][0].jammer != ex.results[Method.RIS][1].jammer or ex.results[Method.RIS][0].seed != ex.results[Method.RIS][1].seed


def test_summary_matches_csv_recomputation():
    ex = run_experiment(small_cfg(iterations=3), [Method.RIS, Method.RM], trials=5)
    rows = list(csv.DictReader(io.StringIO(ex.trials_csv())))
    table = ex.table()
    for m in ("RIS", "RM"):
        final = [float(r["boe_m"]) for r in rows if r["method"] == m and r["iter"] == "3"]
        final_sme = [float(r["sme_m"]) for r in rows if r["method"] == m and r["iter"] == "3"]
        it1 = [float(r["boe_m"]) for r in rows if r["method"] == m and r["iter"] == "1"]
        assert len(final) == 5
        got = table["methods"][m]
        assert got["boe"]["median"] == pytest.approx(np.percentile(final, 50), abs=1e-6)
        assert got["boe"]["q25"] == pytest.approx(np.percentile(final, 25), abs=1e-6)
        assert got["boe"]["q75"] == pytest.approx(np.percentile(final, 75), abs=1e-6)
        assert got["sme"]["median"] == pytest.approx(np.percentile(final_sme, 50), abs=1e-6)
        assert got["boe_per_iter"]["median"][0] == pytest.approx(np.median(it1), abs=1e-6)


def test_quantiles_linear_interpolation():
    assert quantiles([1, 2, 3, 4]) == {"median": 2.5, "q25": 1.75, "q75": 3.25}


def test_kappa_sweep_shapes():
    cfg = small_cfg(iterations=3)
    sw = kappa_sweep(cfg, [0.5, 2.0], checkpoint_iter=2, trials=2)
    assert [r["kappa"] for r in sw.rows] == [0.5, 2.0]
    assert sw.to_csv().splitlines()[0] == "kappa,median_boe_m,q25,q75"
    single = kappa_sweep(cfg, [2.0], checkpoint_iter=2, trials=2)
    ex = run_experiment(cfg.replace(kappa=2.0, iterations=2), [cfg.method], 2)
    assert single.rows[0]["median"] == quantiles(ex.final(cfg.method, "boe", 2))["median"]
    with pytest.raises(ValueError):
        kappa_sweep(cfg, [1.0], checkpoint_iter=10, trials=1)


def test_config_json_round_trip_and_unknown_keys():
    cfg = small_cfg(jammer=[3, 4], delta=None, method="AUCB_UNBOUNDED")
    back = TrialConfig.from_json(json.dumps(cfg.to_dict()))
    assert back == cfg
    with pytest.raises(ConfigError, match="unknown"):
        TrialConfig.from_dict({"iterations": 3, "bogus": 1})
    with pytest.raises(ConfigError):
        TrialConfig.from_dict({"iterations": 0})


def test_failed_trial_recorded_and_excluded():
    cfg = small_cfg(iterations=1, jammer=[0, 0], map_spec={"text": "GRIDMAP v1 3 3 2\n5 0 0\n0 0 0\n0 0 0\n"})
    ex = run_experiment(cfg, [Method.RIS], trials=2)
    assert len(ex.failures) == 2 and ex.results[Method.RIS] == {}
    assert "FieldError" in ex.failures[0]["error"]


def test_cli_gen_map(tmp_path):
    out = tmp_path / "m.txt"
    assert main(["gen-map", "--seed", "7", "--size", "32x20", "--buildings", "3", "--out", str(out)]) == 0
    m = load_map(out.read_text())
    assert (m.width, m.height) == (32, 20)


def test_cli_run_and_sweep(tmp_path):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps(small_cfg(iterations=2).to_dict()))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfgfile), "--out", str(a), "--trials", "2", "--methods", "RIS,RM"]) == 0
    assert main(["run", "--config", str(cfgfile), "--out", str(b), "--trials", "2", "--methods", "RIS,RM", "--workers", "2"]) == 0
    assert (a / "trials.csv").read_bytes() == (b / "trials.csv").read_bytes()
    assert (a / "trials.csv").read_text().splitlines()[0] == "trial,method,iter,sme_m,boe_m"
    summary = json.loads((a / "summary.json").read_text())
    assert set(summary["methods"]) == {"RIS", "RM"}
    assert main(["sweep-kappa", "--config", str(cfgfile), "--kappas", "1,2", "--checkpoint", "2", "--trials", "1", "--out", str(a)]) == 0
    assert len((a / "sweep.csv").read_text().splitlines()) == 3


def test_cli_rejects_unknown_config_key(tmp_path, capsys):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text('{"iterations": 2, "nope": true}')
    assert main(["run", "--config", str(cfgfile), "--out", str(tmp_path)]) == 2
    assert "unknown config keys" in capsys.readouterr().err
