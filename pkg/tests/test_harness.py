import json
import os

import numpy as np
import pytest

from pdecert.harness import (PipelineConfig, emit_plot_data, ks_seed, main,
                             register_ks, register_toy, run_pipeline,
                             run_pipelines, solve_toy, verify_certificate,
                             worker_count, write_plot_csv)
from pdecert.interval import Interval
from pdecert.linsolve import LinearBVP, build_linv
from pdecert.operators import ks_neumann_spec
from pdecert.seqspace import CoeffSeq, basis_ek


def test_registry_round_trip():
    spec = register_toy(1.5, 20, selfcheck=False)
    blob = json.dumps({
        "problem": spec.name, "alpha": spec.alpha.to_hex(),
        "N": spec.N, "nu": float.hex(spec.nu),
        "boundary": spec.bvp.bspec.to_json(),
    })
    data = json.loads(blob)
    spec2 = register_toy(Interval.from_hex(data["alpha"]), data["N"],
                         float.fromhex(data["nu"]), selfcheck=False)
    assert spec2.exponents == spec.exponents
    assert spec2.alpha == spec.alpha
    assert spec2.psi.entry(0) == spec.psi.entry(0)
    from pdecert.operators import BoundarySpec
    bs = BoundarySpec.from_json(data["boundary"])
    assert bs.m == spec.bvp.bspec.m


def test_toy_f_is_identity_at_alpha0():
    from pdecert.validate import eval_F
    spec = register_toy(0.0, 12, selfcheck=False)
    rng = np.random.default_rng(1)
    u = CoeffSeq.from_floats(rng.normal(size=8))
    out = eval_F(u, spec)
    for n in range(8):
        assert out.entry(n).overlaps(u.entry(n))


def test_ks_factored_k0_matches_generic():
    spec = register_ks(1.0, 40, selfcheck=False)
    generic = build_linv(LinearBVP(2, ks_neumann_spec(), "odd", 1.0))
    a = spec.ops[0].apply(basis_ek(3, 1.0))
    b = generic.apply(basis_ek(3, 1.0))
    for n in range(max(len(a), len(b))):
        assert a.entry(n).overlaps(b.entry(n)), n


def test_ks_f_preserves_odd_parity():
    from pdecert.validate import eval_F
    spec = register_ks(2.0, 40, selfcheck=False)
    rng = np.random.default_rng(3)
    vec = rng.normal(size=17)
    vec[::2] = 0.0
    u = CoeffSeq.from_floats(vec, 0, 1.0, "odd")
    out = eval_F(u, spec)
    assert out.parity == "odd"
    for n in range(0, len(out), 2):
        assert out.entry(n).lo == 0.0 and out.entry(n).hi == 0.0


def test_ks_seed_requires_known_anchor():
    with pytest.raises(ValueError):
        ks_seed(50, anchor=7.0)
    s = ks_seed(50, anchor=1.0)
    assert s[1] != 0.0 and np.all(s[::2] == 0.0)


def test_pipeline_toy_and_determinism(tmp_path):
    cfg = PipelineConfig("toy", 1.0, 30, out_dir=str(tmp_path / "a"))
    rec1 = run_pipeline(cfg)
    assert rec1.ok
    assert rec1.existence.ok and rec1.stability.ok
    assert rec1.stability.n_unstable == 0
    cfg2 = PipelineConfig("toy", 1.0, 30, out_dir=str(tmp_path / "b"))
    rec2 = run_pipeline(cfg2)
    j1 = json.dumps(rec1.existence.to_json(), sort_keys=True)
    j2 = json.dumps(rec2.existence.to_json(), sort_keys=True)
    assert j1 == j2
    s1 = json.dumps(rec1.stability.to_json(), sort_keys=True)
    s2 = json.dumps(rec2.stability.to_json(), sort_keys=True)
    assert s1 == s2


def test_pipeline_from_stored_ubar(tmp_path):
    cfg = PipelineConfig("toy", 1.0, 30, method="none",
                         out_dir=str(tmp_path))
    rec = run_pipeline(cfg)
    cfg2 = PipelineConfig("toy", 1.0, 30, method="none",
                         ubar_path=rec.paths["ubar"])
    rec2 = run_pipeline(cfg2)
    assert rec2.ok
    assert rec2.existence.r.hi <= rec.existence.r.hi * 1.5


def test_pipeline_failure_is_reported(tmp_path):
    # certifying a stored approximation that is not near a zero must fail
    # loudly (partial record with diagnostics, no silent downgrade)
    bad = CoeffSeq.from_floats(0.5 * np.ones(31))
    path = tmp_path / "bad_ubar.json"
    json.dump(bad.to_json(), open(path, "w"))
    cfg = PipelineConfig("toy", 1.0, 30, method="none", ubar_path=str(path))
    rec = run_pipeline(cfg)
    assert not rec.ok
    assert rec.existence.status == "failed"
    assert rec.existence.detail


def test_end_to_end_soundness_residual_vs_y():
    from pdecert.validate import eval_F
    cfg = PipelineConfig("toy", 1.0, 30, method="none")
    rec = run_pipeline(cfg)
    spec = cfg.spec()
    tail = eval_F(rec.ubar, spec).project(spec.N, "gt").norm()
    assert rec.existence.Y.hi >= tail.lo


def test_emit_plot_data(tmp_path):
    cfg = PipelineConfig("toy", 1.0, 30, method="none")
    rec = run_pipeline(cfg)
    rows = emit_plot_data(rec, samples=201)
    assert len(rows) == 201
    # boundary condition: |v(+-1)| within the certified halfwidth
    assert abs(rows[0][1]) <= rows[0][2] + 1e-12
    assert abs(rows[-1][1]) <= rows[-1][2] + 1e-12
    path = tmp_path / "toy.csv"
    write_plot_csv(rows, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 202 and lines[0] == "x,v_mid,halfwidth"


def test_emit_plot_data_ks_oddness():
    cfg = PipelineConfig("ks", 1.0, 120, method="none")
    rec = run_pipeline(cfg)
    rows = emit_plot_data(rec, samples=41)
    for t in range(20):
        x, v, h = rows[t]
        x2, v2, h2 = rows[40 - t]
        assert abs(v + v2) <= h + h2 + 1e-10


def test_verify_certificate_files(tmp_path):
    cfg = PipelineConfig("toy", 1.0, 30, out_dir=str(tmp_path))
    rec = run_pipeline(cfg)
    assert verify_certificate(rec.paths["existence"])
    assert verify_certificate(rec.paths["stability"])
    # tampered copy must fail
    data = json.load(open(rec.paths["existence"]))
    data["r"] = (Interval.from_hex(data["r"]) * Interval.point(1e15)).to_hex()
    bad = tmp_path / "bad.json"
    json.dump(data, open(bad, "w"))
    assert not verify_certificate(bad)
    # truncated file: parse error propagates
    trunc = tmp_path / "trunc.json"
    trunc.write_text(open(rec.paths["existence"]).read()[:40])
    with pytest.raises(Exception):
        verify_certificate(trunc)


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("PDECERT_WORKERS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("PDECERT_WORKERS", "4")
    assert worker_count() == 4
    monkeypatch.setenv("PDECERT_WORKERS", "junk")
    assert worker_count() == 1


def test_run_pipelines_parallel(monkeypatch):
    monkeypatch.setenv("PDECERT_WORKERS", "2")
    cfgs = [PipelineConfig("toy", a, 20, method="none") for a in (0.5, 1.0)]
    recs = run_pipelines(cfgs)
    assert all(r.ok for r in recs)


def test_cli_prove_and_verify(tmp_path, capsys):
    out = str(tmp_path)
    code = main(["prove-stability", "--problem", "toy", "--alpha", "1.0",
                 "--out", out])
    assert code == 0
    printed = capsys.readouterr().out
    assert "existence: certified" in printed
    assert "n_unstable=0" in printed
    cert = os.path.join(out, "toy_a1_N30_existence.json")
    assert main(["verify", cert]) == 0


def test_cli_plot_data(tmp_path, capsys):
    dest = str(tmp_path / "profile.csv")
    code = main(["plot-data", "--problem", "toy", "--alpha", "1.0",
                 "--N", "20", "--samples", "51", "--out", dest])
    assert code == 0
    assert len(open(dest).readlines()) == 52


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig("nope", 1.0, 30)
    with pytest.raises(ValueError):
        PipelineConfig("toy", 1.0, 30, nu=1.5, method="gershgorin")
    PipelineConfig("toy", 1.0, 30, nu=1.5, method="none")
