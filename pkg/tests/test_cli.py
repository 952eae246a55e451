import json

import pytest

from relusynth.cli import main, verify_network
from relusynth.core import DiscretePWL, Network


@pytest.fixture
def workdir(tmp_path, rng):
    pts = rng.normal(size=(5, 2))
    vals = rng.normal(size=5)
    subs = [{"points": [p.tolist()], "W": [[0.0, 0.0]], "b": [float(v)]}
            for p, v in zip(pts, vals)]
    pwl_path = tmp_path / "pwl.json"
    pwl_path.write_text(json.dumps(
        {"dim": 2, "output_dim": 1, "subdomains": subs}))
    arr_path = tmp_path / "arr.json"
    arr_path.write_text(json.dumps({
        "dim": 2,
        "hyperplanes": [{"w": [1, 0], "b": 0}, {"w": [0, 1], "b": 0},
                        {"w": [1, 1], "b": -1}],
    }))
    return tmp_path


def test_synth3_then_verify_ok(workdir, capsys):
    net = workdir / "net.json"
    rep = workdir / "rep.json"
    assert main(["synth3", "--pwl", str(workdir / "pwl.json"),
                 "--out", str(net), "--report", str(rep)]) == 0
    assert main(["verify", "--net", str(net),
                 "--pwl", str(workdir / "pwl.json")]) == 0
    out = capsys.readouterr().out.strip().splitlines()[-1]
    payload = json.loads(out)
    assert payload["max_residual"] <= 1e-8


def test_verify_fails_on_perturbed_weight(workdir):
    net_path = workdir / "net.json"
    main(["synth3", "--pwl", str(workdir / "pwl.json"), "--out", str(net_path)])
    net = json.loads(net_path.read_text())
    net["layers"][1]["weights"][0][0] += 1e-3
    net_path.write_text(json.dumps(net))
    assert main(["verify", "--net", str(net_path),
                 "--pwl", str(workdir / "pwl.json")]) == 1


def test_schema_violation_exits_2(workdir):
    bad = workdir / "bad.json"
    bad.write_text("{\"nope\": 1}")
    assert main(["verify", "--net", str(bad),
                 "--pwl", str(workdir / "pwl.json")]) == 2
    missing = workdir / "missing.json"
    assert main(["synth3", "--pwl", str(missing),
                 "--out", str(workdir / "x.json")]) == 2


def test_synthesis_is_deterministic(workdir):
    a = workdir / "a.json"
    b = workdir / "b.json"
    main(["synth3", "--seed", "7", "--pwl", str(workdir / "pwl.json"),
          "--out", str(a)])
    main(["synth3", "--seed", "7", "--pwl", str(workdir / "pwl.json"),
          "--out", str(b)])
    assert a.read_text() == b.read_text()


def test_count_regions_output(workdir, capsys):
    assert main(["count-regions", "--arrangement", str(workdir / "arr.json")]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["count_formula"] == 7
    assert payload["count_enumerated"] == 7


def test_count_regions_csv_file(workdir):
    csv_path = workdir / "regions.csv"
    main(["count-regions", "--arrangement", str(workdir / "arr.json"),
          "--csv", str(csv_path)])
    lines = csv_path.read_text().strip().splitlines()
    assert len(lines) == 8  # header + 7 regions


def test_order_command(workdir, capsys):
    pts_path = workdir / "points.json"
    pts_path.write_text(json.dumps({"points": [[0.0, 0.0], [2.0, 0.0], [1.0, 2.0]]}))
    assert main(["order", "--points", str(pts_path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert sorted(payload["order"]) == [0, 1, 2]
    assert len(payload["hyperplanes"]) == 3


def test_rank_prob_command(capsys):
    assert main(["rank-prob", "--n", "2", "--m", "3", "--trials", "2000",
                 "--seed", "4"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["full_rank_fraction"] == 1.0


def test_eval_command(workdir, capsys):
    net = workdir / "net.json"
    main(["synth3", "--pwl", str(workdir / "pwl.json"), "--out", str(net)])
    capsys.readouterr()
    assert main(["eval", "--net", str(net), "--x", "0.1,0.2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["outputs"]) == 1


def test_widen_roundtrip(workdir, capsys):
    net = workdir / "net.json"
    rep = workdir / "rep.json"
    wide = workdir / "wide.json"
    main(["synth3", "--pwl", str(workdir / "pwl.json"), "--out", str(net),
          "--report", str(rep)])
    assert main(["widen", "--net", str(net), "--report", str(rep),
                 "--uniform", "20", "--out", str(wide)]) == 0
    assert main(["verify", "--net", str(wide),
                 "--pwl", str(workdir / "pwl.json")]) == 0
    payload = json.loads(wide.read_text())
    assert len(payload["layers"][0]["weights"]) == 20


def test_synthdeep_and_decode(workdir, tmp_path, capsys, rng):
    pwl = {
        "dim": 2, "output_dim": 1,
        "subdomains": [
            {"points": [[0.0, 0.0], [0.3, 0.5]], "W": [[1.0, 0.0]], "b": [0.5]},
            {"points": [[5.0, 0.0], [5.3, 0.5]], "W": [[0.0, 1.0]], "b": [-1.0]},
        ],
    }
    pwl_path = tmp_path / "deep_pwl.json"
    pwl_path.write_text(json.dumps(pwl))
    net = tmp_path / "deep_net.json"
    assert main(["synthdeep", "--pwl", str(pwl_path), "--out", str(net)]) == 0
    assert main(["verify", "--net", str(net), "--pwl", str(pwl_path)]) == 0

    codes = tmp_path / "codes.json"
    targets = tmp_path / "targets.json"
    codes.write_text(json.dumps([[0.0], [1.0], [2.0]]))
    targets.write_text(json.dumps([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    dec = tmp_path / "decoder.json"
    assert main(["decode", "--codes", str(codes), "--targets", str(targets),
                 "--out", str(dec)]) == 0
    netobj = Network.from_json(dec.read_text())
    widths = [len(l["weights"]) for l in json.loads(dec.read_text())["layers"][:-1]]
    assert widths == sorted(widths)


@pytest.mark.parametrize("fixture,expect_arch", [
    ("fig2", "2(1)6(1)1'(1)"),
    ("fig9", "2(1)4(1)6(1)9(1)1'(1)"),
])
def test_demo_architectures(fixture, expect_arch, tmp_path, capsys):
    assert main(["demo", fixture, "--outdir", str(tmp_path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["architecture"] == expect_arch


def test_demo_fig5_and_fig7(tmp_path, capsys):
    assert main(["demo", "fig5", "--outdir", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["demo", "fig7", "--outdir", str(tmp_path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert all(v > 0 for v in payload["protected_preactivations"])
    assert all(v < 0 for v in payload["foreign_preactivations"])


def test_demo_decoder_shape(tmp_path, capsys):
    assert main(["demo", "decoder", "--outdir", str(tmp_path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    net = Network.from_json((tmp_path / "decoder_net.json").read_text())
    widths = [l.units for l in net.layers[:-1]]
    assert widths == sorted(widths)
    assert payload["max_residual"] <= 1e-8


def test_demo_unknown_fixture(tmp_path):
    assert main(["demo", "nonsense", "--outdir", str(tmp_path)]) == 2


def test_emitted_reports_reverify(workdir, rng):
    # a synthesis report's claimed residual is reproducible from the files
    net_path = workdir / "net.json"
    rep_path = workdir / "rep.json"
    main(["synth3", "--pwl", str(workdir / "pwl.json"), "--out", str(net_path),
          "--report", str(rep_path)])
    net = Network.from_json(net_path.read_text())
    pwl = DiscretePWL.from_json((workdir / "pwl.json").read_text())
    report, code = verify_network(net, pwl)
    assert code == 0
    claimed = json.loads(rep_path.read_text())["max_residual"]
    assert abs(report.max_residual - claimed) <= 1e-9
