import json
import math

import numpy as np
import pytest

from gcmaps.cli import main
from gcmaps.modelio import format_model, parse_model
from gcmaps.vougc import VouModel

C1 = "[A]\n-1 1\n0 -1\n[Sigma]\n1 0\n0 1\n"
LOWER = "[model]\nn = 3\n[A]\n-1 0 0\n0.5 -2 0\n0.3 0.2 -1\n[Sigma]\n1 0 0\n0 1 0\n0 0 1\n"


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return str(p)

    return _write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def kv(out):
    return dict(line.split(" = ", 1) for line in out.splitlines() if " = " in line and not line.startswith("#"))


def test_rate_c1(capsys, write):
    code, out, err = run(capsys, "rate", write("m.txt", C1), "--target", "1", "--source", "2")
    assert code == 0
    assert "rate = 0.414214" in out.splitlines()
    vals = kv(out)
    assert float(vals["rate_exact"]) == pytest.approx(math.sqrt(2) - 1, rel=1e-12)
    assert float(vals["te_rate"]) == pytest.approx(float(vals["rate_exact"]) / 2, abs=1e-6)
    assert "manifest:" in err and "manifest" not in out


def test_rate_scale(capsys, write):
    path = write("m.txt", C1)
    _, a, _ = run(capsys, "rate", path, "--target", "1", "--source", "2")
    _, b, _ = run(capsys, "rate", path, "--target", "1", "--source", "2", "--scale", "1e6")
    assert kv(a)["rate"] == kv(b)["rate"]
    assert float(kv(a)["rate_exact"]) == pytest.approx(float(kv(b)["rate_exact"]), rel=1e-8)


def test_rate_zero_and_decoupled(capsys, write):
    code, out, _ = run(capsys, "rate", write("m.txt", LOWER), "--target", "1", "--cond", "2", "--source", "3")
    assert code == 0
    assert kv(out)["rate"] == "0.000000"
    unstable = "[A]\n-1 0\n0 1\n[Sigma]\n1 0\n0 1\n"
    code, out, _ = run(capsys, "rate", write("u.txt", unstable), "--target", "1", "--source", "2")
    assert code == 0
    assert kv(out)["rate"] == "0.000000"
    assert kv(out)["source_decoupled"] == "true"


def test_rate_horizon_and_oracle(capsys, write):
    code, out, _ = run(capsys, "rate", write("m.txt", C1), "--target", "1", "--source", "2",
                       "--horizon", "1e-3", "--check-oracle", "1e-3")
    assert code == 0
    vals = kv(out)
    assert 0.41 < float(vals["horizon_rate"]) < 0.42
    assert float(vals["oracle_rel_gap"]) < 1e-2


def test_dump_model_roundtrip(capsys, write, tmp_path, rng):
    A = rng.normal(size=(3, 3)) / 3
    L = rng.normal(size=(3, 3))
    m = VouModel(A, L @ L.T + np.eye(3))
    src = write("m.txt", format_model(m))
    dump = str(tmp_path / "dump.txt")
    run(capsys, "rate", src, "--target", "1", "--source", "3", "--dump-model", dump)
    back = parse_model(open(dump, encoding="utf-8").read())
    assert np.array_equal(back.A, m.A) and np.array_equal(back.Sigma, m.Sigma)


@pytest.mark.parametrize(
    "text, args, code",
    [
        ("[A]\n-1 x\n0 -1\n[Sigma]\n1 0\n0 1\n", ("--target", "1", "--source", "2"), 2),
        ("[A\n", ("--target", "1", "--source", "2"), 2),
        ("[A]\n-1 1\n0 -1\n[Sigma]\n1 0.5\n0 1\n", ("--target", "1", "--source", "2"), 3),
        ("[A]\n-1 1 0\n0 -1\n[Sigma]\n1 0\n0 1\n", ("--target", "1", "--source", "2"), 3),
        (C1, ("--target", "1", "--source", "3"), 3),
        (C1, ("--target", "1", "--source", "1"), 3),
    ],
)
def test_rate_exit_codes(capsys, write, text, args, code):
    rc, out, err = run(capsys, "rate", write("m.txt", text), *args)
    assert rc == code
    assert "error:" in err


def test_missing_file_exit_code(capsys, tmp_path):
    rc, _, err = run(capsys, "rate", str(tmp_path / "nope.txt"), "--target", "1", "--source", "2")
    assert rc == 3


def test_not_detectable_exit_code(capsys, write):
    text = "[A]\n-1 1 0\n0 1 0\n0 0 2\n[Sigma]\n1 0 0\n0 1 0\n0 0 1\n"
    rc, _, err = run(capsys, "rate", write("m.txt", text), "--target", "1", "--source", "2", "3")
    assert rc == 4
    assert "detectab" in err


def test_graph_text_and_csv(capsys, write):
    path = write("m.txt", C1)
    code, out, _ = run(capsys, "graph", path)
    assert code == 0
    lines = out.splitlines()
    assert "—" in lines[1] and "0.414214" in lines[1]
    code, out, _ = run(capsys, "graph", path, "--format", "csv", "--unconditional")
    rows = [r.split(",") for r in out.splitlines()]
    assert rows[0] == ["target", "y1", "y2"]
    assert rows[1][1] == "" and float(rows[1][2]) == pytest.approx(math.sqrt(2) - 1, rel=1e-12)
    assert float(rows[2][1]) == 0.0


def test_oracle_check(capsys, write):
    code, out, _ = run(capsys, "oracle-check", write("m.txt", C1), "--target", "1", "--source", "2")
    assert code == 0
    slope = float(out.splitlines()[-1].split("=")[1])
    assert slope == pytest.approx(1.0, abs=0.15)
    assert len(out.splitlines()) == 5


def test_oracle_check_zero_rate(capsys, write):
    code, out, _ = run(capsys, "oracle-check", write("m.txt", LOWER), "--target", "1", "--cond", "2",
                       "--source", "3")
    assert code == 0
    for line in out.splitlines()[1:-1]:
        _, est, rate, _ = map(float, line.split(","))
        assert rate == 0.0 and abs(est) <= 1e-9


def test_oracle_check_unstable(capsys, write):
    text = "[A]\n0.5 1\n0 -1\n[Sigma]\n1 0\n0 1\n"
    code, _, err = run(capsys, "oracle-check", write("m.txt", text), "--target", "1", "--source", "2")
    assert code == 3
    assert "stable" in err


def test_map_lorenz(capsys, tmp_path):
    man = str(tmp_path / "man.json")
    code, out, err = run(capsys, "--manifest", man, "map", "--builtin", "lorenz", "--duration", "200",
                         "--dt", "0.01", "--transient", "100")
    assert code == 0
    lines = out.splitlines()
    head = lines[0].split(",")
    assert head[:7] == ["t", "y1", "y2", "y3", "lambda", "detJ", "singular"]
    rows = [l.split(",") for l in lines[1:] if not l.startswith("#")]
    assert len(rows) == 10_000
    k = head.index("G_1_3")
    assert all(float(r[k]) == 0.0 for r in rows)
    assert "# global G_1_3 = 0" in lines
    meta = json.load(open(man, encoding="utf-8"))
    assert meta["integrator"]["method"] == "rk4" and meta["exit_code"] == 0


def test_map_rate_analysis_sde(capsys):
    code, out, err = run(capsys, "map", "--builtin", "lorenz", "--duration", "2", "--dt", "0.01",
                         "--transient", "1", "--sde", "--seed", "4", "--analysis", "rate",
                         "--target", "2", "--source", "1")
    assert code == 0
    assert out.splitlines()[0].endswith("singular,rate,status")
    manifest = json.loads(err.split("manifest: ", 1)[1])
    assert manifest["integrator"]["rng"] == "PCG64" and manifest["integrator"]["seed"] == 4


def test_map_stability(capsys):
    code, out, _ = run(capsys, "map", "--builtin", "lorenz", "--duration", "120", "--transient", "100",
                       "--analysis", "stability")
    assert code == 0
    lam = [float(l.split(",")[4]) for l in out.splitlines()[1:] if not l.startswith("#")]
    assert min(lam) < 0 <= max(lam)


def test_map_system_file(capsys, write):
    path = write("sys.txt", "[system]\nn = 2\n[drift]\ndy1 = -y1 + y2\ndy2 = -y2\n")
    code, out, _ = run(capsys, "map", path, "--duration", "1", "--dt", "0.1", "--transient", "0")
    assert code == 0
    assert out.splitlines()[0].split(",")[-3:] == ["G_1_2", "G_2_1", "status"]


def test_map_parse_error_exit(capsys, write):
    path = write("sys.txt", "[system]\nn = 1\n[drift]\ndy1 = (y1\n")
    code, _, err = run(capsys, "map", path, "--duration", "1", "--transient", "0")
    assert code == 2
    assert "line 4" in err


def test_map_bad_times(capsys):
    code, _, _ = run(capsys, "map", "--builtin", "lorenz", "--duration", "100", "--transient", "100")
    assert code == 3


def test_map_divergence(capsys, write):
    path = write("sys.txt", "[system]\nn = 1\n[drift]\ndy1 = y1^2\n")
    code, _, err = run(capsys, "map", path, "--duration", "5", "--transient", "0")
    assert code == 6
