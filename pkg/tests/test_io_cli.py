import json

import numpy as np
import pytest

from squeezelab import cli, io, states


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    head = lines[0].split(",")
    return head, [dict(zip(head, l.split(","))) for l in lines[1:]]


@pytest.fixture
def dicke_file(tmp_path):
    p = tmp_path / "dicke.txt"
    p.write_text(io.write_moments(states.unpolarized_dicke_moments(100, 0.5)))
    return p


def test_moment_roundtrip(rng):
    md = states.css_moments(7, 1, rng.normal(size=3))
    back = io.read_moments(io.write_moments(md))
    for a in ("mean", "C", "Q", "local"):
        assert np.array_equal(getattr(back, a), getattr(md, a))
    assert back.N == 7 and isinstance(back.N, int)


def test_moment_file_errors():
    good = io.write_moments(states.css_moments(3, 0.5))
    with pytest.raises(io.InputError, match=r":3: expected"):
        io.read_moments("N = 3\nj = 0.5\nJx 1\n")
    with pytest.raises(io.InputError, match="unknown key 'Jw'"):
        io.read_moments(good + "Jw = 1\n")
    with pytest.raises(io.InputError, match="duplicate key 'N'"):
        io.read_moments(good + "N = 4\n")
    with pytest.raises(io.InputError, match="differs"):
        io.read_moments(good + "Cyx = 9\n")
    with pytest.raises(io.InputError, match="half-integer"):
        io.read_moments(good.replace("j = 0.5", "j = 0.3"))
    with pytest.raises(io.InputError, match="missing keys Cxx"):
        io.read_moments("\n".join(l for l in good.splitlines() if not l.startswith("Cxx")))
    with pytest.raises(io.InputError, match="not a number"):
        io.read_moments(good.replace("Jx = 0.0", "Jx = abc"))


def test_moment_file_comments_and_both_offdiagonals():
    text = io.write_moments(states.css_moments(3, 0.5)) + "# comment\n\nCyx = 0.0  # again\n"
    assert io.read_moments(text).C[1, 0] == 0


def test_fcurve_roundtrip(curve_half):
    J, X, F = io.read_fcurve(io.write_fcurve(curve_half))
    assert J == 0.5
    assert np.array_equal(X, curve_half.X)
    with pytest.raises(io.InputError):
        io.read_fcurve("X F\n0 0\n1 0.5\n")
    with pytest.raises(io.InputError):
        io.read_fcurve("# J = 1\nX F\n0.5 0\n0.1 0.5\n")


def test_grids_and_config():
    cfg = io.read_config("theta = 0:1:5\nn_light = 1*100*3\nn_list = 3, 5\nback_action = off\n")
    assert cfg.theta == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert cfg.n_light == pytest.approx((1.0, 10.0, 100.0))
    assert cfg.n_list == (3, 5) and cfg.back_action is False
    assert cfg.digest() != io.RunConfig().digest()
    assert io.RunConfig().digest() == io.RunConfig().digest()
    assert io.RunConfig(output="x").digest() == io.RunConfig().digest()
    with pytest.raises(io.InputError, match=":2: unknown key"):
        io.read_config("seed = 1\nfoo = 2\n", "f.cfg")
    with pytest.raises(io.InputError, match="bad value"):
        io.read_config("back_action = maybe\n")
    with pytest.raises(io.InputError, match="empty"):
        io.read_config("n_list = ,\n")


def test_write_csv_format():
    text = io.write_csv(["a", "b"], [[1, 0.1], ["x", np.float64(2.5)]], None, ["note"])
    assert text == "# config-hash: none\n# note\na,b\n1,0.1\nx,2.5\n"


def test_ssi_eval(dicke_file, capsys):
    code, out, _ = run(["ssi-eval", dicke_file, "--json"], capsys)
    res = json.loads(out)
    assert code == 0 and res["entangled"] and res["depth"] == 100
    assert res["xi_G"] == pytest.approx(49 / 99, abs=1e-9)
    assert res["compact"]["z"] < 0
    code, out, _ = run(["ssi-eval", dicke_file, "--no-search"], capsys)
    assert "searched_frame" not in out and "entangled: True" in out


def test_ssi_eval_css(tmp_path, capsys):
    p = tmp_path / "css.txt"
    p.write_text(io.write_moments(states.css_moments(10, 1, (1, 1, 0))))
    res = json.loads(run(["ssi-eval", p, "--json"], capsys)[1])
    assert not res["entangled"]
    assert res["xi_G"] == pytest.approx(1, abs=1e-9)


def test_depth(dicke_file, capsys):
    code, out, _ = run(["depth", dicke_file], capsys)
    assert code == 0 and json.loads(out)["improved"] == 100
    args = ["depth", "--N", 100, "--var-x", 0.0, "--sum-perp", 2550.0]
    assert json.loads(run(args, capsys)[1])["depth_at_least"] == 100
    res = json.loads(run(args + ["--k", 50], capsys)[1])
    assert res["violated"]
    code, out, _ = run(["depth", "--N", 10, "--var-x", 1.0, "--sum-perp", 1.0], capsys)
    assert code == 1
    code, _, err = run(["depth", "--N", 10, "--var-x", 1.0, "--criterion", "sm"], capsys)
    assert code == 2 and "--mean-z" in err


def test_fcurve_cli(tmp_path, capsys):
    out_file = tmp_path / "f.txt"
    assert run(["fcurve", "--J", 0.5, "--output", out_file], capsys)[0] == 0
    J, X, F = io.read_fcurve(out_file.read_text())
    assert np.abs(F - X ** 2 / 2).max() < 1e-5
    code, _, err = run(["fcurve", "--J", 250], capsys)
    assert code == 2 and "cap of 200" in err


def test_bad_inputs_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("N = 3\nj = 0.5\nJx = 0\nJy = 0\nJz = 1\nwhat\n")
    code, _, err = run(["ssi-eval", bad], capsys)
    assert code == 2 and "bad.txt:6" in err
    assert run(["ssi-eval", tmp_path / "missing.txt"], capsys)[0] == 2
    assert run(["qnd-fom", "--n-atoms", -1], capsys)[0] == 2


def test_lg_kn_deterministic(tmp_path, capsys):
    argv = ["lg-kn", "--theta", "0.5:1.6:12", "--n-list", "3,7"]
    a = run(argv, capsys)[1]
    b = run(argv, capsys)[1]
    assert a == b
    head, rows = csv_rows(a)
    assert head == ["theta", "K3", "K7", "K3_triple_n7", "triple"]
    assert min(float(r["K7"]) for r in rows) < 0
    assert a.startswith("# config-hash: ")


def test_lg_kn_classical_limit(capsys):
    argv = ["lg-kn", "--theta", "0.05:3.1:40", "--back-action", "off", "--scattering-eta", 0]
    _, rows = csv_rows(run(argv, capsys)[1])
    for r in rows:
        assert all(float(r[f"K{n}"]) >= -1e-9 for n in (3, 5, 7, 9))


def test_lg_ki_and_invasivity(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n_light = 1e8*1e9*3\nn_atoms_grid = 5e4, 5e5\n")
    code, out, _ = run(["lg-ki", "--config", cfg], capsys)
    head, rows = csv_rows(out)
    assert code == 0 and head == ["N_L", "K3", "I35", "I57", "I37", "KI3"]
    assert all(float(r["I35"]) == 0 for r in rows)
    for r in rows:
        parts = float(r["K3"]) + float(r["I35"]) + float(r["I57"]) + float(r["I37"])
        assert float(r["KI3"]) == pytest.approx(parts)
    code, out, _ = run(["lg-invasivity", "--config", cfg], capsys)
    head, rows = csv_rows(out)
    assert code == 0 and len(rows) == 6
    # flags override the file
    code, out, _ = run(["lg-ki", "--config", cfg, "--n-light", "1e8"], capsys)
    assert len(csv_rows(out)[1]) == 1


def test_qnd_fom_cli(capsys):
    _, rows = csv_rows(run(["qnd-fom", "--scattering-eta", 0], capsys)[1])
    vals = {r["quantity"]: float(r["value"]) for r in rows}
    assert vals["r_A"] == pytest.approx(1)
    assert vals["conditional_squeezing"] == pytest.approx(1 / (1 + 5e8 / 2 * 2e6 * 1e-14))
    out = run(["qnd-fom", "--coupling-g", 0], capsys)[1]
    assert "coupling is zero" in out


def test_gauss_dump(tmp_path, capsys):
    seq = tmp_path / "seq.txt"
    seq.write_text("meas 1 record\nrot 0.5\nmeas 2 record\n")
    out_file = tmp_path / "g.csv"
    code, _, _ = run(["gauss-dump", seq, "--output", out_file], capsys)
    text = out_file.read_text()
    assert code == 0 and "label,Jx,Jy,Jz,Sx1,Sy1,Sz1,Sx2,Sy2,Sz2" in text
    run(["gauss-dump", seq, "--output", tmp_path / "h.csv"], capsys)
    assert (tmp_path / "h.csv").read_bytes() == out_file.read_bytes()
    seq.write_text("meas one\n")
    assert run(["gauss-dump", seq], capsys)[0] == 2
