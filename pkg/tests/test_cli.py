import csv

import numpy as np
import pytest

from conetomo.axf import read_field, read_raw, write_field
from conetomo.cli import main, to_pgm
from conetomo.fields import make_gaussian_phantom, radial_grids, unradialize


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_phantom_writes_file_and_prints_mass(work, capsys):
    code, out, _ = _run(capsys, "phantom", "--kind", "gaussian", "--n", "2", "--nx", "128",
                        "--nz", "128", "-o", "g.axf")
    assert code == 0 and (work / "g.axf").exists()
    assert "mass" in out and "peak" in out
    f = read_field(work / "g.axf")
    assert f.values.shape == (128, 128)


def test_phantom_is_byte_identical(work, capsys):
    for name in ("a.axf", "b.axf"):
        assert _run(capsys, "phantom", "--kind", "ball", "--n", "3", "--nx", "16",
                    "--radius", "2", "--smoothing", "0.2", "-o", name)[0] == 0
    assert (work / "a.axf").read_bytes() == (work / "b.axf").read_bytes()


def test_phantom_oversized_ball(work, capsys):
    code, _, err = _run(capsys, "phantom", "--kind", "ball", "--radius", "1.2", "--extent",
                        "1.0", "-o", "b.axf")
    assert code == 2 and "radius exceeds grid" in err


def test_bad_flag_is_usage_error(work, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["phantom", "--kind", "cube", "-o", "x.axf"])
    assert exc.value.code == 2


@pytest.fixture
def gauss_files(work, capsys):
    _run(capsys, "phantom", "--n", "2", "--nx", "128", "-o", "g.axf")
    code, out, _ = _run(capsys, "forward", "g.axf", "-o", "G.axf")
    assert code == 0
    return out


def test_forward_cv(gauss_files):
    cv = float(gauss_files.split()[1])
    assert cv < 1e-3


def test_forward_zero_input(work, capsys):
    xg, zg = radial_grids(2, 4.0, 32)
    f = make_gaussian_phantom(2, x_grid=xg, z_grid=zg)
    write_field(work / "z.axf", f * 0.0)
    code, out, _ = _run(capsys, "forward", "z.axf", "-o", "Z.axf", "--s-max", "1")
    assert code == 0 and "degenerate" in out
    assert not np.any(read_raw(work / "Z.axf")[1])


def test_forward_missing_and_wrong_kind(work, capsys):
    assert _run(capsys, "forward", "nope.axf", "-o", "x.axf")[0] == 2
    xg, zg = radial_grids(2, 4.0, 32)
    write_field(work / "full.axf", unradialize(make_gaussian_phantom(2, x_grid=xg, z_grid=zg)))
    code, _, err = _run(capsys, "forward", "full.axf", "-o", "x.axf")
    assert code == 2 and "expected a radial field" in err


def test_invert_with_reference(gauss_files, capsys):
    code, out, _ = _run(capsys, "invert", "G.axf", "-o", "r.axf", "--reference", "g.axf")
    assert code == 0 and out.startswith("relative_l2_error")
    assert read_field("r.axf").grid == read_field("g.axf").grid


@pytest.mark.parametrize("flags,msg", [(["--method", "local"], "local inversion requires odd n"),
                                       (["--band", "2,1"], "band"),
                                       (["--k", "1.5"], "k must satisfy"),
                                       (["--band", "1"], "a,b")])
def test_invert_usage_errors(gauss_files, capsys, flags, msg):
    code, _, err = _run(capsys, "invert", "G.axf", "-o", "r.axf", *flags)
    assert code == 2 and msg in err


def test_verify_passes_and_writes_csv(work, capsys):
    code, out, _ = _run(capsys, "verify", "--suite", "range,adjoint", "--phantom-set",
                        "gaussian", "--nx", "128", "-o", "rep.csv")
    assert code == 0
    text = (work / "rep.csv").read_text().splitlines()
    assert text[0].startswith("# conetomo verify") and "nx=128" in text[0]
    rows = list(csv.DictReader(text[1:]))
    assert {r["checker"] for r in rows} == {"check_range_mass", "check_adjoint"}
    assert all(r["passed"] == "pass" for r in rows)


def test_verify_detects_injected_violation(work, capsys):
    code, out, _ = _run(capsys, "verify", "--suite", "range", "--phantom-set", "gaussian",
                        "--nx", "128", "--inject-range-violation", "-o", "rep.csv")
    assert code == 1
    rows = list(csv.DictReader(l for l in (work / "rep.csv").read_text().splitlines()
                               if not l.startswith("#")))
    bad = [r for r in rows if r["passed"] == "fail"]
    assert bad and all(r["checker"] == "check_range_mass" for r in bad)


def test_verify_empty_set(work, capsys, caplog):
    code, _, _ = _run(capsys, "verify", "--phantom-set", "", "-o", "rep.csv")
    assert code == 0
    body = [l for l in (work / "rep.csv").read_text().splitlines() if not l.startswith("#")]
    assert body == ["checker,phantom,parameters,residual,threshold,passed"]
    assert "empty" in caplog.text


def test_verify_unknown_phantom(work, capsys):
    assert _run(capsys, "verify", "--phantom-set", "cube", "-o", "rep.csv")[0] == 2


def test_export_pgm(gauss_files, work, capsys):
    _run(capsys, "phantom", "--n", "2", "--nx", "128", "--nz", "128", "-o", "sq.axf")
    assert _run(capsys, "export", "sq.axf", "-o", "g.pgm")[0] == 0
    raw = (work / "g.pgm").read_bytes()
    assert raw.startswith(b"P5\n128 128\n65535\n")
    px = np.frombuffer(raw[len(b"P5\n128 128\n65535\n"):], dtype=">u2")
    assert px.size == 128 * 128 and px.max() == 65535 and px.min() == 0


def test_pgm_constant_field_is_mid_grey():
    raw = to_pgm(np.full((3, 5), 7.0))
    assert raw.startswith(b"P5\n5 3\n65535\n")
    assert set(np.frombuffer(raw[len(b"P5\n5 3\n65535\n"):], dtype=">u2")) == {32768}


def test_export_csv_layout(gauss_files, work, capsys):
    assert _run(capsys, "export", "g.axf", "-o", "g.csv", "--format", "csv")[0] == 0
    lines = (work / "g.csv").read_text().splitlines()
    assert lines[0].startswith("#")
    rows = list(csv.reader(l for l in lines if not l.startswith("#")))
    f = read_field(work / "g.axf")
    np.testing.assert_allclose([float(v) for v in rows[0][1:]], f.z_grid.nodes(0))
    np.testing.assert_allclose([float(r[0]) for r in rows[1:]], f.x_grid.nodes(0))
    np.testing.assert_allclose(np.array([[float(v) for v in r[1:]] for r in rows[1:]]),
                               f.values)


def test_export_slices(work, capsys):
    _run(capsys, "phantom", "--n", "3", "--nx", "16", "-o", "g3.axf")
    assert _run(capsys, "export", "g3.axf", "-o", "s.pgm")[0] == 2
    assert _run(capsys, "export", "g3.axf", "-o", "s.pgm", "--slice", "2=0")[0] == 0
    for bad in ("zz", "2", "9=0", "2=99"):
        assert _run(capsys, "export", "g3.axf", "-o", "s.pgm", "--slice", bad)[0] == 2
