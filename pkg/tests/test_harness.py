import json

import numpy as np
import pytest

import wgsteklov.harness as harness
from wgsteklov.assembly import GammaStabilizer, NegInvLog, PowerEps
from wgsteklov.eigen import NumericalError
from wgsteklov.harness import (
    SQUARE_REFERENCE_EIGENVALUES,
    StudyConfig,
    export_eigenfunction_field,
    fitted_order,
    load_config_file,
    main,
    observed_order,
    parse_refs,
    parse_stabilizer,
    run_eigen_study,
)
from wgsteklov.mesh import L_SHAPE, UNIT_SQUARE, build_structured_mesh
from wgsteklov.assembly import assemble
from wgsteklov.eigen import solve_pair

GAMMA = GammaStabilizer(PowerEps(0.1))


def small_config(**overrides):
    base = dict(
        domain=UNIT_SQUARE,
        k=1,
        stabilizer=GAMMA,
        levels=(2, 4),
        n_eigs=2,
        refs=SQUARE_REFERENCE_EIGENVALUES,
    )
    base.update(overrides)
    return StudyConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(levels=(4, 2))
    with pytest.raises(ValueError):
        small_config(levels=(4, 4))
    with pytest.raises(ValueError):
        small_config(n_eigs=0)
    with pytest.raises(ValueError):
        small_config(domain="disk")
    with pytest.raises(ValueError):
        small_config(fmt="xml")


def test_order_computation_matches_hand_value():
    # hand check on tabulated first-eigenvalue errors at consecutive levels
    assert observed_order(8.0705e-4, 2.1839e-4) == pytest.approx(1.8858, abs=1e-3)
    hs = [1.0, 0.5, 0.25]
    errs = [4.0, 1.0, 0.25]
    assert fitted_order(hs, errs) == pytest.approx(2.0, rel=1e-12)


def test_eigen_study_report_contents():
    report = run_eigen_study(small_config())
    assert report.ns == [2, 4]
    assert len(report.eigenvalues) == 2 and len(report.eigenvalues[0]) == 2
    # coarse discrete values stay below the references
    for j in range(2):
        assert all(report.lower_bound[j])
    assert report.orders[0][0] is None
    assert report.orders[0][1] is not None
    assert report.trend_nondecreasing(0)


def test_report_determinism_and_formats():
    r1 = run_eigen_study(small_config())
    r2 = run_eigen_study(small_config())
    for fmt in ("csv", "json", "markdown"):
        assert r1.render(fmt) == r2.render(fmt)
    payload = json.loads(r1.render("json"))
    assert payload["levels"] == [2, 4]
    assert payload["references"][0] == SQUARE_REFERENCE_EIGENVALUES[0]
    md = r1.render("markdown")
    assert md.startswith("| quantity |")
    csv = r1.render("csv")
    header = csv.splitlines()[0].split(",")
    assert "lambda_1" in header and "order_1" in header and "trend_2" in header


def test_single_level_study_has_no_orders():
    report = run_eigen_study(small_config(levels=(2,)))
    assert report.orders[0] == [None]
    csv = report.render("csv")
    assert len(csv.splitlines()) == 2
    assert "order_1" not in csv.splitlines()[0]


def test_trend_flags_on_lshape():
    config = StudyConfig(
        domain=L_SHAPE,
        k=1,
        stabilizer=GammaStabilizer(NegInvLog()),
        levels=(2, 4, 8),
        n_eigs=2,
        refs=None,
    )
    report = run_eigen_study(config)
    assert report.errors is None
    for j in range(2):
        assert report.trend_nondecreasing(j)


def test_field_export_first_mode_sign_definite(tmp_path):
    mesh = build_structured_mesh(UNIT_SQUARE, 8)
    pair = assemble(mesh, 1, GAMMA)
    result = solve_pair(pair, 2)
    text = export_eigenfunction_field(result, mesh, 1, 1, 17)
    again = export_eigenfunction_field(result, mesh, 1, 1, 17)
    assert text == again  # bit-identical re-export
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    values = np.array([float(r[2]) for r in rows])
    assert len(values) == 17 * 17
    assert values.max() > 0 and values.min() > 0  # no sign change, positive
    with pytest.raises(ValueError):
        export_eigenfunction_field(result, mesh, 1, 3, 9)


def test_field_export_omits_points_outside_lshape():
    mesh = build_structured_mesh(L_SHAPE, 4)
    pair = assemble(mesh, 1, GAMMA)
    result = solve_pair(pair, 1)
    text = export_eigenfunction_field(result, mesh, 1, 1, 9)
    pts = {(r.split(",")[0], r.split(",")[1]) for r in text.strip().splitlines()[1:]}
    # 9x9 grid minus the 4x4 points with both coordinates beyond the notch corner
    assert len(pts) == 81 - 16
    for x_txt, y_txt in pts:
        x, y = float(x_txt), float(y_txt)
        assert not (x > 0.5 and y > 0.5)


def test_parse_helpers():
    assert isinstance(parse_stabilizer("pow:0.2", None).spec, PowerEps)
    assert isinstance(parse_stabilizer("neglog", None).spec, NegInvLog)
    assert parse_stabilizer("fixed:0.5", None).spec == 0.5
    assert parse_stabilizer(None, "0.1").alpha == 0.1
    with pytest.raises(ValueError):
        parse_stabilizer(None, None)
    with pytest.raises(ValueError):
        parse_stabilizer("pow:0.1", "0.1")
    with pytest.raises(ValueError):
        parse_stabilizer("cubic", None)
    assert parse_refs("none") is None
    assert parse_refs("builtin:square") == SQUARE_REFERENCE_EIGENVALUES
    assert parse_refs("1.0,2.5") == (1.0, 2.5)


def test_cli_converge_roundtrip(tmp_path, capsys):
    out = tmp_path / "study.csv"
    argv = [
        "converge",
        "--domain", "square",
        "--k", "1",
        "--gamma", "pow:0.1",
        "--levels", "2,4",
        "--eigs", "2",
        "--refs", "builtin:square",
        "--out", str(out),
    ]
    assert main(argv) == 0
    first = out.read_bytes()
    assert main(argv) == 0
    assert out.read_bytes() == first  # byte-identical reruns
    header = first.decode().splitlines()[0]
    assert header.startswith("n,h,lambda_1")


def test_cli_solve_prints_ascending_eigenvalues(capsys):
    assert main(["solve", "--domain", "square", "--n", "4", "--k", "1",
                 "--gamma", "pow:0.1", "--eigs", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    values = [float(v) for v in lines]
    assert len(values) == 3
    assert values == sorted(values)
    assert all(v > 0 for v in values)


def test_cli_mesh_stats(capsys):
    assert main(["mesh", "--domain", "lshape", "--n", "2"]) == 0
    out = capsys.readouterr().out
    assert "total_area = 0.75" in out


def test_cli_source_and_glb(tmp_path, capsys):
    assert main(["source", "--domain", "square", "--k", "1", "--gamma", "pow:0.1",
                 "--levels", "2,4"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("n,h,v_error")
    assert len(out.strip().splitlines()) == 3
    out_path = tmp_path / "glb.csv"
    assert main(["glb", "--domain", "square", "--k", "1", "--levels", "4",
                 "--alpha", "0.05", "--stab-bound", "1.0", "--proj-bound", "0.5",
                 "--out", str(out_path)]) == 0
    text = out_path.read_text()
    assert "certified" in text.splitlines()[0]
    assert ",True," in text.splitlines()[1]


def test_cli_solve_lshape(capsys):
    assert main(["solve", "--domain", "lshape", "--n", "4", "--k", "1",
                 "--gamma", "neglog", "--eigs", "4"]) == 0
    values = [float(v) for v in capsys.readouterr().out.strip().splitlines()]
    assert values == sorted(values) and all(v > 0 for v in values)


def test_cli_usage_errors(capsys):
    assert main(["converge", "--domain", "square", "--nope", "1"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main(["frobnicate"]) == 1
    assert main([]) == 1
    # validation error: missing required option
    assert main(["converge", "--domain", "square", "--k", "1", "--gamma", "pow:0.1"]) == 1
    # validation error: odd L-shape level
    assert main(["mesh", "--domain", "lshape", "--n", "3"]) == 1


def test_cli_numerical_failures_exit_2(monkeypatch):
    def boom(args):
        raise NumericalError("synthetic failure")

    monkeypatch.setitem(harness._COMMANDS, "solve", boom)
    assert main(["solve", "--domain", "square", "--n", "2", "--k", "1",
                 "--gamma", "pow:0.1"]) == 2


def test_cli_config_file(tmp_path, capsys):
    config = tmp_path / "study.conf"
    config.write_text(
        "# eigenvalue run\n"
        "domain = square\n"
        "n = 4\n"
        "k = 1\n"
        "gamma = pow:0.1\n"
        "eigs = 2\n"
    )
    assert main(["solve", "--config", str(config)]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2
    # flags take precedence over the config file
    assert main(["solve", "--config", str(config), "--eigs", "1"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 1
    bad = tmp_path / "bad.conf"
    bad.write_text("domain square\n")
    with pytest.raises(ValueError):
        load_config_file(bad)
    assert main(["solve", "--config", str(bad)]) == 1
