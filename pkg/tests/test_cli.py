import pytest

from hh2fem.cli import _DEFAULT_VARIANTS, build_parser, main
from hh2fem.estimators import EstimatorVariant
from hh2fem.mesh import RefineMode
from hh2fem.harness import CSV_COLUMNS, read_csv
from hh2fem.mesh import read_mesh

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_stdout_csv(capsys):
    rc = main(["--problem", "singular-known", "--max-elements", "120"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) >= 3
    assert lines[1].split(",")[:2] == ["0", "12"]


def test_out_file_matches_stdout(tmp_path, capsys):
    argv = ["--problem", "singular-known", "--max-elements", "120"]
    rc = main(argv)
    stdout_text = capsys.readouterr().out
    out = tmp_path / "levels.csv"
    assert main(argv + ["--out", str(out)]) == rc == 0
    assert out.read_text(encoding="utf-8") == stdout_text


def test_dump_mesh_round_trips(tmp_path):
    out = tmp_path / "levels.csv"
    dump = tmp_path / "final.mesh"
    rc = main(["--problem", "singular-unknown", "--max-elements", "150",
               "--out", str(out), "--dump-mesh", str(dump)])
    assert rc == 0
    mesh = read_mesh(dump)
    last = read_csv(out)[-1]
    assert mesh.num_triangles == last.nrelements


def test_figures_flag_writes_images(tmp_path):
    out = tmp_path / "levels.csv"
    rc = main(["--problem", "smooth", "--p", "2", "--max-elements", "60",
               "--out", str(out), "--figures"])
    assert rc == 0
    conv = tmp_path / "levels-convergence.png"
    idx = tmp_path / "levels-indices.png"
    assert conv.read_bytes()[:8] == PNG_MAGIC
    assert idx.read_bytes()[:8] == PNG_MAGIC


def test_figures_require_an_output_path(capsys):
    rc = main(["--problem", "smooth", "--max-elements", "60", "--figures"])
    assert rc == 2
    assert "--out" in capsys.readouterr().err


def test_bad_theta_is_a_usage_error(capsys):
    assert main(["--problem", "smooth", "--theta", "0"]) == 2
    assert main(["--problem", "smooth", "--theta", "1.5"]) == 2
    assert "error" in capsys.readouterr().err


def test_incompatible_variant_is_a_usage_error(capsys):
    rc = main(["--problem", "smooth", "--p", "1", "--variant", "lambda-apx"])
    assert rc == 2
    rc = main(["--problem", "smooth", "--mode", "m3p", "--variant", "lambda-res"])
    assert rc == 2


def test_unknown_problem_is_rejected_by_the_parser():
    with pytest.raises(SystemExit) as info:
        main(["--problem", "nope"])
    assert info.value.code == 2


def test_default_variants_are_legal_marking_pairs():
    for (p, mode), name in _DEFAULT_VARIANTS.items():
        EstimatorVariant(name).validate(p, RefineMode(mode))
    assert _DEFAULT_VARIANTS[(1, "m3")] == "lambda-res"
    assert _DEFAULT_VARIANTS[(2, "m3")] == "lambda-apx"
    assert _DEFAULT_VARIANTS[(1, "m3p")] == "lambda-osc"
    assert _DEFAULT_VARIANTS[(2, "m3p")] == "lambda-osc"


def test_inferred_variant_runs_every_mode(tmp_path):
    for p in ("1", "2"):
        for mode in ("m3", "m3p"):
            out = tmp_path / f"p{p}-{mode}.csv"
            rc = main(["--problem", "singular-unknown", "--p", p, "--mode", mode,
                       "--max-elements", "40", "--out", str(out)])
            assert rc == 0
            records = read_csv(out)
            assert records[0].nrelements == 12
            # p=2 rows fill the apx columns, p=1 rows leave them blank
            assert (records[0].eta3 is not None) == (p == "2")


def test_seed_flag_is_accepted_and_inert(capsys):
    rc1 = main(["--problem", "singular-known", "--max-elements", "60", "--seed", "7"])
    text1 = capsys.readouterr().out
    rc2 = main(["--problem", "singular-known", "--max-elements", "60", "--seed", "8"])
    text2 = capsys.readouterr().out
    assert rc1 == rc2 == 0
    assert text1 == text2


def test_parser_defaults_match_documented_interface():
    args = build_parser().parse_args(["--problem", "smooth"])
    assert args.p == 1 and args.mode == "m3" and args.theta == 0.5
    assert args.max_elements == 200_000
    assert args.variant is None and not args.figures
