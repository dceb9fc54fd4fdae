import json

from artifact.cli import RecipeConfig, parse_b, parse_p, run
from artifact.constructions import nonattractor_bound


def test_scattered_end_to_end(tmp_path):
    out = tmp_path / "out"
    assert run(["gifs", "build", "scattered", "--alpha", "w", "--n", "1", "--b", "geom:1/30",
                "--depth", "4", "--width", "6", "--no-lip", "-o", str(out)]) == 0
    assert run(["gifs", "verify-attractor", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["attractor"]["exact"]


def test_bound_profile_output(capsys):
    assert run(["bound-profile", "--p", "power:2:m=2", "--order", "1", "--n", "6"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    want = nonattractor_bound(parse_p("power:2:m=2"), 1, 6)
    assert [line.split()[2] for line in lines] == [str(v) for v in want]


def test_missing_file_exit_code(tmp_path):
    assert run(["space", "verify", str(tmp_path / "nonexistent.json")]) == 2
    assert run(["gifs", "verify-attractor", str(tmp_path)]) == 2
    assert run(["no-such-command"]) == 2
    assert run(["gifs", "build", "scattered", "--b", "geom:oops", "-o", str(tmp_path)]) == 2


def test_space_build_verify_export(tmp_path):
    path = tmp_path / "s.json"
    assert run(["space", "build", "--tree", "max", "--depth", "3", "--width", "4",
                "-o", str(path)]) == 0
    assert run(["space", "verify", str(path)]) == 0
    for fmt in ("json", "csv", "svg"):
        target = tmp_path / f"s.{fmt}"
        assert run(["export", fmt, str(path), "-o", str(target)]) == 0
        assert target.stat().st_size > 0
    assert (tmp_path / "s.svg").read_text().startswith("<svg")


def test_verify_reports_broken_space(tmp_path):
    path = tmp_path / "s.json"
    run(["space", "build", "--tree", "max", "--depth", "2", "--width", "3", "-o", str(path)])
    data = json.loads(path.read_text())
    data["points"][2]["x"][0] += 0.02
    path.write_text(json.dumps(data))
    assert run(["space", "verify", str(path)]) == 1


def test_iterate_and_lipschitz(tmp_path):
    out = tmp_path / "b"
    assert run(["gifs", "build", "scattered", "--alpha", "1", "--depth", "3", "--width", "4",
                "-o", str(out)]) == 0
    hist = tmp_path / "h.csv"
    assert run(["gifs", "iterate", str(out), "--history", str(hist)]) == 0
    assert hist.read_text().startswith("iter,hausdorff_step,set_size")
    assert run(["gifs", "check-lip", str(out)]) == 0


def test_rank_command():
    assert run(["rank", "--alpha", "2", "--n", "3"]) == 0


def test_deterministic_reports(tmp_path):
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        run(["gifs", "build", "sandwiched", "--depth", "3", "--width", "4", "-o", str(out)])
        texts.append((out / "report.json").read_text())
    assert texts[0] == texts[1]


def test_recipe_round_trip():
    cfg = RecipeConfig("mixed", {"p": "power:2:m=2", "m": 2, "depth": 3, "width": 4})
    assert RecipeConfig.from_json(cfg.to_json()) == cfg


def test_b_grammar():
    b, pair = parse_b("geom:1/30")
    assert pair is None and b.M == b.ratio(1)
    b2, _ = parse_b("geom:1/30,1/30")
    assert float(b2(0)) == 1 / 30
    b3, pair = parse_b("pair:power:2:m=2", 4)
    assert pair is not None and pair.check() == []
