import json

from percolab.cli import main, read_certificates


def run(tmp_path, cmd, *sets, name="out", config=None):
    out = tmp_path / name
    argv = [cmd, "-o", str(out)]
    if config:
        argv += ["-c", str(config)]
    for s in sets:
        argv += ["-s", s]
    return main(argv), out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


class TestSimulate:
    def test_depth_zero(self, tmp_path, capsys):
        code, out = run(tmp_path, "simulate", "matrix.p=0.5", "run.depth=0")
        assert code == 0
        assert (out / "summary.txt").read_text() == "# percolab-summary/1\nsurvived=1 counts=1\n"

    def test_full_counts(self, tmp_path, capsys):
        code, out = run(tmp_path, "simulate", "matrix.p=1", "run.depth=3")
        assert code == 0 and "counts=1,4,16,64" in capsys.readouterr().out

    def test_deterministic(self, tmp_path):
        sets = ("matrix.p=0.7", "run.depth=5", "run.seed=9")
        _, a = run(tmp_path, "simulate", *sets, name="a")
        _, b = run(tmp_path, "simulate", *sets, name="b")
        assert (a / "tree.txt").read_bytes() == (b / "tree.txt").read_bytes()

    def test_unknown_key(self, tmp_path, capsys):
        code, out = run(tmp_path, "simulate", "matrix.pp=0.5", "run.depth=2")
        assert code == 2 and "matrix.pp" in capsys.readouterr().err
        assert manifest(out)["exit_code"] == 2

    def test_missing_key(self, tmp_path, capsys):
        code, _ = run(tmp_path, "simulate", "matrix.p=0.5")
        assert code == 2 and "run.depth" in capsys.readouterr().err

    def test_manifest_reproduces(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("matrix.p=0.6\nrun.depth=4\nrun.seed=3\n")
        _, a = run(tmp_path, "simulate", "run.seed=5", name="a", config=cfg)
        m = manifest(a)
        assert m["config"] == {"matrix.p": "0.6", "run.depth": "4", "run.seed": "5"}
        again = tmp_path / "again.txt"
        again.write_text("".join(f"{k}={v}\n" for k, v in m["config"].items()))
        _, b = run(tmp_path, m["command"], name="b", config=again)
        assert (a / "tree.txt").read_text() == (b / "tree.txt").read_text()


class TestCertify:
    def test_certified(self, tmp_path):
        code, out = run(tmp_path, "certify", "matrix.p=0.75", "angle.alpha=pi/3")
        recs = read_certificates(out / "certificates.jsonl")
        assert code == 0 and len(recs) == 1 and recs[0]["status"] == "certified"
        assert recs[0]["min_value"] >= 2
        assert (out / "certificates.jsonl").read_text().startswith('{"format": "percolab-certificate/1"')

    def test_not_found(self, tmp_path):
        code, out = run(tmp_path, "certify", "matrix.p=0.4", "angle.alpha=pi/4", "certify.r_max=4")
        recs = read_certificates(out / "certificates.jsonl")
        assert code == 3 and recs[0]["status"] == "not-found" and recs[0]["r_max"] == 4

    def test_axis_angle(self, tmp_path, capsys):
        code, _ = run(tmp_path, "certify", "matrix.p=0.75", "angle.alpha=pi/2")
        assert code == 2 and "column_row_condition" in capsys.readouterr().err

    def test_half_pair(self, tmp_path):
        code, _ = run(tmp_path, "certify", "matrix.p=0.75", "angle.alpha=pi/3", "certify.I1=0.3,0.7")
        assert code == 2

    def test_budget(self, tmp_path):
        code, _ = run(tmp_path, "certify", "matrix.p=0.75", "angle.alpha=pi/3", "certify.budget=100")
        assert code in (3, 4)


class TestOthers:
    def test_replay_full(self, tmp_path, capsys):
        code, out = run(tmp_path, "replay", "matrix.p=1", "angle.alpha=pi/3", "replay.n_max=2")
        assert code == 0
        rec = read_certificates(out / "replay.jsonl")[0]
        assert rec["passed"] and rec["format"] == "percolab-replay/1"

    def test_replay_from_file(self, tmp_path):
        _, c = run(tmp_path, "certify", "matrix.p=1", "angle.alpha=pi/3", name="c")
        code, out = run(tmp_path, "replay", "matrix.p=1", f"replay.certificate={c / 'certificates.jsonl'}",
                        name="r")
        assert code == 0 and (out / "replay.jsonl").exists()

    def test_sweep(self, tmp_path, capsys):
        code, out = run(tmp_path, "sweep", "matrix.p=0.9", "angle.range=pi/3,0.5pi/0.5")
        assert code == 2  # malformed angle
        code, out = run(tmp_path, "sweep", "matrix.p=0.9", "angle.range=1.0,1.05")
        assert code == 0 and "complete=1" in capsys.readouterr().out
        assert len(read_certificates(out / "certificates.jsonl")) >= 1

    def test_campaign(self, tmp_path):
        code, out = run(tmp_path, "campaign", "matrix.p=0.7", "run.depth=5", "run.trials=10",
                        "angle.list=pi/3,vertical", "campaign.thresholds=0.2")
        assert code == 0
        assert len((out / "results.csv").read_text().splitlines()) == 1 + 1 + 10  # format line, column header, trials

    def test_campaign_truncated(self, tmp_path):
        code, out = run(tmp_path, "campaign", "matrix.p=1", "run.depth=6", "run.trials=2",
                        "angle.list=pi/3", "campaign.max_codes=100")
        assert code == 4 and manifest(out)["exit_code"] == 4

    def test_render(self, tmp_path):
        sets = ("matrix.p=1", "run.depth=2", "angle.alpha=1.0")
        code, a = run(tmp_path, "render", *sets, name="a")
        _, b = run(tmp_path, "render", *sets, name="b")
        svg = (a / "figure.svg").read_text()
        assert code == 0 and svg == (b / "figure.svg").read_text()
        assert svg.count('<rect x=') == 16
        rows = (a / "shadow.csv").read_text().splitlines()
        assert rows[0].startswith("# percolab-shadow/1") and rows[1:] == ["lo,hi", "0.0,1.0"]

    def test_render_center(self, tmp_path):
        code, out = run(tmp_path, "render", "matrix.p=1", "run.depth=2", "angle.center=-3,-2",
                        "angle.kind=radial")
        assert code == 0 and "radial" in (out / "figure.svg").read_text()

    def test_render_bad_level(self, tmp_path):
        code, _ = run(tmp_path, "render", "matrix.p=1", "run.depth=2", "angle.alpha=1.0", "render.level=3")
        assert code == 2
