"""Command-line front end.

Every run writes ``manifest.json`` (the fully resolved configuration) into
the output directory.  Exit codes: 0 success, 2 configuration error,
3 not-found or negative result, 4 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import Config, ConfigError, KEYS, parse_angle
from .core import sample_tree
from .errors import DomainError, PercolabError, ResourceError, ValidationError
from .geometry import CORADIAL, RADIAL, Center, ProjectionFrame
from .harness import CampaignConfig, run_campaign, to_csv, to_jsonl
from .operator import (DEFAULT_BUDGET, CertificateA, IntervalPair, NotFound, certify_A,
                       tile_angle_range)
from .render import render_svg, shadow_of
from .replay import replay_single_angle
from .treeio import dump_tree, load_tree

log = logging.getLogger("percolab")

EXIT_OK, EXIT_CONFIG, EXIT_NEGATIVE, EXIT_RESOURCE = 0, 2, 3, 4
MANIFEST_FORMAT = "percolab-manifest/1"
SUMMARY_FORMAT = "percolab-summary/1"
SHADOW_FORMAT = "percolab-shadow/1"
CERT_HEADER = {"format": "percolab-certificate/1", "header": True}


def _write_jsonl(path: Path, records):
    lines = [json.dumps(CERT_HEADER if "certificate" in path.name else {"format": "percolab-jsonl/1",
                                                                        "header": True})]
    lines += [json.dumps(r, sort_keys=True) for r in records]
    path.write_text("\n".join(lines) + "\n")


def read_certificates(path: str) -> list[dict]:
    recs = [json.loads(l) for l in Path(path).read_text().splitlines() if l.strip()]
    return [r for r in recs if not r.get("header")]


def _frames(cfg: Config) -> list[ProjectionFrame]:
    out = []
    for a in cfg.angles():
        if not a.in_D:
            raise ConfigError("angle", "pi/2 is an axis direction; use column_row_condition "
                                       "for axis projections")
        out.append(ProjectionFrame(a))
    return out


def _search(cfg: Config) -> dict:
    I1, I2 = cfg.interval("certify.I1"), cfg.interval("certify.I2")
    pair = None
    if (I1 is None) != (I2 is None):
        raise ConfigError("certify.I1" if I1 is None else "certify.I2", "give both I1 and I2")
    if I1 is not None:
        try:
            pair = IntervalPair(I1, I2)
        except ValidationError as exc:
            raise ConfigError("certify.I1", str(exc)) from None
    return {"pair": pair, "r_max": cfg.int("certify.r_max", 8),
            "budget": cfg.int("certify.budget", DEFAULT_BUDGET)}


def cmd_simulate(cfg: Config, out: Path) -> int:
    m = cfg.matrix()
    tree = sample_tree(m, cfg.int("run.depth"), cfg.int("run.seed", 0))
    (out / "tree.txt").write_text(dump_tree(tree))
    counts = tree.counts()
    line = f"survived={int(tree.survived())} counts={','.join(map(str, counts))}"
    (out / "summary.txt").write_text(f"# {SUMMARY_FORMAT}\n{line}\n")
    print(line)
    return EXIT_OK


def cmd_certify(cfg: Config, out: Path) -> int:
    m = cfg.matrix()
    frames = _frames(cfg)
    search = _search(cfg)
    records, code = [], EXIT_OK
    for fr in frames:
        res = certify_A(m, fr, **search)
        records.append(res.to_record())
        if isinstance(res, NotFound):
            code = EXIT_NEGATIVE
            print(f"alpha={fr.alpha:.12g} not-found (r_max={res.r_max})")
        else:
            print(f"alpha={fr.alpha:.12g} certified r={res.r} min={res.min_value:.12g} "
                  f"I1=[{res.pair.I1[0]:g},{res.pair.I1[1]:g}] I2=[{res.pair.I2[0]:g},{res.pair.I2[1]:g}]")
    _write_jsonl(out / "certificates.jsonl", records)
    return code


def cmd_sweep(cfg: Config, out: Path) -> int:
    m = cfg.matrix()
    a, b = cfg.angle_range()
    search = _search(cfg)
    try:
        tiling = tile_angle_range(m, a.alpha, b.alpha, r_max=search["r_max"], budget=search["budget"])
    except DomainError as exc:
        raise ConfigError("angle.range", str(exc)) from None
    recs = [p.to_record() for p in tiling.pieces]
    _write_jsonl(out / "certificates.jsonl", recs)
    print(f"pieces={len(tiling.pieces)} complete={int(tiling.complete)}"
          + ("" if tiling.complete else f" failure_at={tiling.failure_at:.12g}"))
    return EXIT_OK if tiling.complete else EXIT_NEGATIVE


def cmd_replay(cfg: Config, out: Path) -> int:
    m = cfg.matrix()
    n_max = cfg.int("replay.n_max", 2)
    if "replay.certificate" in cfg:
        certs = [CertificateA.from_record(r) for r in read_certificates(cfg.get("replay.certificate"))
                 if r.get("status") == "certified"]
    else:
        certs = []
        for fr in _frames(cfg):
            res = certify_A(m, fr, **_search(cfg))
            if isinstance(res, NotFound):
                print(f"alpha={fr.alpha:.12g} not-found; nothing to replay")
                return EXIT_NEGATIVE
            certs.append(res)
    if not certs:
        raise ConfigError("replay.certificate", "no certified record in file")
    seed = cfg.int("run.seed", 0)
    reports, code = [], EXIT_OK
    for cert in certs:
        if cert.matrix != m:
            raise ConfigError("replay.certificate", "certificate matrix differs from matrix.*")
        tree = sample_tree(m, n_max * cert.r, seed)
        rep = replay_single_angle(tree, cert, n_max)
        reports.append(rep.to_record())
        print(f"alpha={cert.alpha:.12g} passed={int(rep.passed)} minima={rep.minima}")
        code = code if rep.passed else EXIT_NEGATIVE
    _write_jsonl(out / "replay.jsonl", reports)
    return code


def cmd_campaign(cfg: Config, out: Path) -> int:
    m = cfg.matrix()
    angles = []
    if "angle.list" in cfg or "angle.alpha" in cfg:
        for a in (cfg.get("angle.list") or cfg.get("angle.alpha")).split(","):
            a = a.strip()
            angles.append(a if a in ("horizontal", "vertical") else parse_angle(a, "angle.list"))
    cond = cfg.get("campaign.condition", "none")
    if cond not in ("none", "survival"):
        raise ConfigError("campaign.condition", f"expected none or survival, got {cond!r}")
    try:
        cc = CampaignConfig(m, cfg.int("run.depth"), cfg.int("run.trials", 1), cfg.int("run.seed", 0),
                            angles=angles, thresholds=cfg.floats("campaign.thresholds", []),
                            condition_on_survival=cond == "survival",
                            max_codes=cfg.int("campaign.max_codes", 1 << 22))
    except ValidationError as exc:
        raise ConfigError("campaign", str(exc)) from None
    res = run_campaign(cc)
    (out / "results.csv").write_text(to_csv(res))
    (out / "results.jsonl").write_text(to_jsonl(res))
    s = res.summary
    print(f"attempts={s['attempts']} kept={s['kept']} survival={s['survival_frequency']:.6g}"
          f" truncated={s['truncated']}")
    return EXIT_RESOURCE if res.truncated else EXIT_OK


def cmd_render(cfg: Config, out: Path) -> int:
    if "render.tree" in cfg:
        tree = load_tree(Path(cfg.get("render.tree")).read_text())
    else:
        tree = sample_tree(cfg.matrix(), cfg.int("run.depth"), cfg.int("run.seed", 0))
    level = cfg.int("render.level", tree.depth)
    if not 0 <= level <= tree.depth:
        raise ConfigError("render.level", f"outside 0..{tree.depth}")
    if "angle.center" in cfg:
        t = cfg.floats("angle.center")
        kind = cfg.get("angle.kind", RADIAL)
        if kind not in (RADIAL, CORADIAL) or len(t) != 2:
            raise ConfigError("angle.center", "expected x,y with angle.kind radial|coradial")
        try:
            proj = Center((t[0], t[1]), kind)
        except DomainError as exc:
            raise ConfigError("angle.center", str(exc)) from None
    else:
        proj = _frames(cfg)[0]
    svg = render_svg(tree, level, proj, size=cfg.int("render.size", 512))
    (out / "figure.svg").write_text(svg)
    shadow, label = shadow_of(tree, level, proj)
    with open(out / "shadow.csv", "w", newline="") as fh:
        fh.write(f"# {SHADOW_FORMAT} level={level} {label}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lo", "hi"])
        w.writerows([repr(lo), repr(hi)] for lo, hi in shadow)
    print(f"wrote {out / 'figure.svg'} squares={tree.count(level)}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "certify": cmd_certify, "replay": cmd_replay,
            "sweep": cmd_sweep, "campaign": cmd_campaign, "render": cmd_render}


def build_parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {k:22s} {v}" for k, v in KEYS.items())
    p = argparse.ArgumentParser(prog="percolab", formatter_class=argparse.RawDescriptionHelpFormatter,
                                description="Fractal percolation: simulate, certify, replay, render.",
                                epilog="config keys (matrix.row<i>=a,b,... also accepted):\n" + keys)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("-c", "--config", help="key=value config file")
    p.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override (repeatable; wins over the file)")
    p.add_argument("-o", "--out", default=".", help="output directory (default: current)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"format": MANIFEST_FORMAT, "version": __version__, "command": args.command}
    try:
        cfg = Config.load(args.config, args.set)
        manifest["config"] = cfg.resolved()
        code = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        manifest["error"] = str(exc)
        code = EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        manifest["error"] = str(exc)
        code = EXIT_RESOURCE
    except (PercolabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        manifest["error"] = str(exc)
        code = EXIT_CONFIG
    manifest["exit_code"] = code
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
