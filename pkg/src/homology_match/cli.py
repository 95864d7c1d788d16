"""Command-line interface.

Exit codes: 0 success, 1 input error, 2 geometric degeneracy.
"""
import argparse
import json
import sys
from pathlib import Path

from . import _core, io, synthetic
from .errors import GeometryError, HomologyMatchError, InputError, ParseError
from .matching import (
    MatchConfig,
    TemplateLibrary,
    fuse_classes,
    match_templates,
    score_pair,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DEGENERATE = 2

EPIPOLE_FLAG = {"estimate": "estimate", "file": "provided", "gt": "ground_truth"}


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error code, not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common_flags():
    # SUPPRESS keeps subcommand defaults from clobbering flags given before the subcommand
    p = _Parser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=S, help="sampling seed (default 0)")
    p.add_argument("--cap", type=int, default=S, help="max quadruples per pair (default 2000)")
    p.add_argument("--collinear-px", type=float, default=S, help="collinearity threshold in px (default 1.0)")
    p.add_argument("--sampson-px", type=float, default=S, help="outlier Sampson threshold in px (default 3.0)")
    p.add_argument("--outlier-filter", action="store_true", default=S,
                   help="drop pairs beyond --sampson-px of the estimated epipolar geometry")
    p.add_argument("--ransac", action="store_true", default=S, help="estimate F with RANSAC")
    p.add_argument("--epipoles", choices=sorted(EPIPOLE_FLAG), default=S,
                   help="estimate from correspondences, take 'epipoles' from the file, "
                        "or take 'gt_epipoles' from the file (default estimate)")
    p.add_argument("--fusion", choices=["min", "mean"], default=S, help="class fusion rule (default min)")
    p.add_argument("--planar-px", type=float, default=S, help="coplanar warning threshold in px (default 1.0)")
    p.add_argument("--backend", choices=["auto", "python", "cython"], default=S)
    p.add_argument("--workers", type=int, default=S, help="templates scored in parallel (default 1)")
    p.add_argument("--json", action="store_true", default=S, help="machine-readable output")
    p.add_argument("--config", default=S, help="INI file with a [run] section")
    return p


def build_parser():
    common = _common_flags()
    parser = _Parser(
        prog="homology-match", parents=[common],
        description="Score point correspondences for rigid 3D consistency and rank templates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("score-pair", parents=[common], help="score one correspondence file")
    sp.add_argument("file")

    mp = sub.add_parser("match", parents=[common], help="rank a directory of template correspondence files")
    mp.add_argument("directory")

    ss = sub.add_parser("synth-surface", parents=[common], help="synthetic error surface over the viewing hemisphere")
    ss.add_argument("--sigma", type=float, default=0.0, help="keypoint noise std in px")
    ss.add_argument("--yaw", default="-60:60:10", help="lo:hi:step in degrees (rotation about Y); write --yaw=-60:60:10 for a negative start")
    ss.add_argument("--pitch", default="0:60:10", help="lo:hi:step in degrees (rotation about Z)")
    ss.add_argument("--trials", type=int, default=5, help="trials per pose")
    ss.add_argument("--keypoints", type=int, default=8)
    ss.add_argument("--cloud", choices=["blob", "box", "two_plane"], default="blob")
    ss.add_argument("--points", type=int, default=1000, help="points per synthetic cloud")
    ss.add_argument("--distance", type=float, default=4.0, help="camera distance in cloud radii")
    ss.add_argument("--output", "-o", help="CSV path (stdout if omitted)")

    gp = sub.add_parser("gen-fixture", parents=[common], help="write a synthetic correspondence file")
    gp.add_argument("kind", help="match | nonmatch | planar | noisy:<sigma>")
    gp.add_argument("--count", type=int, default=12, help="number of correspondences")
    gp.add_argument("--id", dest="reference_id", help="reference id written to the file")
    gp.add_argument("--output", "-o", required=True)
    return parser


def resolve_config(args):
    config = MatchConfig()
    if getattr(args, "config", None):
        config = io.read_config(args.config, config)
    epipoles = getattr(args, "epipoles", None)
    return config.updated(
        seed=getattr(args, "seed", None),
        cap=getattr(args, "cap", None),
        collinear_px=getattr(args, "collinear_px", None),
        sampson_px=getattr(args, "sampson_px", None),
        outlier_filter=getattr(args, "outlier_filter", None),
        ransac=getattr(args, "ransac", None),
        epipole_mode=EPIPOLE_FLAG[epipoles] if epipoles else None,
        class_fusion=getattr(args, "fusion", None),
        planar_px=getattr(args, "planar_px", None),
        backend=getattr(args, "backend", None),
        workers=getattr(args, "workers", None),
    )


def _fmt(x):
    return "undefined" if x is None else f"{x:.6g}"


def _emit(args, payload, lines, out):
    if getattr(args, "json", False):
        out.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        out.write("\n".join(lines) + "\n")


def _vec(v):
    return None if v is None else [float(x) for x in v]


def cmd_score_pair(args, config, out):
    corr = io.read_correspondences(args.file)
    payload = {
        "command": "score-pair", "file": str(args.file),
        "reference_id": corr.reference_id, "query_id": corr.query_id,
        "correspondences": len(corr), "epipole_mode": config.epipole_mode,
        "backend": _core.BACKEND if config.backend == "auto" else config.backend,
    }
    try:
        ps = score_pair(corr, None, config)
    except GeometryError as exc:
        payload.update(status="degenerate", error=f"{type(exc).__name__}: {exc}",
                       exit_code=EXIT_DEGENERATE)
        _emit(args, payload, [f"error: {type(exc).__name__}: {exc}"], out)
        return EXIT_DEGENERATE
    degenerate = ps.aggregate is None or ps.coplanar_warning
    code = EXIT_DEGENERATE if degenerate else EXIT_OK
    payload.update(
        status="degenerate" if degenerate else "ok",
        aggregate=ps.aggregate,
        quadruples=int(ps.quads.shape[0]),
        pairings_ok=ps.n_ok,
        pairings_skipped_collinear=ps.n_skipped_collinear,
        pairings_skipped_singular=ps.n_skipped_singular,
        planar_score=ps.planar_score,
        coplanar_warning=ps.coplanar_warning,
        degenerate_reason=ps.degenerate_reason,
        diagnostics=ps.diagnostics,
        epipoles=None if ps.epipoles is None else [_vec(ps.epipoles[0]), _vec(ps.epipoles[1])],
        exit_code=code,
    )
    lines = [
        f"file: {args.file}",
        f"reference: {corr.reference_id}  query: {corr.query_id}  correspondences: {len(corr)}",
        f"epipoles: {config.epipole_mode}",
        f"aggregate score: {_fmt(ps.aggregate)}",
        f"quadruples: {ps.quads.shape[0]}  pairings ok: {ps.n_ok}  "
        f"skipped collinear: {ps.n_skipped_collinear}  skipped singular: {ps.n_skipped_singular}",
        f"planar consistency (mean transfer distance): {_fmt(ps.planar_score)} px",
    ]
    if ps.epipoles is not None:
        e1, e2 = ps.epipoles
        lines.append("e1: " + " ".join(f"{v:.6g}" for v in e1) + "   e2: " + " ".join(f"{v:.6g}" for v in e2))
    for key, value in sorted(ps.diagnostics.items()):
        lines.append(f"{key}: {value:.3g}")
    if ps.coplanar_warning:
        why = ps.degenerate_reason or "a single homography explains all correspondences"
        lines.append(f"CoplanarWarning: homology score is uninformative ({why})")
    _emit(args, payload, lines, out)
    return code


def cmd_match(args, config, out):
    directory = Path(args.directory)
    if not directory.is_dir():
        raise InputError(f"not a directory: {directory}")
    templates, skipped = [], []
    seen = set()
    for path in sorted(p for p in directory.iterdir() if p.is_file()):
        try:
            corr = io.read_correspondences(path)
        except ParseError as exc:
            skipped.append({"file": path.name, "reason": str(exc)})
            continue
        if corr.reference_id in seen:
            skipped.append({"file": path.name, "reason": f"duplicate template id {corr.reference_id!r}"})
            continue
        seen.add(corr.reference_id)
        templates.append((corr.reference_id, corr))
    if not templates:
        raise InputError("no readable correspondence files in " + str(directory))

    payload = {"command": "match", "directory": str(directory), "skipped": skipped}
    try:
        result = match_templates(TemplateLibrary(templates), config)
    except GeometryError as exc:
        payload.update(status="degenerate", winner=None, ranking=[], error=str(exc),
                       exit_code=EXIT_DEGENERATE)
        payload["skipped"] += [{"file": tid, "reason": "unscorable"} for tid, _ in templates]
        _emit(args, payload, [f"error: {exc}"] + [f"skipped: {s['file']}: {s['reason']}" for s in skipped], out)
        return EXIT_DEGENERATE

    ranking = result.ranking()
    for t in result.failures():
        skipped.append({"file": t.template_id, "reason": t.error})
    payload.update(
        status="ok", winner=result.best_template, exit_code=EXIT_OK,
        ranking=[{"template_id": t.template_id, "score": t.score,
                  "quadruples_evaluated": t.quadruples_evaluated,
                  "quadruples_skipped": t.quadruples_skipped,
                  "coplanar_warning": t.coplanar_warning} for t in ranking])
    lines = ["rank  score         template"]
    for i, t in enumerate(ranking, 1):
        flag = "  (coplanar warning)" if t.coplanar_warning else ""
        lines.append(f"{i:>4}  {t.score:<12.6g}  {t.template_id}{flag}")
    lines.append(f"winner: {result.best_template}")
    if any("/" in t.template_id for t in ranking):
        best_class, fused = fuse_classes(result, config.class_fusion)
        payload["classes"] = {"rule": config.class_fusion, "winner": best_class, "scores": fused}
        lines.append(f"class scores ({config.class_fusion}): " +
                     ", ".join(f"{c}={s:.6g}" for c, s in fused.items()))
        lines.append(f"winning class: {best_class}")
    for s in skipped:
        lines.append(f"skipped: {s['file']}: {s['reason']}")
    _emit(args, payload, lines, out)
    return EXIT_OK


def _angle_range(text, name):
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise InputError(f"--{name} expects lo:hi:step, got {text!r}") from None
    return lo, hi, step


def cmd_synth_surface(args, config, out):
    seed = config.seed
    try:
        sweep = synthetic.SweepConfig(
            yaw_range=_angle_range(args.yaw, "yaw"),
            pitch_range=_angle_range(args.pitch, "pitch"),
            noise_sigma=args.sigma, keypoint_count=args.keypoints,
            trials_per_pose=args.trials, distance=args.distance, seed=seed,
            match=config)
        a, b = synthetic.default_clouds(args.cloud, args.points, seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    surface = synthetic.hemisphere_sweep(a, b, sweep)
    text = surface.to_csv()
    if args.output:
        try:
            Path(args.output).write_text(text)
        except OSError as exc:
            raise InputError(f"cannot write {args.output}: {exc}") from None
    else:
        out.write(text)
    valid = surface.valid_cells()
    summary = {"command": "synth-surface", "sigma": args.sigma, "seed": seed,
               "poses": len(surface.cells), "valid_poses": len(valid), "output": args.output}
    summary.update(
        mean_match_score=surface.mean_match() if valid else None,
        max_match_score=surface.match_max() if valid else None,
        min_nonmatch_score=surface.nonmatch_min() if valid else None,
        min_separation=surface.separation() if valid else None,
        accuracy=surface.accuracy() if valid else None)
    lines = [f"poses: {len(surface.cells)}  valid: {len(valid)}  sigma: {args.sigma}"]
    if valid:
        lines += [f"mean match score: {summary['mean_match_score']:.6g}",
                  f"max match score: {summary['max_match_score']:.6g}",
                  f"min nonmatch score: {summary['min_nonmatch_score']:.6g}",
                  f"min separation (nonmatch - match): {summary['min_separation']:.6g}",
                  f"classification accuracy: {summary['accuracy']:.3f}"]
    # keep stdout clean for CSV when no output file is given
    stream = out if args.output else sys.stderr
    _emit(args, summary, lines, stream)
    return EXIT_OK


def cmd_gen_fixture(args, config, out):
    try:
        corr = synthetic.make_fixture(args.kind, args.count, config.seed, args.reference_id)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        io.write_correspondences(corr, args.output)
    except OSError as exc:
        raise InputError(f"cannot write {args.output}: {exc}") from None
    _emit(args, {"command": "gen-fixture", "kind": args.kind, "output": args.output,
                 "pairs": len(corr), "reference_id": corr.reference_id},
          [f"wrote {len(corr)} correspondences ({args.kind}) to {args.output}"], out)
    return EXIT_OK


COMMANDS = {
    "score-pair": cmd_score_pair,
    "match": cmd_match,
    "synth-surface": cmd_synth_surface,
    "gen-fixture": cmd_gen_fixture,
}


def _fail(args, out, code, message):
    print(f"error: {message}", file=sys.stderr)
    if getattr(args, "json", False):
        out.write(json.dumps({"command": args.command, "status": "error", "error": message,
                              "exit_code": code}, indent=2, sort_keys=True) + "\n")
    return code


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
    except ParseError as exc:
        return _fail(args, out, EXIT_INPUT, str(exc))
    except ValueError as exc:
        return _fail(args, out, EXIT_INPUT, f"invalid configuration: {exc}")
    try:
        return COMMANDS[args.command](args, config, out)
    except InputError as exc:
        return _fail(args, out, EXIT_INPUT, str(exc))
    except GeometryError as exc:
        return _fail(args, out, EXIT_DEGENERATE, f"{type(exc).__name__}: {exc}")
    except HomologyMatchError as exc:
        return _fail(args, out, EXIT_INPUT, str(exc))


if __name__ == "__main__":
    sys.exit(main())
