"""Command line front end.

Thin argument plumbing over the library: each subcommand loads inputs,
calls one pipeline entry point and serializes the result. Exit codes:
0 ok, 1 I/O or bad input data, 2 table not found, 3 empty table,
4 invalid config. Usage errors exit 64.
"""

import argparse
import json
import sys
from pathlib import Path

from . import __version__, fixtures, legend_parse, match, pipeline, raster, sidecar
from .config import ConfigError, PipelineConfig, load_config


class _Parser(argparse.ArgumentParser):
    # keep exit code 2 reserved for table-not-found
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(64, f"{self.prog}: error: {message}\n")


def _add_common(parser, suppress: bool):
    # the same flags are valid before and after the subcommand; the
    # subparser copies default to SUPPRESS so an absent flag does not
    # clobber a value parsed at the top level
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", help="JSON config file; keys mirror PipelineConfig",
                        **({"default": d} if suppress else {}))
    parser.add_argument("--audit", action="store_true", help="persist per-stage crops under the output dir",
                        **({"default": d} if suppress else {}))
    parser.add_argument("--seed", type=int, help="seed for fixture generation",
                        default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="symbolspot", description="Legend-driven symbol spotting for raster drawings.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_common(p, suppress=False)
    common = _Parser(add_help=False)
    _add_common(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True, metavar="command", parser_class=_Parser)

    run = sub.add_parser("run", parents=[common], help="run the pipeline on drawings")
    run.add_argument("images", nargs="*", help="grayscale PNG drawings")
    run.add_argument("--out", metavar="DIR", help="write <id>.report.json (and eval.csv) here")
    run.add_argument("--detections", metavar="PATH", help="detection sidecar JSON")
    run.add_argument("--embeddings", metavar="PATH", help="embedding sidecar JSON")
    run.add_argument("--ground-truth", metavar="PATH", help="score against this ground truth JSON")
    run.add_argument("--jobs", type=int, default=1, help="images processed in parallel")

    ev = sub.add_parser("eval", parents=[common], help="score saved reports against ground truth")
    ev.add_argument("reports", nargs="+", help="report JSON files")
    ev.add_argument("--ground-truth", metavar="PATH", required=True)
    ev.add_argument("--out", metavar="CSV", help="CSV path; stdout when omitted")
    ev.add_argument("--iou", type=float, default=None, help="IoU threshold (default: config eval_iou)")

    gen = sub.add_parser("gen-fixture", parents=[common], help="render a synthetic drawing")
    gen.add_argument("--out", metavar="PREFIX", required=True, help="writes PREFIX.png/.gt.json/.key.json")
    gen.add_argument("--classes", type=int, default=6)
    gen.add_argument("--instances", type=int, default=30)
    gen.add_argument("--outliers", type=int, default=0)
    gen.add_argument("--heading-rows", type=int, default=1)
    gen.add_argument("--lines", type=int, default=6)
    gen.add_argument("--noise", type=int, default=120)
    gen.add_argument("--height", type=int, default=2400)
    gen.add_argument("--width", type=int, default=2800)
    gen.add_argument("--symbol-side", choices=("left", "right"), default="left")

    pt = sub.add_parser("parse-table", parents=[common], help="parse a cropped legend table")
    pt.add_argument("table", help="table crop PNG")
    pt.add_argument("--out", metavar="DIR", help="write symbol/name crops here")

    mt = sub.add_parser("match", parents=[common], help="score a query crop against a template")
    mt.add_argument("query", help="query crop PNG")
    mt.add_argument("template", help="template crop PNG")

    sv = sub.add_parser("serve", parents=[common], help="start the HTTP service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    return p


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def cmd_run(args, cfg: PipelineConfig) -> int:
    images = list(args.images) or list(cfg.images)
    if not images:
        print("error: no input images (give paths or set 'images' in the config)", file=sys.stderr)
        return 1
    out_dir = args.out or cfg.output_dir
    if args.audit and out_dir is None:
        print("error: --audit needs --out (or 'output_dir' in the config)", file=sys.stderr)
        return 1
    detection_doc = _load_json(args.detections or cfg.detection_sidecar) if (args.detections or cfg.detection_sidecar) else None
    embedding_doc = _load_json(args.embeddings or cfg.embedding_sidecar) if (args.embeddings or cfg.embedding_sidecar) else None
    gt_path = args.ground_truth or cfg.ground_truth

    audit_dir = None
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        if args.audit:
            audit_dir = Path(out_dir) / "audit"
    reports = pipeline.run_batch(
        images,
        cfg,
        jobs=args.jobs,
        detection_doc=detection_doc,
        embedding_doc=embedding_doc,
        audit_dir=audit_dir,
    )
    if out_dir is not None:
        for rep in reports:
            pipeline.emit_report_json(rep, Path(out_dir) / f"{rep.image_id}.report.json")

    if gt_path is None:
        docs = [rep.to_dict() for rep in reports]
        print(json.dumps(docs[0] if len(docs) == 1 else docs, indent=2, sort_keys=True))
        return 0

    gt = sidecar.parse_ground_truth(_load_json(gt_path))
    rows = []
    for rep in reports:
        if rep.image_id not in gt:
            print(f"error: no ground truth for image '{rep.image_id}'", file=sys.stderr)
            return 1
        rows.append(pipeline.evaluate(rep, gt[rep.image_id], cfg.eval_iou))
    if out_dir is not None:
        pipeline.emit_eval_csv(rows, Path(out_dir) / "eval.csv")
        print(f"wrote {len(reports)} report(s) and eval.csv to {out_dir}")
    else:
        _print_csv(rows)
    return 0


def _print_csv(rows):
    import io

    buf = io.StringIO()
    rows = sorted(rows, key=lambda r: r.image_id)
    print(",".join(pipeline.CSV_HEADER), file=buf)
    for r in rows:
        print(f"{r.image_id},{r.present},{r.detected},{r.detected_correct},{r.classified_correct}", file=buf)
    print(
        "Total,%d,%d,%d,%d"
        % (
            sum(r.present for r in rows),
            sum(r.detected for r in rows),
            sum(r.detected_correct for r in rows),
            sum(r.classified_correct for r in rows),
        ),
        file=buf,
    )
    sys.stdout.write(buf.getvalue())


def cmd_eval(args, cfg: PipelineConfig) -> int:
    gt = sidecar.parse_ground_truth(_load_json(args.ground_truth))
    iou = cfg.eval_iou if args.iou is None else args.iou
    rows = []
    for path in args.reports:
        rep = pipeline.Report.from_dict(_load_json(path))
        if rep.image_id not in gt:
            print(f"error: no ground truth for image '{rep.image_id}'", file=sys.stderr)
            return 1
        rows.append(pipeline.evaluate(rep, gt[rep.image_id], iou))
    if args.out:
        pipeline.emit_eval_csv(rows, args.out)
    else:
        _print_csv(rows)
    return 0


def cmd_gen_fixture(args, cfg: PipelineConfig) -> int:
    spec = fixtures.FixtureSpec(
        n_classes=args.classes,
        n_instances=args.instances,
        n_outliers=args.outliers,
        heading_rows=args.heading_rows,
        n_lines=args.lines,
        n_noise=args.noise,
        height=args.height,
        width=args.width,
        symbol_side=args.symbol_side,
    )
    fx = fixtures.generate_fixture(spec, args.seed)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    image_id = prefix.name
    raster.save_png(prefix.with_suffix(".png"), fx.image)
    gt_text = sidecar.serialize_ground_truth(pipeline.fixture_ground_truth(fx, image_id))
    prefix.with_suffix(".gt.json").write_text(gt_text + "\n", encoding="utf-8")
    key = {
        "image_id": image_id,
        "seed": fx.seed,
        "table_box": {"x": fx.table_box.x, "y": fx.table_box.y, "w": fx.table_box.w, "h": fx.table_box.h},
        "anchor": {"x": fx.anchor.box.x, "y": fx.anchor.box.y, "w": fx.anchor.box.w, "h": fx.anchor.box.h},
        "heading_rows": spec.heading_rows,
        "symbol_side": spec.symbol_side,
        "classes": [
            {"class_id": e.class_id, "glyph": e.glyph_key, "name": e.name_text} for e in fx.entries
        ],
    }
    prefix.with_suffix(".key.json").write_text(json.dumps(key, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for suffix in (".png", ".gt.json", ".key.json"):
        print(prefix.with_suffix(suffix))
    return 0


def cmd_parse_table(args, cfg: PipelineConfig) -> int:
    img = raster.load_png(args.table)
    entries = legend_parse.parse_table(
        img,
        threshold=cfg.threshold,
        black_fraction=cfg.stray_fraction,
        white_mean_min=cfg.white_mean_min,
    )
    doc = {"entries": []}
    for e in entries:
        rec = {
            "class_id": e.class_id,
            "row_start": e.source_row.start,
            "row_end": e.source_row.end,
            "symbol_size": list(e.symbol.shape),
            "name_size": list(e.name_img.shape),
        }
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            rec["symbol_png"] = str(Path(args.out) / f"sym_{e.class_id:02d}.png")
            rec["name_png"] = str(Path(args.out) / f"name_{e.class_id:02d}.png")
            raster.save_png(rec["symbol_png"], e.symbol)
            raster.save_png(rec["name_png"], e.name_img)
        doc["entries"].append(rec)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_match(args, cfg: PipelineConfig) -> int:
    q = raster.load_png(args.query)
    t = raster.load_png(args.template)
    mcfg = cfg.match_config()
    score = match.similarity(match.tighten_to_ink(q), match.tighten_to_ink(t), mcfg)
    print(
        json.dumps(
            {"s": score.s, "n": score.stats.n, "m": score.stats.m, "score_mode": mcfg.score_mode},
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def cmd_serve(args, cfg: PipelineConfig) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(cfg), host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "run": cmd_run,
    "eval": cmd_eval,
    "gen-fixture": cmd_gen_fixture,
    "parse-table": cmd_parse_table,
    "match": cmd_match,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 4
    except pipeline.TableNotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except legend_parse.EmptyTable as exc:
        print(f"error: legend-parser: {exc}", file=sys.stderr)
        return 3
    except (OSError, sidecar.SidecarError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
