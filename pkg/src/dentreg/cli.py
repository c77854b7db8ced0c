"""Command-line entry point: ``dentreg {synth,compare,report,overlay,lr}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import traceback

import numpy as np
from PIL import Image

from . import reporting
from .camera import CameraParams
from .config import Manifest, RunConfig, load_manifest, validate
from .errors import DataError, DentregError, InvalidConfig, ManifestError, MissingParams
from .ident import check_cases, rank_matrix, read_scores_csv, run_cells, scores_to_csv
from .lr import fit_and_report
from .mesh import load_mesh, rasterize_silhouette
from .records import METHODS, ComparisonScore
from .regfit import load_segmentation
from .synth import DEFAULT_IMAGE_SIZE, write_cohort

log = logging.getLogger("dentreg")

CHECKPOINT_EVERY = 100
SCORES_FILE = "scores.csv"
METADATA_FILE = "metadata.jsonl"
CHECKPOINT_FILE = "checkpoint.jsonl"


class UsageError(DentregError):
    pass


# -- synth -----------------------------------------------------------------

def parse_counts(text) -> dict:
    try:
        parts = [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--counts expects A,B,C integers, got {text!r}") from None
    if len(parts) != 3 or min(parts) < 0:
        raise UsageError("--counts expects three non-negative integers A,B,C")
    if sum(parts) == 0:
        raise UsageError("--counts must request at least one case")
    return dict(zip("ABC", parts))


def cmd_synth(out_dir, counts, seed=0, perturbation=1.0, image_size=DEFAULT_IMAGE_SIZE,
              force=False) -> str:
    if not any(counts.values()):
        raise UsageError("cohort needs at least one case")
    try:
        return write_cohort(out_dir, counts, seed, perturbation, tuple(image_size), force)
    except FileExistsError:
        raise UsageError(f"{out_dir} already holds a cohort (use --force to overwrite)") from None


# -- compare ---------------------------------------------------------------

def run_fingerprint(manifest: Manifest, config: RunConfig) -> str:
    """Hash of everything that determines the score matrix."""
    doc = config.to_dict()
    for key in ("workers", "out_dir"):
        doc.pop(key)
    with open(manifest.path, "rb") as fh:
        body = fh.read()
    h = hashlib.sha256(json.dumps(doc, sort_keys=True).encode())
    h.update(body)
    return h.hexdigest()


def _read_checkpoint(path, fingerprint):
    done = {}
    with open(path) as fh:
        lines = fh.read().split("\n")
    try:
        header = json.loads(lines[0])
    except (json.JSONDecodeError, IndexError):
        header = {}
    if header.get("fingerprint") != fingerprint:
        raise UsageError(f"{path} belongs to a different run (use --force to start over)")
    for line in lines[1:]:
        if not line.strip():
            continue
        try:
            cell = ComparisonScore.from_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, ValueError):
            break  # torn write from an interrupted run
        done[(cell.am_id, cell.pm_id)] = cell
    return done


def _cell_line(cell) -> str:
    return json.dumps(cell.to_dict(), sort_keys=True)


def cmd_compare(manifest_path, config: RunConfig, force=False):
    """Score every (AM, PM) cell; resumes from a checkpoint in the output directory.

    Returns the cell dict.  Writes ``scores.csv`` and ``metadata.jsonl``
    (one JSON object per cell, sorted) once the matrix is complete.
    """
    manifest = load_manifest(manifest_path)
    settings = config.compare_settings()
    check_cases(manifest.am, manifest.pm, settings.method)
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    ckpt = os.path.join(out, CHECKPOINT_FILE)
    fingerprint = run_fingerprint(manifest, config)
    done = {}
    if os.path.exists(ckpt) and not force:
        done = _read_checkpoint(ckpt, fingerprint)
        log.info("resuming: %d cells already scored", len(done))
    # rewrite so that a torn tail is dropped before new cells are appended
    with open(ckpt, "w", newline="\n") as fh:
        fh.write(json.dumps({"fingerprint": fingerprint}) + "\n")
        for key in sorted(done):
            fh.write(_cell_line(done[key]) + "\n")

    total = len(manifest.am) * len(manifest.pm)
    pending = []

    def flush():
        if pending:
            with open(ckpt, "a", newline="\n") as fh:
                fh.write("".join(_cell_line(c) + "\n" for c in pending))
                fh.flush()
                os.fsync(fh.fileno())
            pending.clear()

    def on_cell(cell):
        pending.append(cell)
        if len(pending) >= CHECKPOINT_EVERY:
            flush()
            log.info("checkpoint: %d/%d cells", len(done) + len(pending), total)

    workers = config.workers if config.workers > 0 else (os.cpu_count() or 1)
    try:
        cells = run_cells(manifest.am, manifest.pm, settings, workers, done, on_cell)
    finally:
        flush()
    reporting.write_text(scores_to_csv(cells), os.path.join(out, SCORES_FILE))
    reporting.write_text("".join(_cell_line(cells[k]) + "\n" for k in sorted(cells)),
                         os.path.join(out, METADATA_FILE))
    n_bad = sum(c.unscorable for c in cells.values())
    log.info("%d cells scored, %d unscorable", len(cells), n_bad)
    return cells


# -- report / lr -----------------------------------------------------------

def _complete_matrix(cells, manifest: Manifest, allow_partial):
    am_ids = [a.id for a in manifest.am]
    pm_ids = [p.id for p in manifest.pm]
    methods = {c.method for c in cells.values()}
    if len(methods) > 1:
        raise DataError(f"score file mixes methods {sorted(methods)}")
    method = methods.pop() if methods else "unknown"
    missing = [(a, p) for a in am_ids for p in pm_ids if (a, p) not in cells]
    if missing:
        if not allow_partial:
            raise DataError(f"{len(missing)} score cells missing, e.g. {missing[0]} "
                            "(use --allow-partial)")
        cells = dict(cells)
        for a, p in missing:
            cells[(a, p)] = ComparisonScore.failed(a, p, method, "missing from score file")
    return cells, method, am_ids, pm_ids


def _lr_report(cells, truth, config: RunConfig):
    return fit_and_report(cells, truth, config.lr_bandwidth, config.lr_floor,
                          config.lr_leave_one_out)


def _write_lr(lr_rep, out, title):
    reporting.write_text(reporting.lr_csv(lr_rep), os.path.join(out, "lr.csv"))
    reporting.write_text(reporting.density_csv(lr_rep), os.path.join(out, "density.csv"))
    reporting.plot_density(lr_rep, os.path.join(out, "density.png"), title)


def cmd_lr(scores_path, manifest_path, config: RunConfig, allow_partial=False):
    manifest = load_manifest(manifest_path)
    cells, method, _, _ = _complete_matrix(read_scores_csv(scores_path), manifest, allow_partial)
    os.makedirs(config.out_dir, exist_ok=True)
    lr_rep = _lr_report(cells, manifest.truth, config)
    _write_lr(lr_rep, config.out_dir, method)
    reporting.dump_json({"method": method, "cllr": lr_rep.cllr,
                         "bandwidth_h0": lr_rep.model.bandwidth_h0,
                         "bandwidth_h1": lr_rep.model.bandwidth_h1,
                         "leave_one_out": lr_rep.leave_one_out, "excluded": lr_rep.excluded},
                        os.path.join(config.out_dir, "cllr.json"))
    return lr_rep


def cmd_report(scores_path, manifest_path, config: RunConfig, allow_partial=False) -> dict:
    """Ranking statistics, CMC and likelihood-ratio outputs for a score matrix."""
    manifest = load_manifest(manifest_path)
    if not manifest.truth:
        raise DataError("manifest has no ground truth to rank against")
    cells, method, am_ids, pm_ids = _complete_matrix(read_scores_csv(scores_path), manifest,
                                                     allow_partial)
    truth = manifest.truth
    report = rank_matrix(cells, truth, am_ids, pm_ids)
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    try:
        lr_rep = _lr_report(cells, truth, config)
    except DataError as exc:
        log.warning("no likelihood ratios: %s", exc)
        lr_rep = None
    doc = reporting.report_document(method, report, lr_rep)
    validate(doc, "report")
    reporting.dump_json(doc, os.path.join(out, "report.json"))
    reporting.write_text(reporting.statistics_csv(report), os.path.join(out, "statistics.csv"))
    reporting.write_text(reporting.positions_csv(report, truth), os.path.join(out, "positions.csv"))
    reporting.write_text(reporting.cmc_csv(report), os.path.join(out, "cmc.csv"))
    reporting.plot_cmc(report, os.path.join(out, "cmc.png"), method)
    if lr_rep is not None:
        _write_lr(lr_rep, out, method)
    return doc


# -- overlay ---------------------------------------------------------------

def _find_params(metadata_path, am_id, pm_id):
    if metadata_path and os.path.exists(metadata_path):
        with open(metadata_path) as fh:
            for line in fh:
                d = json.loads(line)
                if d["am_id"] == am_id and d["pm_id"] == pm_id and d.get("params"):
                    return CameraParams.from_dict(d["params"])
    raise MissingParams(f"no stored camera parameters for ({am_id}, {pm_id})")


def cmd_overlay(manifest_path, am_id, pm_id, config: RunConfig, params=None,
                metadata_path=None, out_path=None) -> str:
    """Composite PNG of the photo segmentation against the mesh at ``params``."""
    manifest = load_manifest(manifest_path)
    am = {a.id: a for a in manifest.am}.get(am_id)
    pm = {p.id: p for p in manifest.pm}.get(pm_id)
    if am is None or pm is None:
        raise ManifestError("unknown case", am_id if am is None else pm_id)
    if params is None:
        params = _find_params(metadata_path or os.path.join(config.out_dir, METADATA_FILE),
                              am_id, pm_id)
    if not am.segmentation:
        raise DataError(f"{am_id}: no segmentation")
    seg = load_segmentation(am.segmentation)
    ic = config.intrinsics.with_image_size(seg.width, seg.height)
    sil = rasterize_silhouette(load_mesh(pm.mesh), params, ic)
    photo = None
    if am.photo and os.path.exists(am.photo):
        photo = np.asarray(Image.open(am.photo).convert("RGB"))
    img = reporting.overlay_image(seg.roi, sil, seg.occlusion, photo)
    out_path = out_path or os.path.join(config.out_dir, f"overlay_{am_id}_{pm_id}.png")
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    reporting.save_png(img, out_path)
    return out_path


# -- argument handling -----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p, manifest=True):
    p.add_argument("--config", metavar="PATH", help="JSON run configuration")
    if manifest:
        p.add_argument("--manifest", metavar="PATH", required=True, help="case manifest JSON")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dentreg", description="Dental AM/PM comparison by 3D-2D registration.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic cohort")
    _add_common(p, manifest=False)
    p.add_argument("--counts", default="15,15,10", help="cases per occlusion level A,B,C")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturbation", type=float, default=1.0)
    p.add_argument("--image-size", default=f"{DEFAULT_IMAGE_SIZE[0]}x{DEFAULT_IMAGE_SIZE[1]}",
                   help="WIDTHxHEIGHT")
    p.add_argument("--force", action="store_true", help="overwrite an existing cohort")

    p = sub.add_parser("compare", help="score every AM/PM pair")
    _add_common(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="worker processes (0: all CPUs)")
    p.add_argument("--force", action="store_true", help="ignore an existing checkpoint")

    for name, text in (("report", "rankings, CMC and likelihood ratios"),
                       ("lr", "likelihood ratios and C_llr only")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        p.add_argument("--scores", metavar="PATH", help="scores CSV (default OUT/scores.csv)")
        p.add_argument("--allow-partial", action="store_true",
                       help="rank missing cells as unscorable instead of failing")
        p.add_argument("--bandwidth", help="'silverman' or a positive number")
        p.add_argument("--leave-one-out", action="store_true")

    p = sub.add_parser("overlay", help="render a registration composite")
    _add_common(p)
    p.add_argument("--am", required=True, help="AM case id")
    p.add_argument("--pm", required=True, help="PM case id")
    p.add_argument("--params", metavar="PATH",
                   help="camera parameters JSON (default: from OUT/metadata.jsonl)")
    p.add_argument("--metadata", metavar="PATH")
    p.add_argument("--png", metavar="PATH", help="output image path")
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    over = {"out_dir": args.out}
    for key in ("method", "seed", "workers"):
        over[key] = getattr(args, key, None)
    if getattr(args, "seed", None) is not None and args.seed < 0:
        raise UsageError("--seed must be >= 0")
    if getattr(args, "bandwidth", None) is not None:
        bw = args.bandwidth
        if bw != "silverman":
            try:
                bw = float(bw)
            except ValueError:
                raise UsageError("--bandwidth must be 'silverman' or a number") from None
            if not bw > 0:
                raise UsageError("--bandwidth must be positive")
        over["lr_bandwidth"] = bw
    if getattr(args, "leave_one_out", False):
        over["lr_leave_one_out"] = True
    return cfg.with_overrides(**over)


def _dispatch(args):
    if args.command == "synth":
        try:
            w, h = (int(v) for v in args.image_size.lower().split("x"))
        except ValueError:
            raise UsageError("--image-size expects WIDTHxHEIGHT") from None
        path = cmd_synth(args.out or "cohort", parse_counts(args.counts), args.seed,
                         args.perturbation, (w, h), args.force)
        print(path)
        return
    cfg = _load_config(args)
    if args.command == "compare":
        cells = cmd_compare(args.manifest, cfg, args.force)
        print(os.path.join(cfg.out_dir, SCORES_FILE))
        if not cells:
            raise DataError("no cells scored")
    elif args.command == "report":
        doc = cmd_report(args.scores or os.path.join(cfg.out_dir, SCORES_FILE),
                         args.manifest, cfg, args.allow_partial)
        stats = doc["statistics"]
        print(" ".join(f"{k}={stats[k]:.4g}" for k in stats))
        if doc["lr"] is not None:
            print(f"C_llr={doc['lr']['cllr']:.4f}")
    elif args.command == "lr":
        rep = cmd_lr(args.scores or os.path.join(cfg.out_dir, SCORES_FILE),
                     args.manifest, cfg, args.allow_partial)
        print(f"C_llr={rep.cllr:.4f}")
    elif args.command == "overlay":
        params = None
        if args.params:
            with open(args.params) as fh:
                d = json.load(fh)
            params = CameraParams.from_dict(d.get("camera", d))
        print(cmd_overlay(args.manifest, args.am, args.pm, cfg, params, args.metadata, args.png))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        _dispatch(args)
    except (UsageError, InvalidConfig) as exc:
        print(f"dentreg: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"dentreg: data error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("dentreg: interrupted", file=sys.stderr)
        return 3
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
