"""Command-line entry point: ``gazeprint <subcommand> ...``.

Exit status is 0 on success, 1 on user error (bad flags, unreadable or
malformed input) and 2 when an internal invariant is violated.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .errors import GazeprintError
from .evaluation import (
    build_score_matrix,
    cmc_curve,
    compute_eer,
    det_curve,
    one_to_one_match,
    rank_accuracy,
    write_cmc_csv,
    write_det_csv,
)
from .features import write_mask_file
from .gaze_io import parse_recording, read_geometry
from .pipeline import (
    PipelineConfig,
    config_for_model,
    config_from_dict,
    extract_recording,
    find_recordings,
    load_recordings,
    read_config,
    read_features_csv,
    recording_segments,
    select_subjects,
    sessions_of,
    train_model,
    write_features_csv,
)
from .rbfn import load_model, ranked, save_model
from .segmentation import write_segments_csv
from .selection import SelectionRun, backward_select
from .synth import make_profiles, write_cohort


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@contextlib.contextmanager
def _atomic(path):
    """Yield a temporary path that replaces ``path`` once the block succeeds."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _write_text(path, text):
    with _atomic(path) as tmp:
        tmp.write_text(text, encoding="utf-8")


# --- config ------------------------------------------------------------------


def _add_config_flags(p, stimulus=True):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int)
    if stimulus:
        p.add_argument("--stimulus", choices=["RAN", "TEX"])
    p.add_argument("--velocity-threshold", type=float, dest="velocity_threshold")
    p.add_argument("--k", type=int, dest="k_per_subject", help="prototypes per subject")
    p.add_argument("--lambda", type=float, dest="lam", help="fixation weight in the fused score")
    p.add_argument("--masks", help="'published', 'all' or a mask sidecar JSON")


def _resolve_config(args):
    base = read_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {
        "seed": getattr(args, "seed", None),
        "stimulus": getattr(args, "stimulus", None),
        "velocity_threshold": getattr(args, "velocity_threshold", None),
        "k_per_subject": getattr(args, "k_per_subject", None),
        "lambda": getattr(args, "lam", None),
        "masks": getattr(args, "masks", None),
    }
    return config_from_dict(overrides, base)


def _announce(cfg, out_dir=None):
    print("# resolved config")
    print(cfg.to_text(), end="")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_text(out_dir / "config.txt", cfg.to_text())


# --- inputs ------------------------------------------------------------------


def _is_features_csv(path):
    with open(path, encoding="utf-8") as fh:
        return fh.readline().startswith("subject,session,kind")


def _recording_at(path):
    path = Path(path)
    geom = path.with_suffix(".geom")
    if not geom.exists():
        raise UserError(f"no geometry sidecar {geom}")
    return parse_recording(path, read_geometry(geom))


def _recordings(source, stimulus=None):
    source = Path(source)
    if source.is_dir():
        recs = load_recordings(source, stimulus)
        if not recs:
            raise UserError(f"no recordings with geometry sidecars in {source}")
        return recs
    if not source.exists():
        raise UserError(f"no such file or directory: {source}")
    return [_recording_at(source)]


def _features(source, cfg):
    """Raw feature matrices from a features CSV, a recording or a directory."""
    source = Path(source)
    if source.is_file() and _is_features_csv(source):
        return read_features_csv(source, cfg.stimulus)
    stimulus = cfg.stimulus if source.is_dir() else None
    return [extract_recording(r, cfg) for r in _recordings(source, stimulus)]


# --- subcommands -------------------------------------------------------------


def cmd_synth(args):
    cfg = _resolve_config(args)
    _announce(cfg, args.out)
    profiles = make_profiles(args.subjects, seed=cfg.seed, archetypes=args.archetypes)
    paths = write_cohort(args.out, profiles, args.sessions, cfg.stimulus, args.duration, args.rate)
    print(f"wrote {len(paths)} recordings to {args.out}")
    return 0


def cmd_segment(args):
    cfg = _resolve_config(args)
    out = Path(args.out)
    _announce(cfg, out)
    for rec in _recordings(args.input):
        _, _, segments = recording_segments(rec, cfg)
        name = f"{rec.subject_id}_{rec.session_id}_{rec.stimulus_kind}_segments.csv"
        with _atomic(out / name) as tmp:
            write_segments_csv(tmp, segments)
        n_fix = sum(1 for s in segments if s.kind == 0)
        print(f"{name}: {n_fix} fixations, {len(segments) - n_fix} saccades")
    return 0


def cmd_extract(args):
    cfg = _resolve_config(args)
    out = Path(args.out)
    _announce(cfg, out)
    recs = _features(args.input, cfg)
    with _atomic(out / "features.csv") as tmp:
        write_features_csv(tmp, recs)
    with _atomic(out / "mask.json") as tmp:
        write_mask_file(tmp, cfg.schemas())
    n_fix = sum(r.fix.shape[0] for r in recs)
    n_sac = sum(r.sacc.shape[0] for r in recs)
    print(f"{len(recs)} recordings: {n_fix} fixation rows, {n_sac} saccade rows")
    return 0


def cmd_select(args):
    cfg = _resolve_config(args)
    out = Path(args.out)
    _announce(cfg, out)
    data = _features(args.input, cfg)
    run = SelectionRun(cfg.stimulus, args.iterations, args.fraction, cfg.seed)
    run = backward_select(data, run, cfg)
    schemas = run.schemas()
    with _atomic(out / "mask.json") as tmp:
        write_mask_file(tmp, schemas)
    with _atomic(out / "selection_trace.csv") as tmp, open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "feature", "included", "eer_pct"])
        for it, i, j, v in run.eer_trace:
            w.writerow([it, i, int(j), repr(v)])
    for kind, schema in schemas.items():
        print(f"{kind.short}: {schema.n_active} of {len(schema.names)} features kept")
    return 0


def cmd_train(args):
    cfg = _resolve_config(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _announce(cfg, out.parent)
    recs = _features(args.input, cfg)
    sessions = sessions_of(recs)
    session = args.session or sessions[0]
    if session not in sessions:
        raise UserError(f"session {session!r} not found; available: {', '.join(sessions)}")
    recs = [r for r in recs if r.session_id == session]
    if args.fraction < 1.0:
        recs = select_subjects(recs, args.fraction, cfg.seed)
    model = train_model(recs, cfg, drop_incomplete=True)
    with _atomic(out) as tmp:
        save_model(tmp, model)
    print(f"trained on session {session}: {len(model.subject_ids)} subjects -> {out}")
    return 0


def cmd_identify(args):
    model = load_model(args.model)
    cfg = config_for_model(model)
    _announce(cfg)
    for probe in _features(args.probe, cfg):
        print(f"probe {probe.subject_id}_{probe.session_id}")
        scores = ranked(model.score(probe.fix, probe.sacc), model.subject_ids)
        for n, (sid, s) in enumerate(scores[: args.top], start=1):
            print(f"  {n:3d} {sid} {s:.6f}")
    return 0


def _probe_set(recs, session):
    sessions = sessions_of(recs)
    if session is not None:
        if session not in sessions:
            raise UserError(f"session {session!r} not found; available: {', '.join(sessions)}")
        return [r for r in recs if r.session_id == session]
    if len(sessions) > 1:
        # enrollment is the first session; everything later is probe data
        return [r for r in recs if r.session_id != sessions[0]]
    return recs


def _write_scores(path, sm):
    with _atomic(path) as tmp, open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", *sm.probe_ids])
        for sid, row in zip(sm.labeled_ids, sm.D):
            w.writerow([sid, *(repr(float(v)) for v in row)])


def cmd_evaluate(args):
    model = load_model(args.model)
    cfg = config_for_model(model)
    out = Path(args.out)
    _announce(cfg, out)
    probes = [p for p in _probe_set(_features(args.probes, cfg), args.session) if p.fix.size + p.sacc.size]
    sm = build_score_matrix(model, probes)
    if sm.D.shape[1] == 0:
        raise UserError("no usable probe recordings")
    genuine, impostor = sm.genuine_impostor()
    r1 = rank_accuracy(sm, 1)
    eer, threshold = compute_eer(genuine, impostor)
    thr, far, frr = det_curve(genuine, impostor)
    cmc = cmc_curve(sm)
    with _atomic(out / "det.csv") as tmp:
        write_det_csv(tmp, thr, far, frr)
    with _atomic(out / "cmc.csv") as tmp:
        write_cmc_csv(tmp, cmc)
    _write_scores(out / "scores.csv", sm)
    report = {
        "rank1_pct": r1,
        "eer_pct": eer,
        "eer_threshold": threshold,
        "n_enrolled": len(sm.labeled_ids),
        "n_probes": len(sm.probe_ids),
        "n_genuine": int(genuine.size),
        "n_impostor": int(impostor.size),
        "probe_sessions": sessions_of(probes),
        "cmc_pct": [float(v) for v in cmc],
    }
    if args.one_to_one:
        if sm.D.shape[0] != sm.D.shape[1]:
            raise UserError(f"--one-to-one needs as many probes as enrolled subjects, got {sm.D.shape}")
        pairs = one_to_one_match(sm.D)
        correct = [int(sm.truth[c] == r) for r, c in pairs]
        with _atomic(out / "matches.csv") as tmp, open(tmp, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subject", "probe", "score", "correct"])
            for (r, c), ok in zip(pairs, correct):
                w.writerow([sm.labeled_ids[r], sm.probe_ids[c], repr(float(sm.D[r, c])), ok])
        report["one_to_one_accuracy_pct"] = 100.0 * float(np.mean(correct))
        report["matches"] = [[sm.labeled_ids[r], sm.probe_ids[c]] for r, c in pairs]
    _write_text(out / "report.json", json.dumps(report, indent=1, sort_keys=True) + "\n")
    line = f"R1 = {r1:.2f}%  EER = {eer:.2f}%"
    if args.one_to_one:
        line += f"  one-to-one = {report['one_to_one_accuracy_pct']:.2f}%"
    _write_text(out / "summary.txt", line + "\n")
    print(line)
    return 0


# --- parser ------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="gazeprint", description="Eye-movement biometrics with fused RBF networks.")
    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--subjects", type=int, default=40)
    p.add_argument("--sessions", type=int, default=2)
    p.add_argument("--duration", type=float, default=100.0, help="seconds per recording")
    p.add_argument("--rate", type=int, default=250, choices=[250, 1000])
    p.add_argument("--archetypes", type=int, help="draw subjects around this many near-identical archetypes")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="write fixation/saccade segments per recording")
    p.add_argument("--input", required=True, help="recording CSV or directory")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("extract", help="extract raw features into features.csv")
    p.add_argument("--input", required=True, help="recording CSV or directory")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("select-features", help="backward feature selection")
    p.add_argument("--input", "--features", dest="input", required=True, help="features CSV or recording directory")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train a fusion model on one session")
    p.add_argument("--features", "--input", dest="input", required=True, help="features CSV or recording directory")
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--session", help="enrollment session (default: first)")
    p.add_argument("--fraction", type=float, default=1.0, help="random fraction of subjects to enroll")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("identify", help="rank enrolled subjects for each probe")
    p.add_argument("--model", required=True)
    p.add_argument("--probe", required=True, help="features CSV, recording CSV or directory")
    p.add_argument("--top", type=int, default=5)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("evaluate", help="R1, EER, DET and CMC on probe recordings")
    p.add_argument("--model", required=True)
    p.add_argument("--probes", required=True, help="features CSV or recording directory")
    p.add_argument("--session", help="probe session (default: every session after the first)")
    p.add_argument("--one-to-one", action="store_true", help="also run greedy one-to-one matching")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (GazeprintError, UserError, OSError) as exc:
        print(f"gazeprint: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal invariant violation
        print(f"gazeprint: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
