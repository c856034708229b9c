"""Batch execution, aggregation and file output for controller comparisons."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import Placement, ScenarioConfig, dumps
from .controllers import run_closed_loop
from .domain import TargetParams
from .records import TrialRecord

SUMMARY_COLUMNS = ("controller", "success_pct", "slowdown")
MIN_SUCCESS_FOR_SLOWDOWN = 10.0


def _sample_point(rng, domain, inset):
    lo = np.full(domain.ndim, inset)
    hi = np.asarray(domain.lengths) - inset
    return rng.uniform(lo, hi)


def _far_from(p, others, gap):
    return all(np.linalg.norm(p - np.asarray(o)) >= gap for o in others)


def place_objects(template: ScenarioConfig, rng, max_tries: int = 10000) -> ScenarioConfig:
    """Draw target and distractor positions according to ``template.placement``."""
    pl: Placement = template.placement
    dom = template.domain
    targets = list(template.true_targets)
    if pl.n_targets is not None:
        targets = []
        for _ in range(pl.n_targets):
            for _ in range(max_tries):
                p = _sample_point(rng, dom, pl.inset)
                if _far_from(p, [t.location for t in targets], pl.min_target_separation):
                    break
            else:
                raise ValueError("placement: cannot honor min_target_separation")
            if pl.radius_choices:
                r = float(rng.choice(pl.radius_choices))
            else:
                r = pl.target_radius
            targets.append(TargetParams(tuple(p), r, pl.target_plane_offset))
    distractors = list(template.distractors)
    if pl.n_distractors is not None:
        distractors = []
        locs = [t.location for t in targets]
        for _ in range(pl.n_distractors):
            for _ in range(max_tries):
                p = _sample_point(rng, dom, pl.inset)
                if _far_from(p, locs, pl.min_distractor_gap):
                    break
            else:
                raise ValueError("placement: cannot honor min_distractor_gap")
            distractors.append(TargetParams(tuple(p), pl.distractor_radius, pl.distractor_plane_offset))
    return template.replace(true_targets=targets, distractors=distractors)


def trial_scenarios(template: ScenarioConfig, controllers: Sequence[str], n_trials: int,
                    seed: int) -> list:
    """Per-trial scenarios, ordered by (trial, controller).

    Trial ``i`` gets its placement and its closed-loop seed from
    ``SeedSequence([seed, i])``; every controller sees the same placement and seed.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    out = []
    for i in range(n_trials):
        place_ss, loop_ss = np.random.SeedSequence([seed, i]).spawn(2)
        placed = place_objects(template, np.random.default_rng(place_ss))
        loop_seed = int(loop_ss.generate_state(1)[0])
        for c in controllers:
            out.append((i, placed.replace(controller=c, rng_seed=loop_seed)))
    return out


def _run(job):
    i, scenario = job
    return run_closed_loop(scenario, trial_index=i)


@dataclass
class BatchSummary:
    controllers: list
    success_pct: dict
    mean_time: dict
    slowdown: dict
    n_trials: dict = field(default_factory=dict)

    def rows(self) -> list:
        rows = []
        for c in self.controllers:
            s = self.slowdown.get(c)
            rows.append({"controller": c, "success_pct": self.success_pct[c], "slowdown": s})
        return rows


def summarize(records: Sequence[TrialRecord], controllers: Optional[Sequence[str]] = None) -> BatchSummary:
    """Success rate per controller and slowdown relative to the fastest eligible one."""
    if not records:
        raise ValueError("summarize needs at least one record")
    if controllers is None:
        controllers = []
        for r in records:
            if r.controller not in controllers:
                controllers.append(r.controller)
    success, mean_time, counts = {}, {}, {}
    for c in controllers:
        rs = [r for r in records if r.controller == c]
        counts[c] = len(rs)
        ok = [r.completion_time for r in rs if r.success]
        success[c] = 100.0 * len(ok) / len(rs) if rs else 0.0
        mean_time[c] = float(np.mean(ok)) if ok else None
    eligible = [c for c in controllers
                if mean_time[c] is not None and success[c] >= MIN_SUCCESS_FOR_SLOWDOWN]
    slowdown = {}
    if eligible:
        fastest = min(mean_time[c] for c in eligible)
        slowdown = {c: mean_time[c] / fastest for c in eligible}
    return BatchSummary(list(controllers), success, mean_time, slowdown, counts)


def run_batch(template: ScenarioConfig, controllers: Sequence[str], n_trials: int, seed: int,
              n_jobs: int = 1):
    """Run every controller on ``n_trials`` randomized placements.

    Returns ``(summary, records)``; records are ordered by trial then controller
    regardless of ``n_jobs``.
    """
    jobs = trial_scenarios(template, controllers, n_trials, seed)
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(_run, jobs))
    else:
        records = [_run(j) for j in jobs]
    return summarize(records, controllers), records


def _fmt(v):
    return "" if v is None else f"{v:.6g}"


def summary_csv(summary: Optional[BatchSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    if summary is not None:
        for row in summary.rows():
            w.writerow([row["controller"], _fmt(row["success_pct"]), _fmt(row["slowdown"])])
    return buf.getvalue()


def records_jsonl(records: Sequence[TrialRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in records)


def parse_records(text: str) -> list:
    return [TrialRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def trajectories_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "controller", "horizon", "sample", "x", "y"])
    for r in records:
        for h in r.horizons:
            for j, p in enumerate(h["trajectory"]):
                p = list(p) + [""] * (2 - len(p))
                w.writerow([r.trial_index, r.controller, h["index"], j] + [_fmt(v) if v != "" else "" for v in p])
    return buf.getvalue()


def eid_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "controller", "horizon", "node", "density"])
    for r in records:
        for h in r.horizons:
            for j, v in enumerate(h.get("eid", [])):
                w.writerow([r.trial_index, r.controller, h["index"], j, _fmt(v)])
    return buf.getvalue()


def emit(records: Sequence[TrialRecord], summary: Optional[BatchSummary], out_dir,
         seed: Optional[int] = None, template: Optional[ScenarioConfig] = None) -> list:
    """Write trials.jsonl, summary.csv, trajectories.csv, manifest.txt (and eid.csv if dumped)."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    files = {"trials.jsonl": records_jsonl(records),
             "summary.csv": summary_csv(summary),
             "trajectories.csv": trajectories_csv(records)}
    if any("eid" in h for r in records for h in r.horizons):
        files["eid.csv"] = eid_csv(records)
    manifest = [f"eedi {__version__}", f"seed {seed}", f"records {len(records)}"]
    for name in sorted(files):
        manifest.append(f"file {name}")
    files["manifest.txt"] = "\n".join(manifest) + "\n"
    if template is not None:
        files["scenario.yaml"] = dumps(template)
    written = []
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        try:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    return written
