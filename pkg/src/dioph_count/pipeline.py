"""Grid scans over (centre, delta, h) with checkpointing."""
from __future__ import annotations

import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from fractions import Fraction

from .archimedean import ball_volume_arch
from .config import RunConfig
from .enumeration import Region, enumerate_up_to_height
from .errors import ResourceGuardError
from .padic_volume import HeightBallSpec, global_height_ball_volume
from .predictions import SCAN_COLUMNS, ScanRow, covolume_fit


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, config_hash: str | None = None, seed: int | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra = ["config_hash", "seed"] if config_hash is not None else []
    w.writerow(list(SCAN_COLUMNS) + extra)
    for r in rows:
        rec = r.as_record()
        tail = [config_hash, seed] if extra else []
        w.writerow([_fmt(rec[c]) for c in SCAN_COLUMNS] + tail)
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ScanRow]:
    return [ScanRow.from_record(rec) for rec in csv.DictReader(io.StringIO(text))]


def _load_checkpoint(path, config_hash):
    done = {}
    if path and os.path.exists(path):
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec["config_hash"] == config_hash:
                    done[(rec["x_id"], rec["delta"])] = {int(h): n for h, n in rec["counts"].items()}
    return done


def run_scan(cfg: RunConfig, workers: int = 1, checkpoint: str | None = None,
             progress=sys.stderr) -> list[ScanRow]:
    """Count every grid cell and attach volumes and predictions.

    Each (centre, delta) cell is enumerated once up to the largest height and
    binned by height. Rows come out in grid order (centre, delta, h). Without a
    configured covolume, V is fitted from the rows.
    """
    t_start = time.perf_counter()
    chash = cfg.config_hash()
    S = cfg.prime_set
    metric = cfg.metric_spec
    heights = sorted(set(int(h) for h in cfg.heights))
    h_top = heights[-1]
    centers = cfg.center_matrices()
    done = _load_checkpoint(checkpoint, chash)
    pool = ProcessPoolExecutor(workers) if workers > 1 else nullcontext(None)
    with pool as ex:
        v_arch = {
            d: ball_volume_arch(d, cfg.n, cfg.mc_samples, cfg.seed, r_max=cfg.r_max, executor=ex)
            for d in cfg.deltas
        }
        v_S = {h: global_height_ball_volume(HeightBallSpec(S, h)) for h in heights}
        counts = {}
        cells = [(x_id, d) for x_id in centers for d in cfg.deltas]
        for i, (x_id, d) in enumerate(cells):
            if (x_id, d) in done:
                counts[(x_id, d)] = done[(x_id, d)]
                continue
            if cfg.time_budget is not None and time.perf_counter() - t_start > cfg.time_budget:
                raise ResourceGuardError(f"time budget {cfg.time_budget}s exhausted after {i} cells")
            region = Region.metric_ball(centers[x_id], d, metric, r_max=cfg.r_max)
            rep = enumerate_up_to_height(S, h_top, region, executor=ex, max_candidates=cfg.entry_bound_cap)
            hs = rep.heights()
            cell = {h: int((hs <= h).sum()) for h in heights}
            counts[(x_id, d)] = cell
            if checkpoint:
                with open(checkpoint, "a") as fh:
                    rec = {"config_hash": chash, "x_id": x_id, "delta": d, "counts": cell}
                    fh.write(json.dumps(rec) + "\n")
            if progress is not None:
                print(f"[scan] cell {i + 1}/{len(cells)} x={x_id} delta={d}: "
                      f"N(h={h_top})={cell[h_top]} ({rep.wall_time:.1f}s)", file=progress)
    rows = []
    for x_id, d in ((x, d) for x in centers for d in cfg.deltas):
        for h in heights:
            est, se = v_arch[d]
            rows.append(ScanRow(x_id, d, h, counts[(x_id, d)][h], est, se, Fraction(v_S[h])))
    V = cfg.covolume if cfg.covolume is not None else covolume_fit(rows)[0]
    for r in rows:
        r.V_used = V
    return rows
