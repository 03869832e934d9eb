"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 resource guard, 4 invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import asdict
from fractions import Fraction

import numpy as np
from scipy.linalg import expm

from .archimedean import R_MAX, MetricSpec, ball_volume_arch, from_coords
from .config import RunConfig, parse_center
from .enumeration import min_height, Region, enumerate_up_to_height
from .errors import DomainError, InvariantViolation, NotFound, ResourceGuardError
from .exact import PrimeSet
from .padic_volume import (
    HeightBallSpec,
    VolumeTable,
    global_height_ball_volume,
    global_volume_json,
    growth_fit,
)
from .pipeline import rows_from_csv, rows_to_csv, run_scan
from .predictions import (
    ConstantsInput,
    ScanRow,
    covolume_fit,
    error_shape_fit,
    kappa_S,
    theorem_constants,
)

EXIT_USAGE, EXIT_RESOURCE, EXIT_INVARIANT = 2, 3, 4


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_config(args) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data = json.load(fh)
    overrides = {
        "primes": getattr(args, "S", None),
        "seed": getattr(args, "seed", None),
        "mc_samples": getattr(args, "samples", None),
        "covolume": getattr(args, "V", None),
        "metric": getattr(args, "metric", None),
        "r_max": getattr(args, "r_max", None),
    }
    for key, val in overrides.items():
        if val is not None:
            data[key] = val
    if isinstance(data.get("primes"), str) and data["primes"].lower() not in ("all", "p"):
        data["primes"] = [int(p) for p in data["primes"].split(",")]
    return RunConfig.from_dict(data)


def cmd_volume(args):
    if args.kind == "arch":
        pool = ProcessPoolExecutor(args.workers) if args.workers > 1 else nullcontext(None)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", "estimate", "std_error", "samples", "seed"])
        with pool as ex:
            for d in args.delta:
                est, se = ball_volume_arch(d, args.n, args.samples, args.seed, r_max=args.r_max, executor=ex)
                w.writerow([repr(d), repr(est), repr(se), args.samples, args.seed])
        _emit(buf.getvalue(), args.out)
    elif args.kind == "padic":
        prefer = "oracle" if args.oracle else "closed_form"
        table = VolumeTable.build([args.p], args.k, prefer=prefer)
        _emit(table.to_csv(), args.out)
    else:
        S = PrimeSet.parse(args.S)
        spec = HeightBallSpec(S, args.h)
        _emit(_json(global_volume_json(spec, global_height_ball_volume(spec))), args.out)
    return 0


def cmd_count(args):
    cfg = _load_config(args)
    x = parse_center(args.x, cfg.n)
    if not 0 < args.delta <= cfg.r_max:
        raise DomainError(f"delta {args.delta} outside (0, {cfg.r_max}]")
    S = cfg.prime_set
    region = Region.metric_ball(x, args.delta, cfg.metric_spec, r_max=cfg.r_max)
    rep = enumerate_up_to_height(S, args.h, region, max_candidates=cfg.entry_bound_cap)
    est, se = ball_volume_arch(args.delta, cfg.n, cfg.mc_samples, cfg.seed, r_max=cfg.r_max)
    v_S = global_height_ball_volume(HeightBallSpec(S, args.h))
    row = ScanRow(args.x_id or args.x, args.delta, args.h, len(rep.points), est, se, v_S, cfg.covolume)
    _emit(rows_to_csv([row], cfg.config_hash(), cfg.seed), args.out)
    return 0


def cmd_scan(args):
    cfg = _load_config(args)
    rows = run_scan(cfg, workers=args.workers, checkpoint=args.checkpoint,
                    progress=None if args.quiet else sys.stderr)
    _emit(rows_to_csv(rows, cfg.config_hash(), cfg.seed), args.out)
    return 0


def cmd_fit(args):
    with open(args.scan) as fh:
        rows = rows_from_csv(fh.read())
    V_hat, resid = covolume_fit(rows)
    for r in rows:
        r.V_used = V_hat
    d = args.n * args.n - 1
    out = {"V_hat": V_hat, "residuals": resid, "d": d}
    try:
        shape = error_shape_fit(rows, d)
        out["error_shape"] = asdict(shape)
    except DomainError as exc:
        out["error_shape"] = {"degenerate": str(exc)}
    hs = sorted({r.h for r in rows})
    if len(hs) >= 2:
        a_hat, r2 = growth_fit(PrimeSet.parse(args.S), hs)
        out["growth"] = {"a_hat": a_hat, "r_squared": r2, "heights": hs}
        if args.q is not None:
            out["kappa_S"] = {"q_S": args.q, "d": d, "a": a_hat, "kappa": kappa_S(args.q, d, a_hat)}
    _emit(_json(out), args.out)
    return 0


def cmd_constants(args):
    inp = ConstantsInput(args.M, args.D, args.mfW, args.V, args.eps0, args.r0, args.d, args.M_prime)
    rep = theorem_constants(inp, args.E)
    _emit(_json(rep.to_json(inp)), args.out)
    return 0


def sample_centers(count: int, seed: int, spread: float, n: int = 2):
    """Centres exp(X) with X uniform in the Frobenius ball of radius ``spread``."""
    rng = np.random.default_rng(seed)
    d = n * n - 1
    out = []
    for _ in range(count):
        v = rng.standard_normal(d)
        v *= spread * rng.random() ** (1 / d) / np.linalg.norm(v)
        out.append(expm(from_coords(v, n)))
    return out


def cmd_omega(args):
    S = PrimeSet.parse(args.S)
    centers = sample_centers(args.n_centers, args.seed, args.spread)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["center_id", "delta", "omega", "searched_up_to", "log_omega_over_log_inv_delta", "S", "seed"])
    for i, x in enumerate(centers):
        for d in args.delta:
            res = min_height(x, d, S, args.h_cap)
            w.writerow([i, repr(d), res.height, res.searched_up_to,
                        repr(math.log(res.height) / math.log(1 / d)), str(S), args.seed])
    _emit(buf.getvalue(), args.out)
    return 0


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dioph-count", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("volume", help="Archimedean, p-adic and S-adic ball volumes")
    vsub = v.add_subparsers(dest="kind", required=True)
    va = vsub.add_parser("arch")
    va.add_argument("--delta", type=_floats, required=True, help="comma-separated radii")
    va.add_argument("--n", type=int, default=2)
    va.add_argument("--samples", type=int, default=1_000_000)
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--r-max", dest="r_max", type=float, default=R_MAX)
    va.add_argument("--workers", type=int, default=1)
    vp = vsub.add_parser("padic")
    vp.add_argument("--p", type=int, required=True)
    vp.add_argument("--k", type=int, required=True)
    vp.add_argument("--oracle", action="store_true", help="use the tree walk where affordable")
    vg = vsub.add_parser("global")
    vg.add_argument("--S", required=True)
    vg.add_argument("--h", type=int, required=True)
    for p in (va, vp, vg):
        p.add_argument("--out")
    v.set_defaults(func=cmd_volume)

    c = sub.add_parser("count", help="count points in one ball")
    c.add_argument("--x", default="identity", help="centre name or JSON matrix")
    c.add_argument("--x-id", dest="x_id")
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--h", type=int, required=True)
    c.add_argument("--S")
    c.add_argument("--V", type=float)
    c.add_argument("--samples", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--metric")
    c.add_argument("--r-max", dest="r_max", type=float)
    c.add_argument("--config")
    c.add_argument("--out")
    c.set_defaults(func=cmd_count)

    s = sub.add_parser("scan", help="run a (centre, delta, h) grid from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--S")
    s.add_argument("--V", type=float)
    s.add_argument("--samples", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--checkpoint")
    s.add_argument("--quiet", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_scan)

    f = sub.add_parser("fit", help="covolume, growth and error-shape fits over a scan CSV")
    f.add_argument("--scan", required=True)
    f.add_argument("--S", default="2")
    f.add_argument("--n", type=int, default=2)
    f.add_argument("--q", type=float, help="integrability exponent, echoed into kappa_S")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    k = sub.add_parser("constants", help="explicit error-term constants")
    for name in ("M", "D", "mfW", "V", "eps0", "r0", "d"):
        k.add_argument(f"--{name}", type=float, required=True)
    k.add_argument("--M-prime", dest="M_prime", type=float)
    k.add_argument("--E", type=float, default=1.0)
    k.add_argument("--out")
    k.set_defaults(func=cmd_constants)

    o = sub.add_parser("omega", help="least height within delta of sampled centres")
    o.add_argument("--S", default="2")
    o.add_argument("--delta", type=_floats, default=[0.3, 0.2])
    o.add_argument("--n-centers", dest="n_centers", type=int, default=20)
    o.add_argument("--spread", type=float, default=1.0)
    o.add_argument("--h-cap", dest="h_cap", type=int, default=2**12)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out")
    o.set_defaults(func=cmd_omega)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceGuardError, NotFound) as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (InvariantViolation, AssertionError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
