"""Command-line interface: ``ppmc <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 numeric failure, 1 I/O failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    DEFAULT_ITERS,
    DEFAULT_SIZES,
    GEOLIFE_ORIGIN,
    LARGE_SIZES,
    TRACK_SCALE,
    bench_synthetic,
    complete_tracks,
    emit_report,
    loss_sweep,
    trajectory_sweep,
)
from .crypto import DEFAULT_PSI_MIN, PrivateKeys, PublicMatrix, gen_private_keys, gen_public_matrix
from .exceptions import DimensionError, DomainError, ParseError, SolverDivergenceError
from .matrix import gen_low_rank, gen_mask, read_mask_csv, read_matrix_csv, write_mask_csv, write_matrix_csv
from .protocol import SessionConfig, UploadRecord, run_session, write_jsonl
from .solver import ALGORITHMS, SolverConfig
from .trajectory import (
    disassemble,
    gen_smooth_tracks,
    load_geolife,
    select_complete_tracks,
    track_rse,
    write_track_csv,
)
from ._validation import child_seeds

log = logging.getLogger("ppmc")

EXIT_IO = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_key_dir(path):
    path = Path(path)
    public = PublicMatrix(read_matrix_csv(path / "public_matrix.csv"))
    keys = [PrivateKeys.load(p) for p in sorted(path.glob("*/keys.json"))]
    if not keys:
        raise FileNotFoundError(f"no <user_id>/keys.json files under {path}")
    return public, keys


def cmd_keygen(args):
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    pub_seed, *key_seeds = child_seeds(args.seed, args.users + 1)
    public = gen_public_matrix(args.rows, args.public_rank, pub_seed)
    write_matrix_csv(out / "public_matrix.csv", public.p)
    for k, s in enumerate(key_seeds):
        uid = f"user_{k:03d}"
        (out / uid).mkdir(exist_ok=True)
        gen_private_keys(args.public_rank, args.psi_min, s, user_id=uid).save(out / uid / "keys.json")
    log.info("wrote public matrix and %d key files to %s", args.users, out)


def cmd_encrypt(args):
    from .crypto import encrypt_column

    data = read_matrix_csv(args.data)
    public, keys = _load_key_dir(args.keys)
    if data.shape[1] != len(keys):
        raise DimensionError(f"data has {data.shape[1]} columns but {len(keys)} users have keys")
    if args.mask:
        mask = read_mask_csv(args.mask)
    else:
        mask = gen_mask(data.shape[0], data.shape[1], args.alpha, args.seed)
    if args.mask_out:
        write_mask_csv(args.mask_out, mask)
    records, cols = [], []
    for k, key in enumerate(keys):
        enc = encrypt_column(data[:, k], mask[:, k], public, key)
        cols.append(enc.data)
        records.append(UploadRecord(key.user_id, [float(x) for x in enc.data], mask[:, k].astype(int).tolist()))
    write_matrix_csv(args.out, np.column_stack(cols))
    if args.uploads:
        write_jsonl(args.uploads, records)


def cmd_decrypt(args):
    from .crypto import decrypt_column

    rec = read_matrix_csv(getattr(args, "in"))
    public, keys = _load_key_dir(args.keys)
    if rec.shape[1] != len(keys):
        raise DimensionError(f"matrix has {rec.shape[1]} columns but {len(keys)} users have keys")
    cols = [decrypt_column(rec[:, k], public, key) for k, key in enumerate(keys)]
    write_matrix_csv(args.out, np.column_stack(cols))


def cmd_complete(args):
    m_enc = read_matrix_csv(getattr(args, "in"))
    mask = read_mask_csv(args.mask)
    if mask.shape != m_enc.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match matrix {m_enc.shape}")
    cfg = SolverConfig(args.rank, args.mu0, args.rho, args.eps, args.iters)
    result = ALGORITHMS[args.algo](np.where(mask, m_enc, 0.0), mask, cfg)
    write_matrix_csv(args.out, result.recovered)
    if args.report:
        _write_json(args.report, result.report())


def cmd_session(args):
    data_seed, session_seed = child_seeds(args.seed, 2)
    truth = gen_low_rank(args.rows, args.users, args.data_rank, data_seed)
    solver = SolverConfig(1, args.mu0, args.rho, args.eps, args.iters)
    cfg = SessionConfig(
        user_count=args.users,
        public_rank=args.public_rank,
        data_rank=args.data_rank,
        alpha=args.alpha,
        solver=solver,
        completion_rank=args.completion_rank,
        seed=session_seed,
        psi_min=args.psi_min,
    )
    report = run_session(truth, cfg)
    doc = report.to_dict()
    doc["config"] = {k: v for k, v in vars(args).items() if k != "func"}
    path = args.report or args.out
    if path:
        _write_json(path, doc)
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))


def cmd_bench(args):
    sizes = [(s, s) for s in args.sizes] if args.sizes else list(DEFAULT_SIZES)
    if args.large:
        sizes += LARGE_SIZES
    rows = bench_synthetic(sizes, args.iters, args.algos.split(","), args.seed, repeat=args.repeat)
    config = {"sizes": [list(s) for s in sizes], "iters": args.iters, "algos": args.algos, "repeat": args.repeat}
    _emit(rows, args, config)


def cmd_sweep(args):
    if args.tracks:
        rows = trajectory_sweep(
            args.alphas,
            args.seeds_per_alpha,
            n=args.rows,
            users=args.cols,
            data_rank=args.rank,
            public_rank=args.public_rank,
            cfg=SolverConfig(args.rank + args.public_rank, max_iters=args.iters),
            seed=args.seed,
            noise=args.noise,
        )
    else:
        rows = loss_sweep(
            args.rows,
            args.cols,
            args.rank,
            args.alphas,
            args.seeds_per_alpha,
            SolverConfig(args.rank, max_iters=args.iters),
            seed=args.seed,
            noise=args.noise,
        )
    config = {k: v for k, v in vars(args).items() if k not in ("func", "out", "format")}
    _emit(rows, args, config, kind="sweep")


def _emit(rows, args, config, kind=None):
    if args.out:
        emit_report(rows, args.format, args.out, config=config, seed=args.seed, kind=kind)
    else:
        for r in rows:
            print(r)


def cmd_trajectory(args):
    out = Path(args.out or "trajectory_out")
    out.mkdir(parents=True, exist_ok=True)
    track_seed, run_seed = child_seeds(args.seed, 2)
    if args.data_dir:
        pair, starts = select_complete_tracks(load_geolife(args.data_dir), args.n, args.dt, args.users)
    else:
        pair = gen_smooth_tracks(args.n, args.users, args.data_rank, track_seed, dt=args.dt)
        starts = {uid: 0.0 for uid in pair.user_order}
    rank = args.rank or args.data_rank + args.public_rank
    cfg = SolverConfig(rank, args.mu0, args.rho, args.eps, args.iters)
    lat, lon, mask = complete_tracks(
        pair,
        args.alpha,
        args.public_rank,
        rank,
        cfg,
        run_seed,
        psi_min=args.psi_min,
        origin=(args.origin_lat, args.origin_lon),
        scale=args.scale,
        algo=args.algo,
    )
    recovered = type(pair)(lat, lon, pair.mask, pair.user_order, pair.t0, pair.dt)
    per_user, aggregate = track_rse(recovered, pair)
    for k, track in enumerate(disassemble(pair)):
        track.t0 = starts[track.user_id]
        write_track_csv(out / f"{track.user_id}.csv", track, lat[:, k], lon[:, k])
    _write_json(
        out / "report.json",
        {
            "users": len(pair.user_order),
            "slots": pair.shape[0],
            "alpha": args.alpha,
            "observed_fraction": float(mask.mean()),
            "aggregate_rse": aggregate,
            "per_user_rse": per_user,
        },
    )
    print(f"aggregate RSE {aggregate:.4e} over {len(pair.user_order)} users -> {out}")


def _solver_flags(p, iters=100):
    p.add_argument("--mu0", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.5)
    p.add_argument("--eps", type=float, default=1e-24)
    p.add_argument("--iters", type=int, default=iters)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ppmc", description="Privacy-preserving low-rank matrix completion")
    parser.add_argument("--version", action="version", version=f"ppmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", parents=[common], help="generate public matrix and per-user keys")
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--public-rank", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--psi-min", type=float, default=DEFAULT_PSI_MIN)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encrypt", parents=[common], help="mask the columns of a plain data matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--keys", required=True, help="directory written by keygen")
    p.add_argument("--mask", help="observation mask CSV (default: draw one at --alpha)")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--mask-out")
    p.add_argument("--uploads", help="also write JSON-lines upload records")
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("complete", parents=[common], help="complete an encrypted matrix")
    p.add_argument("--in", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--rank", type=int, required=True)
    _solver_flags(p)
    p.add_argument("--algo", choices=sorted(ALGORITHMS), default="pplnm-qr")
    p.add_argument("--report")
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("decrypt", parents=[common], help="unmask the columns of a recovered matrix")
    p.add_argument("--in", required=True)
    p.add_argument("--keys", required=True)
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("session", parents=[common], help="simulate the full round trip on synthetic data")
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--data-rank", type=int, required=True)
    p.add_argument("--public-rank", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--completion-rank", type=int)
    p.add_argument("--psi-min", type=float, default=DEFAULT_PSI_MIN)
    _solver_flags(p, iters=300)
    p.add_argument("--report")
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("bench", parents=[common], help="synthetic speed/accuracy table")
    p.add_argument("--sizes", type=_int_list, help="comma-separated square sizes (default 128..1024)")
    p.add_argument("--iters", type=_int_list, default=list(DEFAULT_ITERS))
    p.add_argument("--algos", default="pplnm-qr,alt-min")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--large", action="store_true", help="add the 2048..8192 sizes")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", parents=[common], help="RSE versus loss rate")
    p.add_argument("--rows", type=int, default=235)
    p.add_argument("--cols", type=int, default=50)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--alphas", type=_float_list, default=[0.1, 0.3, 0.5, 0.7, 0.9])
    p.add_argument("--seeds-per-alpha", type=int, default=10)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--tracks", action="store_true", help="encrypted synthetic tracks instead of plain matrices")
    p.add_argument("--public-rank", type=int, default=5)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trajectory", parents=[common], help="recover GPS tracks end to end")
    p.add_argument("--data-dir", help="Geolife root (DATA_DIR/<user>/Trajectory/*.plt); synthetic if omitted")
    p.add_argument("--users", type=int, default=50)
    p.add_argument("--n", type=int, default=235)
    p.add_argument("--dt", type=float, default=5.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--public-rank", type=int, default=5)
    p.add_argument("--data-rank", type=int, default=2)
    p.add_argument("--rank", type=int, help="completion rank (default data rank + public rank)")
    p.add_argument("--psi-min", type=float, default=DEFAULT_PSI_MIN)
    p.add_argument("--origin-lat", type=float, default=GEOLIFE_ORIGIN[0])
    p.add_argument("--origin-lon", type=float, default=GEOLIFE_ORIGIN[1])
    p.add_argument("--scale", type=float, default=TRACK_SCALE)
    p.add_argument("--algo", choices=sorted(ALGORITHMS), default="pplnm-qr")
    _solver_flags(p)
    p.set_defaults(func=cmd_trajectory)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except SolverDivergenceError as exc:
        print(f"ppmc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, DimensionError, ParseError) as exc:
        print(f"ppmc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ppmc: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
