"""Benchmark and sweep harness plus report emission."""
import csv
import io
import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from ._validation import check_seed, child_seeds
from .crypto import DEFAULT_PSI_MIN, MaskingEncryptor
from .matrix import gen_low_rank, gen_mask, rse, synthetic_rank
from .solver import ALGORITHMS, SolverConfig, pplnm_qr
from .trajectory import gen_smooth_tracks

DEFAULT_SIZES = [(128, 128), (256, 256), (512, 512), (1024, 1024)]
LARGE_SIZES = [(2048, 2048), (4096, 4096), (8192, 8192)]
DEFAULT_ITERS = [100, 300]
BENCH_ALPHA = 0.5
# public reference point (central Beijing) and unit for track normalization, degrees
GEOLIFE_ORIGIN = (39.9, 116.4)
TRACK_SCALE = 0.01


@dataclass(frozen=True)
class BenchRow:
    rows: int
    cols: int
    iterations: int
    algo: str
    wall_time: float
    rse_value: float
    rank: int
    repeat: int = 0


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    median_rse: float
    q25: float
    q75: float
    seeds: int


def bench_synthetic(sizes, iters, algos=("pplnm-qr", "alt-min"), seed=0, alpha=BENCH_ALPHA, repeat=1):
    """Time each solver for exactly ``K`` iterations on synthetic instances.

    The instance for a size depends only on ``seed`` and the size, so every
    algorithm and iteration count sees the same data. Timings cover solver
    iterations only.
    """
    check_seed(seed)
    rows = []
    for S, T in sizes:
        r = synthetic_rank(S, T)
        data_seed, mask_seed = child_seeds(seed + S * 1_000_003 + T, 2)
        truth = gen_low_rank(S, T, r, data_seed)
        mask = gen_mask(S, T, alpha, mask_seed)
        observed = np.where(mask, truth, 0.0)
        for K in iters:
            cfg = SolverConfig(rank=r, eps=0.0, max_iters=K)
            for algo in algos:
                solve = ALGORITHMS[algo]
                for rep in range(repeat):
                    result = solve(observed, mask, cfg)
                    rows.append(
                        BenchRow(S, T, K, algo, result.wall_time, rse(result.recovered, truth), r, rep)
                    )
    return rows


def _quartiles(values):
    q25, med, q75 = np.percentile(values, [25, 50, 75])
    return float(med), float(q25), float(q75)


def _sweep(alphas, seeds_per_alpha, seed, run_one):
    out = []
    for alpha in alphas:
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        errs = [run_one(alpha, s) for s in child_seeds(seed, seeds_per_alpha)]
        med, q25, q75 = _quartiles(errs)
        out.append(SweepRow(float(alpha), med, q25, q75, seeds_per_alpha))
    return out


def loss_sweep(S, T, r, alphas, seeds_per_alpha, cfg=None, seed=0, noise=1e-2):
    """Median and quartile RSE of plain completion over a grid of loss rates.

    ``noise`` adds Gaussian perturbation with that standard deviation to
    the rank-``r`` ground truth. At ``noise=0`` every feasible loss rate
    recovers to roundoff and the medians are ordered by chance.
    """
    cfg = cfg or SolverConfig(rank=r)

    def run_one(alpha, s):
        data_seed, mask_seed, noise_seed = child_seeds(s, 3)
        truth = gen_low_rank(S, T, r, data_seed)
        if noise > 0:
            truth = truth + noise * np.random.default_rng(noise_seed).standard_normal(truth.shape)
        mask = gen_mask(S, T, alpha, mask_seed)
        result = pplnm_qr(np.where(mask, truth, 0.0), mask, cfg)
        return rse(result.recovered, truth)

    return _sweep(alphas, seeds_per_alpha, seed, run_one)


def complete_tracks(
    pair,
    alpha,
    public_rank,
    rank,
    cfg,
    seed,
    psi_min=DEFAULT_PSI_MIN,
    origin=GEOLIFE_ORIGIN,
    scale=TRACK_SCALE,
    algo="pplnm-qr",
):
    """Mask, encrypt, complete and decrypt both coordinates of a complete
    track pair. Returns ``(lat_rec, lon_rec, mask)`` in degrees.

    Before masking, users map each coordinate to ``(deg - origin) / scale``
    with public constants; without it the degree offset dominates the
    spectrum and the completion stalls. Latitude and longitude are completed
    separately with the same keys, mask and rank.
    """
    S, K = pair.shape
    mask_seed, key_seed = child_seeds(seed, 2)
    mask = gen_mask(S, K, alpha, mask_seed) & pair.mask
    enc = MaskingEncryptor(public_rank, psi_min, key_seed).fit(pair.lat_mat)
    solve_cfg = SolverConfig(rank, cfg.mu0, cfg.rho, cfg.eps, cfg.max_iters)
    solve = ALGORITHMS[algo]
    out = []
    for coord, ref in zip((pair.lat_mat, pair.lon_mat), origin):
        masked = enc.transform((coord - ref) / scale, mask)
        completed = solve(masked, mask, solve_cfg).recovered
        out.append(enc.inverse_transform(completed) * scale + ref)
    return out[0], out[1], mask


def trajectory_sweep(
    alphas,
    seeds_per_alpha,
    n=235,
    users=50,
    data_rank=2,
    public_rank=5,
    cfg=None,
    seed=0,
    noise=0.0,
):
    """Loss-rate sweep on synthetic smooth tracks with masking encryption.

    ``noise`` is GPS jitter in degrees added to the smooth tracks.
    """
    rank = data_rank + public_rank
    cfg = cfg or SolverConfig(rank=rank)

    def run_one(alpha, s):
        track_seed, run_seed = child_seeds(s, 2)
        truth = gen_smooth_tracks(n, users, data_rank, track_seed, noise=noise)
        lat, lon, _ = complete_tracks(truth, alpha, public_rank, rank, cfg, run_seed)
        return rse(np.vstack([lat, lon]), truth.stacked())

    return _sweep(alphas, seeds_per_alpha, seed, run_one)


# -- report emission ---------------------------------------------------------

REPORT_SCHEMA = {
    "type": "object",
    "required": ["artifact_version", "kind", "seed", "config", "rows"],
    "properties": {
        "artifact_version": {"type": "string"},
        "kind": {"enum": ["bench", "sweep"]},
        "seed": {"type": ["integer", "null"]},
        "config": {"type": "object"},
        "rows": {"type": "array", "items": {"type": "object"}},
    },
}

_ROW_TYPES = {"bench": BenchRow, "sweep": SweepRow}
# sweep CSV carries the plot-ready columns only; the seed count lives in the config echo
_CSV_COLUMNS = {
    "bench": [f.name for f in fields(BenchRow)],
    "sweep": ["alpha", "median_rse", "q25", "q75"],
}


def _kind_of(rows, kind):
    if kind is not None:
        return kind
    if rows and isinstance(rows[0], SweepRow):
        return "sweep"
    return "bench"


def _fmt(value):
    return repr(float(value)) if isinstance(value, float) else str(value)


def emit_report(rows, fmt, path, config=None, seed=None, kind=None):
    """Write ``rows`` as CSV or JSON with a config/version/seed header."""
    kind = _kind_of(rows, kind)
    config = dict(config or {})
    if kind == "sweep" and rows:
        config.setdefault("seeds_per_alpha", rows[0].seeds)
    if fmt == "json":
        doc = {
            "artifact_version": __version__,
            "kind": kind,
            "seed": seed,
            "config": config,
            "rows": [asdict(r) for r in rows],
        }
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# artifact_version: {__version__}\n")
        buf.write(f"# kind: {kind}\n")
        buf.write(f"# seed: {seed}\n")
        buf.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        cols = _CSV_COLUMNS[kind]
        writer.writerow(cols)
        for r in rows:
            d = asdict(r)
            writer.writerow([_fmt(d[c]) for c in cols])
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


def read_report(path):
    """Parse a report written by :func:`emit_report`.

    Returns ``(rows, header)`` where ``header`` holds version, kind, seed and
    config.
    """
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        row_type = _ROW_TYPES[doc["kind"]]
        rows = [row_type(**r) for r in doc["rows"]]
        header = {k: doc[k] for k in ("artifact_version", "kind", "seed", "config")}
        return rows, header

    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            header[key] = value
        elif line:
            body.append(line)
    header["config"] = json.loads(header.get("config", "{}"))
    header["seed"] = None if header.get("seed") in (None, "None") else int(header["seed"])
    kind = header.get("kind", "bench")
    row_type = _ROW_TYPES[kind]
    reader = csv.DictReader(body)
    types = {f.name: f.type for f in fields(row_type)}
    rows = []
    for rec in reader:
        values = {k: (int(v) if types[k] is int else float(v) if types[k] is float else v) for k, v in rec.items()}
        if kind == "sweep":
            values["seeds"] = int(header["config"].get("seeds_per_alpha", 0))
        rows.append(row_type(**values))
    return rows, header
