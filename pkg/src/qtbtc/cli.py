"""Command-line front end: encode, decode, sweep, motion, metrics."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import codec, metrics, motion
from . import quadtree as qt
from .container import ContainerError, Mode, parse_container, write_container
from .imageio import GrayImage, PGMError, load_pgm, save_pgm, write_pgm

IMAGE_MODE_NAMES = {"btc": Mode.BTC, "btcq": Mode.BTC_QT, "sn2": Mode.SN2, "sn2q": Mode.SN2_QT}
MOTION_MODE_NAMES = {"raw": Mode.MVF_RAW, "qt": Mode.MVF_QT, "modeqt": Mode.MVF_MODE_QT, "3d": Mode.MVF_3D_QT}
BASELINE_BPB = {
    Mode.BTC: metrics.BTC_BASELINE_BPB,
    Mode.BTC_QT: metrics.BTC_BASELINE_BPB,
    Mode.SN2: metrics.SN2_BASELINE_BPB,
    Mode.SN2_QT: metrics.SN2_BASELINE_BPB,
}


class UsageError(Exception):
    pass


def _int_range(text: str) -> list[int]:
    """'a:b' inclusive, or a single integer, or a comma list."""
    try:
        if ":" in text:
            lo, hi = (int(t) for t in text.split(":", 1))
            return list(range(lo, hi + 1))
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; use LO:HI or a,b,c") from None


def _write_bytes(path, data: bytes) -> None:
    if path in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def _write_text(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)


def format_histogram(name: str, forest: qt.Forest) -> str:
    counts, coverage = qt.level_histogram(forest)
    total = sum(coverage)
    lines = [f"{name}: {forest.levels}-level forest, {len(forest.trees)} roots, {total} leaf blocks"]
    lines.append("  level  terminals  covered  share")
    for lvl, (n, cov) in enumerate(zip(counts, coverage)):
        lines.append(f"  {lvl:5d}  {n:9d}  {cov:7d}  {cov / total:6.1%}")
    return "\n".join(lines) + "\n"


# -- encode / decode ----------------------------------------------------------


def cmd_encode(args) -> int:
    mode = IMAGE_MODE_NAMES[args.mode]
    clustered = mode in (Mode.BTC_QT, Mode.SN2_QT)
    if not clustered and (args.mad is not None or args.mbd is not None):
        raise UsageError(f"--mad/--mbd only apply to clustered modes, not {args.mode}")
    img = load_pgm(args.input)
    c = codec.encode_image(img, mode, args.mad or 0, args.mbd or 0)
    _write_bytes(args.output, write_container(c.header, c.sections))
    report = metrics.compression_report(img.width, img.height, c.payload_bits, BASELINE_BPB[mode])
    out = [f"mode {args.mode}", metrics.format_compression(report).rstrip("\n")]
    if args.report:
        decoded = codec.decode_image(c)
        out.append(metrics.format_quality(metrics.quality(img, decoded)).rstrip("\n"))
    if args.histogram and clustered:
        for name, forest in codec.forests_of(c).items():
            out.append(format_histogram(name, forest).rstrip("\n"))
    # container may go to stdout, so the report goes to stderr in that case
    stream = sys.stderr if args.output in (None, "-") else sys.stdout
    print("\n".join(out), file=stream)
    return 0


def cmd_decode(args) -> int:
    with open(args.input, "rb") as fh:
        c = parse_container(fh.read())
    if c.header.mode in codec.IMAGE_MODES:
        img = codec.decode_image(c)
        if args.output in (None, "-"):
            _write_bytes(None, write_pgm(img))
        else:
            save_pgm(args.output, img)
        return 0
    decoded = motion.from_container(c)
    text = ""
    if "prev" in decoded:
        text += "# earlier field\n" + motion.dump_field(decoded["prev"]) + "# later field\n"
    text += motion.dump_field(decoded["field"], decoded.get("modes"))
    _write_text(args.output, text)
    return 0


# -- sweep --------------------------------------------------------------------


def sweep_point(img: GrayImage, mode: Mode, mad: int, mbd: int) -> metrics.SweepRow:
    c = codec.encode_image(img, mode, mad, mbd)
    decoded = codec.decode_image(c)
    rep = metrics.compression_report(img.width, img.height, c.payload_bits, BASELINE_BPB[mode])
    q = metrics.quality(img, decoded)
    name = next(k for k, v in IMAGE_MODE_NAMES.items() if v == mode)
    return metrics.SweepRow(name, mad, mbd, rep.ratio, rep.increment_pct, rep.bpp, q.mse, q.mae, q.snr)


def _sweep_job(job):
    return sweep_point(*job)


def sweep_grid(axis: str, mads, mbds) -> list[tuple[int, int]]:
    if axis == "mad":
        return [(m, 0) for m in mads]
    if axis == "mbd":
        return [(0, b) for b in mbds]
    return [(m, b) for m in mads for b in mbds]


def run_sweep(img: GrayImage, mode: Mode, points, jobs: int = 1) -> list[metrics.SweepRow]:
    work = [(img, mode, mad, mbd) for mad, mbd in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_job, work))
    return [_sweep_job(w) for w in work]


def cmd_sweep(args) -> int:
    mode = IMAGE_MODE_NAMES[args.codec]
    for m in args.mad_range:
        if not 0 <= m <= 255:
            raise UsageError(f"MAD {m} outside [0, 255]")
    for b in args.mbd_range:
        if not 0 <= b <= 16:
            raise UsageError(f"MBD {b} outside [0, 16]")
    img = load_pgm(args.input)
    rows = run_sweep(img, mode, sweep_grid(args.axis, args.mad_range, args.mbd_range), args.jobs)
    _write_text(args.output, metrics.rows_to_csv(rows))
    return 0


# -- motion -------------------------------------------------------------------


def cmd_motion(args) -> int:
    mode = MOTION_MODE_NAMES[args.mode]
    frames = [load_pgm(p) for p in args.frames]
    need = 3 if mode == Mode.MVF_3D_QT else 2
    if len(frames) < need:
        raise UsageError(f"mode {args.mode} needs at least {need} frames")
    if len({(f.width, f.height) for f in frames}) != 1:
        raise UsageError("frames differ in size")
    if args.threshold is not None and mode != Mode.MVF_MODE_QT:
        raise UsageError("--threshold only applies to --mode modeqt")
    ref, cur = frames[-2], frames[-1]
    field = motion.full_search(ref, cur, args.block, args.range)
    prev = motion.full_search(frames[-3], ref, args.block, args.range) if mode == Mode.MVF_3D_QT else None
    threshold = 8.0 if args.threshold is None else args.threshold
    modes = motion.decide_modes(cur, ref, field, threshold) if mode == Mode.MVF_MODE_QT else None
    c = motion.to_container(mode, field, modes=modes, prev=prev, threshold=threshold)
    if args.output:
        _write_bytes(args.output, write_container(c.header, c.sections))

    raw_bits = motion.encode_field_raw(field).bits
    qt_bits = motion.encode_field_qt(field).bits
    lines = [f"mode {args.mode}", f"blocks        {field.vectors.shape[0] * field.vectors.shape[1]:>8d}"]
    lines.append(f"raw bits      {raw_bits:>8d}")
    lines.append(f"quadtree bits {qt_bits:>8d}")
    lines.append(f"raw/quadtree  {raw_bits / qt_bits:>8.3f}:1")
    if mode == Mode.MVF_MODE_QT:
        n_intra = int(np.count_nonzero(modes))
        flat = qt_bits + modes.size
        lines.append(f"intra blocks  {n_intra:>8d}")
        lines.append(f"joint bits    {c.payload_bits:>8d}  (separate tree + flat mode map: {flat})")
        forest = motion.mode_forest(field, modes)
    elif mode == Mode.MVF_3D_QT:
        two_d = qt_bits + motion.encode_field_qt(prev).bits
        lines.append(f"3d pair bits  {c.payload_bits:>8d}  (two 2-D trees: {two_d})")
        forest = motion.pair_forest(prev, field)
    else:
        forest = motion.field_forest(field)
    print("\n".join(lines))
    print(format_histogram(f"{args.block}x{args.block} blocks", forest), end="")
    return 0


# -- metrics ------------------------------------------------------------------


def cmd_metrics(args) -> int:
    a, b = load_pgm(args.original), load_pgm(args.decoded)
    q = metrics.quality(a, b)
    if args.csv:
        print("mse,mae,snr_db")
        print(f"{q.mse:.6f},{q.mae:.6f},{q.snr:.6f}")
    else:
        print(metrics.format_quality(q), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qtbtc", description="BTC / SNIBTC2 with quadtree clustering, and motion-field quadtrees")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="code a PGM image into a container")
    e.add_argument("input")
    e.add_argument("-o", "--output", help="container path (default stdout)")
    e.add_argument("--mode", choices=IMAGE_MODE_NAMES, default="btcq")
    e.add_argument("--mad", type=int, help="grey-level threshold for clustered modes")
    e.add_argument("--mbd", type=int, help="bit-plane Hamming threshold for clustered modes")
    e.add_argument("--report", action="store_true", help="also decode and print MSE/MAE/SNR")
    e.add_argument("--histogram", action="store_true", help="print per-level terminal counts")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decode a container to PGM (or a vector dump)")
    d.add_argument("input")
    d.add_argument("-o", "--output", help="output path (default stdout)")
    d.set_defaults(func=cmd_decode)

    s = sub.add_parser("sweep", help="CSV of ratio and error over MAD/MBD thresholds")
    s.add_argument("input")
    s.add_argument("-o", "--output", help="CSV path (default stdout)")
    s.add_argument("--codec", choices=("btcq", "sn2q"), default="btcq")
    s.add_argument("--axis", choices=("mad", "mbd", "grid"), default="mad")
    s.add_argument("--mad-range", type=_int_range, default=_int_range("0:10"))
    s.add_argument("--mbd-range", type=_int_range, default=_int_range("0:8"))
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("motion", help="estimate and code a motion field between frames")
    m.add_argument("frames", nargs="+", help="two or more PGM frames, oldest first")
    m.add_argument("--block", type=int, choices=motion.MOTION_BLOCK_SIZES, default=16)
    m.add_argument("--range", type=int, default=motion.DEFAULT_RANGE)
    m.add_argument("--mode", choices=MOTION_MODE_NAMES, default="qt")
    m.add_argument("--threshold", type=float, help="inter/intra per-pel SAD threshold (modeqt, default 8)")
    m.add_argument("-o", "--output", help="container path")
    m.set_defaults(func=cmd_motion)

    q = sub.add_parser("metrics", help="MSE, MAE and SNR between two PGMs")
    q.add_argument("original")
    q.add_argument("decoded")
    q.add_argument("--csv", action="store_true")
    q.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, PGMError, ContainerError, ValueError, EOFError, OSError) as exc:
        print(f"qtbtc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
