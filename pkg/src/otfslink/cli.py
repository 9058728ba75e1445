"""Command-line interface.

Subcommands
-----------
run
    Execute a BER sweep and write records as CSV.
selftest
    Run a quick invariant battery and report pass/fail.

Exit codes: 0 on success, 1 on selftest failure, 2 on configuration
errors, 3 on I/O errors.
"""

import argparse
import sys

import numpy as np

from .errors import ConfigurationError
from .simulate import (
    MODES,
    SimConfig,
    records_from_points,
    sweep,
    write_ber_csv,
)

_INT_KEYS = {
    "n_subcarriers",
    "frame_len",
    "cp_len",
    "num_paths",
    "frames_per_point",
    "max_iters",
    "master_seed",
    "workers",
}
_FLOAT_KEYS = {
    "bandwidth_hz",
    "carrier_hz",
    "rms_delay_spread_s",
    "doppler_margin",
}
_STR_KEYS = {"mode"}
_LIST_KEYS = {"velocities_kmh", "ebn0_db_points"}


def parse_ebn0_grid(text):
    """Parse an Eb/N0 specification.

    Accepts "start:step:stop" (inclusive grid), a comma-separated list,
    or a single value.  "inf" is allowed for noiseless runs.
    """
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(
                f"grid spec must be start:step:stop, got '{text}'"
            )
        try:
            start, step, stop = (float(p) for p in parts)
        except ValueError as exc:
            raise ConfigurationError(f"bad grid spec '{text}'") from exc
        if step <= 0 or stop < start:
            raise ConfigurationError("grid requires step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + k * step for k in range(count))
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"bad Eb/N0 list '{text}'") from exc


def _parse_float_list(text, what):
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"bad {what} list '{text}'") from exc


def load_config_file(path):
    """Read ``key = value`` lines into a SimConfig keyword dict.

    Blank lines and '#' comments are ignored.  Keys match SimConfig
    field names; list-valued keys take comma-separated entries and
    ebn0_db_points also accepts start:step:stop.
    """
    kwargs = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(
                    f"{path}:{lineno}: expected 'key = value', got '{line}'"
                )
            key, value = (part.strip() for part in line.split("=", 1))
            if key in _INT_KEYS:
                try:
                    kwargs[key] = int(value)
                except ValueError as exc:
                    raise ConfigurationError(
                        f"{path}:{lineno}: {key} must be an integer"
                    ) from exc
            elif key in _FLOAT_KEYS:
                try:
                    kwargs[key] = float(value)
                except ValueError as exc:
                    raise ConfigurationError(
                        f"{path}:{lineno}: {key} must be a number"
                    ) from exc
            elif key in _STR_KEYS:
                kwargs[key] = value
            elif key == "ebn0_db_points":
                kwargs[key] = parse_ebn0_grid(value)
            elif key in _LIST_KEYS:
                kwargs[key] = _parse_float_list(value, key)
            else:
                raise ConfigurationError(f"{path}:{lineno}: unknown key '{key}'")
    return kwargs


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="otfslink",
        description="Link-level BER simulator for spread and per-bin signaling "
        "over doubly selective channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a BER sweep and emit CSV records")
    run_p.add_argument("--config", help="key = value config file")
    run_p.add_argument("--mode", choices=MODES, help="transmission mode")
    run_p.add_argument(
        "--ebn0",
        help="Eb/N0 points in dB: start:step:stop, comma list, or single value",
    )
    run_p.add_argument("--velocity", help="velocities in km/h (comma list)")
    run_p.add_argument("--frames", type=int, help="frames per sweep point")
    run_p.add_argument("--iters", type=int, help="detector iterations")
    run_p.add_argument("--seed", type=int, help="master seed")
    run_p.add_argument("--workers", type=int, help="parallel worker processes")
    run_p.add_argument("--out", help="output CSV path (default: stdout)")
    run_p.add_argument(
        "--quiet", action="store_true", help="suppress per-point progress lines"
    )

    sub.add_parser("selftest", help="run the quick invariant battery")
    return parser


def _cmd_run(args):
    kwargs = load_config_file(args.config) if args.config else {}
    if args.mode is not None:
        kwargs["mode"] = args.mode
    if args.ebn0 is not None:
        kwargs["ebn0_db_points"] = parse_ebn0_grid(args.ebn0)
    if args.velocity is not None:
        kwargs["velocities_kmh"] = _parse_float_list(args.velocity, "velocity")
    if args.frames is not None:
        kwargs["frames_per_point"] = args.frames
    if args.iters is not None:
        kwargs["max_iters"] = args.iters
    if args.seed is not None:
        kwargs["master_seed"] = args.seed
    if args.workers is not None:
        kwargs["workers"] = args.workers

    cfg = SimConfig(**kwargs)
    progress = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    if args.out is None or args.out == "-":
        points = sweep(cfg, progress=progress)
        write_ber_csv(records_from_points(points), sys.stdout)
    else:
        # Open the output file before the sweep so a bad path fails
        # immediately instead of after the compute finishes.
        with open(args.out, "w", newline="") as fh:
            points = sweep(cfg, progress=progress)
            write_ber_csv(records_from_points(points), fh)
    return 0


def _cmd_selftest(args):
    from . import selftest

    return selftest.run_battery(print)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_selftest(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
