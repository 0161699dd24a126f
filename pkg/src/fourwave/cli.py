"""Command line: ``fourwave run`` and ``fourwave oracle``."""

import os

# pin BLAS pools before numpy loads so results do not depend on the thread count
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
import time  # noqa: E402

from .config import METHODS, load_config, with_overrides  # noqa: E402
from .errors import FourWaveError, ValidationError  # noqa: E402

log = logging.getLogger("fourwave")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fourwave", description="Third-order response functions and 2D spectra.")
    p.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="compute response grids and spectra for a job config")
    run.add_argument("--config", required=True)
    run.add_argument("--method", choices=METHODS)
    run.add_argument("--out", help="output directory (overrides output.directory)")
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int, help="worker threads (default: FOURWAVE_THREADS or 1)")
    run.add_argument("--dry-run", action="store_true", help="print the planned manifest and exit")

    orc = sub.add_parser("oracle", help="evaluate one response point by explicit Fock-space tracing")
    orc.add_argument("--config", required=True)
    orc.add_argument("--channel", type=int, required=True, choices=(1, 2, 3, 4))
    orc.add_argument("--point", required=True, help="tau,T_p,tau_prime in fs")
    return p


def _threads(arg) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("FOURWAVE_THREADS", "1")
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"FOURWAVE_THREADS must be an integer, got {env!r}", "FOURWAVE_THREADS") from None
    if n < 1:
        raise ValidationError("thread count must be >= 1", "threads")
    return n


def _point(text: str):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"could not parse {text!r}", "point") from None
    if len(vals) != 3 or any(v < 0 for v in vals):
        raise ValidationError("expected three non-negative times tau,T_p,tau_prime", "point")
    return vals


def _cmd_run(args) -> int:
    from .runner import run_job

    t0 = time.perf_counter()
    config = with_overrides(load_config(args.config), args.method, args.out, args.seed)
    log.info("config loaded in %.3f s", time.perf_counter() - t0)
    manifest = run_job(config, _threads(args.threads), args.dry_run)
    if args.dry_run:
        print(json.dumps(manifest, indent=2, sort_keys=True))
    else:
        log.info("wrote %d artifacts to %s", len(manifest["artifacts"]), config.output.directory)
    return 0


def _cmd_oracle(args) -> int:
    from .runner import run_oracle

    config = load_config(args.config)
    point = _point(args.point)
    t0 = time.perf_counter()
    value = run_oracle(config, args.channel, point)
    log.info("oracle evaluated in %.2f s", time.perf_counter() - t0)
    print(json.dumps({"channel": args.channel, "point": list(point), "re": value.real, "im": value.imag}))
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _cmd_run(args) if args.command == "run" else _cmd_oracle(args)
    except FourWaveError as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("path", "step"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        print(json.dumps(err, sort_keys=True, default=str), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": "IOError", "message": str(exc)}), file=sys.stderr)
        return 2
    except MemoryError:
        print(json.dumps({"error": "ResourceError", "message": "out of memory"}), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
