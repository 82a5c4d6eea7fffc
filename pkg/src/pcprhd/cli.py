"""``solve`` command line entry point."""
from __future__ import annotations

import argparse
import os
import sys
import warnings

from .driver import ConfigError, RunConfig, load_config, run
from .mesh import MeshError
from .physics import AdmissibilityError
from .problems import problem_library

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ADMISSIBILITY = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse exits with 2, which is reserved for admissibility aborts
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="solve", description="Third-order PCP finite-volume WENO solver for 2D "
                                                         "special relativistic hydrodynamics on triangles.")
    p.add_argument("--config", required=True, help="flat key = value run configuration")
    p.add_argument("--mesh", help="mesh file overriding the problem's generated mesh")
    p.add_argument("--problem", help="problem name: " + ", ".join(sorted(problem_library())))
    p.add_argument("--tmax", type=float, help="end time")
    p.add_argument("--cfl", type=float, help="fraction of the admissibility time-step bound, in (0, 1]")
    p.add_argument("--weights", choices=["invariant", "original"])
    p.add_argument("--recovery", choices=["hybrid", "bisection", "fixedpoint", "newton"])
    p.add_argument("--limiter", choices=["on", "off"])
    p.add_argument("--out", help="output directory")
    return p


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    for name in ("mesh", "problem", "tmax", "cfl", "weights", "recovery", "out"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    if args.limiter is not None:
        cfg.limiter = args.limiter == "on"
    return cfg.validate()


def configure_threads(env=None):
    """Cap numba's worker count from SOLVER_THREADS; returns the count in effect."""
    import numba

    env = os.environ if env is None else env
    raw = env.get("SOLVER_THREADS")
    if not raw:
        return numba.config.NUMBA_NUM_THREADS
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SOLVER_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("SOLVER_THREADS must be >= 1")
    n = min(n, numba.config.NUMBA_NUM_THREADS)
    with warnings.catch_warnings():
        # an outdated TBB install only disables that threading layer
        warnings.simplefilter("ignore", numba.NumbaWarning)
        numba.set_num_threads(n)
    return n


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        configure_threads()
        cfg = apply_overrides(load_config(args.config), args)
        result = run(cfg, echo=lambda msg: print(msg, flush=True))
    except (ConfigError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AdmissibilityError as exc:
        print(f"admissibility abort: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    s = result.summary
    print(f"{s['problem']}: {s['steps']} steps to t = {s['t']:.6g} on {s['cells']} cells in {s['wall_time']:.2f} s "
          f"(recovery {100 * s['recovery_share']:.1f}%, max theta {100 * s['theta_max']:.3f}%)")
    if "errors" in s:
        print(f"rho errors: l1 = {s['errors']['l1']:.4e}  l2 = {s['errors']['l2']:.4e}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
