"""``gradlens <experiment> --config PATH [--full] [--seed N] [--out DIR]``."""
import argparse
import json
import sys

from .experiments import EXPERIMENTS, load_config, run


def build_parser():
    p = argparse.ArgumentParser(prog="gradlens", description="Run one of the gradient/robustness experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="YAML or JSON config file")
    p.add_argument("--full", action="store_true", help="use the published grids and architectures")
    p.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
    p.add_argument("--out", help="output directory (overrides the config)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {"experiment": args.experiment, "out": args.out, "full": args.full or None,
                 "seeds": [args.seed] if args.seed is not None else None}
    try:
        cfg = load_config(args.config, **overrides)
        result = run(cfg)
    except Exception as e:  # report any failure as one machine-readable line
        print(json.dumps({"status": "error", "experiment": args.experiment, "error": type(e).__name__,
                          "message": str(e)}), file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "experiment": args.experiment, "out": cfg.out,
                      "files": sorted(result["paths"])}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
