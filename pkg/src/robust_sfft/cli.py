"""Command line front end for the experiment harness."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .harness import (
    ALGORITHMS,
    NOISE_DEFAULTS,
    ConfigError,
    ExperimentConfig,
    jsonable,
    load_schema,
    run_experiment,
)

NOISE_FLAGS = {
    "rho": ("--rho", float),
    "epsilon": ("--eps", float),
    "model": ("--model", str),
    "inlier_strategy": ("--inlier-strategy", str),
    "outlier_strategy": ("--outlier-strategy", str),
}

_SCHEMA_TYPES = {"integer": int, "number": float, "string": str}

HELP = {
    "boolean-recover": "sparse FFT on {0,1}^n under random outliers",
    "torus-recover": "sparse FFT on the torus under random outliers",
    "lowdeg-recover": "degree-d recovery by l1 regression under adversarial outliers",
    "granular-recover": "enumeration decoder for granular torus spectra",
    "concentration-check": "Monte Carlo concentration and isolation checks",
    "anticoncentration": "probe the counterexample signal at the corrected threshold",
}

_DEFS = {
    "boolean-recover": "boolean",
    "torus-recover": "torus",
    "lowdeg-recover": "lowdeg",
    "granular-recover": "granular",
    "concentration-check": "concentration",
    "anticoncentration": "anticoncentration",
}


def _param_flags(algorithm: str) -> dict[str, type]:
    schema = load_schema()["$defs"]
    props = schema[_DEFS[algorithm]]["properties"]
    out = {}
    for key, spec in props.items():
        if "$ref" in spec:
            spec = schema[spec["$ref"].rsplit("/", 1)[-1]]
        kind = spec.get("type", "string")
        if isinstance(kind, list):
            kind = next(t for t in kind if t != "null")
        out[key] = _SCHEMA_TYPES.get(kind, str)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-sfft",
        description="Outlier-robust sparse Fourier recovery experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="algorithm", required=True)
    for algorithm in ALGORITHMS:
        p = sub.add_parser(algorithm, help=HELP[algorithm])
        p.add_argument("--config", help="JSON experiment config; its values override the defaults")
        p.add_argument("--name", help="stem of the output files")
        p.add_argument("--out", dest="output_dir", default=None, help="output directory (default .)")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--min-success-rate", type=float, dest="success_rate",
                       help="exit with status 1 when the success rate falls below this")
        if algorithm not in ("concentration-check", "anticoncentration"):
            for key, (flag, kind) in NOISE_FLAGS.items():
                p.add_argument(flag, dest=f"noise.{key}", type=kind, default=None,
                               metavar=key.upper(), help=f"default {NOISE_DEFAULTS[key]}")
        for key, kind in _param_flags(algorithm).items():
            p.add_argument(f"--{key.replace('_', '-')}", dest=f"params.{key}", type=kind,
                           default=None, metavar=key.upper())
    return parser


def config_from_args(args: argparse.Namespace) -> dict:
    """Defaults < --config file < explicit flags."""
    raw: dict = {"algorithm": args.algorithm}
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if loaded.get("algorithm", args.algorithm) != args.algorithm:
            raise ConfigError(
                f"config is for {loaded['algorithm']!r}, not {args.algorithm!r}"
            )
        raw.update(loaded)
    for key in ("name", "trials", "seed", "workers", "output_dir"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    raw.setdefault("output_dir", ".")
    if args.success_rate is not None:
        raw.setdefault("thresholds", {})["success_rate"] = args.success_rate
    for dest, value in vars(args).items():
        if value is None or "." not in dest:
            continue
        section, key = dest.split(".", 1)
        raw.setdefault(section, {})[key] = value
    return raw


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.from_dict(config_from_args(args))
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run_experiment(cfg)
    print(json.dumps(jsonable(result.summary), indent=2, sort_keys=True))
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
