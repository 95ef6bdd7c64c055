"""Command-line front end for convergence campaigns.

Any flag may come from a plain ``key = value`` config file (# comments
allowed); explicit command-line values win over file values.
"""
from __future__ import annotations

import argparse
import sys

from .meshgen import DomainKind, DomainSpec
from .study import StudyConfig, compute_eigenfunction, emit_table, \
    export_eigenfunction, run_study
from .system import CornerStrategy, TipStrategy

_CHOICES = {
    "domain": ("square", "lshape", "crack"),
    "mesh": ("uniform", "cc", "ps", "cc-graded"),
    "formulation": ("sg", "ag", "osgs"),
    "corner": ("both-zero", "free", "bisector"),
    "tip": ("free", "both-zero"),
    "solver": ("auto", "dense", "shift-invert"),
    "format": ("csv", "md"),
    "stab-h": ("auto", "diameter", "spacing"),
}

_DEFAULTS = {
    "domain": "square",
    "mesh": "cc",
    "formulation": "osgs",
    "degree": 1,
    "N": "5,10,15,20,25",
    "mu": 1.0,
    "ell": 0.1,
    "cu": 0.01,
    "cp": 0.6,
    "corner": "both-zero",
    "tip": "free",
    "shift": 0.5,
    "zero-tol": 1e-6,
    "solver": "auto",
    "grading-exponent": 2.0,
    "format": "md",
    "seed": 1234,
    "stab-h": "auto",
}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="maxwell2d",
        description="Nodal finite-element eigenvalue studies for 2D cavities.")
    p.add_argument("--config", help="key = value file supplying any flag")
    p.add_argument("--domain", choices=_CHOICES["domain"])
    p.add_argument("--mesh", choices=_CHOICES["mesh"])
    p.add_argument("--formulation", choices=_CHOICES["formulation"])
    p.add_argument("--degree", type=int, choices=(1, 2))
    p.add_argument("--N", help="comma-separated division counts, e.g. 5,10,15")
    p.add_argument("--mu", type=float)
    p.add_argument("--ell", type=float)
    p.add_argument("--cu", type=float)
    p.add_argument("--cp", type=float)
    p.add_argument("--corner", choices=_CHOICES["corner"])
    p.add_argument("--tip", choices=_CHOICES["tip"])
    p.add_argument("--nev", type=int)
    p.add_argument("--shift", type=float)
    p.add_argument("--zero-tol", dest="zero_tol", type=float)
    p.add_argument("--solver", choices=_CHOICES["solver"])
    p.add_argument("--grading-exponent", dest="grading_exponent", type=float)
    p.add_argument("--stab-h", dest="stab_h", choices=_CHOICES["stab-h"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the table here instead of stdout")
    p.add_argument("--format", choices=_CHOICES["format"])
    p.add_argument("--export-mode", dest="export_mode", type=int,
                   help="also export this eigenfunction index at the largest N")
    return p


def _read_config_file(path: str) -> dict:
    values = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


_FLOAT_KEYS = {"mu", "ell", "cu", "cp", "shift", "zero-tol", "grading-exponent"}
_INT_KEYS = {"degree", "nev", "seed", "export-mode"}


def _coerce(key: str, val: str):
    if key in _FLOAT_KEYS:
        return float(val)
    if key in _INT_KEYS:
        return int(val)
    if key in _CHOICES and val not in _CHOICES[key]:
        raise ValueError(f"invalid value {val!r} for {key!r}")
    return val


def _merge(cli_ns: argparse.Namespace, file_vals: dict) -> dict:
    merged = dict(_DEFAULTS)
    known = set(_DEFAULTS) | {"nev", "out", "export-mode"}
    for key, val in file_vals.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        merged[key] = _coerce(key, val)
    for key in known:
        attr = key.replace("-", "_")
        val = getattr(cli_ns, attr, None)
        if val is not None:
            merged[key] = val
    return merged


def _validate(opts: dict, explicit: set) -> None:
    domain = opts["domain"]
    if opts["corner"] == "bisector" and domain != "lshape":
        raise ValueError("--corner bisector needs --domain lshape")
    if "tip" in explicit and opts["tip"] != "free" and domain != "crack":
        raise ValueError("--tip settings apply to --domain crack only")
    if opts["mesh"] == "cc-graded" and domain != "crack":
        raise ValueError("--mesh cc-graded needs --domain crack")
    if "grading-exponent" in explicit and opts["mesh"] != "cc-graded":
        raise ValueError("--grading-exponent needs --mesh cc-graded")


def _to_study_config(opts: dict) -> StudyConfig:
    N_list = tuple(int(tok) for tok in str(opts["N"]).split(",") if tok.strip())
    return StudyConfig(
        domain=DomainSpec(DomainKind(opts["domain"])),
        mesh=opts["mesh"],
        formulation=opts["formulation"],
        N_list=N_list,
        degree=int(opts["degree"]),
        mu=float(opts["mu"]), ell=float(opts["ell"]),
        c_u=float(opts["cu"]), c_p=float(opts["cp"]),
        corner=CornerStrategy(opts["corner"]),
        tip=TipStrategy(opts["tip"]),
        nev=opts.get("nev"),
        shift=float(opts["shift"]),
        zero_tol=float(opts["zero-tol"]),
        solver=opts["solver"],
        seed=int(opts["seed"]),
        grading_exponent=float(opts["grading-exponent"]),
        stab_length=opts["stab-h"],
    )


def cli_main(argv) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        file_vals = _read_config_file(ns.config) if ns.config else {}
        explicit = {key for key in _DEFAULTS
                    if getattr(ns, key.replace("-", "_"), None) is not None}
        explicit |= set(file_vals)
        opts = _merge(ns, file_vals)
        _validate(opts, explicit)
        config = _to_study_config(opts)
        table = run_study(config)
        text = emit_table(table, opts["format"])
        if opts.get("out"):
            with open(opts["out"], "w") as f:
                f.write(text)
            print(f"table written to {opts['out']}")
        else:
            sys.stdout.write(text)
        mode = opts.get("export-mode")
        if mode is not None:
            fld, mesh = compute_eigenfunction(config, config.N_list[-1], mode)
            path = (f"{opts['out']}.mode{mode}.txt" if opts.get("out")
                    else f"eigenfunction_mode{mode}.txt")
            export_eigenfunction(fld, mesh, path)
            print(f"eigenfunction {mode} written to {path}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surface module errors as exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
