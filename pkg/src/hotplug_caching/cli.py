"""Command-line front end: run schemes, verify them, compute bounds and gaps.

Output schema (JSON, versioned "schema": 1)
  tradeoff: {"schema", "command", "params", "curves": [{"name", "kind",
             "points": [{"m": [num, den], "r": [num, den], "m_float",
             "r_float", "is_corner"}]}]}
  verify:   VerificationReport.to_dict() plus optional "privacy"/"side_info"
  gap:      {"schema", "command", "regime", "achievable", "threshold":
             [num, den], "max_ratio": [num, den], "argmax_m": [num, den],
             "ok": bool}

CSV columns are fixed: scheme,M_num,M_den,R_num,R_den,M_float,R_float,is_corner.
Floats are display-only; every comparison uses the rational columns.

Exit codes: 0 pass, 1 usage/configuration error, 2 decode failure,
3 privacy failure, 4 accounting or gap-threshold failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import bounds as bounds_mod
from . import verify as verify_mod
from .errors import ConfigurationError, EnumerationGuardExceeded, HotplugError
from .gf import is_prime
from .model import SystemParams
from .schemes import get_scheme, scheme_names

GAP_THRESHOLDS = {
    "nonprivate": Fraction(2),
    "private_many_users": Fraction(200884, 100000),
    "private_many_files": Fraction(54606, 10000),
}


def next_prime(n: int) -> int:
    p = max(2, n)
    while not is_prime(p):
        p += 1
    return p


def _fr(x: Fraction | None):
    return None if x is None else [x.numerator, x.denominator]


def _params_from(args, t=None) -> SystemParams:
    return SystemParams(
        k_active=args.ka,
        k_total=args.k,
        n_files=args.n,
        q=args.q if args.q else 2,
        t=t if t is not None else getattr(args, "t", None),
        b_factor=getattr(args, "b_factor", 1),
    )


def _write(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)


def _curve_rows(name: str, curve, grid) -> list[dict]:
    rows = []
    corner_points = getattr(curve, "vertices", [])
    seen = set()
    for p in corner_points:
        rows.append({"m": p.m, "r": p.r, "is_corner": 1})
        seen.add(p.m)
    for m in grid:
        if m in seen:
            continue
        try:
            r = curve.eval(m)
        except ConfigurationError:
            continue
        rows.append({"m": m, "r": r, "is_corner": 0})
    rows.sort(key=lambda row: row["m"])
    return rows


def _emit_tradeoff(args, curves: list[tuple[str, str, list[dict]]]):
    if args.format == "csv":
        lines = ["scheme,M_num,M_den,R_num,R_den,M_float,R_float,is_corner"]
        for name, _kind, rows in curves:
            for row in rows:
                m, r = row["m"], row["r"]
                lines.append(
                    f"{name},{m.numerator},{m.denominator},{r.numerator},{r.denominator},"
                    f"{float(m):.10g},{float(r):.10g},{row['is_corner']}"
                )
        _write("\n".join(lines) + "\n", args.out)
    else:
        doc = {
            "schema": 1,
            "command": "tradeoff",
            "params": {"k_active": args.ka, "k_total": args.k, "n_files": args.n},
            "curves": [
                {
                    "name": name,
                    "kind": kind,
                    "points": [
                        {
                            "m": _fr(row["m"]),
                            "r": _fr(row["r"]),
                            "m_float": float(row["m"]),
                            "r_float": float(row["r"]),
                            "is_corner": bool(row["is_corner"]),
                        }
                        for row in rows
                    ],
                }
                for name, kind, rows in curves
            ],
        }
        _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)


def cmd_tradeoff(args) -> int:
    schemes = [s for s in (args.schemes or "").split(",") if s]
    bound_list = [b for b in (args.bounds or "").split(",") if b]
    if not schemes and not bound_list:
        print("error: no schemes or bounds requested", file=sys.stderr)
        return 1
    params = _params_from(args)
    curves = []
    extra = []
    built = []
    for name in schemes:
        curve = bounds_mod.achievable_curve(name, params)
        built.append((name, curve))
        extra.extend(v.m for v in getattr(curve, "vertices", []))
    grid = bounds_mod.default_grid(params.n_files, args.grid, extra=extra)
    for name, curve in built:
        kind = "formula" if not hasattr(curve, "vertices") else "corner"
        curves.append((name, kind, _curve_rows(name, curve, grid)))
    for name in bound_list:
        evaluator = bounds_mod.converse_evaluator(name, params)
        rows = [{"m": m, "r": evaluator(m), "is_corner": 0} for m in grid]
        curves.append((name, "bound", rows))
    _emit_tradeoff(args, curves)
    return 0


def cmd_verify(args) -> int:
    scheme = get_scheme(args.scheme)
    q = args.q or next_prime(scheme.min_field(_params_from(args)))
    args.q = q
    params = _params_from(args)
    report = verify_mod.verify_correctness(scheme, params, seed=args.seed)
    doc = report.to_dict()
    print(
        f"{scheme.name}: decode_ok={report.decode_ok} "
        f"M={report.measured_m} (declared {report.declared_m}) "
        f"R={report.measured_r} (declared {report.declared_r}) "
        f"mds_ok={report.mds_ok} accounting_ok={report.accounting_ok}"
    )
    code = report.exit_code()
    if args.privacy:
        privacy = verify_mod.verify_privacy(scheme, params, seed=args.seed)
        doc["privacy"] = privacy.to_dict()
        print(f"privacy_ok={privacy.privacy_ok} over {privacy.cells} enumerated cells")
        code = code or privacy.exit_code()
    if args.side_info:
        side = verify_mod.verify_side_info_size(scheme, params, seed=args.seed)
        doc["side_info"] = side
        print(f"side_info_ok={side['ok']}")
        code = code or (0 if side["ok"] else 4)
    if args.out:
        _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return code


def cmd_gap(args) -> int:
    params = _params_from(args)
    if args.regime == "nonprivate":
        achievable_name = args.achievable or "decen_plus"
        converse_name = "yma_lb"
        threshold = GAP_THRESHOLDS["nonprivate"]
    else:
        if params.k_active >= params.n_files:
            achievable_name = args.achievable or "yma_vu"
            threshold = GAP_THRESHOLDS["private_many_users"]
        else:
            achievable_name = args.achievable or "pk_plus"
            threshold = GAP_THRESHOLDS["private_many_files"]
        converse_name = "combined_private"
    achievable = bounds_mod.achievable_curve(achievable_name, params)
    converse = bounds_mod.converse_evaluator(converse_name, params)
    grid = bounds_mod.default_grid(params.n_files, args.grid)
    report = bounds_mod.gap_report(achievable, converse, grid)
    ok = (
        report["unbounded_at"] is None
        and report["max_ratio"] is not None
        and report["max_ratio"] <= threshold
    )
    doc = {
        "schema": 1,
        "command": "gap",
        "regime": args.regime,
        "achievable": achievable_name,
        "converse": converse_name,
        "threshold": _fr(threshold),
        "max_ratio": _fr(report["max_ratio"]),
        "max_ratio_float": float(report["max_ratio"]) if report["max_ratio"] is not None else None,
        "argmax_m": _fr(report["argmax_m"]),
        "grid_points": report["points"],
        "ok": ok,
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    _write(text, args.out)
    if args.out:
        print(f"max ratio {doc['max_ratio_float']} (threshold {float(threshold)}) ok={ok}")
    return 0 if ok else 4


def _apply_config(argv: list[str]) -> list[str]:
    """Prepend key=value pairs from --config as long-option defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    injected = []
    with open(known.config) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            injected.extend([f"--{key.strip().replace('_', '-')}", value.strip()])
    # Injected options go right after the subcommand so explicit flags win.
    for i, token in enumerate(argv):
        if token in ("tradeoff", "verify", "gap"):
            return argv[: i + 1] + injected + argv[i + 1 :]
    return argv + injected


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hotplug-caching",
        description="Run, verify, and bound coded caching schemes for offline users.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_t=True):
        p.add_argument("--ka", type=int, required=True, help="number of active users K'")
        p.add_argument("--k", type=int, required=True, help="total number of users K")
        p.add_argument("--n", type=int, required=True, help="number of files N")
        p.add_argument("--q", type=int, default=0, help="prime field size (0 = auto)")
        if with_t:
            p.add_argument("--t", type=int, default=None, help="scheme parameter t")
        p.add_argument("--b-factor", type=int, default=1, dest="b_factor",
                       help="scale file length by an integer factor")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output file path")
        p.add_argument("--config", default=None, help="key=value config file")

    p_trade = sub.add_parser("tradeoff", help="emit memory-load curves and bounds")
    common(p_trade, with_t=False)
    p_trade.add_argument("--schemes", default="", help=f"comma list from {scheme_names()}")
    p_trade.add_argument("--bounds", default="", help=f"comma list from {bounds_mod.bound_names()}")
    p_trade.add_argument("--grid", type=int, default=128)
    p_trade.add_argument("--format", choices=["csv", "json"], default="csv")
    p_trade.set_defaults(fn=cmd_tradeoff)

    p_verify = sub.add_parser("verify", help="exhaustively verify a scheme")
    common(p_verify)
    p_verify.add_argument("--scheme", required=True)
    p_verify.add_argument("--privacy", action="store_true",
                          help="also run the exact privacy enumeration")
    p_verify.add_argument("--side-info", action="store_true", dest="side_info",
                          help="also check side information does not scale with B")
    p_verify.set_defaults(fn=cmd_verify)

    p_gap = sub.add_parser("gap", help="multiplicative gap achievable/converse")
    common(p_gap, with_t=False)
    p_gap.add_argument("--regime", choices=["nonprivate", "private"], required=True)
    p_gap.add_argument("--achievable", default=None, help="override the achievable curve")
    p_gap.add_argument("--grid", type=int, default=128)
    p_gap.set_defaults(fn=cmd_gap)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _apply_config(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except EnumerationGuardExceeded as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return 1
    except (ConfigurationError, HotplugError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
