"""Command-line interface.

Subcommands: ``calibrate``, ``price``, ``table3``, ``table4``, ``figure1``,
``collateral``.  Outputs carry a hash of the resolved configuration and
contain no timestamps, so a rerun with the same inputs and seed reproduces
every byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .contracts import RecoverySpec, standard_cds
from .errors import TricdsError
from .experiments import (
    ExperimentEngine,
    McSettings,
    QUALITIES,
    ScenarioConfig,
    emit_report,
    figure1_report,
    run_calibration,
    run_collateral_study,
    run_figure1,
    run_table3,
    run_table4,
)
from .hazard import ENTITY_STREAMS, calibrate_cir, riskfree_pathset, simulate_paths
from .joint import DependenceSpec
from .market import load_bundled_snapshot, load_snapshot, shifted_credit_curve
from .pricer import TrilateralPricer


def _load_market(path: str | None):
    return load_snapshot(path) if path else load_bundled_snapshot()


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        print(text)


def _recovery_from_dict(d: dict | None) -> RecoverySpec:
    if not d:
        return RecoverySpec()
    d = dict(d)
    rule = d.pop("settlement", None)
    if rule is not None:
        d.pop("phi_bar_a", None)
        d.pop("phi_bar_b", None)
        return RecoverySpec.with_settlement(rule, **d)
    return RecoverySpec(**d)


# --- calibrate --------------------------------------------------------------


def _cmd_calibrate(args) -> int:
    snapshot = _load_market(args.market)
    shift = {"A": 0.0, "A+100bps": 100.0, "A+200bps": 200.0, "A+300bps": 300.0}[args.quality]
    curve = shifted_credit_curve(snapshot.credit_curve, shift)
    result = calibrate_cir(curve, snapshot.discount_curve, recovery=args.recovery)
    payload = {
        "quality": args.quality,
        "recovery": args.recovery,
        "params": {
            "a": result.params.a,
            "b": result.params.b,
            "sigma": result.params.sigma,
            "h0": result.params.h0,
        },
        "objective": result.objective,
        "rms_error": result.rms_error,
        "node_terms_years": list(result.node_terms),
        "node_targets": list(result.node_targets),
        "node_model": list(result.node_model),
    }
    _write_or_print(json.dumps(payload, indent=2, sort_keys=True), args.out)
    return 0


# --- price ---------------------------------------------------------------------


def _cmd_price(args) -> int:
    contract_cfg = json.loads(Path(args.contract).read_text())
    dep_cfg = json.loads(Path(args.dependence).read_text()) if args.dependence else {}
    snapshot = _load_market(args.market)

    recovery = _recovery_from_dict(contract_cfg.get("recovery"))
    contract = standard_cds(
        notional=float(contract_cfg["notional"]),
        spread=float(contract_cfg.get("spread", 0.0)),
        maturity_years=float(contract_cfg["maturity"]),
        frequency=contract_cfg.get("frequency", "quarterly"),
    )
    dependence = DependenceSpec(
        rho_ab=float(dep_cfg.get("rho_ab", 0.0)),
        rho_ac=float(dep_cfg.get("rho_ac", 0.0)),
        rho_bc=float(dep_cfg.get("rho_bc", 0.0)),
        zeta_abc=float(dep_cfg.get("zeta_abc", 0.0)),
    )
    qualities = {
        "A": dep_cfg.get("buyer_quality", "riskfree"),
        "B": dep_cfg.get("seller_quality", "riskfree"),
        "C": dep_cfg.get("reference_quality", "A+200bps"),
    }
    grid = contract.grid()
    paths = {}
    for entity, quality in qualities.items():
        if quality == "riskfree":
            paths[entity] = riskfree_pathset(grid, args.paths)
        else:
            shift = {"A": 0.0, "A+100bps": 100.0, "A+200bps": 200.0, "A+300bps": 300.0}[quality]
            curve = shifted_credit_curve(snapshot.credit_curve, shift)
            fit = calibrate_cir(curve, snapshot.discount_curve, recovery=recovery)
            paths[entity] = simulate_paths(
                fit.params, grid, args.paths, seed=args.seed,
                stream=ENTITY_STREAMS[entity], substeps_per_year=args.substeps,
            )
    pricer = TrilateralPricer(
        contract, paths["A"], paths["B"], paths["C"],
        dependence, recovery, snapshot.discount_curve,
    )
    if args.collateral:
        result = pricer.collateralized()
    else:
        result = pricer.value()
    breakeven = pricer.breakeven() if args.breakeven else None

    config_blob = json.dumps(
        {
            "contract": contract_cfg,
            "dependence": dep_cfg,
            "market": args.market or "bundled",
            "paths": args.paths,
            "seed": args.seed,
            "substeps": args.substeps,
            "collateral": bool(args.collateral),
        },
        sort_keys=True,
    )
    payload = {
        "value": result.value,
        "std_error": result.std_error,
        "breakeven_spread": breakeven,
        "v_f": result.v_f,
        "psi_ab": result.psi_ab,
        "xi_abc": result.xi_abc,
        "diagnostics": {
            k: v for k, v in result.diagnostics.items() if k not in ("r_squared",)
        },
        "config_hash": hashlib.sha256(config_blob.encode()).hexdigest()[:16],
    }
    _write_or_print(json.dumps(payload, indent=2, sort_keys=True), args.out)

    if args.legs_csv:
        legs = pricer.leg_values()
        lines = ["period,payment_time,premium_leg,protection_leg"]
        for i, t in enumerate(legs["payment_times"]):
            lines.append(
                f"{i + 1},{t!r},{legs['premium_leg'][i]!r},{legs['protection_leg'][i]!r}"
            )
        Path(args.legs_csv).write_text("\n".join(lines) + "\n")
    return 0


# --- experiment runners -----------------------------------------------------------


def _scenario_config(args) -> ScenarioConfig:
    if args.config:
        config = ScenarioConfig.from_json(args.config)
    else:
        config = ScenarioConfig()
    overrides = {}
    if args.market:
        overrides["market"] = args.market
    mc = config.mc
    if args.paths:
        mc = McSettings(paths=args.paths, seed=mc.seed, substeps_per_year=mc.substeps_per_year,
                        antithetic=mc.antithetic, regression_degree=mc.regression_degree)
    if args.seed is not None:
        mc = McSettings(paths=mc.paths, seed=args.seed, substeps_per_year=mc.substeps_per_year,
                        antithetic=mc.antithetic, regression_degree=mc.regression_degree)
    overrides["mc"] = mc
    return ScenarioConfig.from_dict({**config.to_dict(), **{
        k: v for k, v in overrides.items() if k != "mc"
    }, "mc": {
        "paths": mc.paths, "seed": mc.seed, "substeps_per_year": mc.substeps_per_year,
        "antithetic": mc.antithetic, "regression_degree": mc.regression_degree,
    }})


def _emit_and_echo(report, out_dir: str, name: str) -> int:
    csv_path, txt_path = emit_report(report, out_dir, name)
    print(txt_path.read_text(), end="")
    print(f"wrote {csv_path} and {txt_path}")
    return 0


def _cmd_table3(args) -> int:
    engine = ExperimentEngine(_scenario_config(args))
    return _emit_and_echo(run_table3(engine), args.out_dir, "table3")


def _cmd_table4(args) -> int:
    engine = ExperimentEngine(_scenario_config(args))
    return _emit_and_echo(run_table4(engine), args.out_dir, "table4")


def _cmd_figure1(args) -> int:
    engine = ExperimentEngine(_scenario_config(args))
    sweeps = run_figure1(engine)
    return _emit_and_echo(figure1_report(engine, sweeps), args.out_dir, "figure1")


def _cmd_collateral(args) -> int:
    engine = ExperimentEngine(_scenario_config(args))
    return _emit_and_echo(run_collateral_study(engine), args.out_dir, "collateral")


def _cmd_calibration_table(args) -> int:
    engine = ExperimentEngine(_scenario_config(args))
    return _emit_and_echo(run_calibration(engine), args.out_dir, "calibration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tricds",
        description="CDS valuation under trilateral default risk",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="fit hazard dynamics to a credit-spread curve")
    cal.add_argument("--market", help="market snapshot CSV/JSON (default: bundled)")
    cal.add_argument("--quality", default="A", choices=[q for q in QUALITIES if q != "riskfree"])
    cal.add_argument("--recovery", type=float, default=0.4)
    cal.add_argument("--out", help="write JSON here instead of stdout")
    cal.set_defaults(func=_cmd_calibrate)

    price = sub.add_parser("price", help="price one contract")
    price.add_argument("--contract", required=True, help="contract JSON file")
    price.add_argument("--market", help="market snapshot (default: bundled)")
    price.add_argument("--dependence", help="dependence/parties JSON file")
    price.add_argument("--paths", type=int, default=200_000)
    price.add_argument("--seed", type=int, default=42)
    price.add_argument("--substeps", type=int, default=52, help="simulation substeps per year")
    price.add_argument("--collateral", choices=["full"], help="price under full collateralization")
    price.add_argument("--breakeven", action="store_true", help="also solve the breakeven spread")
    price.add_argument("--out", help="write JSON here instead of stdout")
    price.add_argument("--legs-csv", help="write per-period leg values to this CSV")
    price.set_defaults(func=_cmd_price)

    for name, func, help_text in (
        ("table3", _cmd_table3, "buyer credit-quality impact"),
        ("table4", _cmd_table4, "seller credit-quality impact"),
        ("figure1", _cmd_figure1, "dependence sensitivity sweeps"),
        ("collateral", _cmd_collateral, "full-collateralization residual study"),
        ("calibration", _cmd_calibration_table, "calibrated parameters per quality"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--market", help="market snapshot (default: bundled)")
        cmd.add_argument("--config", help="scenario config JSON")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--paths", type=int, default=None)
        cmd.add_argument("--out-dir", required=True)
        cmd.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TricdsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
