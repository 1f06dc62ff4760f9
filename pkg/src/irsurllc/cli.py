"""Command-line interface: config loading, batch runs, tabular outputs.

Subcommands:
  run <config.toml>      sweep x scheme Monte-Carlo batch, CSV + manifest out
  validate <config.toml> parse and check a config, exit 0 if usable
  selftest               quick oracle suites (numerics, solver, grouping)
  solve --instance f.json  one realization/scheme, result as JSON on stdout

Configs are TOML with three tables: [scenario], [run], and optional [sweep]
and [solver].  Powers accept explicit unit suffixes ("30 dBm", "-80 dBm",
"0.5 W"); gains accept "dB" or plain linear numbers.  Unknown keys are
rejected.  Exit codes: 0 success, 1 config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from dataclasses import asdict

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__, beamform, channel, driver, selftest
from .channel import Scenario

TRIAL_HEADER = "sweep_param,sweep_value,scheme,trial,total_latency,G,sca_iters,wall_ms"
AGG_HEADER = (
    "sweep_param,sweep_value,scheme,trials_ok,trials_failed,"
    "mean_latency,std_latency,min_latency,max_latency"
)


class ConfigError(Exception):
    """Invalid configuration; message carries the offending field path."""


# ---------------------------------------------------------------------------
# unit-aware scalars
# ---------------------------------------------------------------------------

def parse_power(value, path: str) -> float:
    """Power in watts from a number (watts) or 'x dBm' / 'x dB W' style text."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value <= 0:
            raise ConfigError(f"{path}: power must be positive, got {value}")
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        for suffix, conv in (
            ("dBm", lambda x: 10.0 ** ((x - 30.0) / 10.0)),
            ("dBW", lambda x: 10.0 ** (x / 10.0)),
            ("mW", lambda x: x * 1e-3),
            ("W", lambda x: x),
        ):
            if text.endswith(suffix):
                try:
                    return conv(float(text[: -len(suffix)].strip()))
                except ValueError:
                    break
        raise ConfigError(f"{path}: cannot parse power {value!r}")
    raise ConfigError(f"{path}: expected number or unit string, got {type(value).__name__}")


def parse_gain(value, path: str) -> float:
    """Linear gain from a number or 'x dB' text."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value <= 0:
            raise ConfigError(f"{path}: gain must be positive, got {value}")
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        if text.endswith("dB"):
            try:
                return 10.0 ** (float(text[:-2].strip()) / 10.0)
            except ValueError:
                pass
        raise ConfigError(f"{path}: cannot parse gain {value!r}")
    raise ConfigError(f"{path}: expected number or 'x dB', got {type(value).__name__}")


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {
    "users", "irs_elements", "bs_position", "irs_position", "user_area_center",
    "user_area_radius", "tx_power", "noise_power", "payload_bits", "max_pep",
    "pathloss_exponent_bs_user", "pathloss_exponent_irs_user",
    "pathloss_exponent_bs_irs", "pathloss_ref", "seed",
}
_RUN_KEYS = {"schemes", "trials", "output_dir", "threads", "greedy_rule", "record_timings"}
_SWEEP_KEYS = {"parameter", "values"}
_SOLVER_KEYS = {
    "initial_radius_scale", "shrink", "radius_min_factor", "tol_improve",
    "max_iters", "improvement_window", "improvement_rtol",
    "randomization_trials", "conic_tol", "conic_max_iters", "mu_floor",
    "per_iteration_randomization", "per_iteration_trials", "radius_restore",
    "consecutive_reject_limit", "outer_cap",
}
_SWEEP_PARAMS = ("N", "K", "eps_max")


def _reject_unknown(table: dict, allowed: set, path: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        names = ", ".join(sorted(f"{path}.{k}" for k in unknown))
        raise ConfigError(f"unknown key(s): {names}")


def _pair(value, path: str) -> tuple[float, float]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) for v in value)
    ):
        raise ConfigError(f"{path}: expected [x, y] coordinates")
    return float(value[0]), float(value[1])


def load_config(path: str) -> dict:
    """Parse and validate a TOML experiment config into normalized pieces."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML syntax error: {exc}") from exc

    _reject_unknown(raw, {"scenario", "run", "sweep", "solver"}, "config")
    if "scenario" not in raw:
        raise ConfigError("missing [scenario] table")
    sc_tab = raw["scenario"]
    _reject_unknown(sc_tab, _SCENARIO_KEYS, "scenario")
    for req in ("users", "irs_elements"):
        if req not in sc_tab:
            raise ConfigError(f"scenario.{req} is required")

    payload = sc_tab.get("payload_bits", 256)
    if isinstance(payload, (int, float)):
        payload = (int(payload),)
    elif isinstance(payload, list):
        payload = tuple(int(v) for v in payload)
    else:
        raise ConfigError("scenario.payload_bits: expected int or list of ints")

    kwargs = dict(
        num_users=int(sc_tab["users"]),
        num_elements=int(sc_tab["irs_elements"]),
        payload_bits=payload,
        eps_max=float(sc_tab.get("max_pep", 1e-7)),
        seed=int(sc_tab.get("seed", 0)),
        user_area_radius=float(sc_tab.get("user_area_radius", 10.0)),
        pathloss_exp_bs_user=float(sc_tab.get("pathloss_exponent_bs_user", 3.5)),
        pathloss_exp_irs_user=float(sc_tab.get("pathloss_exponent_irs_user", 2.5)),
        pathloss_exp_bs_irs=float(sc_tab.get("pathloss_exponent_bs_irs", 2.0)),
    )
    if "bs_position" in sc_tab:
        kwargs["bs_position"] = _pair(sc_tab["bs_position"], "scenario.bs_position")
    if "irs_position" in sc_tab:
        kwargs["irs_position"] = _pair(sc_tab["irs_position"], "scenario.irs_position")
    if "user_area_center" in sc_tab:
        kwargs["user_area_center"] = _pair(
            sc_tab["user_area_center"], "scenario.user_area_center"
        )
    if "tx_power" in sc_tab:
        kwargs["tx_power"] = parse_power(sc_tab["tx_power"], "scenario.tx_power")
    if "noise_power" in sc_tab:
        kwargs["noise_power"] = parse_power(sc_tab["noise_power"], "scenario.noise_power")
    if "pathloss_ref" in sc_tab:
        kwargs["pathloss_ref"] = parse_gain(sc_tab["pathloss_ref"], "scenario.pathloss_ref")
    try:
        scenario = Scenario(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc

    run_tab = raw.get("run", {})
    _reject_unknown(run_tab, _RUN_KEYS, "run")
    schemes_raw = run_tab.get("schemes", ["proposed_greedy"])
    if not isinstance(schemes_raw, list) or not schemes_raw:
        raise ConfigError("run.schemes: expected a non-empty list")
    try:
        schemes = tuple(driver.Scheme.parse(s) for s in schemes_raw)
    except ValueError as exc:
        raise ConfigError(f"run.schemes: {exc}") from exc
    trials = int(run_tab.get("trials", 10))
    if trials < 1:
        raise ConfigError("run.trials must be >= 1")
    greedy_rule = run_tab.get("greedy_rule", "min")
    if greedy_rule not in ("min", "max"):
        raise ConfigError("run.greedy_rule must be 'min' or 'max'")

    sweep = None
    if "sweep" in raw:
        sw = raw["sweep"]
        _reject_unknown(sw, _SWEEP_KEYS, "sweep")
        param = sw.get("parameter")
        if param not in _SWEEP_PARAMS:
            raise ConfigError(f"sweep.parameter must be one of {_SWEEP_PARAMS}")
        values = sw.get("values")
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values: expected a non-empty list")
        if param in ("N", "K"):
            values = [int(v) for v in values]
            if param == "N" and any(v < 0 for v in values):
                raise ConfigError("sweep.values: N must be >= 0")
            if param == "K" and any(v < 1 for v in values):
                raise ConfigError("sweep.values: K must be >= 1")
        else:
            values = [float(v) for v in values]
            if any(not 0 < v <= 0.5 for v in values):
                raise ConfigError("sweep.values: eps_max must be in (0, 0.5]")
        sweep = (param, values)

    solver_tab = dict(raw.get("solver", {}))
    _reject_unknown(solver_tab, _SOLVER_KEYS, "solver")
    outer_cap = int(solver_tab.pop("outer_cap", driver.OUTER_CAP_DEFAULT))
    if solver_tab.get("consecutive_reject_limit") == 0:
        solver_tab["consecutive_reject_limit"] = None
    try:
        beamform.ScaControls(**solver_tab)
    except TypeError as exc:
        raise ConfigError(f"solver: {exc}") from exc

    return {
        "scenario": scenario,
        "schemes": schemes,
        "trials": trials,
        "output_dir": run_tab.get("output_dir", "results"),
        "threads": int(run_tab.get("threads", 1)),
        "greedy_rule": greedy_rule,
        "record_timings": bool(run_tab.get("record_timings", False)),
        "sweep": sweep,
        "solver_overrides": solver_tab,
        "outer_cap": outer_cap,
    }


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _scenario_for(scenario: Scenario, param: str | None, value):
    if param is None:
        return scenario
    if param == "N":
        return scenario.with_elements(int(value))
    if param == "K":
        return scenario.with_users(int(value))
    return scenario.with_eps_max(float(value))


def cmd_run(cfg: dict, verbose: bool = False) -> int:
    sweep = cfg["sweep"]
    points = sweep[1] if sweep else [None]
    param_name = sweep[0] if sweep else "none"
    out_dir = cfg["output_dir"]

    trial_lines = [TRIAL_HEADER]
    agg_lines = [AGG_HEADER]
    timings: dict[str, dict[str, float]] = {}
    total_failures = 0
    schemes_all_failed = False

    for value in points:
        scenario = _scenario_for(cfg["scenario"], sweep[0] if sweep else None, value)
        sweep_value = "-" if value is None else _fmt_value(value)
        if verbose:
            print(f"[run] sweep {param_name}={sweep_value} ...", file=sys.stderr)
        stats, records = driver.monte_carlo(
            scenario,
            cfg["schemes"],
            cfg["trials"],
            control_overrides=cfg["solver_overrides"],
            threads=cfg["threads"],
            outer_cap=cfg["outer_cap"],
            greedy_rule=cfg["greedy_rule"],
        )
        for rec in records:
            wall = rec.wall_ms if cfg["record_timings"] else 0
            trial_lines.append(
                f"{param_name},{sweep_value},{rec.scheme},{rec.trial_index},"
                f"{rec.total_latency},{rec.num_groups},{rec.sca_iterations},{wall}"
            )
        point_timings = {}
        for label, st in stats.items():
            agg_lines.append(
                f"{param_name},{sweep_value},{label},{st.trials_ok},{st.trials_failed},"
                f"{_fmt_value(st.mean)},{_fmt_value(st.std)},{st.min},{st.max}"
            )
            total_failures += st.trials_failed
            if st.trials_ok == 0:
                schemes_all_failed = True
            ms = [r.wall_ms for r in records if r.scheme == label]
            point_timings[label] = float(np.mean(ms)) if ms else 0.0
        timings[f"{param_name}={sweep_value}"] = point_timings

    trials_path = os.path.join(out_dir, "trials.csv")
    agg_path = os.path.join(out_dir, "aggregate.csv")
    _atomic_write(trials_path, "\n".join(trial_lines) + "\n")
    _atomic_write(agg_path, "\n".join(agg_lines) + "\n")

    manifest = {
        "artifact_version": __version__,
        "seed": cfg["scenario"].seed,
        "config": _config_echo(cfg),
        "files": {
            "trials.csv": _sha256(trials_path),
            "aggregate.csv": _sha256(agg_path),
        },
        "mean_wall_ms": timings,
        "failed_trials": total_failures,
    }
    _atomic_write(
        os.path.join(out_dir, "manifest.json"),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )
    print(f"wrote {trials_path}, {agg_path}, manifest.json "
          f"({total_failures} failed trials)")
    return 2 if schemes_all_failed else 0


def _config_echo(cfg: dict) -> dict:
    scenario = cfg["scenario"]
    return {
        "scenario": {
            "users": scenario.num_users,
            "irs_elements": scenario.num_elements,
            "bs_position": list(scenario.bs_position),
            "irs_position": list(scenario.irs_position),
            "user_area_center": list(scenario.user_area_center),
            "user_area_radius": scenario.user_area_radius,
            "tx_power_w": scenario.tx_power,
            "noise_power_w": scenario.noise_power,
            "payload_bits": list(scenario.payload_bits),
            "max_pep": scenario.eps_max,
            "pathloss_exponent_bs_user": scenario.pathloss_exp_bs_user,
            "pathloss_exponent_irs_user": scenario.pathloss_exp_irs_user,
            "pathloss_exponent_bs_irs": scenario.pathloss_exp_bs_irs,
            "pathloss_ref_linear": scenario.pathloss_ref,
            "seed": scenario.seed,
        },
        "run": {
            "schemes": [s.label for s in cfg["schemes"]],
            "trials": cfg["trials"],
            "threads": cfg["threads"],
            "greedy_rule": cfg["greedy_rule"],
            "record_timings": cfg["record_timings"],
        },
        "sweep": (
            {"parameter": cfg["sweep"][0], "values": cfg["sweep"][1]}
            if cfg["sweep"]
            else None
        ),
        "solver": cfg["solver_overrides"],
        "outer_cap": cfg["outer_cap"],
    }


def cmd_solve(instance_path: str, verbose: bool) -> int:
    with open(instance_path) as fh:
        spec = json.load(fh)
    unknown = set(spec) - {"scenario", "trial_index", "scheme", "solver", "greedy_rule"}
    if unknown:
        raise ConfigError(f"instance: unknown key(s) {sorted(unknown)}")
    sc_spec = dict(spec.get("scenario", {}))
    _reject_unknown(sc_spec, _SCENARIO_KEYS, "scenario")
    # reuse TOML normalization by a synthetic config dict
    kwargs = {}
    for key, target in (
        ("users", "num_users"), ("irs_elements", "num_elements"), ("seed", "seed"),
    ):
        if key in sc_spec:
            kwargs[target] = int(sc_spec[key])
    if "num_users" not in kwargs or "num_elements" not in kwargs:
        raise ConfigError("instance scenario needs 'users' and 'irs_elements'")
    if "max_pep" in sc_spec:
        kwargs["eps_max"] = float(sc_spec["max_pep"])
    if "payload_bits" in sc_spec:
        pb = sc_spec["payload_bits"]
        kwargs["payload_bits"] = tuple(pb) if isinstance(pb, list) else (int(pb),)
    if "tx_power" in sc_spec:
        kwargs["tx_power"] = parse_power(sc_spec["tx_power"], "scenario.tx_power")
    if "noise_power" in sc_spec:
        kwargs["noise_power"] = parse_power(sc_spec["noise_power"], "scenario.noise_power")
    scenario = Scenario(**kwargs)
    trial = int(spec.get("trial_index", 0))
    scheme = driver.Scheme.parse(spec.get("scheme", "proposed_greedy"))
    overrides = dict(spec.get("solver", {}))

    realization = channel.generate_realization(scenario, trial)
    controls = driver._controls_for_trial(scenario, trial, overrides)
    if verbose:
        controls.trace = lambda info: print(json.dumps(info), file=sys.stderr)
    res = driver.alternating_optimize(
        realization, scheme, controls=controls,
        greedy_rule=spec.get("greedy_rule", "min"),
    )
    out = {
        "scheme": scheme.label,
        "trial_index": trial,
        "realization_hash": res.realization_hash,
        "grouping": [list(g) for g in res.grouping.groups],
        "group_payload_bits": list(res.grouping.group_payloads),
        "blocklengths": [int(v) for v in res.m],
        "total_latency": res.total_latency,
        "irs_phases": [float(p) for p in np.angle(res.v)],
        "per_user_snr": [float(s) for s in res.snrs],
        "per_user_pep": [float(p) for p in res.peps],
        "sca_iterations": res.sca_iterations,
        "outer_iterations": res.outer_iterations,
        "relaxed_objective": res.relaxed_objective,
    }
    print(json.dumps(out, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="irsurllc",
        description="Latency minimization for IRS-aided short-packet downlink.",
    )
    parser.add_argument("--verbose", action="store_true", help="progress + SCA trace on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a batch experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--threads", type=int, default=None, help="parallel trial workers")
    p_run.add_argument("--seed", type=int, default=None, help="override scenario seed")

    p_val = sub.add_parser("validate", help="check a config without running")
    p_val.add_argument("config")

    sub.add_parser("selftest", help="run the quick numeric/solver oracle suites")

    p_solve = sub.add_parser("solve", help="solve one instance, JSON result on stdout")
    p_solve.add_argument("--instance", required=True, help="JSON instance description")

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            load_config(args.config)
            print("OK")
            return 0
        if args.command == "run":
            cfg = load_config(args.config)
            if args.threads is not None:
                cfg["threads"] = max(1, args.threads)
            if args.seed is not None:
                from dataclasses import replace
                cfg["scenario"] = replace(cfg["scenario"], seed=args.seed)
            return cmd_run(cfg, verbose=args.verbose)
        if args.command == "selftest":
            return selftest.run_all(verbose=args.verbose)
        if args.command == "solve":
            return cmd_solve(args.instance, args.verbose)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
