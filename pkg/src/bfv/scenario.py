"""Scenario files, parameter sweeps and framework comparisons.

A scenario is a JSON object::

    {
      "servers": [{"id": 0, "capacity_hz": 5e9, "power_w": 125}],
      "links":   [{"src": 0, "dst": 1, "delay_s": 0.0}],
      "users":   [{"id": 0, "class": "MobileUser", "is_miner": true, ...}],
      "params":  {"t_th_s": 1, "n_trans": 5000, ...},
      "costs":   {"sha256_cycles_per_byte": 15.8, ...},
      "solver":  {"mu": null, "max_iter": 100, "tol": 1e-5},
      "sweep":   {"field": "server_capacity", "grid": [1e9, 2e9]}
    }

Every key is optional. Missing servers default to the 50-server Table I
pool, missing users to the 50-miner population (one third IoT sensors),
and missing ``params``/``costs`` entries to their Table I values. ``users``
may also be a population spec ``{"count": 50, "iot_fraction": 0.333}``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .analytics import EvaluationReport, Placement
from .baseline import evaluate_baseline
from .domain import (
    DEFAULT_SERVER_COUNT,
    BlockchainParams,
    CostTable,
    DeviceClass,
    Instance,
    Link,
    Server,
    ServerGraph,
    UserDevice,
    make_population,
    validate_instance,
)
from .placement import Infeasible, solve_point
from .validation import CrossCheck, McConfig, cross_check

SWEEP_FIELDS = ("server_capacity", "block_size", "miner_count", "block_interval")
CSV_COLUMNS = (
    "sweep_field", "sweep_value", "framework", "feasible", "e_ran_j", "e_mec_j", "e_total_j",
    "t_ran_s", "t_mec_s", "p_orphan", "avg_p_mining", "avg_r_mining", "sum_r_mining",
    "confirmation_rate_tps", "objective", "solver_iters", "solver_status",
)


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class SolverSettings:
    mu: Optional[float] = None
    max_iter: int = 100
    tol: float = 1e-5

    def kwargs(self) -> dict:
        return {"penalty_mu": self.mu, "max_iter": self.max_iter, "conv_tol": self.tol}


@dataclass(frozen=True)
class SweepSpec:
    field: str
    grid: tuple[float, ...]


@dataclass
class Scenario:
    instance: Instance
    solver: SolverSettings = field(default_factory=SolverSettings)
    sweep: Optional[SweepSpec] = None
    outputs: dict = field(default_factory=dict)


# -- parsing ---------------------------------------------------------------

def _number(obj: dict, key: str, where: str, *, integer: bool = False):
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}.{key}: expected a number, got {value!r}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ParseError(f"{where}.{key}: expected an integer, got {value!r}")
        return int(value)
    return value


def _flag(obj: dict, key: str, where: str) -> bool:
    value = obj[key]
    if not isinstance(value, bool):
        raise ParseError(f"{where}.{key}: expected true/false, got {value!r}")
    return value


def _object(value: Any, where: str) -> dict:
    if not isinstance(value, dict):
        raise ParseError(f"{where}: expected an object, got {type(value).__name__}")
    return value


def _list(value: Any, where: str) -> list:
    if not isinstance(value, list):
        raise ParseError(f"{where}: expected a list, got {type(value).__name__}")
    return value


def _known(obj: dict, allowed, where: str) -> None:
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ParseError(f"{where}: unknown field(s) {', '.join(unknown)}")


def _parse_dataclass(cls, obj: Any, where: str):
    obj = _object(obj, where)
    _known(obj, [f.name for f in fields(cls)], where)
    kwargs = {}
    for f in fields(cls):
        if f.name in obj:
            kwargs[f.name] = _number(obj, f.name, where, integer=f.type in ("int", int))
    return cls(**kwargs)


_USER_NUMERIC = ("local_capacity_hz", "local_power_w", "tx_power_w", "uplink_rate_bps")
_USER_FLAGS = ("is_miner", "is_tx_generator", "is_receiver")


def _parse_user(obj: Any, where: str) -> UserDevice:
    obj = _object(obj, where)
    _known(obj, ("id", "class") + _USER_NUMERIC + _USER_FLAGS, where)
    if "id" not in obj:
        raise ParseError(f"{where}.id: missing")
    kwargs: dict = {"id": _number(obj, "id", where, integer=True)}
    if "class" in obj:
        try:
            kwargs["device_class"] = DeviceClass(obj["class"])
        except ValueError:
            raise ParseError(f"{where}.class: expected one of "
                             f"{[c.value for c in DeviceClass]}, got {obj['class']!r}") from None
    for key in _USER_NUMERIC:
        if key in obj:
            kwargs[key] = _number(obj, key, where)
    for key in _USER_FLAGS:
        if key in obj:
            kwargs[key] = _flag(obj, key, where)
    return UserDevice(**kwargs)


def _parse_users(value: Any) -> list[UserDevice]:
    if isinstance(value, dict):
        _known(value, ("count", "iot_fraction", "is_tx_generator", "is_receiver"), "users")
        count = _number(value, "count", "users", integer=True) if "count" in value else 50
        frac = _number(value, "iot_fraction", "users") if "iot_fraction" in value else 1 / 3
        flags = {k: _flag(value, k, "users") for k in ("is_tx_generator", "is_receiver") if k in value}
        return make_population(count, frac, **flags)
    return [_parse_user(u, f"users[{k}]") for k, u in enumerate(_list(value, "users"))]


def parse_scenario(data: Any) -> Scenario:
    """Build a validated :class:`Scenario` from decoded JSON."""
    data = _object(data, "scenario")
    _known(data, ("servers", "links", "users", "params", "costs", "solver", "sweep", "outputs"), "scenario")

    if "servers" in data:
        servers = []
        for k, s in enumerate(_list(data["servers"], "servers")):
            where = f"servers[{k}]"
            s = _object(s, where)
            _known(s, ("id", "capacity_hz", "power_w"), where)
            if "id" not in s:
                raise ParseError(f"{where}.id: missing")
            kw = {key: _number(s, key, where) for key in ("capacity_hz", "power_w") if key in s}
            servers.append(Server(_number(s, "id", where, integer=True), **kw))
    else:
        servers = list(ServerGraph.uniform(DEFAULT_SERVER_COUNT).servers)
    links = []
    for k, ln in enumerate(_list(data.get("links", []), "links")):
        where = f"links[{k}]"
        ln = _object(ln, where)
        _known(ln, ("src", "dst", "delay_s"), where)
        for key in ("src", "dst"):
            if key not in ln:
                raise ParseError(f"{where}.{key}: missing")
        kw = {"delay_s": _number(ln, "delay_s", where)} if "delay_s" in ln else {}
        links.append(Link(_number(ln, "src", where, integer=True), _number(ln, "dst", where, integer=True), **kw))

    users = _parse_users(data["users"]) if "users" in data else make_population(50)
    params = _parse_dataclass(BlockchainParams, data.get("params", {}), "params")
    costs = _parse_dataclass(CostTable, data.get("costs", {}), "costs")
    instance = validate_instance(ServerGraph(tuple(servers), tuple(links)), users, params, costs)

    solver_obj = _object(data.get("solver", {}), "solver")
    _known(solver_obj, ("mu", "max_iter", "tol"), "solver")
    solver = SolverSettings(
        mu=None if solver_obj.get("mu") is None else _number(solver_obj, "mu", "solver"),
        max_iter=_number(solver_obj, "max_iter", "solver", integer=True) if "max_iter" in solver_obj else 100,
        tol=_number(solver_obj, "tol", "solver") if "tol" in solver_obj else 1e-5,
    )

    sweep = None
    if data.get("sweep") is not None:
        sw = _object(data["sweep"], "sweep")
        _known(sw, ("field", "grid"), "sweep")
        if sw.get("field") not in SWEEP_FIELDS:
            raise ParseError(f"sweep.field: expected one of {SWEEP_FIELDS}, got {sw.get('field')!r}")
        grid = _list(sw.get("grid"), "sweep.grid")
        values = tuple(_number({"grid": g}, "grid", f"sweep.grid[{k}]") for k, g in enumerate(grid))
        if not values or any(b <= a for a, b in zip(values, values[1:])):
            raise ParseError("sweep.grid: must be non-empty and strictly increasing")
        sweep = SweepSpec(sw["field"], values)

    outputs = dict(_object(data.get("outputs", {}), "outputs"))
    return Scenario(instance, solver, sweep, outputs)


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    Raises
    ------
    ParseError
        Malformed JSON (with line and column) or a field of the wrong type.
    ValidationError
        All invariant violations of the resulting instance.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(data)


# -- serialization ---------------------------------------------------------

def instance_to_dict(instance: Instance) -> dict:
    return {
        "servers": [asdict(s) for s in instance.graph.servers],
        "links": [asdict(ln) for ln in instance.graph.links],
        "users": [
            {
                "id": u.id,
                "class": u.device_class.value,
                **{k: getattr(u, k) for k in _USER_NUMERIC + _USER_FLAGS},
            }
            for u in instance.users
        ],
        "params": asdict(instance.params),
        "costs": asdict(instance.costs),
    }


def scenario_to_dict(scenario: Scenario) -> dict:
    out = instance_to_dict(scenario.instance)
    out["solver"] = asdict(scenario.solver)
    if scenario.sweep is not None:
        out["sweep"] = {"field": scenario.sweep.field, "grid": list(scenario.sweep.grid)}
    return out


def report_to_dict(report: EvaluationReport) -> dict:
    d = asdict(report)
    d["p_mining"] = {str(k): v for k, v in report.p_mining.items()}
    d["r_mining"] = {str(k): v for k, v in report.r_mining.items()}
    d["avg_p_mining"] = report.avg_p_mining
    d["avg_r_mining"] = report.avg_r_mining
    return d


def placement_to_dict(placement: Placement) -> dict:
    out: dict = {"assign": [{"user": u, "function": j, "server": s}
                            for (u, j), s in sorted(placement.assign.items())]}
    if placement.fractional is not None:
        out["fractional"] = [{"user": u, "function": j, "server": s, "weight": w}
                             for (u, j, s), w in sorted(placement.fractional.items())]
    return out


def placement_from_dict(data: Any) -> Placement:
    data = _object(data, "placement")
    assign = {}
    for k, a in enumerate(_list(data.get("assign", []), "placement.assign")):
        where = f"placement.assign[{k}]"
        a = _object(a, where)
        try:
            assign[(_number(a, "user", where, integer=True), _number(a, "function", where, integer=True))] = \
                _number(a, "server", where, integer=True)
        except KeyError as exc:
            raise ParseError(f"{where}: missing {exc}") from None
    fractional = None
    if "fractional" in data:
        fractional = {}
        for k, a in enumerate(_list(data["fractional"], "placement.fractional")):
            where = f"placement.fractional[{k}]"
            a = _object(a, where)
            try:
                key = tuple(_number(a, f, where, integer=True) for f in ("user", "function", "server"))
                fractional[key] = _number(a, "weight", where)
            except KeyError as exc:
                raise ParseError(f"{where}: missing {exc}") from None
    return Placement(assign, fractional)


# -- experiments -----------------------------------------------------------

def apply_sweep_point(instance: Instance, field_name: str, value: float) -> Instance:
    """The instance with one swept parameter set to ``value``, revalidated; chains are rebuilt."""
    graph, users, params = instance.graph, instance.users, instance.params
    if field_name == "server_capacity":
        graph = replace(graph, servers=tuple(replace(s, capacity_hz=float(value)) for s in graph.servers))
    elif field_name == "block_size":
        params = replace(params, n_trans=int(value))
    elif field_name == "block_interval":
        params = replace(params, t_th_s=float(value))
    elif field_name == "miner_count":
        template = users[0]
        users = make_population(
            int(value), 1 / 3,
            is_tx_generator=any(u.is_tx_generator for u in instance.users),
            is_receiver=any(u.is_receiver for u in instance.users),
            tx_power_w=template.tx_power_w,
            uplink_rate_bps=template.uplink_rate_bps,
        )
    else:
        raise ValueError(f"unknown sweep field {field_name!r}")
    return validate_instance(graph, users, params, instance.costs)


def _row(field_name, value, framework, report: Optional[EvaluationReport], iters, status) -> dict:
    row = {"sweep_field": field_name, "sweep_value": value, "framework": framework}
    if report is None:
        row.update({c: math.nan for c in CSV_COLUMNS[4:15]})
        row["feasible"] = False
    else:
        row.update(
            feasible=report.feasible, e_ran_j=report.e_ran_j, e_mec_j=report.e_mec_j,
            e_total_j=report.e_total_j, t_ran_s=report.t_ran_s, t_mec_s=report.t_mec_s,
            p_orphan=report.p_orphan, avg_p_mining=report.avg_p_mining,
            avg_r_mining=report.avg_r_mining, sum_r_mining=report.r_mining_total,
            confirmation_rate_tps=report.confirmation_rate_tps, objective=report.objective,
        )
    row["solver_iters"] = iters
    row["solver_status"] = status
    return row


def run_point(instance: Instance, field_name: str, value: float, solver: SolverSettings) -> list[dict]:
    """BFV and baseline rows for one grid point; solver errors end up in ``solver_status``."""
    try:
        point = apply_sweep_point(instance, field_name, value)
    except Exception as exc:  # invalid grid value: record and move on
        return [_row(field_name, value, fw, None, 0, f"error: {exc}") for fw in ("bfv", "baseline")]
    rows = []
    sol = solve_point(point, **solver.kwargs())
    rows.append(_row(field_name, value, "bfv", sol.report, sol.iterations, sol.status))
    try:
        base = evaluate_baseline(point, **solver.kwargs())
        rows.append(_row(field_name, value, "baseline", base, 0, "ok"))
    except Exception as exc:
        rows.append(_row(field_name, value, "baseline", None, 0, f"error: {exc}"))
    return rows


def run_sweep(scenario: Scenario, workers: int = 1) -> list[dict]:
    """One row per (grid point, framework), in grid order."""
    if scenario.sweep is None:
        raise ValueError("scenario has no sweep section")
    sw = scenario.sweep

    def work(value):
        return run_point(scenario.instance, sw.field, value, scenario.solver)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_point = list(pool.map(work, sw.grid))
    else:
        per_point = [work(v) for v in sw.grid]
    return [row for rows in per_point for row in rows]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_gnuplot(rows) -> str:
    """Whitespace-separated blocks, one per framework, separated by two blank lines (gnuplot ``index``)."""
    cols = [c for c in CSV_COLUMNS if c not in ("sweep_field", "framework", "solver_status")]
    blocks = []
    for fw in sorted({r["framework"] for r in rows}):
        lines = [f"# framework={fw}", "# " + " ".join(cols)]
        for r in rows:
            if r["framework"] == fw:
                lines.append(" ".join(_fmt(int(r[c]) if c == "feasible" else r[c]) for c in cols))
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"


@dataclass
class Comparison:
    bfv: EvaluationReport
    baseline: EvaluationReport

    @property
    def deltas(self) -> dict[str, float]:
        """Baseline minus BFV for each headline metric."""
        keys = ("e_total_j", "e_ran_j", "e_mec_j", "e_local_j", "t_ran_s", "t_mec_s", "t_local_s",
                "confirmation_rate_tps", "r_mining_total", "objective")
        d = {k: getattr(self.baseline, k) - getattr(self.bfv, k) for k in keys}
        d["avg_r_mining"] = self.baseline.avg_r_mining - self.bfv.avg_r_mining
        return d

    def to_dict(self) -> dict:
        return {"bfv": report_to_dict(self.bfv), "baseline": report_to_dict(self.baseline),
                "deltas": self.deltas}


def compare(scenario: Scenario, chains=None) -> Comparison:
    kw = scenario.solver.kwargs()
    sol = solve_point(scenario.instance, chains=chains, **kw)
    if sol.report is None:
        raise Infeasible(sol.status)
    return Comparison(sol.report, evaluate_baseline(scenario.instance, chains=chains, **kw))


def validate(scenario: Scenario, trials: int = 1_000_000, seed: int = 0) -> CrossCheck:
    return cross_check(scenario.instance, McConfig(trials, seed))
