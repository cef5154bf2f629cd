"""Radial low-voltage feeder model and backward/forward sweep power flow.

Balanced positive-sequence model in SI units per phase; voltages are
reported in per-unit of the nominal phase voltage. Loads are constant
power at a fixed (lagging) power factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .loadgen import LoadSeries

# 4x70 mm^2 overhead line class
OVERHEAD_R_OHM_PER_KM = 0.568
OVERHEAD_X_OHM_PER_KM = 0.26
OVERHEAD_AMPACITY_A = 270.0

NOMINAL_KV = 0.4
S_BASE_KVA = 1000.0
DEFAULT_PF = 0.95


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r_ohm: float
    x_ohm: float
    ampacity_a: float


@dataclass(frozen=True, eq=False)
class NetworkModel:
    n_buses: int
    lines: tuple[Line, ...]
    nominal_kv: float = NOMINAL_KV
    power_factor: float = DEFAULT_PF
    load_kw: np.ndarray | None = None
    slack_bus: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if self.n_buses < 2:
            raise ValueError("a feeder needs a slack bus and at least one more bus")
        if len(self.lines) != self.n_buses - 1:
            raise ValueError("radial network must have exactly n_buses - 1 lines")
        for ln in self.lines:
            if not (0 <= ln.from_bus < self.n_buses and 0 <= ln.to_bus < self.n_buses) or ln.from_bus == ln.to_bus:
                raise ValueError(f"line {ln} references an invalid bus")
            if ln.r_ohm < 0 or ln.x_ohm < 0 or not ln.ampacity_a > 0:
                raise ValueError(f"line {ln} has invalid parameters")
        if not 0 < self.power_factor <= 1:
            raise ValueError("power factor must lie in (0, 1]")
        parent, order = _tree(self.n_buses, self.lines, self.slack_bus)
        object.__setattr__(self, "_parent", parent)
        object.__setattr__(self, "_order", order)
        if self.load_kw is not None:
            object.__setattr__(self, "load_kw", _check_loads(self.load_kw, self.n_buses))

    @property
    def buses(self) -> list[int]:
        return list(range(self.n_buses))


def _tree(n_buses, lines, root):
    """Parent line per bus and a root-first visiting order; rejects meshes and islands."""
    adj: dict[int, list[tuple[int, int]]] = {b: [] for b in range(n_buses)}
    for k, ln in enumerate(lines):
        adj[ln.from_bus].append((ln.to_bus, k))
        adj[ln.to_bus].append((ln.from_bus, k))
    parent = [(-1, -1)] * n_buses  # (parent bus, line index)
    seen = {root}
    order = [root]
    stack = [root]
    while stack:
        b = stack.pop()
        for nb, k in adj[b]:
            if nb in seen:
                if parent[b][1] != k:
                    raise ValueError("network is not radial (contains a loop)")
                continue
            seen.add(nb)
            parent[nb] = (b, k)
            order.append(nb)
            stack.append(nb)
    if len(seen) != n_buses:
        raise ValueError("network is not connected")
    return parent, order


def _check_loads(load_kw, n_buses) -> np.ndarray:
    load = np.asarray(load_kw, dtype=float)
    if load.shape != (n_buses,):
        raise ValueError(f"expected {n_buses} bus loads, got shape {load.shape}")
    if not np.all(np.isfinite(load)) or np.any(load < 0):
        raise ValueError("bus loads must be finite and non-negative")
    return load


def build_kerber_feeder(n_loads: int = 14, line_length_m: float = 30.0,
                        power_factor: float = DEFAULT_PF) -> NetworkModel:
    """Chain feeder: slack bus 0 followed by ``n_loads`` buses on equal overhead segments."""
    if n_loads < 1:
        raise ValueError("n_loads must be >= 1")
    if not line_length_m > 0:
        raise ValueError("line_length_m must be positive")
    km = line_length_m / 1000.0
    lines = [Line(k, k + 1, OVERHEAD_R_OHM_PER_KM * km, OVERHEAD_X_OHM_PER_KM * km, OVERHEAD_AMPACITY_A)
             for k in range(n_loads)]
    return NetworkModel(n_buses=n_loads + 1, lines=tuple(lines), power_factor=power_factor)


@dataclass(frozen=True, eq=False)
class PowerFlowResult:
    bus_voltages: np.ndarray
    bus_voltage_complex: np.ndarray
    line_currents: np.ndarray
    line_loading: np.ndarray
    losses_kw: float
    slack_injection_kw: float
    converged: bool
    iterations: int

    @property
    def min_voltage(self) -> float:
        return float(self.bus_voltages.min())

    @property
    def max_loading(self) -> float:
        return float(self.line_loading.max())


def run_power_flow(net: NetworkModel, bus_loads_kw=None, tol: float = 1e-10,
                   max_iter: int = 100) -> PowerFlowResult:
    """Backward current summation / forward voltage drop until |dV| < tol (pu)."""
    if bus_loads_kw is None:
        bus_loads_kw = net.load_kw if net.load_kw is not None else np.zeros(net.n_buses)
    p_kw = _check_loads(bus_loads_kw, net.n_buses)
    tan_phi = math.tan(math.acos(net.power_factor))
    s_phase = (p_kw + 1j * p_kw * tan_phi) * 1000.0 / 3.0  # VA per phase
    v_nom = net.nominal_kv * 1000.0 / math.sqrt(3.0)
    parent, order = net._parent, net._order
    z_line = np.array([complex(ln.r_ohm, ln.x_ohm) for ln in net.lines])
    slack = net.slack_bus

    v = np.full(net.n_buses, complex(v_nom, 0.0))
    i_line = np.zeros(len(net.lines), dtype=complex)
    converged = False
    iterations = 0
    if not np.any(p_kw[np.arange(net.n_buses) != slack]):
        converged = True
    else:
        for iterations in range(1, max_iter + 1):
            i_bus = np.conj(s_phase / v)
            i_bus[slack] = 0.0
            branch = i_bus.copy()
            for b in reversed(order[1:]):
                pb, k = parent[b]
                i_line[k] = branch[b]
                branch[pb] += branch[b]
            v_new = v.copy()
            for b in order[1:]:
                pb, k = parent[b]
                v_new[b] = v_new[pb] - z_line[k] * i_line[k]
            change = np.max(np.abs(v_new - v)) / v_nom
            v = v_new
            if change < tol:
                converged = True
                break
    # final currents consistent with the returned voltages
    i_bus = np.conj(s_phase / v)
    i_bus[slack] = 0.0
    branch = i_bus.copy()
    for b in reversed(order[1:]):
        pb, k = parent[b]
        i_line[k] = branch[b]
        branch[pb] += branch[b]
    ampacity = np.array([ln.ampacity_a for ln in net.lines])
    losses_w = 3.0 * float(np.sum(np.abs(i_line) ** 2 * z_line.real))
    # with no load current at the slack, branch[slack] is the total current it supplies
    slack_w = 3.0 * float((v[slack] * np.conj(branch[slack])).real) + float(p_kw[slack]) * 1000.0
    return PowerFlowResult(
        bus_voltages=np.abs(v) / v_nom,
        bus_voltage_complex=v / v_nom,
        line_currents=np.abs(i_line),
        line_loading=100.0 * np.abs(i_line) / ampacity,
        losses_kw=losses_w / 1000.0,
        slack_injection_kw=slack_w / 1000.0,
        converged=converged,
        iterations=iterations,
    )


def power_mismatch_pu(net: NetworkModel, bus_loads_kw, result: PowerFlowResult,
                      s_base_kva: float = S_BASE_KVA) -> np.ndarray:
    """Per-bus |S_injected + S_load| in per-unit of ``s_base_kva`` (slack excluded)."""
    p_kw = _check_loads(bus_loads_kw, net.n_buses)
    tan_phi = math.tan(math.acos(net.power_factor))
    s_load = (p_kw + 1j * p_kw * tan_phi) / s_base_kva
    z_base = (net.nominal_kv * 1000.0) ** 2 / (s_base_kva * 1000.0)
    y_bus = np.zeros((net.n_buses, net.n_buses), dtype=complex)
    for ln in net.lines:
        y = 1.0 / (complex(ln.r_ohm, ln.x_ohm) / z_base)
        y_bus[ln.from_bus, ln.from_bus] += y
        y_bus[ln.to_bus, ln.to_bus] += y
        y_bus[ln.from_bus, ln.to_bus] -= y
        y_bus[ln.to_bus, ln.from_bus] -= y
    v = result.bus_voltage_complex
    s_inj = v * np.conj(y_bus @ v)
    mismatch = np.abs(s_inj + s_load)
    mismatch[net.slack_bus] = 0.0
    return mismatch


@dataclass(frozen=True)
class ImpactSettings:
    v_min_pu: float = 0.95
    max_loading_pct: float = 100.0
    kw_per_mw: float = 1.0


@dataclass(frozen=True, eq=False)
class GridImpactReport:
    timestamps: np.ndarray
    min_v_actual: np.ndarray
    min_v_forecast: np.ndarray
    max_loading_actual: np.ndarray
    max_loading_forecast: np.ndarray
    violation_actual: np.ndarray
    violation_forecast: np.ndarray
    converged: np.ndarray

    @property
    def missed(self) -> int:
        return int(np.sum(self.violation_actual & ~self.violation_forecast))

    @property
    def false_alarms(self) -> int:
        return int(np.sum(self.violation_forecast & ~self.violation_actual))

    @property
    def correctly_flagged(self) -> int:
        return int(np.sum(self.violation_actual & self.violation_forecast))

    @property
    def total_actual_violations(self) -> int:
        return int(np.sum(self.violation_actual))

    def summary(self) -> dict:
        return {
            "steps": int(self.timestamps.size),
            "missed": self.missed,
            "false_alarms": self.false_alarms,
            "correctly_flagged": self.correctly_flagged,
            "total_actual_violations": self.total_actual_violations,
            "total_forecast_violations": int(np.sum(self.violation_forecast)),
            "non_converged_steps": int(np.sum(~self.converged)),
        }


def uniform_allocation(net: NetworkModel) -> np.ndarray:
    w = np.ones(net.n_buses)
    w[net.slack_bus] = 0.0
    return w / w.sum()


def allocate(total_mw: float, allocation, settings: ImpactSettings) -> np.ndarray:
    return total_mw * settings.kw_per_mw * np.asarray(allocation, dtype=float)


def impact_report(net: NetworkModel, actual: LoadSeries, forecast, allocation=None,
                  settings: ImpactSettings = ImpactSettings()) -> GridImpactReport:
    """Run actual and forecast loads through the feeder, step by step."""
    forecast = np.asarray(forecast, dtype=float)
    if forecast.shape != actual.values.shape:
        raise ValueError("forecast is not aligned with the actual series")
    if allocation is None:
        allocation = uniform_allocation(net)
    allocation = np.asarray(allocation, dtype=float)
    if allocation.shape != (net.n_buses,) or np.any(allocation < 0):
        raise ValueError("allocation needs one non-negative weight per bus")
    if not math.isclose(float(allocation.sum()), 1.0, abs_tol=1e-9):
        raise ValueError("allocation weights must sum to 1")

    n = len(actual)
    out = {k: np.zeros(n) for k in ("va", "vf", "la", "lf")}
    converged = np.ones(n, dtype=bool)
    for t in range(n):
        ra = run_power_flow(net, allocate(actual.values[t], allocation, settings))
        rf = run_power_flow(net, allocate(max(forecast[t], 0.0), allocation, settings))
        out["va"][t], out["la"][t] = ra.min_voltage, ra.max_loading
        out["vf"][t], out["lf"][t] = rf.min_voltage, rf.max_loading
        converged[t] = ra.converged and rf.converged
    viol_a = (out["va"] < settings.v_min_pu) | (out["la"] > settings.max_loading_pct)
    viol_f = (out["vf"] < settings.v_min_pu) | (out["lf"] > settings.max_loading_pct)
    return GridImpactReport(actual.timestamps, out["va"], out["vf"], out["la"], out["lf"],
                            viol_a, viol_f, converged)
