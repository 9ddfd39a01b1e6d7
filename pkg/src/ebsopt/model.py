"""Domain types for the e-bike sharing system and the deterministic
rebalancing / battery-swap integer model.

Conventions used throughout the package:

* Spots are dense integer ids ``0 .. n_spots-1``.
* State-of-charge is discretized into three ordered levels ``k1 < k2 < k3``
  (low / medium / high); ``k3`` bikes are fully available, ``k1`` bikes are
  not offered to customers.
* ``y[i,k]`` counts battery swaps at spot ``i`` for level ``k in {k1,k2}``
  (a swap turns the bike into a ``k3`` bike), ``z[i,k]`` is the net number
  of bikes moved in (+) or out (-), modeled as ``z = zp - zm`` with both
  parts nonnegative, ``u[i,k]`` is the post-operation stock, ``unmet[i]``
  the demand left unserved and ``miduse[i]`` the number of medium-charge
  bikes pressed into service (the positive part in the cost function).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mip import SENSE_EQ, SENSE_GE, SENSE_LE, MipProblem, ModelError

SOC_LEVELS = ("k1", "k2", "k3")
K_LOW, K_MID, K_FULL = 0, 1, 2
N_LEVELS = 3


@dataclass(frozen=True)
class SocThresholds:
    """Charge-fraction boundaries separating the three SOC levels."""

    low: float = 0.30
    high: float = 0.70

    def __post_init__(self):
        if not 0.0 < self.low < self.high < 1.0:
            raise ModelError(f"SOC thresholds must satisfy 0 < low < high < 1, got {self}")

    def bucket(self, charge: float) -> int:
        if charge < self.low:
            return K_LOW
        if charge < self.high:
            return K_MID
        return K_FULL


@dataclass(frozen=True)
class Spot:
    id: int
    capacity: int
    latitude: float = 0.0
    longitude: float = 0.0

    def __post_init__(self):
        if self.capacity < 0:
            raise ModelError(f"spot {self.id}: negative capacity")


def check_spot_roster(spots) -> None:
    ids = sorted(s.id for s in spots)
    if ids != list(range(len(spots))):
        raise ModelError(f"spot ids must be unique and dense in [0, {len(spots)}), got {ids}")


@dataclass(frozen=True)
class SystemConfig:
    swap_cost: float = 1.0
    move_cost: float = 1.0
    penalty_medium: float = 0.4
    penalty_unmet: float = 0.8
    vehicle_capacity: int = 60
    battery_capacity: int = 142
    initial_full_ebikes: int = 60

    def __post_init__(self):
        for name in ("swap_cost", "move_cost", "penalty_medium", "penalty_unmet"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be nonnegative")
        for name in ("vehicle_capacity", "battery_capacity", "initial_full_ebikes"):
            value = getattr(self, name)
            if value < 0 or int(value) != value:
                raise ModelError(f"{name} must be a nonnegative integer")


@dataclass(frozen=True)
class FleetState:
    """Initial stock ``v[i, k]`` per spot and SOC level."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.int64)
        object.__setattr__(self, "v", v)
        if v.ndim != 2 or v.shape[1] != N_LEVELS:
            raise ModelError(f"fleet matrix must be n_spots x {N_LEVELS}, got {v.shape}")
        if (v < 0).any():
            raise ModelError("fleet counts must be nonnegative")

    def check_capacity(self, spots) -> None:
        totals = self.v.sum(axis=1)
        for s in spots:
            if totals[s.id] > s.capacity:
                raise ModelError(
                    f"spot {s.id}: initial stock {totals[s.id]} exceeds capacity {s.capacity}"
                )


@dataclass(frozen=True)
class DemandScenario:
    xi: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.xi)
        if raw.dtype.kind == "f" and not np.all(raw == np.round(raw)):
            raise ModelError("demand must be integral (counts)")
        xi = raw.astype(np.int64)
        object.__setattr__(self, "xi", xi)
        if xi.ndim != 1:
            raise ModelError("demand must be a per-spot vector")
        if (xi < 0).any():
            raise ModelError("demand must be nonnegative")


@dataclass(frozen=True)
class DecisionVector:
    y: np.ndarray            # [n, 2]  swaps at k1/k2
    z_plus: np.ndarray       # [n, 3]  bikes dropped off
    z_minus: np.ndarray      # [n, 3]  bikes picked up
    u: np.ndarray            # [n, 3]  post-operation stock
    sigma: np.ndarray        # [n]     unmet demand
    medium_use_excess: np.ndarray  # [n] linearized (xi - sigma - u_k3)^+

    def __post_init__(self):
        for name in ("y", "z_plus", "z_minus", "u", "sigma", "medium_use_excess"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        n = self.u.shape[0]
        if self.y.shape != (n, 2) or self.z_plus.shape != (n, N_LEVELS) \
                or self.z_minus.shape != (n, N_LEVELS) or self.u.shape != (n, N_LEVELS) \
                or self.sigma.shape != (n,) or self.medium_use_excess.shape != (n,):
            raise ModelError("decision component shapes disagree")

    @property
    def z(self) -> np.ndarray:
        return self.z_plus - self.z_minus

    @property
    def n_spots(self) -> int:
        return self.u.shape[0]


@dataclass(frozen=True)
class Violation:
    family: str
    index: tuple
    slack: float

    def __str__(self):
        return f"{self.family}{list(self.index)}: short by {-self.slack:g}"


@dataclass
class FeasibilityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def families(self) -> set[str]:
        return {v.family for v in self.violations}

    def __str__(self):
        if self.feasible:
            return "feasible"
        return "; ".join(str(v) for v in self.violations)


# ---------------------------------------------------------------------------
# variable naming shared with the embedding / agent layers

def var_y(i, k):
    return f"y[{i},{SOC_LEVELS[k]}]"


def var_zp(i, k):
    return f"zp[{i},{SOC_LEVELS[k]}]"


def var_zm(i, k):
    return f"zm[{i},{SOC_LEVELS[k]}]"


def var_u(i, k):
    return f"u[{i},{SOC_LEVELS[k]}]"


def var_unmet(i):
    return f"unmet[{i}]"


def var_miduse(i):
    return f"miduse[{i}]"


def move_bound(config: SystemConfig, spots) -> int:
    """Static per-coordinate bound on |z|: one vehicle trip cannot move more
    than its capacity, nor more than the largest spot can absorb."""
    return int(max(config.vehicle_capacity, max(s.capacity for s in spots)))


# ---------------------------------------------------------------------------
# model construction


def _add_decision_variables(prob, config, spots, fleet, demand=None):
    n = len(spots)
    zmax = move_bound(config, spots)
    for i in range(n):
        for k in (K_LOW, K_MID):
            prob.add_variable(var_y(i, k), 0, int(fleet.v[i, k]), is_integer=True)
    for i in range(n):
        for k in range(N_LEVELS):
            prob.add_variable(var_zp(i, k), 0, zmax, is_integer=True)
            prob.add_variable(var_zm(i, k), 0, zmax, is_integer=True)
    for i, s in enumerate(spots):
        for k in range(N_LEVELS):
            prob.add_variable(var_u(i, k), 0, s.capacity, is_integer=True)
    if demand is not None:
        for i in range(n):
            prob.add_variable(var_unmet(i), 0, int(demand.xi[i]), is_integer=True)
        for i in range(n):
            prob.add_variable(var_miduse(i), 0, int(demand.xi[i]), is_integer=True)


def _add_balance_rows(prob, fleet, n):
    # post-operation stock: low/medium levels lose swapped batteries and gain
    # net moves; the full level gains every swap plus its own net moves
    for i in range(n):
        for k in (K_LOW, K_MID):
            coeffs = {
                prob.index_of(var_u(i, k)): 1.0,
                prob.index_of(var_y(i, k)): 1.0,
                prob.index_of(var_zp(i, k)): -1.0,
                prob.index_of(var_zm(i, k)): 1.0,
            }
            prob.add_row(f"balance[{i},{SOC_LEVELS[k]}]", coeffs, SENSE_EQ, float(fleet.v[i, k]))
    for i in range(n):
        coeffs = {
            prob.index_of(var_u(i, K_FULL)): 1.0,
            prob.index_of(var_y(i, K_LOW)): -1.0,
            prob.index_of(var_y(i, K_MID)): -1.0,
            prob.index_of(var_zp(i, K_FULL)): -1.0,
            prob.index_of(var_zm(i, K_FULL)): 1.0,
        }
        prob.add_row(f"balance[{i},k3]", coeffs, SENSE_EQ, float(fleet.v[i, K_FULL]))


def _add_resource_rows(prob, config, spots):
    n = len(spots)
    # fleet-wide swap budget
    coeffs = {prob.index_of(var_y(i, k)): 1.0 for i in range(n) for k in (K_LOW, K_MID)}
    prob.add_row("swap_budget", coeffs, SENSE_LE, float(config.battery_capacity))
    # vehicle load: initial full bikes minus net drops stays within capacity
    coeffs = {}
    for i in range(n):
        for k in range(N_LEVELS):
            coeffs[prob.index_of(var_zp(i, k))] = -1.0
            coeffs[prob.index_of(var_zm(i, k))] = 1.0
    prob.add_row(
        "vehicle_load", coeffs, SENSE_LE,
        float(config.vehicle_capacity - config.initial_full_ebikes),
    )
    # cannot drop more full bikes than the vehicle carried in
    coeffs = {}
    for i in range(n):
        coeffs[prob.index_of(var_zp(i, K_FULL))] = 1.0
        coeffs[prob.index_of(var_zm(i, K_FULL))] = -1.0
    prob.add_row("full_drop_stock", coeffs, SENSE_LE, float(config.initial_full_ebikes))
    # net movement of full bikes into the system is nonnegative
    prob.add_row("net_full", dict(coeffs), SENSE_GE, 0.0)
    # low/medium totals may only shrink
    for k in (K_LOW, K_MID):
        coeffs = {}
        for i in range(n):
            coeffs[prob.index_of(var_zp(i, k))] = 1.0
            coeffs[prob.index_of(var_zm(i, k))] = -1.0
        prob.add_row(f"net_drain[{SOC_LEVELS[k]}]", coeffs, SENSE_LE, 0.0)


def _cost_coefficients(prob, config, n):
    coeffs = {}
    for i in range(n):
        for k in (K_LOW, K_MID):
            coeffs[prob.index_of(var_y(i, k))] = config.swap_cost
        for k in range(N_LEVELS):
            coeffs[prob.index_of(var_zp(i, k))] = config.move_cost
            coeffs[prob.index_of(var_zm(i, k))] = config.move_cost
        coeffs[prob.index_of(var_miduse(i))] = config.penalty_medium
        coeffs[prob.index_of(var_unmet(i))] = config.penalty_unmet
    return coeffs


def build_rbs(config: SystemConfig, spots, fleet: FleetState,
              demand: DemandScenario) -> MipProblem:
    """Deterministic rebalancing and battery-swap model.

    Minimizes swap + move costs plus penalties for serving demand with
    medium-charge bikes and for unmet demand, subject to inventory balance,
    spot capacity, and vehicle/battery resource limits.
    """
    check_spot_roster(spots)
    if len(spots) < 1:
        raise ModelError("need at least one spot")
    fleet.check_capacity(spots)
    n = len(spots)
    if fleet.v.shape[0] != n or demand.xi.shape[0] != n:
        raise ModelError("fleet/demand dimensions disagree with roster")

    prob = MipProblem(metadata={
        "kind": "rbs",
        "n_spots": n,
        "max_capacity": max(s.capacity for s in spots),
    })
    _add_decision_variables(prob, config, spots, fleet, demand)
    _add_balance_rows(prob, fleet, n)

    # demand service: medium+full stock plus unmet covers the net demand
    for i in range(n):
        coeffs = {
            prob.index_of(var_u(i, K_MID)): 1.0,
            prob.index_of(var_u(i, K_FULL)): 1.0,
            prob.index_of(var_unmet(i)): 1.0,
        }
        prob.add_row(f"demand[{i}]", coeffs, SENSE_GE, float(demand.xi[i]))
    # space limits after drop-offs, before demand departs
    for i, s in enumerate(spots):
        coeffs = {}
        for k in range(N_LEVELS):
            coeffs[prob.index_of(var_zp(i, k))] = 1.0
            coeffs[prob.index_of(var_zm(i, k))] = -1.0
        rhs = float(s.capacity + demand.xi[i] - fleet.v[i].sum())
        prob.add_row(f"capacity[{i}]", coeffs, SENSE_LE, rhs)

    _add_resource_rows(prob, config, spots)

    # positive-part linearization: miduse >= xi - unmet - u_full, miduse >= 0
    for i in range(n):
        coeffs = {
            prob.index_of(var_miduse(i)): 1.0,
            prob.index_of(var_unmet(i)): 1.0,
            prob.index_of(var_u(i, K_FULL)): 1.0,
        }
        prob.add_row(f"miduse[{i}]", coeffs, SENSE_GE, float(demand.xi[i]))

    prob.add_objective(_cost_coefficients(prob, config, n), "min", priority=0)
    return prob


# ---------------------------------------------------------------------------
# pure recomputation helpers


def apply_inventory_balance(fleet: FleetState, y, z) -> np.ndarray:
    """Post-operation stock implied by swaps ``y`` and net moves ``z``."""
    y = np.asarray(y, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    v = fleet.v
    if y.shape != (v.shape[0], 2) or z.shape != v.shape:
        raise ModelError(f"shape mismatch: v {v.shape}, y {y.shape}, z {z.shape}")
    u = np.empty_like(v)
    u[:, K_LOW] = v[:, K_LOW] - y[:, K_LOW] + z[:, K_LOW]
    u[:, K_MID] = v[:, K_MID] - y[:, K_MID] + z[:, K_MID]
    u[:, K_FULL] = v[:, K_FULL] + y.sum(axis=1) + z[:, K_FULL]
    return u


def rbs_cost(config: SystemConfig, decision: DecisionVector,
             demand: DemandScenario | None = None) -> float:
    """Objective value of a decision: swaps, moves, and both penalties."""
    return float(
        config.swap_cost * decision.y.sum()
        + config.move_cost * (decision.z_plus.sum() + decision.z_minus.sum())
        + config.penalty_medium * decision.medium_use_excess.sum()
        + config.penalty_unmet * decision.sigma.sum()
    )


def validate_decision(config: SystemConfig, spots, fleet: FleetState,
                      demand: DemandScenario, decision: DecisionVector) -> FeasibilityReport:
    """Check a decision against every constraint family.

    Infeasibility is data, not an error: the report lists each violated
    family with the offending index and the (negative) slack.
    """
    report = FeasibilityReport()
    n = len(spots)
    v, y, z, u = fleet.v, decision.y, decision.z, decision.u
    xi, sigma, miduse = demand.xi, decision.sigma, decision.medium_use_excess

    def flag(family, index, slack):
        if slack < 0:
            report.violations.append(Violation(family, index, float(slack)))

    for i in range(n):
        for k in (K_LOW, K_MID):
            resid = abs(u[i, k] - (v[i, k] - y[i, k] + z[i, k]))
            flag("balance", (i, SOC_LEVELS[k]), -resid)
        resid = abs(u[i, K_FULL] - (v[i, K_FULL] + y[i].sum() + z[i, K_FULL]))
        flag("balance", (i, "k3"), -resid)
        flag("demand", (i,), u[i, K_MID] + u[i, K_FULL] + sigma[i] - xi[i])
        flag("capacity", (i,), spots[i].capacity - ((v[i] + z[i]).sum() - xi[i]))
        flag("miduse", (i,), miduse[i] + sigma[i] + u[i, K_FULL] - xi[i])

    flag("swap_budget", (), config.battery_capacity - y.sum())
    flag("vehicle_load", (), config.vehicle_capacity - (config.initial_full_ebikes - z.sum()))
    flag("full_drop_stock", (), config.initial_full_ebikes - z[:, K_FULL].sum())
    flag("net_full", (), z[:, K_FULL].sum())
    for k in (K_LOW, K_MID):
        flag("net_drain", (SOC_LEVELS[k],), -z[:, k].sum())

    for i in range(n):
        for k in (K_LOW, K_MID):
            flag("nonnegativity", ("y", i, SOC_LEVELS[k]), y[i, k])
            flag("swap_stock", ("y", i, SOC_LEVELS[k]), v[i, k] - y[i, k])
        for k in range(N_LEVELS):
            flag("nonnegativity", ("zp", i, SOC_LEVELS[k]), decision.z_plus[i, k])
            flag("nonnegativity", ("zm", i, SOC_LEVELS[k]), decision.z_minus[i, k])
            flag("nonnegativity", ("u", i, SOC_LEVELS[k]), u[i, k])
        flag("nonnegativity", ("unmet", i), sigma[i])
        flag("nonnegativity", ("miduse", i), miduse[i])
    return report


def decision_from_values(values: dict[str, float], n: int) -> DecisionVector:
    """Rebuild a DecisionVector from solver values keyed by variable name."""
    def grab(fmt, shape, ks):
        out = np.zeros(shape, dtype=np.int64)
        for i in range(n):
            for idx, k in enumerate(ks):
                out[i, idx] = round(values[fmt(i, k)])
        return out

    y = grab(var_y, (n, 2), (K_LOW, K_MID))
    zp = grab(var_zp, (n, N_LEVELS), range(N_LEVELS))
    zm = grab(var_zm, (n, N_LEVELS), range(N_LEVELS))
    u = grab(var_u, (n, N_LEVELS), range(N_LEVELS))
    sigma = np.array([round(values.get(var_unmet(i), 0)) for i in range(n)], dtype=np.int64)
    miduse = np.array([round(values.get(var_miduse(i), 0)) for i in range(n)], dtype=np.int64)
    return DecisionVector(y, zp, zm, u, sigma, miduse)
