"""Query-steered optimization loop over a pluggable language-model boundary.

One run is: match the query to a registered domain, synthesize a
query-relevant objective (with a validate-diagnose-reprompt safeguard),
then iterate: rank spot relevance and parameterize the least relevant
decisions to historical means, solve the scoped two-priority problem, and
score the satisfaction factor against the historical baseline until it
stays positive for a configured streak or the iteration budget runs out.

The mock adapter is fully deterministic (keyword routing, template
objectives, store-derived relevance ranking) so every test and benchmark is
reproducible without a live endpoint.
"""

from __future__ import annotations

import json
import math
import os
import re
import urllib.request
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .. import dsl
from ..embed import assemble_e2e, free_decision_count, routed_point, scope_down
from ..forest import partial_evaluate
from ..history import (HistoricalMeans, Store, decision_feature_names,
                       historical_means, record_features)
from ..model import (K_FULL, K_LOW, K_MID, N_LEVELS, SOC_LEVELS, FleetState,
                     SystemConfig, var_u, var_y, var_zm, var_zp)
from ..solver import SolverOptions, solve_lexicographic

TRACE_FORMAT = "ebsopt-trace v1"


class AgentError(RuntimeError):
    pass


class GenerationError(AgentError):
    """Safeguard budget exhausted; carries every diagnosis seen."""

    def __init__(self, message, attempts):
        super().__init__(message)
        self.attempts = attempts  # list of (completion, [diagnosis text])


# ---------------------------------------------------------------------------
# queries and configuration


@dataclass(frozen=True)
class Query:
    text: str
    declared_spots: tuple | None = None
    max_parameterized: int | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise AgentError("query text must be nonempty")


@dataclass(frozen=True)
class AgentConfig:
    max_iter: int = 5
    satisfaction_streak: int = 2
    max_parameterized_spots: int | None = None
    min_parameterized_spots: int = 0
    repair_budget: int = 3
    solver: SolverOptions = field(default_factory=SolverOptions)


_SPOT_PATTERN = re.compile(r"(?:no\.?\s*)?(\d+)", re.IGNORECASE)


def extract_declared_spots(text: str, n_spots: int):
    """Spot labels mentioned in prose are 1-based ("spot NO.1" is id 0)."""
    mentioned = []
    for m in _SPOT_PATTERN.finditer(text):
        label = int(m.group(1))
        if label < 1 or label > n_spots:
            raise AgentError(f"query mentions spot {label}, outside the 1..{n_spots} roster")
        if label - 1 not in mentioned:
            mentioned.append(label - 1)
    return mentioned


# ---------------------------------------------------------------------------
# prompt templates


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    def slots(self):
        return set(re.findall(r"\{([A-Za-z ]+)\}", self.body))

    def render(self, **values) -> str:
        out = self.body
        missing = []
        for slot in self.slots():
            key = slot.replace(" ", "_")
            if key in values:
                out = out.replace("{" + slot + "}", str(values[key]))
            else:
                missing.append(slot)
        if missing:
            raise AgentError(f"template {self.name}: unfilled slots {sorted(missing)}")
        return out


def load_template(name: str) -> PromptTemplate:
    body = resources.files(__package__).joinpath(f"prompts/{name}.txt").read_text("utf-8")
    return PromptTemplate(name, body)


def notations_text(n_spots: int) -> str:
    return (
        f"I = spots 0..{n_spots - 1}; K = SOC levels k1 (low), k2 (medium), k3 (high).\n"
        "u[i,k] stock after operations; y[i,k] battery swaps (k1/k2 only);\n"
        "z[i,k] net moved bikes; C[i] spot capacity.\n"
        "Grammar: maximize|minimize expr; sum(expr for i in I, k in {k2,k3});\n"
        "literals, scalar *, +, -, (...)^2 of linear expressions."
    )


GROUND_TRUTH_EXAMPLES = "\n".join([
    "maximize sum(u[i,k] for i in I, k in {k2,k3})",
    "minimize sum(u[i,k1] for i in I)",
    "minimize sum((sum(u[i,k] for k in K) - C[i])^2 for i in I)",
    "minimize sum(y[i,k]^2 + z[i,k]^2 for i in I, k in {k1,k2})",
])


# ---------------------------------------------------------------------------
# adapters


class MockAdapter:
    """Deterministic stand-in for a live model: keyword routing and
    template objectives. Relevance ranking is computed locally by the
    tailor when this adapter is active."""

    name = "mock"
    is_mock = True

    def __init__(self, seed: int = 0, behavior: str = "good"):
        self.seed = seed
        self.behavior = behavior
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        if "### task matcher" in prompt:
            return self._match(prompt)
        if "### task generator" in prompt:
            if self.behavior == "garbage":
                return "junk ?? not an objective"
            if self.behavior == "flaky" and self.calls <= 2:
                return "maximize sum(u[i,k9] for i in I)"
            return self._generate(prompt)
        if "### task tailor" in prompt:
            return "parameterize:"
        if "### task selection-check" in prompt:
            return "ok"
        return "domain: unknown"

    @staticmethod
    def _section(prompt, header):
        marker = f"### {header}\n"
        if marker not in prompt:
            return ""
        chunk = prompt.split(marker, 1)[1]
        return chunk.split("###", 1)[0].strip()

    def _match(self, prompt):
        query = self._section(prompt, "query").lower()
        for tag, words in DOMAIN_REGISTRY.items():
            if any(w in query for w in words):
                return f"domain: {tag}"
        return "domain: unknown"

    def _generate(self, prompt):
        query = self._section(prompt, "query").lower()
        spots = self._section(prompt, "spots")
        over = "I"
        if spots and spots != "all":
            over = "{" + spots + "}"
        if "utilization" in query:
            return f"minimize sum((sum(u[i,k] for k in K) - C[i])^2 for i in {over})"
        if "turnover" in query:
            return f"minimize sum(y[i,k]^2 + z[i,k]^2 for i in {over}, k in {{k1,k2}})"
        if ("low" in query and ("soc" in query or "charge" in query or "power" in query)) \
                or "deplet" in query:
            return f"minimize sum(u[i,k1] for i in {over})"
        return f"maximize sum(u[i,k] for i in {over}, k in {{k2,k3}})"


class LiveHttpAdapter:
    """Chat-completion-style HTTP adapter. Endpoint and credentials come
    from the environment; request/response bodies follow the common
    messages schema. Stateless per call; the caller owns retries."""

    name = "live"
    is_mock = False

    URL_VAR = "EBSOPT_LLM_URL"
    KEY_VAR = "EBSOPT_LLM_API_KEY"
    MODEL_VAR = "EBSOPT_LLM_MODEL"

    def __init__(self, url=None, model=None, timeout=60.0):
        self.url = url or os.environ.get(self.URL_VAR)
        if not self.url:
            raise AgentError(f"live adapter needs {self.URL_VAR}")
        self.model = model or os.environ.get(self.MODEL_VAR, "default")
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        body = json.dumps({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }).encode("utf-8")
        req = urllib.request.Request(self.url, data=body,
                                     headers={"Content-Type": "application/json"})
        key = os.environ.get(self.KEY_VAR)
        if key:
            req.add_header("Authorization", f"Bearer {key}")
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise AgentError(f"malformed completion payload: {payload!r}") from None


DOMAIN_REGISTRY = {
    "ebs": ("bike", "e-bike", "ebike", "spot", "station", "battery", "soc",
            "dock", "rebalanc", "charge"),
}


# ---------------------------------------------------------------------------
# pipeline steps


def match_problem(query: Query, adapter, registry=None) -> str:
    """Returns a registered domain tag or "unmatched" -- never a guess."""
    registry = DOMAIN_REGISTRY if registry is None else registry
    if not registry:
        return "unmatched"
    template = load_template("matcher")
    prompt = template.render(Domains=", ".join(sorted(registry)), Input=query.text)
    reply = adapter.complete(prompt).strip().lower()
    m = re.search(r"domain:\s*([a-z0-9_-]+)", reply)
    tag = m.group(1) if m else "unknown"
    return tag if tag in registry else "unmatched"


def _final_objective_line(completion: str) -> str:
    lines = [ln.strip() for ln in completion.strip().splitlines() if ln.strip()]
    for line in reversed(lines):
        if line.startswith(("maximize", "minimize")):
            return line
    return lines[-1] if lines else ""


def generate_qr_obj(query: Query, adapter, universe: dsl.Universe,
                    declared, repair_budget: int = 3, transcript=None):
    """Objective synthesis under the code safeguard: validate, diagnose,
    re-prompt, up to the repair budget."""
    spots_text = ",".join(str(s) for s in declared) if declared else "all"
    prompt = load_template("generator").render(
        Notations=notations_text(universe.n_spots), Input=query.text,
        Spots=spots_text, Ground_truth=GROUND_TRUTH_EXAMPLES)
    attempts = []
    for round_no in range(repair_budget):
        completion = adapter.complete(prompt)
        if transcript is not None:
            transcript.append({"role": "generator", "prompt": prompt,
                               "completion": completion})
        text = _final_objective_line(completion)
        try:
            ast = dsl.parse(text)
            diags = dsl.validate(ast, universe=universe)
        except dsl.ParseError as exc:
            diags = [dsl.Diagnosis("syntax", str(exc))]
            ast = None
        if not diags:
            return ast, text
        attempts.append((text, [str(d) for d in diags]))
        prompt = load_template("safeguard").render(
            DSL_code=text, Error_traceback="\n".join(str(d) for d in diags),
            Notations=notations_text(universe.n_spots), Spots=spots_text)
    raise GenerationError(
        f"objective generation failed after {repair_budget} rounds; last errors: "
        + "; ".join(attempts[-1][1]), attempts)


def relevance_scores(store: Store, declared) -> np.ndarray:
    """Deterministic spot relevance to the declared set: normalized
    origin-destination flow, inverse distance, and co-rebalancing
    frequency."""
    n = store.n_spots
    declared = set(declared)
    od = np.zeros(n)
    for a, b in zip(store.trip_start, store.trip_end):
        if a in declared and b not in declared:
            od[b] += 1
        elif b in declared and a not in declared:
            od[a] += 1
    inv_dist = np.zeros(n)
    for i in range(n):
        if i in declared:
            continue
        best = min(
            math.hypot(store.spots[i].latitude - store.spots[d].latitude,
                       store.spots[i].longitude - store.spots[d].longitude)
            for d in declared) if declared else 1.0
        inv_dist[i] = 1.0 / (1e-6 + best)
    co = np.zeros(n)
    for rec in store.ops:
        active = np.abs(rec.z).sum(axis=1) > 0
        if any(active[d] for d in declared):
            co += active
    for arr in (od, inv_dist, co):
        top = arr.max()
        if top > 0:
            arr /= top
    return od + inv_dist + co


def tailor(query: Query, store: Store, adapter, prev, config: AgentConfig,
           declared, transcript=None):
    """(free spot set, parameterized spot list). Declared spots are always
    free; the lowest-relevance spots are parameterized, most at the
    configured cap, fewer after an unsatisfied iteration."""
    n = store.n_spots
    declared = sorted(set(declared))
    available = n - len(declared)
    cap = config.max_parameterized_spots
    cap = available if cap is None else min(cap, available)
    if config.min_parameterized_spots > available:
        raise AgentError(
            f"min_parameterized_spots {config.min_parameterized_spots} exceeds "
            f"the {available} spots available for parameterization")
    prev_pins, prev_s = prev
    n_param = max(cap, config.min_parameterized_spots)
    if prev_s is not None and prev_s.value <= 0 and prev_pins:
        # last round did not satisfy: release half of the pinned spots
        n_param = max(config.min_parameterized_spots, len(prev_pins) // 2)

    scores = relevance_scores(store, declared)
    candidates = sorted((i for i in range(n) if i not in set(declared)),
                        key=lambda i: (scores[i], i))
    chosen = candidates[:n_param]

    prompt = load_template("tailor").render(
        Database_description=f"{store.n_trips} trips, {len(store.ops)} operating days, "
                             f"{n} spots",
        Input=query.text,
        Spots=",".join(map(str, declared)) or "all",
        Formulation="(see generated objective)",
        Selection=",".join(map(str, sorted(prev_pins))) if prev_pins else "none",
        Satisfaction="n/a" if prev_s is None else f"{prev_s.value:+.4f}",
        Min=config.min_parameterized_spots, Max=cap)
    if getattr(adapter, "is_mock", False):
        if transcript is not None:
            transcript.append({"role": "tailor", "prompt": prompt,
                               "completion": f"parameterize: {','.join(map(str, chosen))} "
                                             "(local deterministic ranking)"})
    else:
        reply = adapter.complete(prompt)
        if transcript is not None:
            transcript.append({"role": "tailor", "prompt": prompt, "completion": reply})

        def parse_selection(text):
            m = re.search(r"parameterize:\s*([0-9,\s]*)", text)
            if not m:
                return None
            proposal = sorted({int(tok) for tok in re.findall(r"\d+", m.group(1))})
            proposal = [i for i in proposal if 0 <= i < n and i not in set(declared)]
            if config.min_parameterized_spots <= len(proposal) <= cap:
                return proposal
            return None

        proposal = parse_selection(reply)
        if proposal is None:
            # selection safeguard: one review round before falling back to
            # the deterministic ranking
            check_prompt = load_template("selection_check").render(
                Selection=reply.strip()[:500],
                Spots=",".join(map(str, declared)) or "all",
                Min=config.min_parameterized_spots, Max=cap)
            review = adapter.complete(check_prompt)
            if transcript is not None:
                transcript.append({"role": "selection-check", "prompt": check_prompt,
                                   "completion": review})
            proposal = parse_selection(review)
        if proposal is not None:
            chosen = proposal
    keep = sorted(set(range(n)) - set(chosen))
    return keep, sorted(chosen)


@dataclass
class SatisfactionFactor:
    value: float
    baseline_zero: bool = False

    def __str__(self):
        if self.baseline_zero:
            return f"sentinel({'+' if self.value > 0 else '-' if self.value < 0 else ''}inf)"
        return f"{self.value:+.4f}"


def satisfaction(f_star: float, f_hist: float, sense: str) -> SatisfactionFactor:
    """Sense-normalized relative improvement over the historical baseline;
    positive always means the query is better served."""
    improvement = (f_star - f_hist) if sense == "maximize" else (f_hist - f_star)
    if f_hist == 0:
        if improvement == 0:
            return SatisfactionFactor(0.0, baseline_zero=True)
        return SatisfactionFactor(math.copysign(math.inf, improvement), baseline_zero=True)
    return SatisfactionFactor(improvement / abs(f_hist))


# ---------------------------------------------------------------------------
# the full loop


@dataclass
class IterationRecord:
    t: int
    free_spots: list
    parameterized: list
    pins: dict
    satisfaction: SatisfactionFactor
    cost_objective: float
    qr_objective: float
    solver_status: str
    solver_invocations: int
    wall_time: float
    free_decisions: int


@dataclass
class AgentTrace:
    query_text: str
    domain: str = ""
    qr_text: str = ""
    canonical_key: str = ""
    sense: str = ""
    baseline: float = 0.0
    iterations: list = field(default_factory=list)
    transcript: list = field(default_factory=list)
    final_status: str = "incomplete"
    error: str = ""

    def to_dict(self):
        return {
            "format": TRACE_FORMAT,
            "query": self.query_text,
            "domain": self.domain,
            "qr_text": self.qr_text,
            "canonical_key": self.canonical_key,
            "sense": self.sense,
            "baseline": self.baseline,
            "final_status": self.final_status,
            "error": self.error,
            "iterations": [
                {
                    "t": it.t,
                    "free_spots": it.free_spots,
                    "parameterized": it.parameterized,
                    "pins": it.pins,
                    "satisfaction": None if it.satisfaction.baseline_zero
                    else it.satisfaction.value,
                    "satisfaction_sentinel": it.satisfaction.baseline_zero,
                    "cost_objective": it.cost_objective,
                    "qr_objective": it.qr_objective,
                    "solver_status": it.solver_status,
                    "solver_invocations": it.solver_invocations,
                    "wall_time": it.wall_time,
                    "free_decisions": it.free_decisions,
                }
                for it in self.iterations
            ],
            "transcript": self.transcript,
        }

    def to_text(self) -> str:
        return TRACE_FORMAT + "\n" + json.dumps(self.to_dict(), indent=1, default=str)

    @staticmethod
    def parse_text(text: str) -> dict:
        header, _, body = text.partition("\n")
        if header != TRACE_FORMAT:
            raise AgentError(f"unsupported trace format {header!r}")
        return json.loads(body)


@dataclass
class AgentResponse:
    status: str              # satisfied | no-improvement | max-iterations | unmatched | failed
    satisfaction: SatisfactionFactor | None
    cost_objective: float | None
    qr_objective: float | None
    decisions: dict
    explanation: str
    qr_text: str = ""


def instance_from_store(store: Store, config: SystemConfig):
    """Solve-time instance: the latest simulated stock as today's fleet and
    that day's context features."""
    if not store.ops:
        raise AgentError("store has no operations records; simulate first")
    last = store.ops[-1]
    fleet = FleetState(last.u)
    _, ctx = record_features(last, store)
    # stock context reflects the fleet the solver will operate on
    ctx[3:6] = [last.u[:, K_LOW].sum(), last.u[:, K_MID].sum(), last.u[:, K_FULL].sum()]
    return fleet, ctx


def baseline_point(means: HistoricalMeans, store: Store) -> dict:
    """Historical-means point over every coordinate, rounded like pins."""
    from ..embed import round_half_toward_zero
    point = {}
    for name in decision_feature_names(store.n_spots):
        point[name] = float(round_half_toward_zero(means.get(name)))
    if store.ops:
        mean_u = np.stack([rec.u for rec in store.ops]).mean(axis=0)
        for i in range(store.n_spots):
            for k in range(N_LEVELS):
                point[f"u[{i},{SOC_LEVELS[k]}]"] = float(round_half_toward_zero(
                    float(mean_u[i, k])))
    return point


def _clamped_pin_means(means: HistoricalMeans, problem) -> dict:
    """Pins clamped so each spot stays internally consistent on the given
    day: swaps within today's stock, net moves keeping the implied
    post-operation stock inside [0, capacity]."""
    from ..embed import round_half_toward_zero
    fleet_v = problem.metadata.get("fleet_v")
    n = problem.metadata["n_spots"]
    clamped = {}
    for i in range(n):
        v = fleet_v[i] if fleet_v is not None else None
        y_pin = {}
        for k in (K_LOW, K_MID):
            name = f"y[{i},{SOC_LEVELS[k]}]"
            var = problem.variables[problem.index_of(var_y(i, k))]
            value = float(min(max(round_half_toward_zero(means.get(name)), var.lb), var.ub))
            clamped[name] = value
            y_pin[k] = value
        for k in range(N_LEVELS):
            name = f"z[{i},{SOC_LEVELS[k]}]"
            zmax = problem.variables[problem.index_of(var_zp(i, k))].ub
            value = float(min(max(round_half_toward_zero(means.get(name)), -zmax), zmax))
            if v is not None:
                cap = problem.variables[problem.index_of(var_u(i, k))].ub
                if k == K_FULL:
                    base = v[k] + y_pin[K_LOW] + y_pin[K_MID]
                else:
                    base = v[k] - y_pin[k]
                value = float(min(max(value, -base), cap - base))
            clamped[name] = value
    return clamped


def run(query: Query, store: Store, forest, adapter, config: AgentConfig | None = None,
        system_config: SystemConfig | None = None, spots=None, on_iteration=None):
    """Execute the full loop; returns (AgentResponse, AgentTrace). Stage
    errors are captured in the trace, and a partial trace is always
    returned."""
    config = config or AgentConfig()
    system_config = system_config or SystemConfig()
    spots = spots if spots is not None else store.spots
    trace = AgentTrace(query_text=query.text)

    try:
        domain = match_problem(query, adapter)
        trace.domain = domain
        if domain == "unmatched":
            trace.final_status = "unmatched"
            return AgentResponse("unmatched", None, None, None, {},
                                 "No registered domain matches the query."), trace

        n = len(spots)
        declared = list(query.declared_spots) if query.declared_spots is not None \
            else extract_declared_spots(query.text, n)
        for s in declared:
            if not 0 <= s < n:
                raise AgentError(f"declared spot {s} outside the 0..{n - 1} roster")
        universe = dsl.Universe(n, tuple(s.capacity for s in spots))

        ast, qr_text = generate_qr_obj(query, adapter, universe, declared,
                                       config.repair_budget, trace.transcript)
        canonical = dsl.canonicalize(ast, universe)
        trace.qr_text = qr_text
        trace.canonical_key = canonical.key()
        trace.sense = canonical.sense

        fleet, context = instance_from_store(store, system_config)
        reduced = partial_evaluate(forest, context)
        base_problem = assemble_e2e(system_config, spots, fleet, reduced)

        means = historical_means(store)
        pins_means = _clamped_pin_means(means, base_problem)
        f_hist = canonical.evaluate(baseline_point(means, store))
        trace.baseline = f_hist

        if query.max_parameterized is not None:
            config = AgentConfig(config.max_iter, config.satisfaction_streak,
                                 query.max_parameterized, config.min_parameterized_spots,
                                 config.repair_budget, config.solver)

        streak = 0
        prev = ({}, None)
        best = None
        for t in range(1, config.max_iter + 1):
            if on_iteration is not None:
                on_iteration(t)
            keep, parameterized = tailor(query, store, adapter, prev, config,
                                         declared, trace.transcript)
            scoped = scope_down(base_problem, keep, pins_means)
            problem = scoped.problem
            coeffs, constant, fragments = dsl.to_objective(canonical, problem)
            problem.add_objective(coeffs, "min" if canonical.sense == "minimize" else "max",
                                  priority=1, constant=constant, fragments=fragments)
            warm = routed_point(reduced, problem, scoped.pinned_values)
            sol = solve_lexicographic(problem, config.solver, warm)
            if not sol.ok:
                raise AgentError(f"iteration {t}: solver returned {sol.status} "
                                 f"({sol.detail})")
            f_star = sol.objective_values[1]
            s_t = satisfaction(f_star, f_hist, canonical.sense)
            trace.iterations.append(IterationRecord(
                t, keep, parameterized, dict(scoped.pinned_values), s_t,
                sol.objective_values[0], f_star, sol.status, 2, sol.wall_time,
                free_decision_count(base_problem, scoped)))
            best = (sol, keep, s_t)
            streak = streak + 1 if s_t.value > 0 else 0
            prev = (parameterized, s_t)
            if streak >= config.satisfaction_streak:
                break

        if streak >= config.satisfaction_streak:
            status = "satisfied"
        elif any(it.satisfaction.value > 0 for it in trace.iterations):
            status = "max-iterations"
        else:
            status = "no-improvement"
        trace.final_status = status

        sol, keep, s_star = best
        decisions = {}
        for i in keep:
            decisions[i] = {
                "swaps": {SOC_LEVELS[k]: int(round(sol.values[var_y(i, k)]))
                          for k in (K_LOW, K_MID)},
                "moves": {SOC_LEVELS[k]: int(round(sol.values[var_zp(i, k)]
                                                   - sol.values[var_zm(i, k)]))
                          for k in range(N_LEVELS)},
                "stock": {SOC_LEVELS[k]: int(round(sol.values[var_u(i, k)]))
                          for k in range(N_LEVELS)},
            }
        explanation = _render_explanation(trace, status, s_star, sol, keep, n)
        return AgentResponse(status, s_star, sol.objective_values[0],
                             sol.objective_values[1], decisions, explanation,
                             qr_text), trace
    except Exception as exc:  # noqa: BLE001 - stage errors become trace data
        trace.final_status = "failed"
        trace.error = f"{type(exc).__name__}: {exc}"
        return AgentResponse("failed", None, None, None, {},
                             f"Run failed: {trace.error}"), trace


def _render_explanation(trace, status, s_star, sol, keep, n) -> str:
    lines = [
        f"Objective: {trace.qr_text}",
        f"Scoped to {len(keep)} of {n} spots "
        f"({n - len(keep)} parameterized to historical means).",
        f"Predicted operating cost {sol.objective_values[0]:.2f}; "
        f"query objective {sol.objective_values[1]:.2f} "
        f"vs historical baseline {trace.baseline:.2f} ({s_star}).",
    ]
    if status == "satisfied":
        lines.append("The query objective improved consistently; plan accepted.")
    elif status == "no-improvement":
        lines.append("No iteration improved on the historical baseline; "
                     "the historical plan already serves the query.")
    else:
        lines.append("Iteration budget reached before a stable improvement streak.")
    return "\n".join(lines)
