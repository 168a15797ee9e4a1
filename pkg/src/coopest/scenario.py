"""Scenario files: JSON schema, validation and exact round-trip serialization.

A scenario describes the network (agents, graph, measurement weight), the
estimator design, an optional regulator design, the simulation runs and where
to write outputs. Matrices are objects ``{"rows": r, "cols": c, "data":
[[...], ...]}`` with the data listed row by row.

Validation happens in two passes: the JSON schema catches structural problems
(unknown keys, wrong types), then dimension checks run against the parsed
model. Both raise :class:`~coopest.errors.ScenarioError` with a dotted field
path such as ``network.agents[2].A.data[1]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .errors import ScenarioError
from .graph import DirectedGraph
from .model import AgentModel, Network
from .sim import KINDS, DisturbanceSpec, SimConfig

W_SELF_IDENTITY = "self-identity"
W_FROM_REGULATOR = "from-regulator"
CHECKS = (
    "estimation_inequality",
    "sync_inequality",
    "sync_tail",
    "zeta_consensus",
    "lyapunov_decay",
    "dissipation",
)

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_MATRIX = {
    "type": "object",
    "additionalProperties": False,
    "required": ["rows", "cols", "data"],
    "properties": {
        "rows": {"type": "integer", "minimum": 0},
        "cols": {"type": "integer", "minimum": 0},
        "data": {"type": "array", "items": {"type": "array", "items": _NUM}},
    },
}
_VECTOR = {"type": "array", "items": _NUM}
_RANDOM_INIT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["random"],
    "properties": {
        "random": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"scale": _POS},
        }
    },
}
_DISTURBANCE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "amplitude": _NUM,
        "frequency": _NUM,
        "decay": _POS,
        "center": _NUM,
        "width": _POS,
        "seed": {"type": "integer", "minimum": 0},
        "n_terms": {"type": "integer", "minimum": 1},
    },
}
SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["network", "estimator"],
    "properties": {
        "name": {"type": "string"},
        "network": {
            "type": "object",
            "additionalProperties": False,
            "required": ["omega", "graph", "agents"],
            "properties": {
                "omega": _POS,
                "graph": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["n_vertices", "edges"],
                    "properties": {
                        "n_vertices": {"type": "integer", "minimum": 1},
                        "edges": {
                            "type": "array",
                            "items": {
                                "type": "array",
                                "items": {"type": "integer"},
                                "minItems": 2,
                                "maxItems": 2,
                            },
                        },
                    },
                },
                "agents": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["A", "B", "Btilde", "C"],
                        "properties": {k: _MATRIX for k in ("A", "B", "Btilde", "C")},
                    },
                },
            },
        },
        "estimator": {
            "type": "object",
            "additionalProperties": False,
            "required": ["alpha", "pi", "W", "gamma"],
            "properties": {
                "alpha": _POS,
                "pi": {"oneOf": [_POS, {"type": "array", "items": _POS}]},
                "W": {
                    "oneOf": [
                        {"enum": [W_SELF_IDENTITY, W_FROM_REGULATOR]},
                        {"type": "array", "items": _MATRIX},
                    ]
                },
                "gamma": {"oneOf": [{"const": "minimize"}, _POS]},
                "bracket": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
                "rtol": _POS,
                "eps": _POS,
                "centralized": {"type": "boolean"},
            },
        },
        "regulator": {
            "type": "object",
            "additionalProperties": False,
            "required": ["S", "Gamma", "mu", "lambda", "R"],
            "properties": {
                "S": _MATRIX,
                "Gamma": _MATRIX,
                "mu": _POS,
                "lambda": _POS,
                "R": {"oneOf": [_MATRIX, {"type": "array", "items": _MATRIX}]},
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["runs"],
            "properties": {
                "t_end": _POS,
                "h": _POS,
                "substeps": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "sync_threshold": _POS,
                "consensus_threshold": _POS,
                "runs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["name", "mode"],
                        "properties": {
                            "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                            "mode": {"enum": ["estimation", "closed_loop"]},
                            "repeat": {"type": "integer", "minimum": 1},
                            "x0": {"oneOf": [_VECTOR, _RANDOM_INIT]},
                            "zeta0": {
                                "oneOf": [
                                    _VECTOR,
                                    _RANDOM_INIT,
                                    {
                                        "type": "object",
                                        "additionalProperties": False,
                                        "required": ["identical"],
                                        "properties": {"identical": _VECTOR},
                                    },
                                ]
                            },
                            "xi": _DISTURBANCE,
                            "eta": _DISTURBANCE,
                            "checks": {"type": "array", "items": {"enum": list(CHECKS)}},
                        },
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "traces": {"type": "boolean"}},
        },
    },
}


def _path(parts):
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def matrix_from_json(obj, where):
    rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    if len(data) != rows:
        raise ScenarioError(f"{where}.data", f"has {len(data)} rows, expected rows={rows}")
    for i, row in enumerate(data):
        if len(row) != cols:
            raise ScenarioError(f"{where}.data[{i}]", f"row has {len(row)} entries, expected cols={cols}")
    return np.array(data, dtype=float).reshape(rows, cols)


def matrix_to_json(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]), "data": [[float(v) for v in row] for row in M]}


@dataclass(frozen=True)
class EstimatorSection:
    alpha: float
    pi: tuple
    W: object  # W_SELF_IDENTITY, W_FROM_REGULATOR or a tuple of matrices
    gamma: object  # "minimize" or a float
    bracket: tuple = (0.1, 100.0)
    rtol: float = 1e-2
    eps: float = 1e-6
    centralized: bool = False


@dataclass(frozen=True)
class RegulatorSection:
    S: np.ndarray
    Gamma: np.ndarray
    mu: float
    lambda_gain: float
    R: tuple


@dataclass(frozen=True)
class RunSpec:
    """One configured simulation, possibly repeated with fresh seeds."""

    name: str
    mode: str
    repeat: int = 1
    x0: object = None
    zeta0: object = None
    xi: dict = field(default_factory=lambda: {"kind": "zero"})
    eta: dict = field(default_factory=lambda: {"kind": "zero"})
    checks: tuple = ()

    def instances(self):
        """Expanded run names (``name`` or ``name-01``, ``name-02``...)."""
        if self.repeat == 1:
            return [self.name]
        return [f"{self.name}-{i + 1:02d}" for i in range(self.repeat)]


@dataclass(frozen=True)
class SimulationSection:
    runs: tuple
    t_end: float = 60.0
    h: float = 0.01
    substeps: int | None = None
    seed: int = 0
    sync_threshold: float = 1e-3
    consensus_threshold: float = 1e-6


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"
    traces: bool = True


@dataclass(frozen=True)
class Scenario:
    network: Network
    estimator: EstimatorSection
    regulator: RegulatorSection | None = None
    simulation: SimulationSection | None = None
    output: OutputSection = field(default_factory=OutputSection)
    name: str = "scenario"

    def expanded_runs(self, seed=None):
        """``(run_name, RunSpec, SimConfig)`` for every run instance.

        Random initial states and seeds left unset in disturbances are derived
        from the base seed (``seed`` overrides the scenario value) and the
        global instance index, so runs are reproducible and distinct.
        """
        if self.simulation is None:
            return []
        sim = self.simulation
        base = sim.seed if seed is None else int(seed)
        nx = sum(a.n for a in self.network.agents)
        nu = 0 if self.regulator is None else self.regulator.S.shape[0]
        out = []
        index = 0
        for i, spec in enumerate(sim.runs):
            where = f"simulation.runs[{i}]"
            for name in spec.instances():
                rng = np.random.default_rng([base, index])
                x0 = _initial(spec.x0, nx, rng, f"{where}.x0")
                zeta0 = None
                if spec.mode == "closed_loop":
                    zeta0 = _initial(spec.zeta0, self.network.N * nu, rng, f"{where}.zeta0", block=nu)
                cfg = SimConfig(
                    t_end=sim.t_end,
                    h=sim.h,
                    x0=x0,
                    zeta0=zeta0,
                    xi=_disturbance(spec.xi, base, index),
                    eta=_disturbance(spec.eta, base, index),
                    substeps=sim.substeps,
                )
                out.append((name, spec, cfg))
                index += 1
        return out


def _initial(spec, size, rng, what, block=None):
    if spec is None:
        return np.zeros(size)
    if isinstance(spec, dict) and "random" in spec:
        return rng.normal(size=size) * spec["random"].get("scale", 1.0)
    if isinstance(spec, dict) and "identical" in spec:
        v = np.asarray(spec["identical"], dtype=float)
        if v.size != block:
            raise ScenarioError(f"{what}.identical", f"has {v.size} entries, expected {block}")
        return np.tile(v, size // max(block, 1))
    v = np.asarray(spec, dtype=float)
    if v.size != size:
        raise ScenarioError(what, f"has {v.size} entries, expected {size}")
    return v


def _disturbance(spec, base_seed, index):
    kw = dict(spec)
    if kw.get("kind") == "seeded_random_l2" and "seed" not in kw:
        kw["seed"] = int(base_seed) * 100003 + index
    return DisturbanceSpec(**kw)


def _validate_schema(doc):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ScenarioError(_path(err.absolute_path), err.message)


def _per_agent(value, N, where, convert):
    if isinstance(value, list):
        if len(value) != N:
            raise ScenarioError(where, f"has {len(value)} entries, expected one per agent ({N})")
        return tuple(convert(v, f"{where}[{i}]") for i, v in enumerate(value))
    return tuple([convert(value, where)] * N)


def from_dict(doc):
    """Validate a decoded scenario document and build a :class:`Scenario`."""
    _validate_schema(doc)
    nw = doc["network"]
    agents = []
    for i, a in enumerate(nw["agents"]):
        where = f"network.agents[{i}]"
        mats = {k: matrix_from_json(a[k], f"{where}.{k}") for k in ("A", "B", "Btilde", "C")}
        try:
            agents.append(AgentModel(**mats))
        except ValueError as exc:
            raise ScenarioError(where, str(exc)) from None
    g = nw["graph"]
    try:
        graph = DirectedGraph(g["n_vertices"], tuple(tuple(e) for e in g["edges"]))
    except ValueError as exc:
        raise ScenarioError("network.graph", str(exc)) from None
    try:
        net = Network(tuple(agents), graph, float(nw["omega"]))
    except ValueError as exc:
        raise ScenarioError("network", str(exc)) from None
    N = net.N

    reg = None
    if "regulator" in doc:
        r = doc["regulator"]
        S = matrix_from_json(r["S"], "regulator.S")
        Gamma = matrix_from_json(r["Gamma"], "regulator.Gamma")
        if S.shape[0] != S.shape[1]:
            raise ScenarioError("regulator.S", "must be square")
        if Gamma.shape != (net.r, S.shape[0]):
            raise ScenarioError("regulator.Gamma", f"has shape {Gamma.shape}, expected {(net.r, S.shape[0])}")
        R = _per_agent(r["R"], N, "regulator.R", matrix_from_json)
        for i, (Rk, a) in enumerate(zip(R, agents)):
            if Rk.shape != (a.n, a.n):
                raise ScenarioError(f"regulator.R[{i}]", f"has shape {Rk.shape}, expected {(a.n, a.n)}")
        reg = RegulatorSection(S, Gamma, float(r["mu"]), float(r["lambda"]), R)

    e = doc["estimator"]
    pi = _per_agent(e["pi"], N, "estimator.pi", lambda v, w: float(v))
    W = e["W"]
    if W == W_FROM_REGULATOR and reg is None:
        raise ScenarioError("estimator.W", "'from-regulator' needs a regulator section")
    if isinstance(W, list):
        W = _per_agent(W, N, "estimator.W", matrix_from_json)
        for i, (Wk, k) in enumerate(zip(W, range(1, N + 1))):
            sigma = agents[k - 1].n + sum(agents[j - 1].n for j in graph.in_neighbors(k))
            if Wk.shape != (sigma, sigma):
                raise ScenarioError(f"estimator.W[{i}]", f"has shape {Wk.shape}, expected {(sigma, sigma)}")
    bracket = tuple(float(b) for b in e.get("bracket", (0.1, 100.0)))
    if not bracket[0] < bracket[1]:
        raise ScenarioError("estimator.bracket", "lower end must be below upper end")
    est = EstimatorSection(
        alpha=float(e["alpha"]),
        pi=pi,
        W=W,
        gamma=e["gamma"] if e["gamma"] == "minimize" else float(e["gamma"]),
        bracket=bracket,
        rtol=float(e.get("rtol", 1e-2)),
        eps=float(e.get("eps", 1e-6)),
        centralized=bool(e.get("centralized", False)),
    )

    sim = None
    if "simulation" in doc:
        s = doc["simulation"]
        runs = []
        names = set()
        for i, run in enumerate(s["runs"]):
            where = f"simulation.runs[{i}]"
            if run["mode"] == "closed_loop" and reg is None:
                raise ScenarioError(f"{where}.mode", "closed_loop runs need a regulator section")
            spec = RunSpec(
                name=run["name"],
                mode=run["mode"],
                repeat=int(run.get("repeat", 1)),
                x0=run.get("x0"),
                zeta0=run.get("zeta0"),
                xi=dict(run.get("xi", {"kind": "zero"})),
                eta=dict(run.get("eta", {"kind": "zero"})),
                checks=tuple(run.get("checks", ())),
            )
            for which in ("xi", "eta"):
                try:
                    _disturbance(getattr(spec, which), 0, 0)
                except ValueError as exc:
                    raise ScenarioError(f"{where}.{which}", str(exc)) from None
            if spec.mode == "estimation":
                bad = [c for c in spec.checks if c in ("sync_inequality", "sync_tail", "zeta_consensus")]
                if bad:
                    raise ScenarioError(f"{where}.checks", f"{bad} need a closed_loop run")
            for n in spec.instances():
                if n in names:
                    raise ScenarioError(f"{where}.name", f"duplicate run name {n!r}")
                names.add(n)
            runs.append(spec)
        sim = SimulationSection(
            runs=tuple(runs),
            t_end=float(s.get("t_end", 60.0)),
            h=float(s.get("h", 0.01)),
            substeps=s.get("substeps"),
            seed=int(s.get("seed", 0)),
            sync_threshold=float(s.get("sync_threshold", 1e-3)),
            consensus_threshold=float(s.get("consensus_threshold", 1e-6)),
        )
        try:
            SimConfig(t_end=sim.t_end, h=sim.h, substeps=sim.substeps)
        except ValueError as exc:
            raise ScenarioError("simulation", str(exc)) from None

    o = doc.get("output", {})
    out = OutputSection(dir=o.get("dir", "out"), traces=bool(o.get("traces", True)))
    scen = Scenario(net, est, reg, sim, out, doc.get("name", "scenario"))
    # resolve explicit initial states once so size errors surface at load time
    scen.expanded_runs()
    return scen


def to_dict(scen):
    """Inverse of :func:`from_dict`; per-agent values are always written as lists."""
    net = scen.network
    doc = {
        "name": scen.name,
        "network": {
            "omega": net.omega,
            "graph": {"n_vertices": net.graph.n_vertices, "edges": [list(e) for e in net.graph.edges]},
            "agents": [
                {k: matrix_to_json(getattr(a, k)) for k in ("A", "B", "Btilde", "C")} for a in net.agents
            ],
        },
    }
    e = scen.estimator
    doc["estimator"] = {
        "alpha": e.alpha,
        "pi": list(e.pi),
        "W": e.W if isinstance(e.W, str) else [matrix_to_json(w) for w in e.W],
        "gamma": e.gamma,
        "bracket": list(e.bracket),
        "rtol": e.rtol,
        "eps": e.eps,
        "centralized": e.centralized,
    }
    if scen.regulator is not None:
        r = scen.regulator
        doc["regulator"] = {
            "S": matrix_to_json(r.S),
            "Gamma": matrix_to_json(r.Gamma),
            "mu": r.mu,
            "lambda": r.lambda_gain,
            "R": [matrix_to_json(R) for R in r.R],
        }
    if scen.simulation is not None:
        s = scen.simulation
        runs = []
        for run in s.runs:
            d = {"name": run.name, "mode": run.mode, "repeat": run.repeat}
            if run.x0 is not None:
                d["x0"] = run.x0
            if run.zeta0 is not None:
                d["zeta0"] = run.zeta0
            d.update(xi=dict(run.xi), eta=dict(run.eta), checks=list(run.checks))
            runs.append(d)
        doc["simulation"] = {
            "t_end": s.t_end,
            "h": s.h,
            "seed": s.seed,
            "sync_threshold": s.sync_threshold,
            "consensus_threshold": s.consensus_threshold,
            "runs": runs,
        }
        if s.substeps is not None:
            doc["simulation"]["substeps"] = s.substeps
    doc["output"] = {"dir": scen.output.dir, "traces": scen.output.traces}
    return doc


def loads(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return from_dict(doc)


def load(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(str(path), f"cannot read scenario ({exc.strerror})") from None
    return loads(text)


def dumps(scen):
    return json.dumps(to_dict(scen), indent=2)


def bundled_path(name="paper-sec5.json"):
    """Filesystem path of a scenario shipped with the package."""
    return resources.files("coopest") / "data" / name


def load_bundled(name="paper-sec5.json"):
    return loads(bundled_path(name).read_text())
