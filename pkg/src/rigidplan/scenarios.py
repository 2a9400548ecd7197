"""Scenario documents (JSON) and randomised congruent boundary problems."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .geometry import DEFAULT_TOL, cross2, rotation_matrix
from .planner import BoundaryConditions

_FIELDS = {"name", "agents_initial", "agents_terminal", "t_f", "winding", "samples", "tol"}
_IGNORED = {"note", "description"}


@dataclass(frozen=True)
class Scenario:
    name: str
    agents_initial: list
    agents_terminal: list
    t_f: float
    winding: int = 0
    samples: int = 201
    tol: float = DEFAULT_TOL
    note: str = ""

    def boundary(self) -> BoundaryConditions:
        return BoundaryConditions(
            np.asarray(self.agents_initial, dtype=float),
            np.asarray(self.agents_terminal, dtype=float),
            self.t_f,
            self.winding,
            self.tol,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        if not d["note"]:
            d.pop("note")
        return d


def _points(value, key):
    if not isinstance(value, list) or not value:
        raise ScenarioError(f"{key} must be a non-empty list of [x, y] pairs")
    out = []
    for p in value:
        if (
            not isinstance(p, (list, tuple))
            or len(p) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
            or not all(math.isfinite(v) for v in p)
        ):
            raise ScenarioError(f"{key}: bad point {p!r}")
        out.append([float(p[0]), float(p[1])])
    return out


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(doc) - _FIELDS - _IGNORED
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    for key in ("agents_initial", "agents_terminal", "t_f"):
        if key not in doc:
            raise ScenarioError(f"missing required key {key!r}")
    initial = _points(doc["agents_initial"], "agents_initial")
    terminal = _points(doc["agents_terminal"], "agents_terminal")
    if len(initial) != len(terminal):
        raise ScenarioError(
            f"agents_initial has {len(initial)} points but agents_terminal has {len(terminal)}"
        )
    try:
        t_f = float(doc["t_f"])
        winding = doc.get("winding", 0)
        samples = doc.get("samples", 201)
        tol = float(doc.get("tol", DEFAULT_TOL))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from None
    if not (math.isfinite(t_f) and t_f > 0):
        raise ScenarioError(f"t_f must be positive, got {doc['t_f']!r}")
    if not isinstance(winding, int) or isinstance(winding, bool):
        raise ScenarioError("winding must be an integer")
    if not isinstance(samples, int) or isinstance(samples, bool) or samples < 2:
        raise ScenarioError("samples must be an integer >= 2")
    if not tol > 0:
        raise ScenarioError("tol must be positive")
    return Scenario(
        name=str(doc.get("name", "unnamed")),
        agents_initial=initial,
        agents_terminal=terminal,
        t_f=t_f,
        winding=winding,
        samples=samples,
        tol=tol,
        note=str(doc.get("note", doc.get("description", ""))),
    )


def load_scenario(path) -> Scenario:
    """Read a scenario file.  ``OSError`` propagates; bad content raises ScenarioError."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"not valid JSON: {exc}") from None
    return scenario_from_dict(doc)


def bundled_scenario_path(name: str) -> Path:
    return Path(str(resources.files("rigidplan") / "data" / f"{name}.json"))


def bundled_scenario(name: str) -> Scenario:
    return load_scenario(bundled_scenario_path(name))


def random_congruent_boundary(
    rng: np.random.Generator,
    n_agents: int,
    t_f: float = 1.0,
    max_turn: float = 0.9 * math.pi,
    spread: float = 1.0,
    displacement: float = 2.0,
) -> BoundaryConditions:
    """Random formation plus a random proper motion of it.

    Agent 1 is kept at least ``0.2*spread`` away from the centroid so the
    heading reference exists, and every agent from the third on must form a
    triangle of area at least ``0.05*spread**2`` with agents 1 and 2 (generic
    position, so the fan of distance constraints is infinitesimally rigid).
    The turn is drawn from ``[-max_turn, max_turn]``.
    """
    while True:
        pts = rng.uniform(-spread, spread, size=(n_agents, 2))
        rel = pts - pts.mean(axis=0)
        areas = 0.5 * np.abs(cross2(pts[1] - pts[0], pts[2:] - pts[0]))
        if np.linalg.norm(rel[0]) > 0.2 * spread and np.all(areas >= 0.05 * spread**2):
            break
    turn = rng.uniform(-max_turn, max_turn)
    shift = rng.uniform(-displacement, displacement, size=2)
    c = pts.mean(axis=0)
    terminal = c + shift + rel @ rotation_matrix(turn).T
    return BoundaryConditions(pts, terminal, t_f)
