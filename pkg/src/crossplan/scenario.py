"""Scenario files: JSON description of routes, right of way, vehicles and
parameter overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import PlannerParams
from .errors import ScenarioError
from .geometry import Polyline, Route, RouteGraph

DOUBLE_INTEGRATOR = "double_integrator"
IDM_AGENT = "idm"


@dataclass(frozen=True)
class VehicleSpec:
    id: str
    route_id: str
    s: float
    v: float
    agent: str = DOUBLE_INTEGRATOR


@dataclass
class Scenario:
    name: str
    graph: RouteGraph
    ego_route_id: str
    ego_s: float
    ego_v: float
    vehicles: list[VehicleSpec]
    duration: float
    seed: int
    params: PlannerParams = field(default_factory=PlannerParams)

    @property
    def ego_route(self) -> Route:
        return self.graph.routes[self.ego_route_id]


def load_scenario(path, overrides: dict | None = None,
                  seed: int | None = None) -> Scenario:
    """Parse and validate a scenario file; raises ScenarioError on any
    malformed or inconsistent content."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}") from exc
    return scenario_from_dict(raw, overrides=overrides, seed=seed)


def scenario_from_dict(raw: dict, overrides: dict | None = None,
                       seed: int | None = None) -> Scenario:
    try:
        routes = []
        for r in _require(raw, "routes"):
            routes.append(Route(
                id=str(r["id"]),
                centerline=Polyline(r["points"]),
                speed_limit=float(r["speed_limit"]),
                intersection_start=(float(r["intersection_start"])
                                    if r.get("intersection_start") is not None
                                    else None),
            ))
        graph = RouteGraph(routes, right_of_way=[tuple(p) for p in
                                                 raw.get("right_of_way", [])])
        ego = _require(raw, "ego")
        ego_route_id = str(ego["route"])
        if ego_route_id not in graph.routes:
            raise ScenarioError(f"ego route {ego_route_id!r} not defined")
        vehicles = []
        for v in raw.get("vehicles", []):
            spec = VehicleSpec(id=str(v["id"]), route_id=str(v["route"]),
                               s=float(v["s"]), v=float(v["v"]),
                               agent=v.get("agent", DOUBLE_INTEGRATOR))
            if spec.route_id not in graph.routes:
                raise ScenarioError(f"vehicle {spec.id}: unknown route "
                                    f"{spec.route_id!r}")
            if not 0.0 <= spec.s <= graph.routes[spec.route_id].length:
                raise ScenarioError(f"vehicle {spec.id}: s off route")
            if spec.v < 0.0:
                raise ScenarioError(f"vehicle {spec.id}: negative speed")
            if spec.agent not in (DOUBLE_INTEGRATOR, IDM_AGENT):
                raise ScenarioError(f"vehicle {spec.id}: unknown agent kind "
                                    f"{spec.agent!r}")
            vehicles.append(spec)
        if len({v.id for v in vehicles}) != len(vehicles):
            raise ScenarioError("duplicate vehicle ids")
        params = PlannerParams().with_overrides(raw.get("params", {}))
        if overrides:
            params = params.with_overrides(overrides)
        return Scenario(
            name=str(raw.get("name", "scenario")),
            graph=graph,
            ego_route_id=ego_route_id,
            ego_s=float(ego["s"]),
            ego_v=float(ego["v"]),
            vehicles=vehicles,
            duration=float(_require(raw, "duration")),
            seed=int(seed if seed is not None else raw.get("seed", 0)),
            params=params,
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc


def _require(raw: dict, key: str):
    if key not in raw:
        raise ScenarioError(f"scenario is missing {key!r}")
    return raw[key]
