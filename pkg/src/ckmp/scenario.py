"""Scenario files: declarative problem setups and the end-to-end pipeline.

A scenario is a YAML document describing where demonstrations come from (a
bundled generator or a CSV file), the mixture fit, the kinematic model, the
solver weights and grids, an optional obstacle, the constraint declarations
and the output sampling.  Loading validates the document and reports every
violation with its field path.  Running a scenario executes

    demonstrations -> mixture fit -> regression reference -> solve

and writes reference.csv, trajectory.csv, trace.csv and summary.yaml (plus
optional per-iteration snapshots) into an output directory.  With fixed seeds
two runs produce byte-identical CSV files.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import numpy as np
import yaml

from . import demonstrations as demos_mod
from .constraints import (
    ConstraintSet,
    ball_constraint,
    box_constraint,
    desired_point,
    task_halfspace_constraint,
    task_position_constraint,
)
from .kernel import KernelConfig
from .kinematics import PlanarPointModel, bundled_chain, load_chain
from .mixture import fit_gmm, gmr_condition
from .obstacle import Obstacle, assemble_gradient_stack
from .solver import SolverConfig, iteration_terms, solve
from .constraints import linearize

__all__ = ["ScenarioError", "Scenario", "load_scenario", "bundled_scenario_path", "run_scenario"]

_GENERATORS = {
    "letter_g": demos_mod.generate_letter_demos,
    "reach_seven_dof": demos_mod.generate_reach_demos,
}

_AXES = {"x": 0, "y": 1, "z": 2}


class ScenarioError(ValueError):
    """Raised on invalid scenario documents; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {v}" for v in self.violations))


def _need(doc, key, kind, path, violations, default=None, required=True):
    if key not in doc:
        if required:
            violations.append(f"{path}.{key}: missing")
        return default
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        violations.append(f"{path}.{key}: expected {kind.__name__}, got {type(value).__name__}")
        return default
    return value


def _validate(doc):
    violations = []
    if not isinstance(doc, dict):
        return ["top level: scenario must be a mapping"]

    name = _need(doc, "name", str, "scenario", violations)

    demo_doc = _need(doc, "demonstrations", dict, "scenario", violations, default={})
    if demo_doc:
        gen = demo_doc.get("generator")
        if gen == "csv":
            _need(demo_doc, "path", str, "demonstrations", violations)
        elif gen in _GENERATORS:
            count = _need(demo_doc, "count", int, "demonstrations", violations, default=5, required=False)
            if count is not None and count < 1:
                violations.append("demonstrations.count: must be at least 1")
            noise = _need(demo_doc, "noise_scale", float, "demonstrations", violations, default=0.0, required=False)
            if noise is not None and noise < 0:
                violations.append("demonstrations.noise_scale: must be non-negative")
            _need(demo_doc, "seed", int, "demonstrations", violations, default=0, required=False)
        else:
            violations.append(
                f"demonstrations.generator: unknown {gen!r}; expected 'csv' or one of "
                f"{sorted(_GENERATORS)}"
            )

    mix_doc = _need(doc, "mixture", dict, "scenario", violations, default={})
    if mix_doc:
        comp = _need(mix_doc, "components", int, "mixture", violations)
        if comp is not None and comp < 1:
            violations.append("mixture.components: must be at least 1")
        _need(mix_doc, "seed", int, "mixture", violations, default=0, required=False)
        reg = mix_doc.get("reg")
        if reg is not None and (not isinstance(reg, (int, float)) or reg < 0):
            violations.append("mixture.reg: must be a non-negative number")

    kin_doc = _need(doc, "kinematics", dict, "scenario", violations, default={})
    if kin_doc:
        kind = _need(kin_doc, "kind", str, "kinematics", violations)
        if kind not in (None, "planar", "chain"):
            violations.append(f"kinematics.kind: unknown {kind!r}; expected 'planar' or 'chain'")
        if kind == "chain":
            _need(kin_doc, "chain", str, "kinematics", violations)

    sol_doc = _need(doc, "solver", dict, "scenario", violations, default={})
    if sol_doc:
        lam = _need(sol_doc, "lam", float, "solver", violations)
        beta = _need(sol_doc, "beta", float, "solver", violations)
        if lam is not None and lam <= 0:
            violations.append("solver.lam: must be positive")
        if beta is not None and lam is not None and beta <= lam:
            violations.append("solver.beta: must exceed solver.lam")
        lam_obs = _need(sol_doc, "lam_obs", float, "solver", violations, default=0.0, required=False)
        if lam_obs is not None and lam_obs < 0:
            violations.append("solver.lam_obs: must be non-negative")
        k_h = _need(sol_doc, "k_h", float, "solver", violations)
        if k_h is not None and k_h <= 0:
            violations.append("solver.k_h: must be positive (kernel width invariant)")
        delta = _need(sol_doc, "delta", float, "solver", violations, default=1e-3, required=False)
        if delta is not None and delta <= 0:
            violations.append("solver.delta: must be positive")
        for key in ("n_support", "n_obstacle"):
            n = _need(sol_doc, key, int, "solver", violations, default=None, required=key == "n_support")
            if n is not None and n < 2:
                violations.append(f"solver.{key}: must be at least 2")
        iters = _need(sol_doc, "max_iterations", int, "solver", violations, default=10, required=False)
        if iters is not None and iters < 0:
            violations.append("solver.max_iterations: must be non-negative")
        tol = _need(sol_doc, "tolerance", float, "solver", violations, default=1e-6, required=False)
        if tol is not None and tol <= 0:
            violations.append("solver.tolerance: must be positive")

    obs_doc = doc.get("obstacle")
    if obs_doc is not None:
        if not isinstance(obs_doc, dict):
            violations.append("obstacle: must be a mapping")
        else:
            center = obs_doc.get("center")
            if not isinstance(center, list) or len(center) not in (2, 3) or not all(
                isinstance(v, (int, float)) for v in center
            ):
                violations.append("obstacle.center: must be a list of 2 or 3 numbers")
            radius = _need(obs_doc, "radius", float, "obstacle", violations)
            if radius is not None and radius <= 0:
                violations.append("obstacle.radius: must be positive")
            margin = _need(obs_doc, "safety_margin", float, "obstacle", violations)
            if margin is not None and margin <= 0:
                violations.append("obstacle.safety_margin: must be positive")

    con_doc = doc.get("constraints", [])
    if not isinstance(con_doc, list):
        violations.append("constraints: must be a list")
        con_doc = []
    for i, entry in enumerate(con_doc):
        path = f"constraints[{i}]"
        if not isinstance(entry, dict):
            violations.append(f"{path}: must be a mapping")
            continue
        kind = entry.get("kind")
        if kind not in ("desired_point", "ball", "box", "task_position", "task_halfspace"):
            violations.append(f"{path}.kind: unknown constraint kind {kind!r}")
            continue
        has_time = "time" in entry or "index" in entry or "times" in entry
        if not has_time:
            violations.append(f"{path}: needs 'time', 'index' or 'times'")
        if kind == "desired_point" and not isinstance(entry.get("state"), list):
            violations.append(f"{path}.state: must be the full target state list")
        if kind == "ball":
            if not isinstance(entry.get("center"), list):
                violations.append(f"{path}.center: must be a list of numbers")
            if not isinstance(entry.get("radius"), (int, float)):
                violations.append(f"{path}.radius: must be a number")
            if not isinstance(entry.get("components"), list):
                violations.append(f"{path}.components: must be a list of state indices")
        if kind == "box":
            if "component" not in entry:
                violations.append(f"{path}.component: missing")
            if "lower" not in entry and "upper" not in entry:
                violations.append(f"{path}: needs 'lower' and/or 'upper'")
        if kind == "task_position" and not isinstance(entry.get("target"), list):
            violations.append(f"{path}.target: must be a list of 3 numbers")
        if kind == "task_halfspace":
            if entry.get("axis") not in _AXES:
                violations.append(f"{path}.axis: must be one of {sorted(_AXES)}")
            if "bound" not in entry:
                violations.append(f"{path}.bound: missing")
            if entry.get("direction", ">=") not in (">=", "<="):
                violations.append(f"{path}.direction: must be '>=' or '<='")

    out_doc = doc.get("output", {})
    if not isinstance(out_doc, dict):
        violations.append("output: must be a mapping")
    else:
        samples = out_doc.get("samples", 200)
        if not isinstance(samples, int) or samples < 2:
            violations.append("output.samples: must be an integer >= 2")
        snap = out_doc.get("snapshot_every", 0)
        if not isinstance(snap, int) or snap < 0:
            violations.append("output.snapshot_every: must be a non-negative integer")
    return violations


@dataclass
class Scenario:
    """A validated scenario document plus its source directory."""

    doc: dict
    source: str = "<memory>"

    @property
    def name(self):
        return self.doc["name"]


def load_scenario(path):
    """Parse and validate a scenario file; raises ScenarioError when invalid."""
    import os

    with open(path) as fh:
        doc = yaml.safe_load(fh)
    violations = _validate(doc)
    if violations:
        raise ScenarioError(violations)
    return Scenario(doc=doc, source=os.path.dirname(os.path.abspath(path)))


def bundled_scenario_path(name):
    """Filesystem path of a scenario shipped with the package."""
    if not name.endswith(".scenario"):
        name = name + ".scenario"
    ref = importlib.resources.files("ckmp") / "data" / "scenarios" / name
    with importlib.resources.as_file(ref) as path:
        return str(path)


def _nearest_index(grid, t):
    return int(np.argmin(np.abs(grid - t)))


def _constraint_indices(entry, grid):
    if "index" in entry:
        idx = [int(entry["index"])]
    elif "time" in entry:
        idx = [_nearest_index(grid, float(entry["time"]))]
    else:
        times = entry["times"]
        if times == "all":
            idx = list(range(grid.size))
        else:
            idx = [_nearest_index(grid, float(t)) for t in times]
    return idx


def _build_constraints(doc, grid, model, state_dim):
    cset = ConstraintSet()
    for i, entry in enumerate(doc.get("constraints", [])):
        kind = entry["kind"]
        for n in _constraint_indices(entry, grid):
            if kind == "desired_point":
                state = np.asarray(entry["state"], dtype=float)
                if state.size != state_dim:
                    raise ScenarioError(
                        [f"constraints[{i}].state: expected {state_dim} values, got {state.size}"]
                    )
                cset.add(desired_point(n, state, slack=float(entry.get("slack", 1e-3))))
            elif kind == "ball":
                radius = float(entry["radius"])
                cset.add(
                    ball_constraint(
                        n,
                        np.asarray(entry["center"], dtype=float),
                        radius * radius,
                        [int(c) for c in entry["components"]],
                    )
                )
            elif kind == "box":
                cset.add(
                    box_constraint(
                        n,
                        int(entry["component"]),
                        lower=entry.get("lower"),
                        upper=entry.get("upper"),
                        state_dim=state_dim,
                    )
                )
            elif kind == "task_position":
                cset.add(
                    task_position_constraint(
                        n, model, np.asarray(entry["target"], dtype=float),
                        slack=float(entry.get("slack", 1e-3)),
                    )
                )
            elif kind == "task_halfspace":
                cset.add(
                    task_halfspace_constraint(
                        n,
                        model,
                        _AXES[entry["axis"]],
                        float(entry["bound"]),
                        direction=entry.get("direction", ">="),
                        margin=float(entry.get("margin", 0.0)),
                    )
                )
    return cset


def _build_model(doc):
    kin = doc.get("kinematics", {"kind": "planar"})
    if kin.get("kind", "planar") == "planar":
        return PlanarPointModel()
    import os

    chain = kin["chain"]
    if os.path.exists(chain):
        return load_chain(chain)
    return bundled_chain(chain)


def _build_demos(doc, source_dir, seed_override=None):
    demo_doc = doc["demonstrations"]
    gen = demo_doc["generator"]
    if gen == "csv":
        import os

        path = demo_doc["path"]
        if not os.path.isabs(path):
            path = os.path.join(source_dir, path)
        return demos_mod.load_csv(path)
    fn = _GENERATORS[gen]
    seed = seed_override if seed_override is not None else demo_doc.get("seed", 0)
    return fn(
        count=demo_doc.get("count", 5),
        noise_scale=demo_doc.get("noise_scale", 0.0),
        seed=seed,
    )


def _format_row(values):
    return ",".join(repr(float(v)) for v in values)


def _write_states_csv(path, times, states, dof):
    header = (
        "t,"
        + ",".join(f"q{i + 1}" for i in range(dof))
        + ","
        + ",".join(f"qd{i + 1}" for i in range(dof))
    )
    lines = [header]
    for t, row in zip(times, states):
        lines.append(_format_row([t, *row]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def run_scenario(scenario, out_dir=None, iterations=None, snapshot_every=None, seed=None):
    """Execute a scenario end to end; returns a summary dict.

    iterations, snapshot_every and seed override the document when given.
    When out_dir is set the CSV outputs and summary.yaml are written there.
    """
    import os
    import time as time_mod

    start = time_mod.perf_counter()
    doc = scenario.doc
    demo_seed = seed if seed is not None else None
    demos = _build_demos(doc, scenario.source, seed_override=demo_seed)

    mix_doc = doc["mixture"]
    gmm_seed = (seed + 1) if seed is not None else mix_doc.get("seed", 0)
    gmm = fit_gmm(
        demos.stacked_samples(),
        mix_doc["components"],
        seed=gmm_seed,
        reg=mix_doc.get("reg"),
    )

    sol_doc = doc["solver"]
    lo, hi = demos.time_span()
    support = np.linspace(lo, hi, sol_doc["n_support"])
    n_obstacle = sol_doc.get("n_obstacle", sol_doc["n_support"])
    obstacle_grid = np.linspace(lo, hi, n_obstacle)
    reference = gmr_condition(gmm, support)

    model = _build_model(doc)
    if model.dof != demos.dof:
        raise ScenarioError(
            [f"kinematics: model dof {model.dof} does not match demonstration dof {demos.dof}"]
        )
    kernel = KernelConfig(k_h=sol_doc["k_h"], delta=sol_doc.get("delta", 1e-3), dof=demos.dof)
    config = SolverConfig(
        lam=sol_doc["lam"],
        beta=sol_doc["beta"],
        lam_obs=sol_doc.get("lam_obs", 0.0),
        kernel=kernel,
        support_times=support,
        obstacle_times=obstacle_grid,
        max_iterations=iterations if iterations is not None else sol_doc.get("max_iterations", 10),
        tolerance=sol_doc.get("tolerance", 1e-6),
    )

    obs_doc = doc.get("obstacle")
    obstacle = None
    if obs_doc is not None:
        center = list(obs_doc["center"])
        if len(center) == 2:
            center.append(0.0)
        obstacle = Obstacle(
            center=np.asarray(center, dtype=float),
            radius=float(obs_doc["radius"]),
            safety_margin=float(obs_doc["safety_margin"]),
        )

    cset = _build_constraints(doc, support, model, config.state_dim)

    out_doc = doc.get("output", {})
    n_out = out_doc.get("samples", 200)
    snap = snapshot_every if snapshot_every is not None else out_doc.get("snapshot_every", 0)
    dense_times = np.linspace(lo, hi, n_out)

    snapshots = {}

    def on_iteration(i, tf):
        if snap and i % snap == 0:
            snapshots[i] = tf.predict_batch(dense_times)

    tf, records = solve(
        reference, config, constraints=cset, model=model, obstacle=obstacle,
        on_iteration=on_iteration,
    )

    # Final-state diagnostics: one more evaluation pass without updating.
    final_states = tf.predict_batch(support)
    final_lin = linearize(cset, final_states)
    final_violation = (
        max(0.0, -float(final_lin.values.min())) if final_lin.values.size else 0.0
    )
    if obstacle is not None:
        obs_states = tf.predict_batch(obstacle_grid)
        final_stack = assemble_gradient_stack(
            model, obstacle, obs_states[:, : model.dof]
        )
        final_cost = final_stack.total_cost
    else:
        final_cost = 0.0

    summary = {
        "name": scenario.name,
        "iterations_run": len(records),
        "converged": bool(
            records
            and records[-1].delta_gamma < config.tolerance
            and records[-1].delta_rho < config.tolerance
        ),
        "initial_obstacle_cost": float(records[0].obstacle_cost) if records else None,
        "final_obstacle_cost": float(final_cost),
        "final_max_violation": float(final_violation),
        "final_qp_residual": float(records[-1].qp_residual) if records else None,
        "n_constraints": len(cset),
        "seeds": {"demonstrations": demo_seed if demo_seed is not None else doc["demonstrations"].get("seed"),
                  "mixture": gmm_seed},
        "runtime_seconds": None,
    }

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        dof = model.dof
        _write_states_csv(os.path.join(out_dir, "trajectory.csv"), dense_times, tf.predict_batch(dense_times), dof)
        for i, states in sorted(snapshots.items()):
            _write_states_csv(
                os.path.join(out_dir, f"trajectory_iter_{i:04d}.csv"), dense_times, states, dof
            )
        stds = np.sqrt(np.einsum("nee->ne", reference.covariances))
        ref_header = (
            "t,"
            + ",".join(f"mu{i + 1}" for i in range(config.state_dim))
            + ","
            + ",".join(f"std{i + 1}" for i in range(config.state_dim))
        )
        lines = [ref_header]
        for t, mu, sd in zip(reference.times, reference.means, stds):
            lines.append(_format_row([t, *mu, *sd]))
        with open(os.path.join(out_dir, "reference.csv"), "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        trace_lines = ["iteration,obstacle_cost,max_violation,delta_gamma,delta_rho,qp_residual"]
        for r in records:
            trace_lines.append(
                _format_row([r.iteration, r.obstacle_cost, r.max_violation, r.delta_gamma, r.delta_rho, r.qp_residual])
            )
        trace_lines.append(
            _format_row([len(records), final_cost, final_violation, float("nan"), float("nan"), float("nan")])
        )
        with open(os.path.join(out_dir, "trace.csv"), "w", newline="\n") as fh:
            fh.write("\n".join(trace_lines) + "\n")
        summary["runtime_seconds"] = time_mod.perf_counter() - start
        with open(os.path.join(out_dir, "summary.yaml"), "w") as fh:
            yaml.safe_dump(summary, fh, sort_keys=False)
    else:
        summary["runtime_seconds"] = time_mod.perf_counter() - start
    return summary
