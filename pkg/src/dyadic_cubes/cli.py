"""Command-line entry point: build, verify, estimate and export-graph over run directories."""

from __future__ import annotations

import json
import pathlib
import sys
import time
import warnings
from typing import Any, Callable, NoReturn, TypeVar

import click

from dyadic_cubes import __version__

T = TypeVar("T")

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 2


@click.group()
@click.version_option(__version__)
def main():
    """Dyadic cube systems on finite doubling metric spaces."""
    pass


# ── helpers ───────────────────────────────────────────────────────


def _fail(exc: BaseException, run=None) -> NoReturn:
    """Machine-readable error record on stderr (and in the run directory), exit 1."""
    record = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(record, ensure_ascii=False), err=True)
    if run is not None and run.base_dir.is_dir():
        run.error_path().write_text(json.dumps(record, ensure_ascii=False) + "\n", encoding="utf-8")
    sys.exit(EXIT_ERROR)


class _Stages:
    """Times each pipeline stage, captures library warnings and logs one line per stage."""

    def __init__(self, run, logger):
        self.run = run
        self.logger = logger
        self.timings: dict[str, float] = {}

    def __call__(
        self,
        name: str,
        args: dict[str, Any],
        fn: Callable[[], T],
        summarize: Callable[[T], dict[str, Any]] | None = None,
    ) -> T:
        t0 = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                value = fn()
            except Exception as e:
                self.logger.log_stage(
                    self.run.next_step(), name, args,
                    error=f"{type(e).__name__}: {e}", elapsed_s=time.perf_counter() - t0,
                )
                raise
        elapsed = time.perf_counter() - t0
        result = summarize(value) if summarize else None
        if caught:
            result = dict(result or {})
            result["warnings"] = [str(w.message) for w in caught]
        self.logger.log_stage(self.run.next_step(), name, args, result=result, elapsed_s=elapsed)
        self.timings[name] = round(elapsed, 6)
        return value


def _load_config(config_file: str | None):
    from dyadic_cubes.config import RunConfig

    if config_file:
        return RunConfig.from_file(pathlib.Path(config_file))
    return RunConfig()


def _run_config(run, config_file: str | None, overrides: dict[str, Any]):
    """Config stored by the build, then the optional YAML file, then CLI flags."""
    from dyadic_cubes.artifacts import read_manifest
    from dyadic_cubes.config import RunConfig

    stored = RunConfig.validated(read_manifest(run)["config"])
    if config_file:
        extra = _load_config(config_file).model_dump(exclude_unset=True)
        stored = stored.merged(**extra)
    return stored.merged(**overrides)


def _tree_and_M(stage: _Stages, cs, config):
    from dyadic_cubes.framework import adapted_M, to_tree

    tree = stage("tree", {}, lambda: to_tree(cs),
                 lambda t: {"root": list(t.phi), "depth": t.depth, "nodes": len(t.nodes)})
    if config.M is not None:
        return tree, config.M
    M, _ = stage(
        "adapted_M", {"budget": config.pair_budget, "seed": config.seed},
        lambda: adapted_M(tree, cs, budget=config.pair_budget, seed=config.seed),
        lambda res: {"M": res[0], "eta1": res[1]},
    )
    return tree, M


def _common_options(fn):
    fn = click.option("--quiet", is_flag=True, default=False, help="Do not echo stage logs to stderr")(fn)
    fn = click.option("--workers", default=None, type=int, help="Worker threads (overrides $DYADIC_CUBES_WORKERS)")(fn)
    fn = click.option("--seed", default=None, type=int, help="Seed for every sampled check")(fn)
    fn = click.option("--config", "config_file", default=None, help="Run config YAML")(fn)
    return fn


# ── build ─────────────────────────────────────────────────────────


@main.command()
@click.option("--space", "input_", default=None, help="Generator descriptor (interval:N, grid:M, cantor:L, gasket:L) or file path")
@click.option("--mode", type=click.Choice(["strict", "relaxed"]), default=None, help="Constant bundle mode")
@click.option("--r", "r", default=None, type=float, help="Scale ratio (strict mode: at most the certified r0)")
@click.option("--c-star", "c_star", default=None, type=float, help="Separation constant c*")
@click.option("--C-star", "big_c_star", default=None, type=float, help="Covering constant C*")
@click.option("--gamma", default=None, type=float, help="Uniform perfectness constant (default: estimated)")
@click.option("--N", "n_pack", default=None, type=int, help="Packing constant (default: estimated)")
@click.option("--k-min", default=None, type=int, help="Coarsest scale")
@click.option("--k-max", default=None, type=int, help="Finest scale")
@click.option("--base", default=None, type=int, help="Base point shared by every net")
@click.option("--nested-nets/--independent-nets", default=None, help="Seed each net with the coarser one")
@click.option("--closure-factor", default=None, type=float, help="Closure tolerance in units of the resolution")
@click.option("--alpha1", default=None, type=float, help="Relaxed-mode alpha1 override")
@click.option("--alpha2", default=None, type=float, help="Relaxed-mode alpha2 override")
@click.option("--alpha3", default=None, type=float, help="Relaxed-mode alpha3 override")
@click.option("--alpha6", default=None, type=float, help="Relaxed-mode alpha6 override")
@click.option("--max-points", default=None, type=int, help="Point cap for inputs")
@click.option("--out", default=None, help="Run directory (default: artifacts/runs/<id>)")
@_common_options
def build(input_, mode, r, c_star, big_c_star, gamma, n_pack, k_min, k_max, base, nested_nets,
          closure_factor, alpha1, alpha2, alpha3, alpha6, max_points, out,
          config_file, seed, workers, quiet):
    """Build nets, parent map and cubes; write the artifacts of a new run."""
    from dyadic_cubes.core.errors import DyadicCubesError
    from dyadic_cubes.core.session import Run

    run = None
    try:
        config = _load_config(config_file).merged(
            input=input_, mode=mode, r=r, c_star=c_star, C_star=big_c_star, gamma=gamma, N=n_pack,
            **{"window.k_min": k_min, "window.k_max": k_max},
            base=base, nested_nets=nested_nets, closure_factor=closure_factor,
            **{"alphas.alpha1": alpha1, "alphas.alpha2": alpha2,
               "alphas.alpha3": alpha3, "alphas.alpha6": alpha6},
            max_points=max_points, out=out, seed=seed, workers=workers,
        )
        space, space_s = _resolve_space(config)
        run = Run.existing(config.out) if config.out else Run()
        result = _build(config, space, space_s, run, quiet)
    except (DyadicCubesError, OSError) as e:
        if run is not None and run.base_dir.is_dir():
            _mark_incomplete(run, config)
        _fail(e, run)
    click.echo(json.dumps(result, ensure_ascii=False))
    sys.exit(EXIT_OK)


def _mark_incomplete(run, config) -> None:
    """Record a build that stopped after the run directory was created."""
    from dyadic_cubes.artifacts import write_manifest
    from dyadic_cubes.reports.templates import default_environment

    try:
        write_manifest(run, "build", config.model_dump(mode="json"), {}, default_environment(),
                       status="failed")
    except OSError:
        pass


def _resolve_space(config):
    """Load the input before the run directory exists: bad input leaves nothing behind."""
    from dyadic_cubes.core.errors import InvalidInput
    from dyadic_cubes.space import resolve_input

    if not config.input:
        raise InvalidInput("no input space: pass --space or set input in the config")
    t0 = time.perf_counter()
    space = resolve_input(config.input, cap=config.max_points)
    if config.base >= space.n:
        raise InvalidInput(f"base point {config.base} outside 0..{space.n - 1}")
    return space, time.perf_counter() - t0


def _build(config, space, space_s: float, run, quiet: bool):
    from dyadic_cubes.artifacts import save_build, write_manifest
    from dyadic_cubes.certify import (
        check_feasible,
        derive_constants,
        recipe_alphas,
        relaxed_bundle,
    )
    from dyadic_cubes.core.errors import StrictRatioError
    from dyadic_cubes.cubes import build_cubes
    from dyadic_cubes.nets import build_hierarchy, default_window
    from dyadic_cubes.parent import assign_parents
    from dyadic_cubes.reports.templates import default_environment
    from dyadic_cubes.runner.logging import StageLogger
    from dyadic_cubes.space import estimate_gamma, estimate_packing

    run.start()
    with StageLogger(run, echo=not quiet) as logger:
        stage = _Stages(run, logger)
        logger.log_stage(run.next_step(), "space", {"input": config.input},
                         result={"points": space.n, "resolution": space.resolution}, elapsed_s=space_s)
        stage.timings["space"] = round(space_s, 6)

        gamma = config.gamma
        if gamma is None:
            gamma = stage("gamma", {"seed": config.seed},
                          lambda: estimate_gamma(space, seed=config.seed), lambda g: {"gamma": g})
        N = config.N
        if N is None:
            alpha1 = config.alphas.alpha1 or recipe_alphas(config.c_star, config.C_star, gamma)[0]
            N = stage("packing", {"alpha1": alpha1, "seed": config.seed},
                      lambda: estimate_packing(space, alpha1, config.c_star, seed=config.seed)[0],
                      lambda n: {"N": n})

        def _bundle():
            if config.mode == "strict":
                b = derive_constants(config.c_star, config.C_star, gamma, N)
                if config.r is not None:
                    if config.r > b.r0:
                        failing = check_feasible(b, config.r)
                        raise StrictRatioError(config.r, b.r0, failing[0].name if failing else "r <= r0")
                    b.r = config.r
                return b
            return relaxed_bundle(config.c_star, config.C_star, gamma, N, config.ratio,
                                  **config.alphas.model_dump())

        bundle = stage("bundle", {"mode": config.mode, "gamma": gamma, "N": N}, _bundle,
                       lambda b: {"r": b.r, "r0": b.r0, "alpha6": b.alpha6,
                                  "failing": [c.name for c in check_feasible(b, b.r)]})

        if config.window is not None:
            window = (config.window.k_min, config.window.k_max)
        else:
            window = default_window(space, bundle.r, config.c_star, base=config.base)
        h = stage(
            "hierarchy", {"window": list(window), "nested": config.nested_nets},
            lambda: build_hierarchy(space, bundle.r, config.c_star, config.C_star, *window,
                                    base=config.base, nested=config.nested_nets),
            lambda h: {"sizes": {str(k): h.size(k) for k in h.window}},
        )
        pm = stage("parents", {"workers": config.workers},
                   lambda: assign_parents(h, bundle, workers=config.workers),
                   lambda pm: {"flags": len(pm.flags), "blocks": sum(len(v) for v in pm.f_list.values())})
        cs = stage("cubes", {"closure_factor": config.closure_factor},
                   lambda: build_cubes(pm, closure_factor=config.closure_factor),
                   lambda cs: {"closure_tol": cs.closure_tol, "stranded": cs.stranded})
        stage("save", {}, lambda: save_build(run, cs), lambda paths: {"files": [p.name for p in paths]})

    write_manifest(run, "build", config.model_dump(mode="json"), stage.timings, default_environment())
    return {
        "run_dir": str(run.base_dir),
        "points": space.n,
        "mode": bundle.mode,
        "r": bundle.r,
        "window": list(window),
        "nodes": sum(h.size(k) for k in h.window),
    }


# ── verify ────────────────────────────────────────────────────────


@main.command()
@click.argument("run_dir")
@click.option("--M", "m", default=None, type=int, help="Chain length for delta_M (default: smallest adapted M)")
@click.option("--pair-budget", default=None, type=int, help="Sampled pairs for the framework checks")
@click.option("--d5-budget", default=None, type=int, help="Sampled pairs per level for the chain check")
@click.option("--chain-factor", default=None, type=float, help="Chain radius in units of c* when C3 <= 0")
@_common_options
def verify(run_dir, m, pair_budget, d5_budget, chain_factor, config_file, seed, workers, quiet):
    """Run the net, T, D and framework checks over a built run."""
    from dyadic_cubes.artifacts import load_build, save_report, write_manifest
    from dyadic_cubes.core.errors import DyadicCubesError
    from dyadic_cubes.core.session import Run
    from dyadic_cubes.cubes import verify_D
    from dyadic_cubes.framework import verify_basic_framework
    from dyadic_cubes.nets import verify_net
    from dyadic_cubes.parent import verify_T
    from dyadic_cubes.reports.templates import default_environment, render_summary_md
    from dyadic_cubes.runner.logging import StageLogger

    run = Run.existing(run_dir)
    try:
        config = _run_config(run, config_file, {
            "M": m, "pair_budget": pair_budget, "d5_budget": d5_budget,
            "chain_factor": chain_factor, "seed": seed, "workers": workers,
        })
        cs = load_build(run)
        with StageLogger(run, echo=not quiet) as logger:
            stage = _Stages(run, logger)

            def _summary(report):
                return {"passed": report.passed, "failed": [c.name for c in report.failed]}

            reports = [
                stage("verify_net", {}, lambda: verify_net(cs.hierarchy), _summary),
                stage("verify_T", {}, lambda: verify_T(cs.pm), _summary),
                stage("verify_D", {"budget": config.d5_budget, "seed": config.seed},
                      lambda: verify_D(cs, budget=config.d5_budget, seed=config.seed,
                                       chain_factor=config.chain_factor), _summary),
            ]
            tree, M = _tree_and_M(stage, cs, config)
            reports.append(stage(
                "verify_B", {"M": M, "budget": config.pair_budget, "seed": config.seed},
                lambda: verify_basic_framework(tree, cs, M, budget=config.pair_budget,
                                               w_budget=config.w_budget, seed=config.seed),
                _summary,
            ))
            for report in reports:
                save_report(run, report)
        env = default_environment()
        (run.reports_dir / "summary.md").write_text(
            render_summary_md(f"Verification of run {run.run_id}", reports, env), encoding="utf-8"
        )
        write_manifest(run, "verify", config.model_dump(mode="json"), stage.timings, env)
    except (DyadicCubesError, OSError) as e:
        _fail(e, run)

    passed = all(r.passed for r in reports)
    click.echo(json.dumps({
        "passed": passed,
        "families": {r.family: r.passed for r in reports},
        "reports": str(run.reports_dir),
    }, ensure_ascii=False))
    sys.exit(EXIT_OK if passed else EXIT_VIOLATIONS)


# ── estimate ──────────────────────────────────────────────────────


@main.command()
@click.argument("run_dir")
@click.option("--M", "m", default=None, type=int, help="Neighbourhood radius (default: smallest adapted M)")
@click.option("--p-min", default=None, type=float, help="Lower end of the p search")
@click.option("--p-max", default=None, type=float, help="Upper end of the p search")
@click.option("--steps", default=None, type=int, help="Bisection steps")
@click.option(
    "--depth", "depths", multiple=True, type=int,
    help="Refinement depth to use (repeatable). Depths where every sampled node reaches its "
    "whole level within M hops are skipped; at least 3 must remain.",
)
@click.option("--w-budget", default=None, type=int, help="Sampled nodes per tree level")
@_common_options
def estimate(run_dir, m, p_min, p_max, steps, depths, w_budget, config_file, seed, workers, quiet):
    """Bracket the conformal dimension from energy decay over a built run.

    The window needs at least 3 refinement depths below some node that is more
    than M hops from part of its level; otherwise the command exits 1.
    """
    from dyadic_cubes.artifacts import load_build, save_estimate, write_manifest
    from dyadic_cubes.core.errors import DyadicCubesError
    from dyadic_cubes.core.session import Run
    from dyadic_cubes.energy import estimate_arc_dim
    from dyadic_cubes.reports.templates import default_environment, render_estimate_md
    from dyadic_cubes.runner.logging import StageLogger

    run = Run.existing(run_dir)
    try:
        config = _run_config(run, config_file, {
            "M": m, "estimate.p_min": p_min, "estimate.p_max": p_max,
            "estimate.bisect_steps": steps, "estimate.depths": list(depths) or None,
            "estimate.w_budget": w_budget, "seed": seed, "workers": workers,
        })
        cs = load_build(run)
        est = config.estimate
        with StageLogger(run, echo=not quiet) as logger:
            stage = _Stages(run, logger)
            tree, M = _tree_and_M(stage, cs, config)
            result = stage(
                "estimate",
                {"M": M, "p_min": est.p_min, "p_max": est.p_max, "steps": est.bisect_steps},
                lambda: estimate_arc_dim(
                    cs, tree, M, p_min=est.p_min, p_max=est.p_max, steps=est.bisect_steps,
                    k_range=est.depths, w_budget=est.w_budget, seed=config.seed,
                    tol=est.tol, workers=config.workers,
                ),
                lambda a: {"summary": a.summary, "p_low": a.p_low, "p_high": a.p_high},
            )
            save_estimate(run, result)
        run.reports_dir.mkdir(parents=True, exist_ok=True)
        (run.reports_dir / "energy.md").write_text(render_estimate_md(result), encoding="utf-8")
        write_manifest(run, "estimate", config.model_dump(mode="json"), stage.timings,
                       default_environment())
    except (DyadicCubesError, OSError) as e:
        _fail(e, run)

    click.echo(json.dumps({
        "estimate": result.summary,
        "p_low": result.p_low,
        "p_high": result.p_high,
        "M": result.M,
    }, ensure_ascii=False))
    sys.exit(EXIT_OK)


# ── export-graph ──────────────────────────────────────────────────


@main.command("export-graph")
@click.argument("run_dir")
@click.option("--level", "levels", multiple=True, type=int, help="Scale k to export (repeatable, default: all)")
def export_graph(run_dir, levels):
    """Write level graphs of a built run as edge lists."""
    import networkx as nx

    from dyadic_cubes.artifacts import load_build
    from dyadic_cubes.core.errors import DyadicCubesError, InvalidInput
    from dyadic_cubes.core.session import Run
    from dyadic_cubes.framework import level_graph, to_tree

    run = Run.existing(run_dir)
    written = []
    try:
        cs = load_build(run)
        tree = to_tree(cs)
        ks = sorted(set(levels)) or list(range(tree.phi.k, cs.hierarchy.k_max + 1))
        for k in ks:
            if not tree.phi.k <= k <= cs.hierarchy.k_max:
                raise InvalidInput(f"level {k} outside the tree [{tree.phi.k}, {cs.hierarchy.k_max}]")
        run.graphs_dir.mkdir(parents=True, exist_ok=True)
        for k in ks:
            graph = level_graph(tree, cs, k - tree.phi.k).to_networkx()
            graph = nx.relabel_nodes(graph, {u: f"{u.k}:{u.n}" for u in graph.nodes})
            path = run.graph_path(k)
            nx.write_edgelist(graph, path, data=False)
            written.append({"level": k, "path": str(path),
                            "nodes": graph.number_of_nodes(), "edges": graph.number_of_edges()})
    except (DyadicCubesError, OSError) as e:
        _fail(e, run)
    click.echo(json.dumps({"graphs": written}, ensure_ascii=False))
