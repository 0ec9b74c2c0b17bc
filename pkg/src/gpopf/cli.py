from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table
from rich.text import Text

from gpopf.acopf.opf import solve_opf
from gpopf.acopf.powerflow import solve_power_flow
from gpopf.acopf.residuals import check_solution
from gpopf.caseio.parser import BUNDLED_CASES, load_case
from gpopf.domain.errors import GpopfError
from gpopf.domain.models import ExperimentConfig, OracleConfig, SampleDistribution
from gpopf.logs import configure_logging
from gpopf.orchestrator.pipeline import predict_only, run_experiment

app = typer.Typer(
    no_args_is_help=True,
    add_completion=False,
    help="gpopf: Gaussian-process surrogates for probabilistic optimal power flow",
)

console = Console()
err_console = Console(stderr=True)


def _fail(exc: GpopfError) -> None:
    msg = Text("error: ", style="bold red") + Text(str(exc))
    for note in getattr(exc, "__notes__", []):
        msg += Text(f" [{note}]", style="red")
    err_console.print(msg)
    raise typer.Exit(code=1)


def _case_source(value: str) -> str | Path:
    if value in BUNDLED_CASES:
        return value
    p = Path(value).expanduser().resolve()
    if not p.is_file():
        raise typer.BadParameter(f"case file does not exist: {p} (bundled: {', '.join(BUNDLED_CASES)})")
    return p


def _load_config(path: Path) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_file(path)
    except ValidationError as exc:
        raise typer.BadParameter(f"{path}: {exc.error_count()} invalid settings\n{exc}") from None
    except GpopfError as exc:
        raise typer.BadParameter(str(exc)) from None


@app.command(help="Run a full experiment: training set, surrogates, GP propagation, paired MCS, report")
def run(
    config: Path = typer.Option(..., "--config", "-c", help="Experiment config (JSON)"),
    jobs: int = typer.Option(1, "--jobs", "-j", help="Worker processes for OPF solves and fits (-1 = all cores)"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Override the config seed"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Override the output directory"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    configure_logging(verbose)
    if jobs == 0 or jobs < -1:
        raise typer.BadParameter("--jobs must be a positive count or -1")
    cfg = _load_config(config)
    update = {}
    if seed is not None:
        update["seed"] = seed
    if out is not None:
        update["output_dir"] = out.expanduser().resolve()
    if update:
        cfg = cfg.model_copy(update=update)

    try:
        result = run_experiment(cfg, jobs=jobs)
    except GpopfError as exc:
        _fail(exc)
        return

    r = result.report
    console.print(f"[bold green]gpopf[/bold green] run: {cfg.name} on {r.case} (seed {cfg.seed})")
    console.print(f"Renewable penetration: {r.penetration_pct:.2f}%   training rejections: {r.rejected_training}")
    console.print(f"Paired samples: {r.n_paired} (dropped {r.n_dropped})")

    table = Table(show_header=True, header_style="bold")
    table.add_column("QUANTITY")
    table.add_column("GP", justify="right")
    table.add_column("MCS", justify="right")
    table.add_column("% ERROR", justify="right")
    table.add_row("mean(cost)", f"{r.cost_mean_gp:.6f}", f"{r.cost_mean_mcs:.6f}", f"{r.cost_mean_error_pct:.3e}")
    table.add_row("std(cost)", f"{r.cost_std_gp:.6f}", f"{r.cost_std_mcs:.6f}", f"{r.cost_std_error_pct:.3e}")
    for s in r.l1:
        table.add_row(f"%L1({s.group}) mean / max", "", "", f"{s.mean:.3e} / {s.max:.3e}")
    console.print(table)

    if r.sensitivity is not None:
        rho = r.sensitivity.rho
        console.print(f"Spearman(gamma, delta {r.sensitivity.outputs}): {rho:+.3f}")
    console.print(f"Timings: train+predict {result.timings.train + result.timings.predict:.2f} s, "
                  f"MCS {result.timings.mcs:.2f} s (x{result.timings.speedup:.1f})")
    console.print(f"Artifacts: {result.output_dir}")


@app.command(help="Propagate a distribution through saved surrogates without solving any OPF")
def predict(
    models: Path = typer.Argument(..., help="Model directory written by 'gpopf run' (<out>/models)"),
    kind: Optional[str] = typer.Option(
        None, "--kind", help="uniform_box | truncated_normal | beta | point (default: the run's test distribution)"
    ),
    dist_file: Optional[Path] = typer.Option(None, "--dist-file", help="Distribution as JSON (overrides --kind)"),
    sampler: str = typer.Option("iid", help="uniform_box sampler: lhs | iid"),
    alpha: float = typer.Option(2.0, help="beta alpha"),
    beta: float = typer.Option(5.0, help="beta beta"),
    n_test: Optional[int] = typer.Option(None, "--n-test", min=1, help="Number of samples"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Override the stored seed"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the summary and samples here"),
    limit: int = typer.Option(30, help="Max outputs to print"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    configure_logging(verbose)
    dist: Optional[SampleDistribution] = None
    try:
        if dist_file is not None:
            dist = SampleDistribution.model_validate_json(dist_file.read_text(encoding="utf-8"))
        elif kind is not None:
            dist = SampleDistribution.model_validate({"kind": kind, "sampler": sampler, "alpha": alpha, "beta": beta})
    except (ValidationError, OSError) as exc:
        raise typer.BadParameter(f"invalid distribution: {exc}") from None

    try:
        result = predict_only(models, dist, n_test=n_test, seed=seed, output_dir=out)
    except GpopfError as exc:
        _fail(exc)
        return

    s = result.summary
    console.print(f"[bold green]gpopf[/bold green] predict: {s.label}, {s.n_samples} samples, "
                  f"{len(result.models)} surrogates, {result.oracle_calls} OPF solves")
    table = Table(show_header=True, header_style="bold")
    for col in ("OUTPUT", "MEAN", "STD", "Q05", "Q95", "LOWER", "UPPER"):
        table.add_column(col, justify="left" if col == "OUTPUT" else "right")
    for o in s.outputs[:limit]:
        table.add_row(
            o.name, f"{o.mean:.6g}", f"{o.std:.3g}", f"{o.q05:.6g}", f"{o.q95:.6g}",
            f"{o.lower_limit:.6g}" if o.lower_limit is not None else "-",
            f"{o.upper_limit:.6g}" if o.upper_limit is not None else "-",
        )
    console.print(table)
    if len(s.outputs) > limit:
        console.print(f"  … and {len(s.outputs) - limit} more")


@app.command("validate-case", help="Parse and validate a MATPOWER case; optionally run a power flow")
def validate_case_cmd(
    case: str = typer.Argument(..., help=f"Case file or bundled name ({', '.join(BUNDLED_CASES)})"),
    power_flow: bool = typer.Option(False, "--power-flow", help="Also solve the base-case power flow"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    configure_logging(verbose)
    source = _case_source(case)
    try:
        net = load_case(source)
    except GpopfError as exc:
        _fail(exc)
        return

    on_branches = sum(b.status for b in net.branches)
    on_gens = sum(g.status for g in net.generators)
    console.print(f"[bold green]ok[/bold green] {net.name}: baseMVA {net.base_mva:g}")
    console.print(f"Buses: {net.n_bus}   generators: {on_gens}/{net.n_gen} in service   "
                  f"branches: {on_branches}/{len(net.branches)} in service")
    console.print(f"Total load: {net.total_load():.2f} MW   load buses: {len(net.load_bus_ids())}")

    if power_flow:
        try:
            pf = solve_power_flow(net)
        except GpopfError as exc:
            _fail(exc)
            return
        console.print(f"Power flow converged in {pf.iterations} iterations (mismatch {pf.mismatch:.2e} pu), "
                      f"vm in [{pf.vm.min():.4f}, {pf.vm.max():.4f}]")


@app.command("solve-opf", help="Solve one deterministic OPF and print the dispatch")
def solve_opf_cmd(
    case: str = typer.Argument(..., help=f"Case file or bundled name ({', '.join(BUNDLED_CASES)})"),
    mode: str = typer.Option("ac_ipm", "--mode", help="ac_ipm | dc_qp"),
    max_iter: int = typer.Option(150, "--max-iter", min=1),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    configure_logging(verbose)
    source = _case_source(case)
    try:
        oracle = OracleConfig(mode=mode, max_iter=max_iter)
    except ValidationError as exc:
        raise typer.BadParameter(f"invalid oracle settings: {exc}") from None

    try:
        net = load_case(source)
        sol = solve_opf(net, oracle)
    except GpopfError as exc:
        _fail(exc)
        return

    style = "green" if sol.converged else "red"
    console.print(f"[bold {style}]{sol.status}[/bold {style}] {net.name} ({sol.mode}): cost {sol.cost:.4f} $/h "
                  f"after {sol.iterations} iterations")

    table = Table(show_header=True, header_style="bold")
    for col in ("GEN", "BUS", "PG (MW)", "QG (MVAr)", "PMIN", "PMAX"):
        table.add_column(col, justify="right")
    for k, g in enumerate(net.generators):
        table.add_row(str(k), str(g.bus), f"{sol.pg[k]:.3f}", f"{sol.qg[k]:.3f}", f"{g.pmin:g}", f"{g.pmax:g}")
    console.print(table)

    chk = check_solution(net, sol, tol=oracle.tol, opt_tol=oracle.opt_tol)
    console.print(f"Check: mismatch {chk.max_mismatch:.2e} pu, bound violation {chk.max_bound_violation:.2e}, "
                  f"flow violation {chk.max_flow_violation:.2e}, complementarity {chk.complementarity:.2e}")
    if not sol.converged or not chk.ok:
        raise typer.Exit(code=1)


def main() -> None:
    app()


if __name__ == "__main__":
    main()
