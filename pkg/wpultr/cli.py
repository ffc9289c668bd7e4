"""
wpultr CLI - Command Line Interface

Entry point for every pipeline stage: simulate, discover, train, evaluate,
report and convert.
"""

import functools
import json
import logging
from pathlib import Path

import click
from tabulate import tabulate

from wpultr import __version__
from wpultr.core.errors import ValidationError

TRAIN_METHODS = ("bal", "naive", "ipw", "pb-bal", "fb-bal", "bal-pos", "bal-mm")
SUMMARY_METRICS = (("dcg", 1), ("dcg", 10), ("err", 10), ("ndcg", 10), ("tau", 0))


def _setup_logging(verbose: bool) -> None:
    from rich.console import Console
    from rich.logging import RichHandler

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _fail(message: str, code: int) -> None:
    click.echo(click.style(f"Error: {message}", fg="red"), err=True)
    raise SystemExit(code)


def guarded(command):
    """Map failures to exit codes: 1 for invalid input, 2 for everything else."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (SystemExit, click.exceptions.Exit, click.ClickException):
            raise
        except ValidationError as e:
            _fail(str(e), 1)
        except Exception as e:
            logging.getLogger(__name__).debug("command failed", exc_info=True)
            _fail(f"{type(e).__name__}: {e}", 2)
    return wrapper


def run_options(command):
    """--config, --out, --seed and --jobs, shared by every pipeline command."""
    command = click.option("--jobs", type=int, default=None,
                           help="Worker cap (overrides config and WPULTR_JOBS)")(command)
    command = click.option("--seed", type=int, default=None,
                           help="Global seed (overrides config and WPULTR_SEED)")(command)
    command = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                           help="Output directory (overrides config and WPULTR_OUT_DIR)")(command)
    command = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                           default=None, help="Run configuration file (JSON)")(command)
    return command


def _load_config(config_path, out_dir, seed, jobs):
    from wpultr.config import RunConfig

    return RunConfig.load(config_path, {"out_dir": out_dir, "seed": seed, "jobs": jobs})


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _metadata(command: str, started: str, **extra) -> dict:
    from datetime import datetime, timezone

    return {
        "package": "wpultr",
        "version": __version__,
        "command": command,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        **extra,
    }


def _now() -> str:
    from datetime import datetime, timezone

    return datetime.now(timezone.utc).isoformat()


@click.group()
@click.version_option(version=__version__, prog_name="wpultr")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.pass_context
def cli(ctx, verbose):
    """wpultr - Whole-page unbiased learning to rank.

    Simulates click logs, discovers how presentation features bias clicks,
    and trains rankers that correct for it.
    """
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    _setup_logging(verbose)


# =============================================================================
# Simulation
# =============================================================================

@cli.command()
@run_options
@guarded
def simulate(config_path, out_dir, seed, jobs):
    """Generate a synthetic click log, a held-out graded log and the true graph."""
    import numpy as np

    from wpultr.ingest import write_log
    from wpultr.simulate import assign_frequency_buckets, generate

    started = _now()
    config = _load_config(config_path, out_dir, seed, jobs)
    scm = config.scm()
    eval_config = config.eval()

    log, truth = generate(scm, jobs=config.jobs, progress=True)
    if len(log):
        log = assign_frequency_buckets(log, eval_config.n_buckets)

    query_ids = list(log.query_ids)
    n_holdout = int(round(eval_config.holdout_fraction * len(query_ids)))
    order = np.random.default_rng(config.seed).permutation(len(query_ids))
    holdout = {query_ids[i] for i in order[:n_holdout]}
    train_log = log.with_records(r for r in log.records if r.query_id not in holdout)
    eval_log = log.with_records(r for r in log.records if r.query_id in holdout)

    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_log(train_log, out / "log.tsv")
    write_log(eval_log, out / "eval.tsv")
    _write_json(out / "ground_truth_graph.json", truth.graph.to_dict())
    _write_json(out / "config.json", config.to_dict())
    _write_json(out / "metadata.json", _metadata("simulate", started))

    click.echo(f"Simulated {len(log)} impressions over {len(query_ids)} queries")
    click.echo(f"  train: {len(train_log)} records -> {out / 'log.tsv'}")
    click.echo(f"  eval:  {len(eval_log)} records -> {out / 'eval.tsv'}")
    click.echo(f"  expected click rate: {truth.expected_click_rate():.4f}")
    click.echo(click.style("Done.", fg="green"))


# =============================================================================
# Discovery
# =============================================================================

@cli.command()
@click.option("--log", "log_path", required=True, type=click.Path(dir_okay=False),
              help="Click log (wpultr TSV)")
@click.option("--truth", type=click.Path(dir_okay=False), default=None,
              help="Ground-truth graph JSON to compare against")
@run_options
@guarded
def discover(log_path, truth, config_path, out_dir, seed, jobs):
    """Learn the click graph of a log and classify its biases."""
    from wpultr.baselines import train_naive
    from wpultr.causal import discover_graph
    from wpultr.core.graph import CausalGraph
    from wpultr.ingest import read_log
    from wpultr.preprocess import fit_transforms

    started = _now()
    config = _load_config(config_path, out_dir, seed, jobs)
    log = read_log(log_path)
    transforms = fit_transforms(log, config.preprocess())
    scores = None
    if not log.has_logged_scores:
        click.echo("Log has no logged scores; using a naive ranker's scores as REL")
        scores = train_naive(log, config.baselines()).score_log(log)
    Z = transforms.apply(log, scores)
    result = discover_graph(Z, config.causal(), strict=False, jobs=config.jobs)

    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "graph.json", result.graph.to_dict())
    _write_json(out / "bias_report.json", result.biases.to_dict())
    transforms.save(out / "transforms.json")
    _write_json(out / "config.json", config.to_dict())
    _write_json(out / "metadata.json", _metadata("discover", started))

    click.echo(f"\nDiscovered graph ({result.n_rows} rows):")
    for edge in sorted(result.graph.edge_strings()):
        click.echo(f"  {edge}")
    report = result.biases
    click.echo(f"Confounded: {', '.join(report.confounded_features) or '-'}")
    click.echo(f"SEPP bias:  {', '.join(report.sepp_bias) or '-'}")
    if report.undirected:
        click.echo(click.style(f"Undirected (not reweighted): {', '.join(report.undirected)}",
                               fg="yellow"))
    if truth:
        reference = CausalGraph.from_json(Path(truth).read_text(encoding="utf-8"))
        shd = result.graph.structural_hamming_distance(reference)
        click.echo(f"Structural Hamming distance to {truth}: {shd}")


# =============================================================================
# Training
# =============================================================================

@cli.command()
@click.option("--log", "log_path", required=True, type=click.Path(dir_okay=False),
              help="Click log (wpultr TSV)")
@click.option("--method", "-m", type=click.Choice(TRAIN_METHODS), default="bal",
              show_default=True, help="Training method")
@run_options
@guarded
def train(log_path, method, config_path, out_dir, seed, jobs):
    """Train a ranker with BAL, one of its ablations, or a baseline."""
    from wpultr.baselines import estimate_propensity, train_ipw, train_naive
    from wpultr.ingest import read_log
    from wpultr.unbias import RunArtifacts, config_for_method, train_bal

    config = _load_config(config_path, out_dir, seed, jobs)
    log = read_log(log_path)
    out = config.out_dir
    click.echo(f"Training {method} on {len(log)} impressions...")

    if method in ("naive", "ipw"):
        artifacts = RunArtifacts(method=method, started=_now())
        hyper = config.baselines()
        trace: list[float] = []
        if method == "naive":
            ranker = train_naive(log, hyper, progress=True, trace=trace)
        else:
            propensity = estimate_propensity(log, hyper.propensity_floor)
            ranker = train_ipw(log, propensity, hyper, progress=True, trace=trace)
            out.mkdir(parents=True, exist_ok=True)
            _write_json(out / "propensity.json", propensity.to_dict())
        artifacts.losses = [{"step": i, "phase": method, "loss": v} for i, v in enumerate(trace)]
        artifacts.finished = _now()
    else:
        bal_config = config_for_method(method, config.unbias())
        ranker, artifacts = train_bal(log, bal_config, progress=True)
        artifacts.method = method

    artifacts.config = {**config.to_dict(), "method": method}
    artifacts.write(out, ranker, command="train")

    click.echo(f"  artifacts: {out}")
    if artifacts.snapshots.lines:
        click.echo(f"  graph snapshots: {len(artifacts.snapshots.lines)}")
    if artifacts.bias_report is not None:
        confounded = ", ".join(artifacts.bias_report.confounded_features) or "-"
        click.echo(f"  reweighted features (last refresh): {confounded}")
    click.echo(click.style("Done.", fg="green"))


# =============================================================================
# Evaluation & Reporting
# =============================================================================

def _run_method(run_dir: Path) -> str:
    meta = run_dir / "metadata.json"
    if meta.is_file():
        method = json.loads(meta.read_text(encoding="utf-8")).get("method")
        if method:
            return method
    return run_dir.name


def _evaluate_scores(log, scores, method, eval_config, out: Path) -> None:
    from wpultr.eval import (
        MetricReport,
        evaluate_rankings,
        logged_orders,
        rerank_position_analysis,
        score_orders,
        write_position_analysis,
    )

    report = evaluate_rankings(log, scores, method, eval_config)
    out.mkdir(parents=True, exist_ok=True)
    overall = [r for r in report.rows if r.partition == "all"]
    buckets = [r for r in report.rows if r.partition != "all"]
    MetricReport(overall).to_csv(out / "metrics.csv")
    MetricReport(buckets).to_csv(out / "buckets.csv")
    positions = rerank_position_analysis(
        logged_orders(log), score_orders(log, scores), eval_config.max_position
    )
    write_position_analysis(positions, out / "positions.csv", method)


@cli.command()
@click.option("--run", "runs", multiple=True, type=click.Path(file_okay=False, exists=True),
              help="Training run directory holding ranker.json (repeatable)")
@click.option("--log", "log_path", required=True, type=click.Path(dir_okay=False),
              help="Graded evaluation log (wpultr TSV)")
@click.option("--include-logged", is_flag=True,
              help="Also evaluate the logged order and the grade-sorted oracle")
@run_options
@guarded
def evaluate(runs, log_path, include_logged, config_path, out_dir, seed, jobs):
    """Score a graded log with trained rankers; write metric and position CSVs."""
    from wpultr.baselines import RankingModel
    from wpultr.ingest import read_log

    config = _load_config(config_path, out_dir, seed, jobs)
    eval_config = config.eval()
    log = read_log(log_path)
    if len(log) and not log.has_grades:
        raise ValidationError(f"{log_path}: evaluation log lacks the true_relevance column")
    if not runs and not include_logged:
        raise ValidationError("nothing to evaluate; pass --run and/or --include-logged")

    for run in runs:
        run_dir = Path(run)
        model_path = run_dir / "ranker.json"
        if not model_path.is_file():
            raise ValidationError(f"{run_dir}: missing ranker.json")
        method = _run_method(run_dir)
        scores = RankingModel.load(model_path).score_log(log)
        _evaluate_scores(log, scores, method, eval_config, run_dir)
        click.echo(f"  {method}: metrics written to {run_dir}")

    if include_logged:
        import numpy as np

        references = {
            "logged": -np.array([r.rank_position for r in log.records], dtype=np.float64),
            "oracle": np.array([r.true_relevance for r in log.records], dtype=np.float64),
        }
        for method, scores in references.items():
            ref_dir = config.out_dir / method
            _evaluate_scores(log, scores, method, eval_config, ref_dir)
            _write_json(ref_dir / "metadata.json", _metadata("evaluate", _now(), method=method))
            click.echo(f"  {method}: metrics written to {ref_dir}")
    click.echo(click.style("Done.", fg="green"))


@cli.command()
@click.argument("runs", nargs=-1, required=True, type=click.Path(file_okay=False))
@run_options
@guarded
def report(runs, config_path, out_dir, seed, jobs):
    """Merge evaluated runs into one table and render graph timelines."""
    import pandas as pd

    from wpultr.causal import read_snapshots, render_timeline
    from wpultr.causal.snapshots import SNAPSHOT_FILE

    out = _load_config(config_path, out_dir, seed, jobs).out_dir
    missing = []
    frames = []
    timeline: list[str] = []
    for run in runs:
        run_dir = Path(run)
        if not (run_dir / "metrics.csv").is_file():
            missing.append(f"{run_dir}: metrics.csv")
            continue
        for name in ("metrics.csv", "buckets.csv"):
            path = run_dir / name
            if path.is_file():
                frame = pd.read_csv(path)
                if len(frame):
                    frames.append(frame.assign(run=str(run_dir)))
        snapshots = run_dir / SNAPSHOT_FILE
        if snapshots.is_file():
            timeline.append(f"== {run_dir} ({_run_method(run_dir)})")
            timeline.extend(render_timeline(read_snapshots(snapshots)))
    if missing:
        raise ValidationError("missing artifacts:\n  " + "\n  ".join(missing))

    merged = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=["method", "metric", "cutoff", "partition", "mean", "sd", "n_queries", "run"]
    )
    comparison = (
        merged.groupby(["method", "metric", "cutoff", "partition"], sort=True)["mean"]
        .agg(["mean", "std", "count"])
        .rename(columns={"std": "sd_across_runs", "count": "n_runs"})
        .reset_index()
    )
    comparison["sd_across_runs"] = comparison["sd_across_runs"].fillna(0.0)

    out.mkdir(parents=True, exist_ok=True)
    comparison.to_csv(out / "comparison.csv", index=False, float_format="%.9g", lineterminator="\n")
    (out / "timeline.txt").write_text("".join(line + "\n" for line in timeline), encoding="utf-8")

    overall = comparison[comparison["partition"] == "all"]
    rows = []
    for method in sorted(overall["method"].unique()):
        row = [method]
        for metric, cutoff in SUMMARY_METRICS:
            hit = overall[(overall["method"] == method) & (overall["metric"] == metric)
                          & (overall["cutoff"] == cutoff)]
            row.append(f"{hit['mean'].iloc[0]:.4f}" if len(hit) else "-")
        rows.append(row)
    headers = ["Method"] + [f"{m}@{k}" if k else m for m, k in SUMMARY_METRICS]
    click.echo(tabulate(rows, headers=headers, tablefmt="simple"))
    if timeline:
        click.echo(f"\nGraph timeline: {out / 'timeline.txt'}")
        for line in timeline:
            click.echo(f"  {line}")


# =============================================================================
# Conversion
# =============================================================================

@cli.command()
@click.argument("src", type=click.Path(dir_okay=False, exists=True))
@click.argument("dst", type=click.Path(dir_okay=False))
@click.option("--from", "source", type=click.Choice(["baidu", "wpultr"]), default="baidu",
              show_default=True, help="Input format")
@click.option("--to", "target", type=click.Choice(["baidu", "wpultr"]), default="wpultr",
              show_default=True, help="Output format")
@guarded
def convert(src, dst, source, target):
    """Convert a click log between the Baidu-style layout and the wpultr format."""
    from wpultr.ingest import FORMATS
    from wpultr.ingest import convert as convert_log

    log = convert_log(src, dst, FORMATS[source](), FORMATS[target]())
    click.echo(f"Converted {len(log)} records: {src} ({source}) -> {dst} ({target})")


if __name__ == "__main__":
    cli()
