"""
Command-line interface for the VBD Workbench.
"""

import os
import sys
import json
import logging
import functools
from typing import Any, Dict, Optional

import click
import pandas as pd
import requests
from tabulate import tabulate

from vbd_workbench import VBDWorkbench
from vbd_workbench.anomaly import verdicts_frame, write_verdicts_csv
from vbd_workbench.autoencoder import AEArchitecture, TrainConfig, train_ae, train_vae
from vbd_workbench.config import Config, load_anomaly_config, load_experiment_config
from vbd_workbench.crossconcat import cross_concatenate, margin_stats
from vbd_workbench.dataset import NormalizationStats, load_csv, split_binary, write_csv
from vbd_workbench.exceptions import ValidationError, WorkbenchError
from vbd_workbench.fetcher import REGISTRY
from vbd_workbench.utils import format_metric, tool_metadata, write_metadata_lines
from vbd_workbench.vbd import ConcatConfig, synth_large, synth_small, write_virtual_csv

logger = logging.getLogger("vbd-workbench.cli")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(verbose: bool, log_file: Optional[str]) -> None:
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT,
                        handlers=handlers, force=True)


def handle_errors(func):
    """Map failures to exit codes: 2 for invalid input or config, 1 for everything else."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValidationError as e:
            logger.debug("Validation failure", exc_info=True)
            click.echo(f"Error: {e}", err=True)
            sys.exit(2)
        except (WorkbenchError, OSError, requests.RequestException) as e:
            logger.debug("Runtime failure", exc_info=True)
            click.echo(f"Error: {e}", err=True)
            sys.exit(1)

    return wrapper


def get_workbench() -> VBDWorkbench:
    """Get a VBDWorkbench configured from the user settings."""
    return VBDWorkbench(Config())


def echo_table(rows, headers="keys") -> None:
    df = pd.DataFrame(rows)
    click.echo(tabulate(df, headers=headers, tablefmt="psql", showindex=False))


def write_json(path: str, payload: Dict[str, Any]) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(payload, sort_keys=True, indent=2))
        f.write("\n")


def input_options(func):
    """Shared options for commands that read a labeled CSV."""
    func = click.option("--header", is_flag=True, help="First row of the input is a header")(func)
    func = click.option("--positive-label", default="1", show_default=True,
                        help="Raw label value of class 1")(func)
    func = click.option("--label-column", default="-1", show_default=True,
                        help="Label column index (negative counts from the end) or header name")(func)
    func = click.option("--input", "-i", "input_path", required=True, help="Input CSV file")(func)
    return func


def parse_architecture(value: str, input_dim: int) -> AEArchitecture:
    if value in ("auto", ""):
        hidden = []
        width = input_dim
        while width > 1 and len(hidden) < 3:
            width = max(1, (width * 2) // 3)
            hidden.append(width)
        return AEArchitecture.symmetric(input_dim, hidden)
    if "," in value:
        try:
            return AEArchitecture(tuple(int(part) for part in value.split(",")))
        except ValueError as e:
            raise ValidationError(f"architecture: cannot parse '{value}' ({e})") from e
    return AEArchitecture.preset(value)


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log debug messages")
@click.option("--log-file", help="Also write the log to this file")
def cli(verbose, log_file):
    """VBD Workbench - Virtual Big Data synthesis, Cross-Concatenation and VBD anomaly detection."""
    setup_logging(verbose, log_file)


@cli.command("synth")
@input_options
@click.option("--algorithm", type=click.Choice(["small", "large"]), default="small", show_default=True,
              help="small: full n*n cross product; large: u random c-tuples")
@click.option("-c", "concat", default=2, show_default=True, help="Instances concatenated per virtual row (large)")
@click.option("-u", "size", default=1000, show_default=True, help="Number of virtual rows (large)")
@click.option("--seed", default=0, show_default=True, help="Random seed (large)")
@click.option("--normalize", is_flag=True, help="Min-max normalize the input before concatenating")
@click.option("--output", "-o", required=True, help="Output file")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@handle_errors
def synth(input_path, label_column, positive_label, header, algorithm, concat, size, seed, normalize, output,
          fmt):
    """Synthesize Virtual Big Data from a labeled CSV."""
    data = load_csv(input_path, label_column, positive_label, header=header)
    features = NormalizationStats.fit(data.features).apply(data.features) if normalize else data.features

    if algorithm == "small":
        virtual = synth_small(features)
        resolved = {"algorithm": "small", "input": os.path.abspath(input_path), "normalize": normalize}
    else:
        virtual = synth_large(features, ConcatConfig(c=concat, u=size, seed=seed))
        resolved = {"algorithm": "large", "c": concat, "u": size, "seed": seed,
                    "input": os.path.abspath(input_path), "normalize": normalize}
    metadata = tool_metadata(resolved)
    if fmt == "json":
        write_json(output, {"metadata": metadata, "vectors": virtual.vectors.tolist()})
    else:
        write_virtual_csv(virtual, output, metadata=metadata)

    click.echo(f"Wrote {len(virtual)} virtual rows of dimension {virtual.dimension} to {output}")


@cli.command("project")
@input_options
@click.option("--max-pairs", type=int, help="Cap the number of (minority, majority) pairs")
@click.option("--margins", is_flag=True, help="Also report minimum distances before and after projection")
@click.option("--output", "-o", required=True, help="Output file for the projected training set")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@handle_errors
def project(input_path, label_column, positive_label, header, max_pairs, margins, output, fmt):
    """Cross-Concatenate the two classes of a labeled CSV into a balanced projected set."""
    data = load_csv(input_path, label_column, positive_label, header=header)
    split = split_binary(data)
    projected = cross_concatenate(split.minority, split.majority, max_pairs=max_pairs).to_dataset()

    metadata = tool_metadata({"input": os.path.abspath(input_path), "max_pairs": max_pairs,
                              "minority_label": split.minority_label})
    if fmt == "json":
        write_json(output, {"metadata": metadata, "vectors": projected.features.tolist(),
                            "labels": projected.labels.tolist()})
    else:
        write_csv(projected, output, metadata=metadata)

    rows = [{"minority": split.minority.shape[0], "majority": split.majority.shape[0],
             "projected_per_class": projected.instance_count // 2, "dimension": projected.feature_count}]
    echo_table(rows)

    if margins:
        stats = margin_stats(split.minority, split.majority)
        echo_table([{"original_min": format_metric(stats.original_min, 6),
                     "projected_min": format_metric(stats.projected_min, 6),
                     "ratio": format_metric(stats.ratio, 6)}])
    click.echo(f"Projected set written to {output}")


@cli.command("train-ae")
@input_options
@click.option("--architecture", "-a", default="auto", show_default=True,
              help="Preset name (wbc, pima, ...), comma-separated widths, or auto")
@click.option("--virtual", is_flag=True, help="Train on VBD (full cross product) with doubled widths")
@click.option("--variational", is_flag=True, help="Train a VAE instead of a plain autoencoder")
@click.option("--class-label", type=click.IntRange(0, 1), help="Train only on rows of this class")
@click.option("--epochs", type=int, help="Training epochs (default 100, or 10 with --virtual)")
@click.option("--learning-rate", default=1e-3, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--optimizer", type=click.Choice(["adam", "sgd"]), default="adam", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--output", "-o", required=True, help="Output file for the model (JSON)")
@click.option("--report", help="Output file for the per-epoch losses (CSV)")
@handle_errors
def train_autoencoder(input_path, label_column, positive_label, header, architecture, virtual, variational,
                      class_label, epochs, learning_rate, batch_size, optimizer, seed, output, report):
    """Train an autoencoder on min-max normalized data or its VBD."""
    data = load_csv(input_path, label_column, positive_label, header=header)
    features = data.features if class_label is None else data.features[data.labels == class_label]
    features = NormalizationStats.fit(features).apply(features)

    arch = parse_architecture(architecture, features.shape[1])
    config = TrainConfig(epochs=epochs or (10 if virtual else 100), learning_rate=learning_rate,
                         batch_size=batch_size, seed=seed, optimizer=optimizer)
    if virtual:
        features, arch = synth_small(features).vectors, arch.doubled()

    trainer = train_vae if variational else train_ae
    model, train_report = trainer(features, arch, config)

    metadata = tool_metadata({"input": os.path.abspath(input_path), "architecture": list(arch.layer_sizes),
                              "virtual": virtual, "variational": variational, "class_label": class_label,
                              "training": config.to_dict()})
    write_json(output, {"metadata": metadata, "model": model.to_dict()})
    if report:
        train_report.write_csv(report, metadata=metadata)

    echo_table([{"architecture": ",".join(str(s) for s in arch.layer_sizes), "rows": features.shape[0],
                 "epochs": train_report.epochs, "train_loss": format_metric(train_report.train_loss[-1], 6),
                 "val_loss": format_metric(train_report.final_val_loss, 6)}])
    click.echo(f"Model written to {output}")


@cli.command("anomaly")
@click.option("--config", "config_path", required=True, help="Anomaly run configuration (JSON/YAML)")
@click.option("--seed", type=int, help="Override the configured seed")
@click.option("--output", "-o", help="Override the output directory")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True,
              help="Format of the per-point verdicts file")
@handle_errors
def anomaly(config_path, seed, output, fmt):
    """Detect anomalies with an autoencoder trained on VBD of the normal class."""
    config = load_anomaly_config(config_path).override(seed=seed, output_dir=output)
    run = get_workbench().run_anomaly(config)
    metadata = tool_metadata(config.to_dict())

    os.makedirs(config.output_dir, exist_ok=True)
    verdicts_path = os.path.join(config.output_dir, f"verdicts.{fmt}")
    report_path = os.path.join(config.output_dir, "anomaly_report.json")
    labels = run.normal_mask.astype(int)
    if fmt == "json":
        frame = verdicts_frame(run.counts, config.w, labels)
        write_json(verdicts_path, {"metadata": metadata, "verdicts": json.loads(frame.to_json(orient="records"))})
    else:
        write_verdicts_csv(verdicts_path, run.counts, config.w, labels=labels, metadata=metadata)
    write_json(report_path, {"metadata": metadata, **run.to_dict()})

    click.echo(f"Thresholds: u={config.u}, w={config.w}")
    rows = [{"detector": "vbd", "threshold": config.w, "precision": format_metric(run.vbd_report.precision),
             "recall": format_metric(run.vbd_report.recall), "f1": format_metric(run.vbd_report.f1)}]
    if run.traditional_report is not None:
        rows.append({"detector": "traditional", "threshold": config.tau,
                     "precision": format_metric(run.traditional_report.precision),
                     "recall": format_metric(run.traditional_report.recall),
                     "f1": format_metric(run.traditional_report.f1)})
    echo_table(rows)
    click.echo(f"Verdicts written to {verdicts_path}, report written to {report_path}")


def write_frame_csv(path: str, frame: pd.DataFrame, metadata: Dict[str, Any]) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_metadata_lines(f, metadata)
        frame.to_csv(f, index=False, float_format="%.17g")


def _result_stem(config) -> str:
    dataset = os.path.splitext(os.path.basename(config.dataset.path))[0]
    return f"{dataset}-{config.method}-{config.classifier.kind}"


@cli.command("experiment")
@click.option("--config", "config_path", required=True, help="Experiment configuration (JSON/YAML)")
@click.option("--seed", type=int, help="Override the configured seed")
@click.option("--jobs", type=click.IntRange(min=1), help="Folds evaluated concurrently")
@click.option("--output", "-o", help="Override the output directory")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json", show_default=True,
              help="Format of the aggregate results file; per-fold results are always CSV")
@handle_errors
def experiment(config_path, seed, jobs, output, fmt):
    """Run a cross-validated experiment."""
    config = load_experiment_config(config_path).override(seed=seed, jobs=jobs, output_dir=output)
    result = get_workbench().run_experiment(config)
    metadata = tool_metadata(config.to_dict())

    os.makedirs(config.output_dir, exist_ok=True)
    stem = os.path.join(config.output_dir, _result_stem(config))
    rows = [{"metric": metric, "mean": summary["mean"], "std": summary["std"]}
            for metric, summary in result.aggregate().items()]
    results_path = f"{stem}.{fmt}"
    if fmt == "json":
        with open(results_path, "w", encoding="utf-8") as f:
            f.write(result.to_json(metadata))
            f.write("\n")
    else:
        write_frame_csv(results_path, pd.DataFrame(rows, columns=["metric", "mean", "std"]), metadata)
    write_frame_csv(f"{stem}-folds.csv", result.folds_frame(), metadata)

    echo_table([{"metric": row["metric"], "mean": format_metric(row["mean"]), "std": format_metric(row["std"])}
                for row in rows])
    click.echo(f"Results written to {results_path} and {stem}-folds.csv")


@cli.command("stability")
@click.option("--config", "config_path", required=True, help="Experiment configuration (JSON/YAML)")
@click.option("--repeats", type=int, help="Override the configured number of repeats")
@click.option("--seed", type=int, help="Override the configured base seed")
@click.option("--jobs", type=click.IntRange(min=1), help="Folds evaluated concurrently")
@click.option("--output", "-o", help="Override the output directory")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json", show_default=True)
@handle_errors
def stability(config_path, repeats, seed, jobs, output, fmt):
    """Repeat an experiment with varying method seeds and report metric variance."""
    config = load_experiment_config(config_path).override(repeats=repeats, seed=seed, jobs=jobs,
                                                          output_dir=output)
    if config.repeats < 2:
        raise ValidationError(f"repeats: must be >= 2, got {config.repeats}")
    report = get_workbench().run_stability(config)
    metadata = tool_metadata(config.to_dict())

    path = os.path.join(config.output_dir, f"{_result_stem(config)}-stability.{fmt}")
    if fmt == "json":
        write_json(path, {"metadata": metadata, **report.to_dict()})
    else:
        write_frame_csv(path, report.to_frame(), metadata)

    echo_table([{"metric": metric, "variance": f"{variance:.3e}"} for metric, variance in report.variance.items()])
    click.echo(f"Stability report written to {path}")


@cli.command("fetch")
@click.argument("name", type=click.Choice(sorted(REGISTRY)))
@click.option("--data-dir", help="Directory for the cleaned CSV (default from settings)")
@click.option("--refresh", is_flag=True, help="Ignore any cached download")
@handle_errors
def fetch(name, data_dir, refresh):
    """Download a UCI benchmark dataset and write a cleaned CSV."""
    workbench = get_workbench()
    if data_dir:
        workbench.fetcher.data_dir = data_dir
    fetched = workbench.fetch_dataset(name, refresh=refresh)
    click.echo(f"{name}: {fetched.path} (label column {fetched.label_column}, "
               f"positive label {fetched.positive_label!r})")


def main():
    """Entry point for the CLI."""
    cli()


if __name__ == "__main__":
    main()
