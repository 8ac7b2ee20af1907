"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 infrastructure abort.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .agreement import agreement_rate, load_judgments, load_scores
from .errors import (
    ConfigError,
    DataError,
    InfrastructureError,
    ManifestError,
    UndefinedAggregateError,
)
from .harness import RunConfig, export_report, load_report, rescore, run_eval
from .schema_audit import coverage

EXIT_CONFIG = 2
EXIT_INFRA = 3


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main() -> None:
    """Reference-free chart caption evaluation and verification toolkit."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--manifest", default=None, type=click.Path())
@click.option("--out", "out_dir", default=None, type=click.Path())
def evaluate(config_path: str, manifest: str | None, out_dir: str | None) -> None:
    """Run the full evaluation described by a JSON config file."""
    try:
        config = RunConfig.from_file(config_path, manifest=manifest, out_dir=out_dir)
        report = run_eval(config)
    except (ConfigError, ManifestError, FileNotFoundError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except InfrastructureError as exc:
        _fail(EXIT_INFRA, str(exc))
    click.echo(json.dumps(report.scores.to_dict(), indent=2))


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True))
@click.option("--encoders", "encoder_specs", multiple=True, required=True)
def score(run_dir: str, encoder_specs: tuple[str, ...]) -> None:
    """Re-score the cached reconstructions of a finished run.

    Each encoder spec is either the literal ``ref-64`` or a path to a JSON
    file holding an encoder config object.
    """
    cfgs = []
    for spec in encoder_specs:
        if spec == "ref-64":
            cfgs.append({"kind": "reference"})
        elif Path(spec).is_file():
            cfgs.append(json.loads(Path(spec).read_text(encoding="utf-8")))
        else:
            _fail(EXIT_CONFIG, f"unknown encoder spec {spec!r}")
    try:
        report = rescore(run_dir, cfgs)
    except (ConfigError, FileNotFoundError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except InfrastructureError as exc:
        _fail(EXIT_INFRA, str(exc))
    click.echo(json.dumps(report.scores.to_dict(), indent=2))


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="csv")
@click.option("--out", "out_path", default=None, type=click.Path())
def export(run_dir: str, fmt: str, out_path: str | None) -> None:
    """Export a finished run as JSON or flat CSV."""
    try:
        report = load_report(run_dir)
        target = Path(out_path) if out_path else Path(run_dir) / f"report.{fmt}"
        written = export_report(report, fmt, target)
    except (ConfigError, FileNotFoundError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    click.echo(str(written))


@main.command("schema-check")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--type-field", default="chart_type")
@click.option("--out", "out_path", default=None, type=click.Path())
def schema_check(manifest_path: str, type_field: str, out_path: str | None) -> None:
    """Emit a per-sample coverage report (line JSON) for a manifest."""
    lines = []
    for line_no, line in enumerate(
        Path(manifest_path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            _fail(EXIT_CONFIG, f"line {line_no}: malformed JSON: {exc.msg}")
        chart_type = record.get(type_field)
        out = {"id": record.get("id", f"line-{line_no}")}
        if chart_type is None:
            out["coverage"] = None
        else:
            out["coverage"] = coverage(record.get("caption", ""), chart_type).to_dict()
        lines.append(json.dumps(out, ensure_ascii=False))
    text = "\n".join(lines) + ("\n" if lines else "")
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--judgments", "judgments_path", required=True, type=click.Path(exists=True))
@click.option("--scores", "score_paths", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--criterion", required=True)
@click.argument("extra_scores", nargs=-1, type=click.Path(exists=True))
def agreement(
    judgments_path: str, score_paths: tuple[str, ...], criterion: str, extra_scores: tuple[str, ...]
) -> None:
    """Rate of comparisons where the human winner scored strictly higher.

    Score files may be passed as repeated --scores flags or appended after
    the first one: ``--scores s1.json s2.json s3.json``.
    """
    try:
        judgments = load_judgments(judgments_path)
        rows = []
        for path in list(score_paths) + list(extra_scores):
            scores = load_scores(path)
            rows.append(agreement_rate(judgments, scores, criterion))
    except (DataError, UndefinedAggregateError, OSError, KeyError, json.JSONDecodeError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    click.echo(f"criterion: {criterion}")
    click.echo("conventions: metric ties count as non-agreement; human majority ties excluded")
    click.echo(f"{'metric':24} {'rate':>8} {'tie_frac':>9} {'n_used':>7} {'human_ties':>11}")
    for row in rows:
        click.echo(
            f"{row.metric_id:24} {row.rate:8.4f} {row.tie_fraction:9.4f} "
            f"{row.n_used:7d} {row.human_ties:11d}"
        )


@main.command()
@click.option("--state-dir", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--lease-ttl", default=300.0, type=float)
def serve(
    state_dir: str, config_path: str | None, host: str, port: int, lease_ttl: float
) -> None:
    """Run the human-verification HTTP service."""
    import uvicorn

    from .harness import build_text_backend
    from .reconstructor import PromptSet
    from .sandbox import RenderSandbox, SandboxLimits
    from .service import ReviewService, build_reconstruct_fn, create_app

    reconstruct_fn = None
    if config_path:
        try:
            cfg = json.loads(Path(config_path).read_text(encoding="utf-8"))
            backend = build_text_backend(cfg.get("text_backend", {"kind": "mock"}))
            sandbox = RenderSandbox(SandboxLimits(**cfg.get("sandbox", {})))
            prompts = (
                PromptSet.load(cfg["prompts_dir"]) if cfg.get("prompts_dir") else PromptSet.load()
            )
            reconstruct_fn = build_reconstruct_fn(
                backend,
                sandbox,
                prompts,
                max_attempts=cfg.get("max_attempts", 3),
                image_dir=Path(state_dir) / "renders",
            )
        except (ConfigError, KeyError, json.JSONDecodeError) as exc:
            _fail(EXIT_CONFIG, f"invalid service config: {exc}")
    service = ReviewService(state_dir, reconstruct_fn=reconstruct_fn, lease_ttl=lease_ttl)
    service.start_sweeper()
    app = create_app(service)
    ui_dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dist.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dist, html=True), name="ui")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
