"""
Main Application Entry Point
Command-line interface: cost sweeps, ERF maps, invariant checks, attention dumps en decoder demo
"""

import functools
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import click
import numpy as np
import structlog
from pydantic import ValidationError

from app import __version__
from app.analysis import (
    attention_row_dump,
    build_erf_model,
    collapse_metric,
    erf_map,
    structured_sampler,
    support_bbox,
    support_mask,
)
from app.attention import init_attn_weights, with_zero_bias
from app.checks import SUITE_NAMES, CheckRunner
from app.config import load_raw_config, settings
from app.core.tensor import Tensor
from app.cost import sweep
from app.errors import BoundsError, ConfigError, GeometryError, OverwriteError, ShapeError
from app.models import RunConfig, ToolConfig, VWFormerConfig
from app.rescalers import rescaler_registry
from app.storage import ArtifactDir, encode_tensor, pgm_bytes, ppm_bytes, save_decoder_weights
from app.storage.exporters import erf_summary, sweep_json, write_attention_csv, write_sweep_csv
from app.storage.weights import flat_decoder_maps, map_files
from app.vwformer import decoder_cost, init_decoder_weights, synth_features

logger = structlog.get_logger()

EXIT_FAILURE = 1

# Problems with what the user asked for; they end in a usage error (exit 2)
USAGE_ERRORS = (ConfigError, GeometryError, ShapeError, BoundsError, OverwriteError, ValidationError)


def configure_logging(level: str):
    """JSON log lines on stderr; stdout stays free for command output"""
    level_value = logging.getLevelName(level.upper())
    if not isinstance(level_value, int):
        level_value = logging.WARNING
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level_value),
        logger_factory=structlog.PrintLoggerFactory(sys.stderr),
        cache_logger_on_first_use=False,
    )


class Session:
    """Parsed global options plus the validated tool config"""

    def __init__(self, run: RunConfig, tool: ToolConfig):
        self.run = run
        self.tool = tool

    @property
    def seed(self) -> int:
        return self.run.seed

    def artifacts(self) -> ArtifactDir:
        return ArtifactDir(self.run.out_dir, force=self.run.force)


def usage_errors(command):
    """Turn user-input errors raised by a command into click usage errors"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except USAGE_ERRORS as e:
            logger.warning("usage_error", error=str(e), error_type=type(e).__name__)
            raise click.UsageError(str(e)) from e

    return wrapper


def _position(text: Optional[str]) -> Optional[Tuple[int, int]]:
    if text is None:
        return None
    try:
        i, j = (int(part) for part in text.split(","))
    except ValueError:
        raise click.BadParameter(f"'{text}' is not i,j") from None
    return i, j


def _format_bbox(bbox) -> str:
    if bbox is None:
        return "empty"
    (top, left), (bottom, right) = bbox
    return f"({top},{left})-({bottom},{right})"


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="JSON run config")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory")
@click.option("--seed", type=int, default=None, help="Seed for every randomized step")
@click.option("--force", is_flag=True, help="Overwrite existing artifacts")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Dotted config override (repeatable)")
@click.version_option(version=__version__)
@click.pass_context
def cli(ctx, config_path, out_dir, seed, force, overrides):
    """Varying window attention lab"""
    configure_logging(settings.log_level)
    try:
        run = RunConfig(
            command=ctx.invoked_subcommand or "",
            config_path=config_path,
            out_dir=out_dir or Path(settings.output_dir),
            seed=settings.default_seed if seed is None else seed,
            overrides=list(overrides),
            force=force,
        )
        tool = ToolConfig(**load_raw_config(config_path, overrides))
    except (ValidationError, ConfigError) as e:
        raise click.UsageError(str(e)) from e
    ctx.obj = Session(run, tool)


# ---------------------------------------------------------------------------
# cost
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--measure-only", is_flag=True, help="Skip the analytic columns")
@click.pass_obj
@usage_errors
def cost(session: Session, measure_only: bool):
    """Measured (and analytic) MAC/memory budgets over the sweep grid"""
    grid = session.tool.sweep
    cells = grid.cells()
    if not cells:
        raise click.UsageError("sweep grid is empty")

    rows = sweep(
        cells,
        heads=grid.heads,
        pad_mode=grid.pad_mode,
        seed=session.seed,
        measure_only=measure_only,
    )
    artifacts = session.artifacts()
    artifacts.claim_all(["cost.csv", "cost.json"])
    csv_path = write_sweep_csv(artifacts.claim("cost.csv"), rows, measure_only=measure_only)
    artifacts.write_json("cost.json", sweep_json(rows))

    disagreeing = [row for row in rows if not row.agrees]
    click.echo(f"{len(rows)} rows written to {csv_path}")
    for row in disagreeing:
        click.echo(f"DIFF {row.variant.value} {row.config.model_dump()}")
    if disagreeing:
        sys.exit(EXIT_FAILURE)


# ---------------------------------------------------------------------------
# erf
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--model", "spec", default=None, help="short | lwa | ga | vwa:R | vwformer-stage")
@click.option("--query", default=None, help="Output pixel as i,j (default: centre)")
@click.option("--samples", type=int, default=None, help="Random inputs to average")
@click.option("--size", type=int, default=None, help="Square feature side")
@click.option("--window", type=int, default=None, help="Window side P")
@click.option("--structured", is_flag=True, help="Smooth blob inputs instead of noise")
@click.option("--cmap", default="inferno", show_default=True, help="matplotlib colormap for the PPM")
@click.pass_obj
@usage_errors
def erf(session: Session, spec, query, samples, size, window, structured, cmap):
    """Effective receptive field heatmaps of one output pixel"""
    job = session.tool.erf
    spec = spec or job.model
    size = size or job.size
    position = _position(query) or job.query or (size // 2, size // 2)
    window = window or job.window
    structured = structured or job.structured

    model = build_erf_model(spec, size, position, session.tool.attn, window=window, seed=session.seed)
    sampler = structured_sampler(model.input_shape, session.seed) if structured else None
    result = erf_map(
        model.forward,
        model.input_shape,
        position,
        n_samples=samples or job.samples,
        seed=session.seed,
        sampler=sampler,
    )

    mask = support_mask(result)
    bbox = support_bbox(mask)
    summary = erf_summary(result, spec, bbox)
    summary["within_region"] = not bool(np.any(mask & ~model.region))

    pgm, ppm = pgm_bytes(result), ppm_bytes(result, cmap)
    artifacts = session.artifacts()
    artifacts.claim_all(["erf.pgm", "erf.ppm", "erf.json"])
    artifacts.write_bytes("erf.pgm", pgm)
    artifacts.write_bytes("erf.ppm", ppm)
    artifacts.write_json("erf.json", summary)
    click.echo(f"support bbox: {_format_bbox(bbox)}")


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


@cli.command()
@click.argument("suite", type=click.Choice(SUITE_NAMES), default="all")
@click.pass_obj
@usage_errors
def check(session: Session, suite: str):
    """Run an invariant suite; exit 0 iff every check passes"""
    runner = CheckRunner(seed=session.seed)
    results = runner.run(suite)
    stats = runner.get_stats()

    session.artifacts().write_json(
        "check_summary.json",
        {
            "suite": suite,
            "seed": session.seed,
            "passed": stats["passed"],
            "failed": stats["failed"],
            "results": [result.model_dump(mode="json") for result in results],
        },
    )
    for result in results:
        click.echo(f"{'PASS' if result.passed else 'FAIL'} {result.suite}/{result.name}")
    if stats["failed"]:
        sys.exit(EXIT_FAILURE)


# ---------------------------------------------------------------------------
# dump
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--size", type=int, default=16, show_default=True, help="Square feature side")
@click.option("--window", type=int, default=None, help="Window side P (default: attn.window or side/8)")
@click.option("--window-index", type=int, default=0, show_default=True)
@click.option("--query-index", type=int, default=0, show_default=True)
@click.option("--head", type=int, default=0, show_default=True)
@click.option("--zero-key-bias", is_flag=True, help="Zero the bias of the key map")
@click.pass_obj
@usage_errors
def dump(session: Session, size, window, window_index, query_index, head, zero_key_bias):
    """One attention row with padded-key flags, as CSV"""
    attn = session.tool.attn
    cfg = attn.resolve(window or attn.window or max(1, size // 8))
    rng = np.random.default_rng(session.seed)
    x = Tensor.random_normal((cfg.channels, size, size), rng)
    weights = init_attn_weights(cfg, session.seed)
    if zero_key_bias:
        weights = with_zero_bias(weights, [rescaler_registry.get(cfg.strategy).key_map])

    row = attention_row_dump(cfg, weights, x, window_index, query_index, head)
    write_attention_csv(session.artifacts().claim("attention_row.csv"), row)
    click.echo(f"row of {len(row.weights)} weights, {sum(row.padded)} padded")
    if any(row.padded):
        metric = collapse_metric(row.weights, row.padded)
        click.echo(f"distinct padded values: {metric.distinct_count}, entropy {metric.padded_entropy:.6f}")


# ---------------------------------------------------------------------------
# demo
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--decoder", "preset", type=click.Choice(["standard", "efficient"]), default=None)
@click.option("--image-size", type=int, default=None)
@click.option("--profile", default=None, help="Backbone channel profile")
@click.option("--structured", is_flag=True, help="Blob features instead of noise")
@click.pass_obj
@usage_errors
def demo(session: Session, preset, image_size, profile, structured):
    """Full decoder forward on synthetic features: logits, weights and cost report"""
    job = session.tool.demo
    cfg = job.decoder
    if preset == "standard":
        cfg = VWFormerConfig.standard(cfg.num_classes, cfg.lle)
    elif preset == "efficient":
        cfg = VWFormerConfig.efficient(cfg.num_classes, cfg.lle)
    image_size = image_size or job.image_size
    profile = profile or job.profile
    structured = structured or job.structured

    features = synth_features(session.seed, image_size, image_size, profile=profile, structured=structured)
    weights = init_decoder_weights(cfg, features.channels, session.seed)
    logits, summary = decoder_cost(features, weights, cfg, profile)

    artifacts = session.artifacts()
    weight_files = map_files(flat_decoder_maps(weights))
    artifacts.claim_all(["logits.vwt", "cost.json"] + [f"weights/{name}" for name in weight_files])
    artifacts.write_bytes("logits.vwt", encode_tensor(logits))
    save_decoder_weights(artifacts.subdir("weights"), weights)
    artifacts.write_json("cost.json", summary.model_dump(mode="json"))

    click.echo(f"logits {tuple(logits.shape)}, macs_total {summary.macs_total}")
    click.echo("channel flow: " + " -> ".join(str(width) for width in summary.channel_flow))


def main(argv: Optional[List[str]] = None):
    """Entry point"""
    cli.main(args=argv, prog_name="vwa")


if __name__ == "__main__":
    main()
