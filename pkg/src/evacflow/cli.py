"""Command-line entry point for the full pipeline.

Run ids follow the model/representation/attention naming convention:
"U-R" (U-Net on RGB), "D-F" (diffusion on decoupled features),
"D-F-Att" (same plus attention), and so on. Exit codes: 0 success,
1 user error, 2 internal error. Every report is emitted both as a
rendered table and as JSON.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import EvacflowError

RUN_ID_ORDER = ["U-R", "U-F", "D-R", "D-F", "D-R-Att", "D-F-Att"]


def derive_run_id(model: str, representation: str, attention: bool) -> str:
    prefix = {"unet": "U", "diffusion": "D"}[model]
    mid = {"rgb": "R", "feature": "F"}[representation]
    run_id = f"{prefix}-{mid}"
    if attention:
        run_id += "-Att"
    return run_id


def parse_run_id(run_id: str) -> tuple[str, str, bool]:
    parts = run_id.split("-")
    model = {"U": "unet", "D": "diffusion"}.get(parts[0])
    representation = {"R": "rgb", "F": "feature"}.get(parts[1]) if len(parts) > 1 else None
    attention = len(parts) > 2 and parts[2] == "Att"
    if model is None or representation is None:
        raise click.UsageError(f"unrecognized run id: {run_id!r}")
    if attention and model == "unet":
        raise click.UsageError("attention is only configured for diffusion runs")
    return model, representation, attention


@click.group()
def cli():
    """Evacuation-heatmap workbench: dataset, training, evaluation, service."""


@cli.group()
def dataset():
    """Dataset construction commands."""


@dataset.command("gen")
@click.option("--bases", type=int, required=True, help="number of base layouts")
@click.option("--augment", "augment_factor", type=int, default=5,
              help="entries per base layout (1 = no augmentation)")
@click.option("--size", type=int, default=64, help="output image resolution")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), default="data")
@click.option("--ungrouped", is_flag=True,
              help="split by entry instead of by base layout")
def dataset_gen(bases, augment_factor, size, seed, out, ungrouped):
    """Generate layouts, run the oracle, and write the training dataset."""
    from .dataset import build_dataset

    manifest = build_dataset(
        out,
        n_base=bases,
        augment_factor=augment_factor,
        image_size=size,
        seed=seed,
        group_by_base=not ungrouped,
    )
    click.echo(f"manifest: {Path(out) / 'manifest.json'}")
    click.echo(f"entries: {len(manifest.entries)}  omissions: {len(manifest.omissions)}")
    click.echo(f"config_hash: {manifest.config_hash}")
    click.echo(f"manifest_hash: {manifest.manifest_hash()}")


@cli.command()
@click.option("--model", type=click.Choice(["unet", "diffusion"]), required=True)
@click.option("--repr", "representation", type=click.Choice(["rgb", "feature"]),
              required=True)
@click.option("--attention", is_flag=True)
@click.option("--lr", type=float, default=0.0003,
              help="one of 0.0002 / 0.0003 / 0.0005 / 0.001")
@click.option("--epochs", type=int, default=300)
@click.option("--batch", "batch_size", type=int, default=16)
@click.option("--steps", type=int, default=1000,
              help="diffusion chain length T")
@click.option("--rescale-steps", is_flag=True,
              help="preserve the total variance budget at shorter T")
@click.option("--width", type=int, default=32, help="U-Net base width")
@click.option("--depth", type=int, default=4)
@click.option("--val-every", type=int, default=None,
              help="validation interval (default: 100 diffusion, 50 unet)")
@click.option("--seed", type=int, default=0)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True),
              required=True)
@click.option("--out", type=click.Path(), default="checkpoints")
def train(model, representation, attention, lr, epochs, batch_size, steps,
          rescale_steps, width, depth, val_every, seed, manifest_path, out):
    """Train one run and save its checkpoint under the run id."""
    from .checkpoint import save_checkpoint
    from .dataset import DatasetManifest

    if attention and model == "unet":
        raise click.UsageError(
            "attention applies to diffusion runs only (use --model diffusion)"
        )
    run_id = derive_run_id(model, representation, attention)
    manifest = DatasetManifest.load(manifest_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    click.echo(f"run id: {run_id}")
    click.echo(f"manifest_hash: {manifest.manifest_hash()}")

    if model == "diffusion":
        from .diffusion import (
            DenoiserConfig,
            TrainingConfig,
            make_rescaled_schedule,
            make_schedule,
            train as train_diffusion,
        )

        dcfg = DenoiserConfig(
            image_size=manifest.image_size,
            representation=representation,
            base_width=width,
            depth=depth,
            attention_enabled=attention,
        )
        tcfg = TrainingConfig(
            learning_rate=lr,
            epochs=epochs,
            batch_size=batch_size,
            validation_interval_epochs=val_every or 100,
            seed=seed,
        )
        schedule = make_rescaled_schedule(steps) if rescale_steps else make_schedule(steps)
        result = train_diffusion(manifest, dcfg, tcfg, schedule, log=click.echo)
        kind = "diffusion"
    else:
        from .baselines import RegressorConfig, train_baseline
        from .diffusion import TrainingConfig

        cfg = RegressorConfig(
            image_size=manifest.image_size,
            representation=representation,
            base_width=width,
            depth=depth,
        )
        tcfg = TrainingConfig(
            learning_rate=lr,
            epochs=epochs,
            batch_size=batch_size,
            validation_interval_epochs=val_every or 50,
            seed=seed,
        )
        result = train_baseline(manifest, cfg, tcfg, log=click.echo)
        kind = "unet"

    path = out_dir / f"{run_id}.pt"
    save_checkpoint(path, result, kind=kind, run_id=run_id)
    click.echo(f"saved: {path}")
    click.echo(f"best_val_ssim: {result.best_val_ssim:.4f} (epoch {result.best_epoch})")


def _evaluate_checkpoint(ckpt, manifest, split, seed, diff_map_dir=None):
    from .checkpoint import manifest_predictor
    from .metrics import evaluate
    from .oracle import load_heatmap_png

    entries = manifest.split_entries(split)
    predictor = manifest_predictor(ckpt, manifest, seed=seed)
    truth = lambda entry: load_heatmap_png(manifest.resolve(entry.heatmap_path))
    return evaluate(
        entries,
        predictor,
        truth,
        model_tag=ckpt.run_id,
        manifest_hash=manifest.manifest_hash(),
        diff_map_dir=diff_map_dir,
    )


@cli.command("eval")
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True),
              required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True),
              required=True)
@click.option("--split", type=click.Choice(["train", "val", "test"]), default="test")
@click.option("--seed", type=int, default=0)
@click.option("--diff-maps", "diff_map_dir", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_cmd(checkpoint_path, manifest_path, split, seed, diff_map_dir, out_path):
    """Score a checkpoint against oracle heatmaps on one split."""
    from .checkpoint import load_checkpoint
    from .dataset import DatasetManifest
    from .metrics import render_table

    manifest = DatasetManifest.load(manifest_path)
    ckpt = load_checkpoint(checkpoint_path)
    report = _evaluate_checkpoint(ckpt, manifest, split, seed, diff_map_dir)
    click.echo(render_table([(ckpt.run_id, report.means())]))
    out_path = out_path or f"eval_{ckpt.run_id}_{split}.json"
    report.save(out_path)
    click.echo(f"report: {out_path}")


@cli.command()
@click.option("--plan", "plan_path", type=click.Path(exists=True), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True),
              required=True)
@click.option("--registry", "registry_dir", type=click.Path(exists=True),
              required=True)
@click.option("--split", default="test")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), default="compare_report.json")
def compare(plan_path, manifest_path, registry_dir, split, seed, out_path):
    """Evaluate every run in an experiment plan and render one table."""
    from .checkpoint import load_checkpoint
    from .dataset import DatasetManifest
    from .metrics import render_table

    plan = json.loads(Path(plan_path).read_text())
    runs = plan.get("runs", [])
    if not runs:
        raise click.UsageError(f"{plan_path}: plan has no runs")
    ids = []
    for run in runs:
        run_id = derive_run_id(
            run["model"], run["representation"], run.get("attention", False)
        )
        if run_id in ids:
            raise click.UsageError(f"duplicate run id in plan: {run_id}")
        ids.append(run_id)

    manifest = DatasetManifest.load(manifest_path)
    rows, missing, doc_rows = [], [], []
    order = {rid: i for i, rid in enumerate(RUN_ID_ORDER)}
    for run_id in sorted(ids, key=lambda r: order.get(r, 99)):
        path = Path(registry_dir) / f"{run_id}.pt"
        if not path.exists():
            missing.append(run_id)
            continue
        ckpt = load_checkpoint(path)
        report = _evaluate_checkpoint(ckpt, manifest, split, seed)
        means = report.means()
        rows.append((run_id, means))
        doc_rows.append({"id": run_id, **{k: _jsonable(v) for k, v in means.items()}})

    click.echo(render_table(rows))
    if missing:
        click.echo(f"missing checkpoints (skipped): {', '.join(missing)}")
    Path(out_path).write_text(
        json.dumps(
            {
                "split": split,
                "seed": seed,
                "manifest_hash": manifest.manifest_hash(),
                "rows": doc_rows,
                "missing": missing,
            },
            indent=1,
        )
    )
    click.echo(f"report: {out_path}")


def _jsonable(value):
    import math

    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


@cli.command("bench-time")
@click.option("--complexity-tiers", "n_tiers", type=int, default=5)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True),
              required=True)
@click.option("--seed", type=int, default=0)
@click.option("--demo-blocks", type=int, default=12,
              help="density of the demo floor (0 skips the demo contrast)")
@click.option("--out", "out_path", type=click.Path(), default="bench_report.json")
def bench_time(n_tiers, checkpoint_path, seed, demo_blocks, out_path):
    """Time the oracle against surrogate sampling across complexity tiers."""
    from .bench import run_time_benchmark
    from .checkpoint import load_checkpoint

    ckpt = load_checkpoint(checkpoint_path)
    report = run_time_benchmark(
        ckpt, n_tiers=n_tiers, seed=seed, demo_blocks=demo_blocks
    )
    click.echo(report.render_text())
    report.save(out_path)
    click.echo(f"report: {out_path}")


@cli.command()
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--registry", "registry_dir", type=click.Path(), required=True)
@click.option("--ui", "ui_dir", type=click.Path(), default=None)
def serve(port, host, registry_dir, ui_dir):
    """Start the local prediction service."""
    import uvicorn

    from .service import create_app

    registry = Path(registry_dir)
    if not registry.is_dir():
        raise click.UsageError(f"registry directory does not exist: {registry}")
    app = create_app(registry, ui_dir=ui_dir)
    try:
        uvicorn.run(app, host=host, port=port)
    except OSError as exc:
        raise click.ClickException(f"cannot bind {host}:{port}: {exc}")


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except EvacflowError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
