"""Run registry bookkeeping for the train command.

The trainer never touches the database; the command marks a run started,
records each epoch through the trainer's callback and marks the outcome.
"""

from django.db import transaction
from django.db.models import F
from django.utils import timezone

from .models import EpochRecord, TrainingRun


def _truncate(text, max_len=240):
    value = str(text or "").strip()
    if len(value) <= max_len:
        return value
    return value[: max_len - 1].rstrip() + "…"


def default_run_tag(architecture):
    return f"{architecture}-{timezone.now().strftime('%Y%m%d-%H%M%S-%f')}"


def start_training_run(manifest, run_tag=None):
    tag = run_tag or manifest.tag or default_run_tag(manifest.model.architecture.value)
    with transaction.atomic():
        run, created = TrainingRun.objects.get_or_create(
            run_tag=tag,
            defaults={
                "architecture": manifest.model.architecture.value,
                "manifest": manifest.to_dict(),
                "output_dir": str(manifest.out_dir),
            },
        )
        if not created:
            run.epochs.all().delete()
            run.architecture = manifest.model.architecture.value
            run.manifest = manifest.to_dict()
            run.output_dir = str(manifest.out_dir)
            run.status = "started"
            run.best_dev_map = run.best_dev_mrr = run.best_test_map = None
            run.epochs_completed = 0
            run.last_error = ""
            run.save()
    return run


def record_epoch(run, record):
    EpochRecord.objects.update_or_create(
        run=run,
        epoch=record["epoch"],
        defaults={
            "loss": record["loss"],
            "dev_map": record["dev_map"],
            "dev_mrr": record["dev_mrr"],
            "wall_seconds": record.get("wall_seconds") or 0.0,
            "checkpoint_path": record.get("checkpoint") or "",
        },
    )
    TrainingRun.objects.filter(pk=run.pk).update(epochs_completed=F("epochs_completed") + 1, updated_at=timezone.now())


def mark_run_succeeded(run, result):
    best = result.best
    TrainingRun.objects.filter(pk=run.pk).update(
        status="succeeded",
        best_dev_map=best.dev_map,
        best_dev_mrr=best.dev_mrr,
        best_test_map=result.best_test_map,
        last_error="",
        updated_at=timezone.now(),
    )


def mark_run_failed(run, exc):
    TrainingRun.objects.filter(pk=run.pk).update(
        status="failed",
        last_error=_truncate(f"{type(exc).__name__}: {exc}"),
        updated_at=timezone.now(),
    )
