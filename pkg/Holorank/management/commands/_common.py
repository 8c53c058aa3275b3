from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from Holorank.exceptions import USAGE_ERRORS, HolorankError


class HolorankCommand(BaseCommand):
    """Base for the ranking commands: exit 2 for input/config errors, 1 for runtime failures."""

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except USAGE_ERRORS as exc:
            raise CommandError(str(exc), returncode=2) from exc
        except HolorankError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=1) from exc

    def run(self, **options):
        raise NotImplementedError

    def require_file(self, path, what):
        if path is None:
            raise CommandError(f"{what} path is required", returncode=2)
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"{what} file not found: {path}")
        return path

    def write_metrics(self, metrics, label=""):
        prefix = f"{label} " if label else ""
        self.stdout.write(
            f"{prefix}MAP {metrics['map']:.4f} MRR {metrics['mrr']:.4f} P@1 {metrics['p_at_1']:.4f}"
        )
        if metrics.get("skipped_queries"):
            self.stdout.write(
                self.style.WARNING(f"{metrics['skipped_queries']} queries without a positive answer were skipped")
            )
