from django.conf import settings

from Holorank.bench import DEFAULT_DIMS, OPERATORS, fit_slopes, run_bench

from ._common import HolorankCommand


class Command(HolorankCommand):
    help = "Times the compositional operators over a range of dimensions and fits their scaling slopes."

    def add_arguments(self, parser):
        parser.add_argument(
            "--dims",
            type=int,
            nargs="+",
            default=list(DEFAULT_DIMS),
            help="Dimensions to time (default: 256 ... 16384).",
        )
        parser.add_argument("--slices", type=int, default=5, help="Tensor slices k (default: 5).")
        parser.add_argument("--hidden", type=int, default=64, help="Hidden size h (default: 64).")
        parser.add_argument("--repetitions", type=int, help="Timed calls per cell (default: HOLORANK_BENCH_REPETITIONS).")
        parser.add_argument("--warmups", type=int, help="Untimed calls per cell (default: HOLORANK_BENCH_WARMUPS).")
        parser.add_argument("--operators", nargs="+", choices=OPERATORS, default=list(OPERATORS))

    def run(self, **options):
        repetitions = options.get("repetitions") or int(getattr(settings, "HOLORANK_BENCH_REPETITIONS", 30))
        warmups = options.get("warmups")
        if warmups is None:
            warmups = int(getattr(settings, "HOLORANK_BENCH_WARMUPS", 5))
        limit = int(getattr(settings, "HOLORANK_BENCH_TENSOR_MAX_ELEMENTS", 2**25))

        rows = run_bench(
            dims=options["dims"],
            slices=options["slices"],
            hidden=options["hidden"],
            repetitions=repetitions,
            warmups=warmups,
            operators=options["operators"],
            max_tensor_elements=limit,
        )
        self.stdout.write(f"{'operator':<20}{'d':>8}{'params':>16}{'median_ns':>16}")
        for row in rows:
            timing = "skipped" if row.skipped else f"{row.median_ns:,}"
            self.stdout.write(f"{row.operator:<20}{row.d:>8}{row.params:>16,}{timing:>16}")
        for operator, slope in fit_slopes(rows).items():
            self.stdout.write(f"slope {operator} {slope:.3f}")
        skipped = sorted({row.d for row in rows if row.skipped})
        if skipped:
            self.stdout.write(
                self.style.WARNING(f"tensor_slices skipped for d in {skipped}: k*d^2 exceeds {limit:,} elements")
            )
