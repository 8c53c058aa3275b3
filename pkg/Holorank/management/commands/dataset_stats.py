from Holorank.data import dataset_statistics, load_dataset

from ._common import HolorankCommand


class Command(HolorankCommand):
    help = "Prints questions, pairs and the share of correct pairs for dataset files."

    def add_arguments(self, parser):
        parser.add_argument("paths", nargs="+", help="Dataset files (TSV or JSONL).")
        parser.add_argument("--format", choices=["tsv", "jsonl"], help="Dataset format (default: by extension).")

    def run(self, **options):
        self.stdout.write(f"{'split':<24}{'questions':>10}{'pairs':>10}{'correct':>10}{'% correct':>11}")
        for raw_path in options["paths"]:
            path = self.require_file(raw_path, "dataset")
            stats = dataset_statistics(load_dataset(path, options.get("format"), split=path.stem))
            self.stdout.write(
                f"{stats['split']:<24}{stats['questions']:>10}{stats['pairs']:>10}"
                f"{stats['correct']:>10}{stats['pct_correct']:>11.1f}"
            )
