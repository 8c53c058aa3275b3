from pathlib import Path

from Holorank.bm25 import bm25_run
from Holorank.config import get_bm25_parameters
from Holorank.data import load_dataset
from Holorank.evaluation import evaluate_run, random_guess_run, write_run_file

from ._common import HolorankCommand


class Command(HolorankCommand):
    help = "Scores the random-guess and BM25 baselines on a labelled dataset."

    def add_arguments(self, parser):
        parser.add_argument("--dataset", required=True, help="Labelled dataset (TSV or JSONL).")
        parser.add_argument("--format", choices=["tsv", "jsonl"], help="Dataset format (default: by extension).")
        parser.add_argument("--seed", type=int, default=1, help="Seed of the random-guess ordering.")
        parser.add_argument("--run-dir", help="Optional directory for random.run and bm25.run.")

    def run(self, **options):
        dataset = load_dataset(self.require_file(options["dataset"], "dataset"), options.get("format"), split="eval")
        k1, b = get_bm25_parameters()
        runs = {
            "random": random_guess_run(dataset.label_groups(), seed=options["seed"]),
            "bm25": bm25_run(dataset, k1=k1, b=b),
        }
        for name, run in runs.items():
            self.write_metrics(evaluate_run(run), label=f"{name:<7}")
            if options.get("run_dir"):
                path = write_run_file(run, Path(options["run_dir"]) / f"{name}.run")
                self.stdout.write(f"{name} run written to {path}")
