from pathlib import Path

from Holorank.checkpoints import check_vocabulary_coverage, encode_for_checkpoint, load_checkpoint
from Holorank.data import load_dataset
from Holorank.evaluation import write_run_file
from Holorank.exceptions import CheckpointError
from Holorank.trainer import evaluate_model

from ._common import HolorankCommand


class Command(HolorankCommand):
    help = "Scores a labelled dataset with a checkpoint, prints MAP/MRR/P@1 and writes a trec_eval run file."

    def add_arguments(self, parser):
        parser.add_argument("--checkpoint", required=True, help="Checkpoint (.npz) written by the train command.")
        parser.add_argument("--dataset", required=True, help="Labelled dataset (TSV or JSONL).")
        parser.add_argument("--format", choices=["tsv", "jsonl"], help="Dataset format (default: by extension).")
        parser.add_argument("--run-file", help="Run file to write (default: next to the checkpoint, .run suffix).")
        parser.add_argument("--arch", choices=["hdlstm", "ntnlstm", "concatlstm"], help="Expected architecture.")
        parser.add_argument("--tag", default="holorank", help="Run tag written in the last column.")
        parser.add_argument("--workers", type=int, default=1, help="Scoring threads (default: 1).")

    def run(self, **options):
        checkpoint_path = self.require_file(options["checkpoint"], "checkpoint")
        dataset_path = self.require_file(options["dataset"], "dataset")
        checkpoint = load_checkpoint(checkpoint_path)
        architecture = checkpoint.model.config.architecture.value
        if options.get("arch") and options["arch"] != architecture:
            raise CheckpointError(f"checkpoint holds a {architecture} model, not {options['arch']}")

        dataset = load_dataset(dataset_path, options.get("format"), split="eval")
        check_vocabulary_coverage(checkpoint, dataset)
        encoded = encode_for_checkpoint(checkpoint, dataset)
        run, metrics = evaluate_model(checkpoint.model, encoded, workers=options["workers"], tag=options["tag"])
        run_path = Path(options.get("run_file") or checkpoint_path.with_suffix(".run"))
        write_run_file(run, run_path)

        self.write_metrics(metrics)
        self.stdout.write(self.style.SUCCESS(f"Run file written to {run_path} ({metrics['queries']} queries)"))
