from pathlib import Path

from Holorank.data import build_vocabulary, write_dataset
from Holorank.synthetic import make_synthetic_corpus, write_synthetic_embeddings

from ._common import HolorankCommand

CONFIG_TEMPLATE = """# Synthetic separable task: small HD-LSTM with overlap features.
model.architecture = hdlstm
model.embed_dim = {dim}
model.lstm_dim = 32
model.lstm_layers = 1
model.hidden_dim = 16
model.use_overlap_feats = true
model.max_len_q = 6
model.max_len_a = 10
model.dropout_rate = 0.0
train.learning_rate = 1e-2
train.l2_lambda = 0
train.batch_size = 64
train.max_epochs = 30
train.patience = 5
data.train = {out}/train.tsv
data.dev = {out}/dev.tsv
data.test = {out}/test.tsv
data.embeddings = {out}/embeddings.txt
run.out = {out}/runs
run.seed = {seed}
run.precision = f64
"""


class Command(HolorankCommand):
    help = "Writes a synthetic train/dev/test corpus, matching embeddings and a ready-to-train config."

    def add_arguments(self, parser):
        parser.add_argument("--out", required=True, help="Directory to write into.")
        parser.add_argument("--seed", type=int, default=1)
        parser.add_argument("--train-questions", type=int, default=500)
        parser.add_argument("--dev-questions", type=int, default=100)
        parser.add_argument("--test-questions", type=int, default=100)
        parser.add_argument("--negatives", type=int, default=4)
        parser.add_argument("--dim", type=int, default=50, help="Embedding dimension (default: 50).")

    def run(self, **options):
        out = Path(options["out"]).resolve()
        out.mkdir(parents=True, exist_ok=True)
        splits = make_synthetic_corpus(
            train_questions=options["train_questions"],
            dev_questions=options["dev_questions"],
            test_questions=options["test_questions"],
            negatives=options["negatives"],
            seed=options["seed"],
        )
        for name, dataset in splits.items():
            write_dataset(dataset, out / f"{name}.tsv")
            self.stdout.write(f"{name}: {len(dataset.groups())} questions, {len(dataset)} pairs")
        vocab = build_vocabulary(*splits.values())
        write_synthetic_embeddings(vocab.tokens, out / "embeddings.txt", dim=options["dim"], seed=options["seed"])
        config_path = out / "config.txt"
        config_path.write_text(
            CONFIG_TEMPLATE.format(dim=options["dim"], out=out.as_posix(), seed=options["seed"]), encoding="utf-8"
        )
        self.stdout.write(self.style.SUCCESS(f"Synthetic corpus written to {out}; train with --config {config_path}"))
