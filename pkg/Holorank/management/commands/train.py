import dataclasses
from pathlib import Path

from Holorank.architectures import build_model
from Holorank.config import build_manifest, load_config_file, parse_override
from Holorank.data import (
    build_vocabulary,
    compute_idf,
    encode_dataset,
    load_dataset,
    load_pretrained_embeddings,
    load_stopwords,
)
from Holorank.exceptions import ConfigError
from Holorank.runs import default_run_tag, mark_run_failed, mark_run_succeeded, record_epoch, start_training_run
from Holorank.tensor import dtype_for
from Holorank.trainer import train

from ._common import HolorankCommand


class Command(HolorankCommand):
    help = "Trains a ranking model and keeps the best checkpoints by development MAP."

    def add_arguments(self, parser):
        parser.add_argument("--config", help="Flat 'section.key = value' file or a JSON run manifest.")
        parser.add_argument("--seed", type=int, help="Seed for initialisation, shuffling and dropout.")
        parser.add_argument("--arch", choices=["hdlstm", "ntnlstm", "concatlstm"], help="Model architecture.")
        parser.add_argument("--train", help="Training split (TSV or JSONL).")
        parser.add_argument("--dev", help="Development split used for early stopping.")
        parser.add_argument("--test", help="Optional test split scored with every kept checkpoint.")
        parser.add_argument("--embeddings", help="word2vec-style text file of pretrained vectors.")
        parser.add_argument("--stopwords", help="Optional stopword list, one word per line.")
        parser.add_argument("--format", choices=["tsv", "jsonl"], help="Dataset format (default: by extension).")
        parser.add_argument("--out", help="Output directory for checkpoints, log and manifest.")
        parser.add_argument("--workers", type=int, help="Scoring threads for evaluation (default: 1).")
        parser.add_argument("--precision", choices=["f32", "f64"], help="Floating point precision.")
        parser.add_argument("--run-tag", help="Name of the run in the run registry.")
        parser.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="Override any config key, e.g. --set train.learning_rate=1e-4 (repeatable).",
        )

    def run(self, **options):
        file_values = load_config_file(options["config"]) if options.get("config") else {}
        set_values = dict(parse_override(item) for item in options["set"])
        flag_values = {
            "run.seed": options.get("seed"),
            "model.architecture": options.get("arch"),
            "data.train": options.get("train"),
            "data.dev": options.get("dev"),
            "data.test": options.get("test"),
            "data.embeddings": options.get("embeddings"),
            "data.stopwords": options.get("stopwords"),
            "data.format": options.get("format"),
            "run.out": options.get("out"),
            "run.workers": options.get("workers"),
            "run.precision": options.get("precision"),
            "run.tag": options.get("run_tag"),
        }
        manifest = build_manifest(file_values, set_values, flag_values)
        paths = manifest.data
        for key in ("train", "dev", "embeddings"):
            if not getattr(paths, key):
                raise ConfigError(f"data.{key} is required (flag --{key} or config key data.{key})")
        train_path = self.require_file(paths.train, "training")
        dev_path = self.require_file(paths.dev, "development")
        embeddings_path = self.require_file(paths.embeddings, "embedding")
        test_path = self.require_file(paths.test, "test") if paths.test else None
        stopwords_path = self.require_file(paths.stopwords, "stopword") if paths.stopwords else None

        train_set = load_dataset(train_path, paths.format, split="train")
        dev_set = load_dataset(dev_path, paths.format, split="dev")
        test_set = load_dataset(test_path, paths.format, split="test") if test_path else None
        splits = [split for split in (train_set, dev_set, test_set) if split is not None]

        model_config = manifest.model
        vocab = build_vocabulary(*splits)
        embeddings = load_pretrained_embeddings(
            embeddings_path,
            vocab,
            dim=model_config.embed_dim,
            seed=manifest.seed,
            dtype=dtype_for(manifest.precision),
        )
        stopwords = load_stopwords(stopwords_path)
        idf = compute_idf(train_set.documents())

        def encode(dataset):
            return encode_dataset(
                dataset,
                vocab,
                model_config.max_len_q,
                model_config.max_len_a,
                idf=idf,
                stopwords=stopwords,
                with_features=model_config.use_overlap_feats,
            )

        model = build_model(model_config, embeddings)
        tag = manifest.tag or default_run_tag(model_config.architecture.value)
        manifest = dataclasses.replace(manifest, tag=tag)
        out_dir = Path(manifest.out_dir) / tag
        manifest_path = manifest.write(out_dir)
        self.stdout.write(f"Run {tag}: {model_config.architecture.value}, manifest {manifest_path}")

        registry_run = start_training_run(manifest, tag)
        try:
            result = train(
                model,
                encode(train_set),
                encode(dev_set),
                manifest.train,
                out_dir=out_dir,
                on_epoch=lambda record: record_epoch(registry_run, record),
                test_encoded=encode(test_set) if test_set is not None else None,
                checkpoint_context={"vocab": vocab, "idf": idf, "stopwords": stopwords},
            )
        except Exception as exc:
            mark_run_failed(registry_run, exc)
            raise
        mark_run_succeeded(registry_run, result)

        for kept in result.checkpoints:
            line = f"epoch {kept.epoch}: dev MAP {kept.dev_map:.4f} MRR {kept.dev_mrr:.4f} -> {kept.path}"
            if kept.test_metrics:
                line += f" (test MAP {kept.test_metrics['map']:.4f} MRR {kept.test_metrics['mrr']:.4f})"
            self.stdout.write(line)
        if result.best_test_map is not None:
            self.stdout.write(f"Best test MAP from kept checkpoints: {result.best_test_map:.4f}")
        self.stdout.write(
            self.style.SUCCESS(
                f"Stopped after epoch {result.stopped_epoch} ({result.stop_reason}). "
                f"Best dev MAP {result.best.dev_map:.4f} MRR {result.best.dev_mrr:.4f}"
            )
        )
