from Holorank.architectures import score_encoded
from Holorank.checkpoints import encode_for_checkpoint, load_checkpoint
from Holorank.data import QADataset, QAInstance, tokenize
from Holorank.exceptions import DataFormatError

from ._common import HolorankCommand


def read_candidates(path):
    """One candidate per line: ``id<TAB>text`` or bare text (numbered from 1)."""
    candidates = []
    for line_number, raw_line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue
        if "\t" in line:
            candidate_id, text = (part.strip() for part in line.split("\t", 1))
        else:
            candidate_id, text = str(len(candidates) + 1), line
        if not tokenize(text):
            raise DataFormatError("candidate has no tokens", path, line_number)
        candidates.append((candidate_id, text))
    if not candidates:
        raise DataFormatError("candidates file is empty", path=path)
    return candidates


class Command(HolorankCommand):
    help = "Ranks candidate answers for one question with a checkpoint."

    def add_arguments(self, parser):
        parser.add_argument("--checkpoint", required=True, help="Checkpoint (.npz) written by the train command.")
        parser.add_argument("--question", required=True, help="Question text.")
        parser.add_argument("--candidates", required=True, help="File with one candidate answer per line.")

    def run(self, **options):
        checkpoint = load_checkpoint(self.require_file(options["checkpoint"], "checkpoint"))
        candidates_path = self.require_file(options["candidates"], "candidates")
        question = tokenize(options["question"])
        if not question:
            raise DataFormatError("question has no tokens")

        candidates = read_candidates(candidates_path)
        instances = [
            QAInstance("q", question, tokenize(text), 0, f"{position}:{candidate_id}")
            for position, (candidate_id, text) in enumerate(candidates)
        ]
        encoded = encode_for_checkpoint(checkpoint, QADataset("rank", instances))
        scores = score_encoded(checkpoint.model, encoded)
        order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i][0], i))
        for rank, i in enumerate(order, start=1):
            candidate_id, text = candidates[i]
            self.stdout.write(f"{rank}\t{candidate_id}\t{scores[i]:.6f}\t{text}")
