from Holorank.architectures import Architecture, head_parameter_count, table_formula
from Holorank.config import build_manifest, load_config_file, parse_override
from Holorank.layers import lstm_parameter_count

from ._common import HolorankCommand


class Command(HolorankCommand):
    help = "Prints exact parameter counts per component for a model configuration."

    def add_arguments(self, parser):
        parser.add_argument("--config", help="Flat config file or JSON run manifest.")
        parser.add_argument("--arch", choices=["hdlstm", "ntnlstm", "concatlstm"], help="Model architecture.")
        parser.add_argument("--vocab-size", type=int, default=0, help="Rows of the frozen embedding table.")
        parser.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="Override any config key (repeatable).",
        )

    def run(self, **options):
        file_values = load_config_file(options["config"]) if options.get("config") else {}
        set_values = dict(parse_override(item) for item in options["set"])
        config = build_manifest(file_values, set_values, {"model.architecture": options.get("arch")}).model

        n, d = config.embed_dim, config.lstm_dim
        lstm = lstm_parameter_count(n, d, config.lstm_layers)
        head = head_parameter_count(
            config.architecture,
            d,
            h=config.hidden_dim,
            k=config.ntn_slices,
            use_bilinear_sim=config.use_bilinear_sim,
            use_overlap_feats=config.use_overlap_feats,
        )
        embedding = max(0, options["vocab_size"]) * n
        sizes = f"d={d}, h={config.hidden_dim}" if config.ntn_slices is None else f"d={d}, k={config.ntn_slices}"
        self.stdout.write(f"architecture {config.architecture.value} ({sizes})")
        self.stdout.write(f"embedding {embedding:,} (frozen)")
        self.stdout.write(f"q_lstm {lstm:,}")
        self.stdout.write(f"a_lstm {lstm:,}")
        self.stdout.write(f"head {head:,}")
        self.stdout.write(f"total {embedding + 2 * lstm + head:,}")

        formula = table_formula(config.architecture, d, h=config.hidden_dim, k=config.ntn_slices)
        if formula is None:
            return
        if config.architecture is Architecture.HDLSTM:
            self.stdout.write(
                self.style.WARNING(
                    f"quoted closed form 2dh+4h = {formula:,}; the exact head count is {head:,} "
                    f"(dh + h + 2h + 2 without extras)"
                )
            )
        else:
            self.stdout.write(f"quoted closed form d^2k+2dk+2k = {formula:,} (exact head count {head:,})")
