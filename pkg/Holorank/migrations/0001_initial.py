import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="TrainingRun",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("run_tag", models.CharField(max_length=80, unique=True)),
                (
                    "architecture",
                    models.CharField(
                        choices=[
                            ("hdlstm", "Holographic dual LSTM"),
                            ("ntnlstm", "Neural tensor network LSTM"),
                            ("concatlstm", "Concatenation LSTM"),
                        ],
                        max_length=20,
                    ),
                ),
                (
                    "status",
                    models.CharField(
                        choices=[("started", "Started"), ("succeeded", "Succeeded"), ("failed", "Failed")],
                        default="started",
                        max_length=20,
                    ),
                ),
                ("manifest", models.JSONField(default=dict)),
                ("output_dir", models.CharField(blank=True, max_length=500)),
                ("best_dev_map", models.FloatField(blank=True, null=True)),
                ("best_dev_mrr", models.FloatField(blank=True, null=True)),
                ("best_test_map", models.FloatField(blank=True, null=True)),
                ("epochs_completed", models.PositiveIntegerField(default=0)),
                ("last_error", models.CharField(blank=True, max_length=240)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                ("updated_at", models.DateTimeField(auto_now=True)),
            ],
            options={
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="EpochRecord",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("epoch", models.PositiveIntegerField()),
                ("loss", models.FloatField()),
                ("dev_map", models.FloatField()),
                ("dev_mrr", models.FloatField()),
                ("wall_seconds", models.FloatField(default=0.0)),
                ("checkpoint_path", models.CharField(blank=True, max_length=500)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="epochs",
                        to="Holorank.trainingrun",
                    ),
                ),
            ],
            options={
                "ordering": ["epoch"],
                "unique_together": {("run", "epoch")},
            },
        ),
    ]
