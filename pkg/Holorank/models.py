from django.db import models


class TrainingRun(models.Model):
    STATUS_CHOICES = (
        ("started", "Started"),
        ("succeeded", "Succeeded"),
        ("failed", "Failed"),
    )
    ARCHITECTURE_CHOICES = (
        ("hdlstm", "Holographic dual LSTM"),
        ("ntnlstm", "Neural tensor network LSTM"),
        ("concatlstm", "Concatenation LSTM"),
    )

    run_tag = models.CharField(max_length=80, unique=True)
    architecture = models.CharField(max_length=20, choices=ARCHITECTURE_CHOICES)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default="started")
    manifest = models.JSONField(default=dict)
    output_dir = models.CharField(max_length=500, blank=True)
    best_dev_map = models.FloatField(null=True, blank=True)
    best_dev_mrr = models.FloatField(null=True, blank=True)
    best_test_map = models.FloatField(null=True, blank=True)
    epochs_completed = models.PositiveIntegerField(default=0)
    last_error = models.CharField(max_length=240, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ["-created_at"]

    def __str__(self):
        return f"{self.run_tag} ({self.architecture}, {self.status})"


class EpochRecord(models.Model):
    run = models.ForeignKey(TrainingRun, on_delete=models.CASCADE, related_name="epochs")
    epoch = models.PositiveIntegerField()
    loss = models.FloatField()
    dev_map = models.FloatField()
    dev_mrr = models.FloatField()
    wall_seconds = models.FloatField(default=0.0)
    checkpoint_path = models.CharField(max_length=500, blank=True)

    class Meta:
        ordering = ["epoch"]
        unique_together = ("run", "epoch")

    def __str__(self):
        return f"{self.run.run_tag} epoch {self.epoch}: MAP {self.dev_map:.4f}"
