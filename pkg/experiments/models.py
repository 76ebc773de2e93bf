from django.db import models


class ExperimentRun(models.Model):
    """One invocation of a ``sic_*`` command."""

    STATUS_CHOICES = [
        ('running', 'Running'),
        ('succeeded', 'Succeeded'),
        ('failed', 'Failed'),
    ]

    command = models.CharField(
        max_length=32,
        help_text="Management command name, e.g. 'sic_eval'"
    )
    config_sha256 = models.CharField(
        max_length=64,
        blank=True,
        help_text="SHA-256 of the canonical merged configuration (empty if it never resolved)"
    )
    seed = models.IntegerField(null=True, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, default='running')
    exit_code = models.IntegerField(
        null=True,
        blank=True,
        help_text="0 on success, 2/3/4 for configuration, data and constraint errors"
    )
    summary = models.JSONField(default=dict, blank=True)
    error = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        verbose_name = "Experiment Run"
        verbose_name_plural = "Experiment Runs"
        ordering = ['-created_at', '-id']

    def __str__(self):
        marker = "✓" if self.status == 'succeeded' else "✗" if self.status == 'failed' else "…"
        return f"{marker} {self.command} {self.config_sha256[:12] or '-'}"
