from django.db import models, transaction


class ExperimentRun(models.Model):
    KIND_CHOICES = [
        ('solve', 'Solve'),
        ('efficiency', 'Efficiency study'),
        ('sweep_coarse', 'Coarse-size sweep'),
        ('sweep_fine', 'Fine-size sweep'),
    ]
    STATUS_CHOICES = [
        ('converged', 'Converged'),
        ('failed', 'Failed'),
    ]

    kind = models.CharField(max_length=20, choices=KIND_CHOICES)
    problem = models.CharField(max_length=50)
    method = models.CharField(max_length=20, blank=True)
    reynolds = models.FloatField()
    rossby = models.FloatField()
    config = models.JSONField(help_text="Configuration echo, as written to the JSON output")
    metadata = models.JSONField(default=dict, blank=True)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES)
    acceptance_passed = models.BooleanField(null=True, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f'{self.get_kind_display()} ({self.problem}, Re={self.reynolds:g}, Ro={self.rossby:g})'

    @classmethod
    def record(cls, result, acceptance=None):
        """Store a StudyResult with its rows."""
        with transaction.atomic():
            run = cls.objects.create(
                kind=result.kind,
                problem=result.config.problem,
                method=result.config.method if result.kind == 'solve' else '',
                reynolds=result.config.reynolds,
                rossby=result.config.rossby,
                config=result.config.to_dict(),
                metadata=result.metadata(),
                status='converged' if result.converged else 'failed',
                acceptance_passed=None if acceptance is None else all(a.passed for a in acceptance),
            )
            ConvergenceRow.objects.bulk_create([
                ConvergenceRow.from_record(run, position, record)
                for position, record in enumerate(result.records)
            ])
        return run


class ConvergenceRow(models.Model):
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='rows')
    position = models.PositiveIntegerField()
    method = models.CharField(max_length=20)
    H = models.FloatField(null=True, blank=True, db_column='coarse_h')
    h = models.FloatField()
    dofs_H = models.PositiveIntegerField(null=True, blank=True, db_column='coarse_dofs')
    dofs_h = models.PositiveIntegerField()
    e_L2 = models.FloatField(null=True, blank=True)
    order_L2 = models.FloatField(null=True, blank=True)
    e_H1 = models.FloatField(null=True, blank=True)
    order_H1 = models.FloatField(null=True, blank=True)
    e_H2 = models.FloatField(null=True, blank=True)
    order_H2 = models.FloatField(null=True, blank=True)
    time_s = models.FloatField()
    converged = models.BooleanField(default=True)
    iterations = models.PositiveIntegerField(default=0)

    class Meta:
        ordering = ['run', 'position']
        constraints = [
            models.UniqueConstraint(fields=['run', 'position'], name='unique_row_position'),
        ]

    def __str__(self):
        return f'{self.method} h={self.h:.4g}'

    @classmethod
    def from_record(cls, run, position, record):
        return cls(
            run=run,
            position=position,
            method=record.method,
            converged=record.converged,
            iterations=record.iterations,
            **record.as_row(),
        )
