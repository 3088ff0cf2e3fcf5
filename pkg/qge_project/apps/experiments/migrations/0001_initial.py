# Generated by Django 5.2.7 on 2026-10-18 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "kind",
                    models.CharField(
                        choices=[
                            ("solve", "Solve"),
                            ("efficiency", "Efficiency study"),
                            ("sweep_coarse", "Coarse-size sweep"),
                            ("sweep_fine", "Fine-size sweep"),
                        ],
                        max_length=20,
                    ),
                ),
                ("problem", models.CharField(max_length=50)),
                ("method", models.CharField(blank=True, max_length=20)),
                ("reynolds", models.FloatField()),
                ("rossby", models.FloatField()),
                (
                    "config",
                    models.JSONField(
                        help_text="Configuration echo, as written to the JSON output"
                    ),
                ),
                ("metadata", models.JSONField(blank=True, default=dict)),
                (
                    "status",
                    models.CharField(
                        choices=[("converged", "Converged"), ("failed", "Failed")],
                        max_length=20,
                    ),
                ),
                ("acceptance_passed", models.BooleanField(blank=True, null=True)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="ConvergenceRow",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("position", models.PositiveIntegerField()),
                ("method", models.CharField(max_length=20)),
                ("H", models.FloatField(blank=True, db_column="coarse_h", null=True)),
                ("h", models.FloatField()),
                ("dofs_H", models.PositiveIntegerField(blank=True, db_column="coarse_dofs", null=True)),
                ("dofs_h", models.PositiveIntegerField()),
                ("e_L2", models.FloatField(blank=True, null=True)),
                ("order_L2", models.FloatField(blank=True, null=True)),
                ("e_H1", models.FloatField(blank=True, null=True)),
                ("order_H1", models.FloatField(blank=True, null=True)),
                ("e_H2", models.FloatField(blank=True, null=True)),
                ("order_H2", models.FloatField(blank=True, null=True)),
                ("time_s", models.FloatField()),
                ("converged", models.BooleanField(default=True)),
                ("iterations", models.PositiveIntegerField(default=0)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="rows",
                        to="experiments.experimentrun",
                    ),
                ),
            ],
            options={
                "ordering": ["run", "position"],
                "constraints": [
                    models.UniqueConstraint(
                        fields=("run", "position"), name="unique_row_position"
                    )
                ],
            },
        ),
    ]
