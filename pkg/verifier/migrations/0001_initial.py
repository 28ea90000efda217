# Generated by Django 5.2.1 on 2026-10-19 10:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="VerificationRun",
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
                ("scenario", models.CharField(max_length=200)),
                ("seed", models.BigIntegerField(default=0)),
                ("tolerance_scale", models.FloatField(default=1.0)),
                (
                    "passed",
                    models.BooleanField(
                        default=False,
                        help_text="True when every asserted check of the scenario passed",
                    ),
                ),
                (
                    "note",
                    models.TextField(
                        blank=True,
                        help_text="Coefficient-reading note printed in the report header",
                    ),
                ),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="CheckRecord",
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
                ("name", models.CharField(max_length=60)),
                (
                    "anchor",
                    models.CharField(
                        help_text="Statement the check is anchored to, e.g. 'cd-inf: Def 3.2 K-convex entropy'",
                        max_length=200,
                    ),
                ),
                ("condition", models.CharField(max_length=40)),
                ("K", models.FloatField(blank=True, null=True)),
                (
                    "N",
                    models.FloatField(
                        blank=True, help_text="NULL stands for N = infinity", null=True
                    ),
                ),
                ("margin", models.FloatField(blank=True, null=True)),
                ("passed", models.BooleanField(default=False)),
                (
                    "expect",
                    models.BooleanField(
                        default=True,
                        help_text="Expected verdict; a check counts as failed when passed != expect",
                    ),
                ),
                ("witnesses", models.JSONField(blank=True, default=list)),
                ("extras", models.JSONField(blank=True, default=dict)),
                (
                    "run",
                    models.ForeignKey(
                        blank=True,
                        null=True,
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="checks",
                        to="verifier.verificationrun",
                    ),
                ),
            ],
            options={
                "ordering": ["name"],
            },
        ),
    ]
