# verifier/models.py
from django.db import models


class VerificationRun(models.Model):
    """
    One execution of a scenario file. The run keeps the knobs that make it
    reproducible (seed, tolerance scale) next to the overall verdict.
    """
    scenario = models.CharField(max_length=200)
    seed = models.BigIntegerField(default=0)
    tolerance_scale = models.FloatField(default=1.0)
    passed = models.BooleanField(
        default=False,
        help_text="True when every asserted check of the scenario passed"
    )
    note = models.TextField(
        blank=True,
        help_text="Coefficient-reading note printed in the report header"
    )
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at"]

    def __str__(self):
        state = "PASS" if self.passed else "FAIL"
        return f"{self.scenario} [{state}]"


class CheckRecord(models.Model):
    """
    The verdict of one check inside a run. Non-finite N and margins are
    stored as NULL and rendered back as "inf".
    """
    run = models.ForeignKey(
        VerificationRun,
        on_delete=models.CASCADE,
        related_name="checks",
        null=True,
        blank=True,
    )
    name = models.CharField(max_length=60)
    anchor = models.CharField(
        max_length=200,
        help_text="Statement the check is anchored to, e.g. 'cd-inf: Def 3.2 K-convex entropy'"
    )
    condition = models.CharField(max_length=40)
    K = models.FloatField(null=True, blank=True)
    N = models.FloatField(
        null=True,
        blank=True,
        help_text="NULL stands for N = infinity"
    )
    margin = models.FloatField(null=True, blank=True)
    passed = models.BooleanField(default=False)
    expect = models.BooleanField(
        default=True,
        help_text="Expected verdict; a check counts as failed when passed != expect"
    )
    witnesses = models.JSONField(default=list, blank=True)
    extras = models.JSONField(default=dict, blank=True)

    class Meta:
        ordering = ["name"]

    def __str__(self):
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'}"
