# verifier/serializers.py
import math

from django.conf import settings
from rest_framework import serializers

from .exceptions import ScenarioParseError
from .models import CheckRecord
from .presets import MEASURE_SHAPES


class ExtendedFloatField(serializers.FloatField):
    """A float that also accepts "inf" (and renders infinity back as "inf")."""

    def to_internal_value(self, data):
        if isinstance(data, str) and data.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        return super().to_internal_value(data)

    def to_representation(self, value):
        if value is None:
            return "inf"
        if isinstance(value, float) and math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return super().to_representation(value)


class SpaceSerializer(serializers.Serializer):
    kind = serializers.CharField()
    params = serializers.DictField(required=False, default=dict)

    def validate_kind(self, value):
        if value not in settings.SPACE_KINDS:
            raise serializers.ValidationError(f"unknown space kind: {value}")
        return value


class FieldSerializer(serializers.Serializer):
    family = serializers.CharField(default="zero")
    params = serializers.DictField(required=False, default=dict)

    def validate_family(self, value):
        if value not in settings.FIELD_FAMILIES:
            raise serializers.ValidationError(f"unknown field family: {value}")
        return value


class MeasureSerializer(serializers.Serializer):
    shape = serializers.ChoiceField(choices=MEASURE_SHAPES)
    center = serializers.JSONField(required=False)
    width = serializers.FloatField(required=False, min_value=0.0)
    sigma = serializers.FloatField(required=False, min_value=0.0)
    cells = serializers.IntegerField(required=False, min_value=2)
    bins = serializers.IntegerField(required=False, min_value=2)
    points = serializers.ListField(child=serializers.JSONField(), required=False)
    weights = serializers.ListField(child=serializers.FloatField(min_value=0.0), required=False)
    label = serializers.CharField(required=False)

    def validate(self, attrs):
        if attrs["shape"] == "atoms" and not attrs.get("points"):
            raise serializers.ValidationError("an atoms measure needs points")
        if "weights" in attrs and len(attrs["weights"]) != len(attrs.get("points", [])):
            raise serializers.ValidationError("weights and points differ in length")
        return attrs


class CheckSpecSerializer(serializers.Serializer):
    name = serializers.CharField()
    K = serializers.FloatField(required=False, default=0.0)
    N = ExtendedFloatField(required=False, default=math.inf)
    expect = serializers.ChoiceField(choices=["pass", "fail"], default="pass")
    params = serializers.DictField(required=False, default=dict)

    def validate_name(self, value):
        # imported here: services imports this module
        from .services import CHECKS
        if value not in CHECKS:
            raise serializers.ValidationError(f"unknown check: {value}")
        return value

    def validate_N(self, value):
        if value < 1:
            raise serializers.ValidationError(f"N must be >= 1, got {value}")
        return value

    def validate(self, attrs):
        from .services import CHECKS
        unknown = set(attrs["params"]) - set(CHECKS[attrs["name"]].params)
        if unknown:
            raise serializers.ValidationError(f"{attrs['name']}: unknown parameters {sorted(unknown)}")
        return attrs


class OutputSerializer(serializers.Serializer):
    csv_dir = serializers.CharField(required=False, allow_null=True, default=None)
    report = serializers.CharField(required=False, allow_null=True, default=None)


class ScenarioSerializer(serializers.Serializer):
    name = serializers.CharField(default="scenario")
    seed = serializers.IntegerField(required=False, min_value=0)
    space = SpaceSerializer()
    field = FieldSerializer(required=False, default=dict)
    measures = serializers.DictField(child=MeasureSerializer(), required=False, default=dict)
    checks = CheckSpecSerializer(many=True)
    output = OutputSerializer(required=False, default=dict)

    def validate_checks(self, value):
        if not value:
            raise serializers.ValidationError("a scenario needs at least one check")
        return value


def parse_scenario(data):
    """Validated scenario data or ScenarioParseError carrying the field errors."""
    serializer = ScenarioSerializer(data=data)
    if not serializer.is_valid():
        raise ScenarioParseError(f"invalid scenario: {serializer.errors}")
    return serializer.validated_data


class CheckRecordSerializer(serializers.ModelSerializer):
    N = serializers.SerializerMethodField()
    margin = serializers.SerializerMethodField()
    status = serializers.SerializerMethodField()

    class Meta:
        model = CheckRecord
        fields = ["name", "anchor", "condition", "K", "N", "margin", "passed", "expect",
                  "status", "witnesses", "extras"]

    def get_N(self, record):
        return "inf" if record.N is None else record.N

    def get_margin(self, record):
        if record.margin is None:
            # non-finite margins keep their sign in the extras
            return record.extras.get("margin", "inf")
        return record.margin

    def get_status(self, record):
        if record.passed == record.expect:
            return "ok"
        return "unexpected-pass" if record.passed else "fail"
