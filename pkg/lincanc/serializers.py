from rest_framework import serializers

from sic.errors import DataError
from sic.serializers import ComplexField, StrictSerializer, validated

from .canceller import LinModel


class LinModelSerializer(StrictSerializer):
    """``{"L": int, "taps": [[re, im], ...]}``"""
    L = serializers.IntegerField(min_value=1)
    taps = serializers.ListField(child=ComplexField(), min_length=1)

    def validate(self, attrs):
        if attrs['L'] != len(attrs['taps']):
            raise serializers.ValidationError(f"L is {attrs['L']} but {len(attrs['taps'])} taps were given.")
        return attrs

    @staticmethod
    def dump(model: LinModel) -> dict:
        return LinModelSerializer({'L': model.L, 'taps': list(model.taps)}).data

    @staticmethod
    def load(data: dict) -> LinModel:
        return LinModel(validated(LinModelSerializer, data, DataError, 'linear model')['taps'])
