from rest_framework import serializers

from lincanc.serializers import LinModelSerializer
from sic.errors import DataError
from sic.serializers import StrictSerializer, validated

from .canceller import HybridPolyModel, PolyModel


class CoefficientSerializer(StrictSerializer):
    p = serializers.IntegerField(min_value=1)
    q = serializers.IntegerField(min_value=0)
    l = serializers.IntegerField(min_value=0)
    re = serializers.FloatField()
    im = serializers.FloatField()


class PolyModelSerializer(StrictSerializer):
    """Coefficients are listed in lexicographic (p, q, l) order."""
    P = serializers.IntegerField(min_value=1)
    L = serializers.IntegerField(min_value=1)
    input_shift = serializers.IntegerField(min_value=0, default=0)
    coeffs = CoefficientSerializer(many=True)

    def validate(self, attrs):
        P, L = attrs['P'], attrs['L']
        if P % 2 == 0:
            raise serializers.ValidationError({'P': ['Must be odd.']})
        expected = L * (P + 1) * (P + 3) // 4
        if len(attrs['coeffs']) != expected:
            raise serializers.ValidationError({'coeffs': [f"Expected {expected} coefficients, got {len(attrs['coeffs'])}."]})
        keys = [(c['p'], c['q'], c['l']) for c in attrs['coeffs']]
        if len(set(keys)) != len(keys):
            raise serializers.ValidationError({'coeffs': ['Duplicate (p, q, l) entries.']})
        return attrs

    @staticmethod
    def dump(model: PolyModel) -> dict:
        coeffs = [
            {'p': p, 'q': q, 'l': l, 're': value.real, 'im': value.imag}
            for (p, q, l), value in model.items()
        ]
        return {'P': model.P, 'L': model.L, 'input_shift': model.input_shift, 'coeffs': coeffs}

    @staticmethod
    def load(data: dict) -> PolyModel:
        attrs = validated(PolyModelSerializer, data, DataError, 'polynomial model')
        mapping = {(c['p'], c['q'], c['l']): complex(c['re'], c['im']) for c in attrs['coeffs']}
        try:
            return PolyModel.from_map(attrs['P'], attrs['L'], mapping, attrs['input_shift'])
        except ValueError as exc:
            raise DataError(f"invalid polynomial model: {exc}") from exc


class HybridPolySerializer(StrictSerializer):
    linear = serializers.DictField()
    poly = serializers.DictField()

    @staticmethod
    def dump(model: HybridPolyModel) -> dict:
        return {'linear': LinModelSerializer.dump(model.lin), 'poly': PolyModelSerializer.dump(model.poly)}

    @staticmethod
    def load(data: dict) -> HybridPolyModel:
        attrs = validated(HybridPolySerializer, data, DataError, 'hybrid polynomial model')
        return HybridPolyModel(LinModelSerializer.load(attrs['linear']), PolyModelSerializer.load(attrs['poly']))
