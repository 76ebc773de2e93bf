from rest_framework import serializers

from lincanc.serializers import LinModelSerializer
from sic.errors import DataError
from sic.serializers import ComplexField, StrictSerializer, validated

from .network import NNModel


def decimal(value) -> str:
    """Shortest decimal string that reads back to the same float64."""
    return repr(float(value))


class DecimalStringField(serializers.CharField):
    def to_internal_value(self, data):
        text = super().to_internal_value(data)
        try:
            return float(text)
        except ValueError:
            self.fail('invalid')

    default_error_messages = {'invalid': 'Not a decimal number.'}


class NNModelSerializer(StrictSerializer):
    """Row-major weights and biases as decimal strings; lossless for float64."""
    L = serializers.IntegerField(min_value=1)
    N_l = serializers.IntegerField(min_value=1)
    N_h = serializers.IntegerField(min_value=1)
    weights = serializers.ListField(child=serializers.ListField(child=serializers.ListField(child=DecimalStringField())))
    biases = serializers.ListField(child=serializers.ListField(child=DecimalStringField()))
    linear = serializers.DictField()
    denorm_shift = serializers.ListField(child=serializers.IntegerField(), min_length=2, max_length=2)
    denorm_mean = ComplexField()
    input_mean = ComplexField()
    input_scale = serializers.FloatField()

    @staticmethod
    def dump(model: NNModel) -> dict:
        return {
            'L': model.L,
            'N_l': model.N_l,
            'N_h': model.N_h,
            'weights': [[[decimal(v) for v in row] for row in w] for w in model.weights],
            'biases': [[decimal(v) for v in b] for b in model.biases],
            'linear': LinModelSerializer.dump(model.lin),
            'denorm_shift': list(model.denorm_shift),
            'denorm_mean': [model.denorm_mean.real, model.denorm_mean.imag],
            'input_mean': [model.input_mean.real, model.input_mean.imag],
            'input_scale': model.input_scale,
        }

    @staticmethod
    def load(data: dict) -> NNModel:
        attrs = validated(NNModelSerializer, data, DataError, 'NN model')
        lin = LinModelSerializer.load(attrs['linear'])
        try:
            return NNModel(
                attrs['L'], attrs['N_l'], attrs['N_h'],
                attrs['weights'], attrs['biases'], lin,
                tuple(attrs['denorm_shift']),
                attrs['denorm_mean'],
                attrs['input_mean'],
                attrs['input_scale'],
            )
        except DataError:
            raise
        except ValueError as exc:
            # Ragged weight rows.
            raise DataError(f"invalid NN model: {exc}") from exc
