"""
Schema of the experiment configuration (RunConfig).

Every section is a ``StrictSerializer`` so an unknown key anywhere in the
merged document is reported with its dotted path.
"""

from rest_framework import serializers

from sic.serializers import StrictSerializer
from sigmodel.serializers import DatasetSerializer


def odd(value):
    if value % 2 == 0:
        raise serializers.ValidationError("Must be odd.")
    return value


def unique(values):
    if len(set(values)) != len(values):
        raise serializers.ValidationError("Values must be unique.")
    return values


class LinearSectionSerializer(StrictSerializer):
    L = serializers.IntegerField(min_value=1)


class PolySectionSerializer(StrictSerializer):
    L = serializers.IntegerField(min_value=1)
    P = serializers.IntegerField(min_value=1, validators=[odd])
    input_shift = serializers.IntegerField(min_value=0, max_value=8)
    linear_taps = serializers.IntegerField(min_value=1)


class NetworkShapeSerializer(StrictSerializer):
    L = serializers.IntegerField(min_value=1)
    N_l = serializers.IntegerField(min_value=1)
    N_h = serializers.IntegerField(min_value=1)


class TrainSectionSerializer(StrictSerializer):
    batch_size = serializers.IntegerField(min_value=1)
    learning_rate = serializers.FloatField(min_value=0.0)
    epochs = serializers.IntegerField(min_value=0)
    keep_checkpoints = serializers.BooleanField()

    def validate_learning_rate(self, value):
        if value <= 0:
            raise serializers.ValidationError("Must be positive.")
        return value


class NNSectionSerializer(StrictSerializer):
    equi = NetworkShapeSerializer()
    peak = NetworkShapeSerializer()
    train = TrainSectionSerializer()


class QuantSectionSerializer(StrictSerializer):
    poly_Q = serializers.IntegerField(min_value=2, max_value=32)
    nn_Q = serializers.IntegerField(min_value=2, max_value=32)
    int_bits = serializers.IntegerField(min_value=1, max_value=16)
    q_min = serializers.IntegerField(min_value=2, max_value=32)
    q_max = serializers.IntegerField(min_value=2, max_value=32)
    tolerance_db = serializers.FloatField(min_value=0.0)

    def validate(self, attrs):
        if attrs['q_min'] > attrs['q_max']:
            raise serializers.ValidationError({'q_min': [f"Must not exceed q_max ({attrs['q_max']})."]})
        return attrs


class SweepSectionSerializer(StrictSerializer):
    poly_L = serializers.ListField(child=serializers.IntegerField(min_value=1), validators=[unique])
    poly_P = serializers.ListField(child=serializers.IntegerField(min_value=1, validators=[odd]),
                                   validators=[unique])
    nn_L = serializers.ListField(child=serializers.IntegerField(min_value=1), validators=[unique])
    nn_N_h = serializers.ListField(child=serializers.IntegerField(min_value=1), validators=[unique])
    nn_N_l = serializers.IntegerField(min_value=1)
    nn_epochs = serializers.IntegerField(min_value=0)
    tolerance_db = serializers.FloatField(min_value=0.0)
    workers = serializers.IntegerField(min_value=1)


class NNHardwareSerializer(StrictSerializer):
    n_pe = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=2)
    N_CPE_linear = serializers.IntegerField(min_value=1)


class PolyHardwareSerializer(StrictSerializer):
    N_CPE = serializers.IntegerField(min_value=1)
    N_CPE_BF = serializers.IntegerField(min_value=1)


class HardwareSectionSerializer(StrictSerializer):
    equi = NNHardwareSerializer()
    peak = NNHardwareSerializer()
    poly = PolyHardwareSerializer()
    clock_hz = serializers.FloatField(min_value=0.0, allow_null=True)
    sim_samples = serializers.IntegerField(min_value=16)


class PsdSectionSerializer(StrictSerializer):
    nfft = serializers.IntegerField(min_value=2)
    overlap = serializers.FloatField(min_value=0.0, max_value=0.99)

    def validate_nfft(self, value):
        if value & (value - 1):
            raise serializers.ValidationError("Must be a power of two.")
        return value


class RunConfigSerializer(StrictSerializer):
    seed = serializers.IntegerField(min_value=0)
    output_dir = serializers.CharField(allow_null=True, allow_blank=False)
    dataset = DatasetSerializer()
    linear = LinearSectionSerializer()
    poly = PolySectionSerializer()
    nn = NNSectionSerializer()
    quant = QuantSectionSerializer()
    sweep = SweepSectionSerializer()
    hardware = HardwareSectionSerializer()
    psd = PsdSectionSerializer()
