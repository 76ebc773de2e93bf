from rest_framework import serializers

from sic.serializers import ComplexField, StrictSerializer

from .datasets import WaveformConfig
from .signals import TxChainConfig


class PaTermSerializer(StrictSerializer):
    p = serializers.IntegerField(min_value=1)
    l = serializers.IntegerField(min_value=0)
    coeff = ComplexField()

    def validate_p(self, value):
        if value % 2 == 0:
            raise serializers.ValidationError("PA order must be odd.")
        return value


class TxChainSerializer(StrictSerializer):
    """Transmitter impairments; builds a ``TxChainConfig``."""
    iq_gain_mismatch = serializers.FloatField()
    iq_phase_mismatch = serializers.FloatField()
    pa_terms = PaTermSerializer(many=True)
    si_channel = serializers.ListField(child=ComplexField(), min_length=1)
    snr_db = serializers.FloatField(allow_null=True)

    def validate_pa_terms(self, terms):
        keys = [(t['p'], t['l']) for t in terms]
        if (1, 0) not in keys:
            raise serializers.ValidationError("A (p=1, l=0) term is required.")
        if len(set(keys)) != len(keys):
            raise serializers.ValidationError("Duplicate (p, l) terms.")
        return terms

    @staticmethod
    def build(data: dict, seed: int) -> TxChainConfig:
        return TxChainConfig(
            pa_coeffs={(t['p'], t['l']): t['coeff'] for t in data['pa_terms']},
            si_channel=tuple(data['si_channel']),
            iq_gain_mismatch=data['iq_gain_mismatch'],
            iq_phase_mismatch=data['iq_phase_mismatch'],
            snr_db=data['snr_db'],
            seed=seed,
        )


class DatasetSerializer(StrictSerializer):
    n_samples = serializers.IntegerField(min_value=512)
    n_carriers = serializers.IntegerField(min_value=2)
    oversample = serializers.IntegerField(min_value=1)
    bandwidth_hz = serializers.FloatField(min_value=0.0)
    split_fraction = serializers.FloatField(min_value=0.0, max_value=1.0)
    residual_taps = serializers.IntegerField(min_value=1)
    tx_chain = TxChainSerializer()

    def validate_n_carriers(self, value):
        if value & (value - 1):
            raise serializers.ValidationError("Must be a power of two.")
        return value

    @staticmethod
    def waveform(data: dict) -> WaveformConfig:
        return WaveformConfig(data['n_carriers'], data['oversample'], data['bandwidth_hz'])
