"""
Serializer helpers shared by the apps: strict key checking, complex numbers
as ``[re, im]`` pairs, and flattening of nested validation errors.
"""

from rest_framework import serializers


class StrictSerializer(serializers.Serializer):
    """Rejects keys that are not declared fields."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
        return super().to_internal_value(data)


class ComplexField(serializers.ListField):
    """Complex number stored as a two-element ``[re, im]`` list."""

    child = serializers.FloatField()

    def __init__(self, **kwargs):
        kwargs.setdefault('min_length', 2)
        kwargs.setdefault('max_length', 2)
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        re, im = super().to_internal_value(data)
        return complex(re, im)

    def to_representation(self, value):
        value = complex(value)
        return [value.real, value.imag]


def flatten_errors(detail, prefix=''):
    """Turn DRF's nested error structure into ``dotted.path: message`` lines."""
    lines = []
    if isinstance(detail, dict):
        for key, value in detail.items():
            path = f"{prefix}.{key}" if prefix else str(key)
            lines.extend(flatten_errors(value, path))
    elif isinstance(detail, list):
        if all(isinstance(item, str) for item in detail):
            lines.extend(f"{prefix or 'config'}: {item}" for item in detail)
        else:
            for index, item in enumerate(detail):
                if item:
                    lines.extend(flatten_errors(item, f"{prefix}[{index}]"))
    else:
        lines.append(f"{prefix or 'config'}: {detail}")
    return lines


def validated(serializer_class, data, error_class, what: str):
    """Validate ``data`` or raise ``error_class`` listing every bad field."""
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        details = '; '.join(flatten_errors(serializer.errors))
        raise error_class(f"invalid {what}: {details}")
    return serializer.validated_data
