from django.apps import AppConfig


class HwmodelConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'hwmodel'
    verbose_name = 'Hardware Cycle Models'
