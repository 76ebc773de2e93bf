from django.apps import AppConfig


class FxpConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'fxp'
    verbose_name = 'Fixed-Point Arithmetic'
