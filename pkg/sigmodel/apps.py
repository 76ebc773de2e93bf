from django.apps import AppConfig


class SigmodelConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'sigmodel'
    verbose_name = 'Full-Duplex Signal Model'
