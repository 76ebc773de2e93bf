from django.apps import AppConfig


class PolycancConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'polycanc'
    verbose_name = 'Polynomial Canceller'
