from django.apps import AppConfig


class LincancConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'lincanc'
    verbose_name = 'Linear Canceller'
