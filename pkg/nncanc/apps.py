from django.apps import AppConfig


class NncancConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'nncanc'
    verbose_name = 'Neural Network Canceller'
