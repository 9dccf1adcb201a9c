from django.apps import AppConfig


class LevySyncConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'levy_sync'
    verbose_name = 'Levy noise synchronization'
