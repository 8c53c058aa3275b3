from django.apps import AppConfig


class HolorankConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'Holorank'
    verbose_name = "Holographic QA ranking"
