from settings import default_settings


def load():
    return default_settings()
