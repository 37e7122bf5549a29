class Settings:
    def __init__(self, depth):
        self.depth = depth


def default_settings():
    settings = Settings(3)
    return settings
