class Settings:
    def __init__(self, depth) -> None:
        self.depth = depth


def default_settings() -> Settings:
    settings = Settings(3)
    return settings
