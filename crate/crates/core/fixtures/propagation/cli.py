from app import load


def main():
    cfg = load()
    return cfg
