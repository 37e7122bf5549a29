def name() -> int:
    return "a"
