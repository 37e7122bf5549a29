class Box:
    pass


def peek(b: Box) -> None:
    print(b.missing)
