def run(x: Missing) -> None:
    print(x)
