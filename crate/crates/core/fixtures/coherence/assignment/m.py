x: int = "s"
