from typing import Optional


def f(x: int, y: str = "a") -> Optional[int]:
    return None


count: int = 0
