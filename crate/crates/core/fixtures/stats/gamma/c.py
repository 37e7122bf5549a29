class Node:
    def visit(self, depth: int):
        pass


def h(n):
    return n
