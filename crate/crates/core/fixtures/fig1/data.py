class WindowArgs:
    def __init__(self, size: int, stride: int):
        self.size = size
        self.stride = stride


class PythonType:
    def __init__(self, name: str):
        self.name = name


class ChunkedDataset:
    def __init__(self, chunks: list[str]):
        self.chunks = chunks


def chunk_srcs(srcs: list[str], window: WindowArgs, window_size: int) -> ChunkedDataset:
    chunks = []
    for src in srcs:
        chunks.extend(src[i : i + window.size] for i in range(0, len(src), window_size))
    return ChunkedDataset(chunks)
