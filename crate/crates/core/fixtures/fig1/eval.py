from data import PythonType, chunk_srcs
from model import ModelWrapper


def eval_on_dataset(model: ModelWrapper, srcs: list[str], window_size: int = 128) -> dict[int, list[PythonType]]:
    window = model.DefaultWindow
    chunks = chunk_srcs(srcs, window, window_size)
    return model.predict(chunks)
