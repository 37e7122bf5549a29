from data import ChunkedDataset, PythonType, WindowArgs


class ModelWrapper:
    DefaultWindow: WindowArgs = WindowArgs(size=128, stride=64)

    def predict_on_batch(self, batch: ChunkedDataset, n_seqs: int = 16) -> dict[int, list[PythonType]]:
        preds = {}
        for i, src in enumerate(batch.chunks):
            preds[i] = [PythonType(src)] * n_seqs
        return preds

    def predict(self, data: ChunkedDataset) -> dict[int, list[PythonType]]:
        return self.predict_on_batch(data)
