from worker import process


def main(data=0.5):
    return process(data)
