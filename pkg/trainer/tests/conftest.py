import json
import random

import pytest

OPS = {"plus": "+", "minus": "-", "times": "*"}


def synthetic_items(n: int, seed: int) -> list[dict]:
    """Tiny arithmetic corpus in the converter's training-file shape."""
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        a, b = rng.randint(2, 99), rng.randint(2, 99)
        word = rng.choice(list(OPS))
        op = OPS[word]
        value = {"+": a + b, "-": a - b, "*": a * b}[op]
        rows.append(
            {
                "id": f"syn-{i}",
                "source": f"compute {a} {word} {b}",
                "target": f"{a}{op}{b}={value}\n#### {value}",
                "format": "equation",
            }
        )
    return rows


def write_training_file(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


@pytest.fixture(scope="session")
def memorized_run(tmp_path_factory):
    """A 16-record corpus trained to exact recall, shared by the suite."""
    from eqchain_trainer import TrainSpec, WordVocab, load_model, train

    work = tmp_path_factory.mktemp("memorized")
    rows = synthetic_items(16, 99)
    train_file = work / "train.jsonl"
    write_training_file(train_file, rows)
    result = train(
        TrainSpec(train_file=str(train_file), out_dir=str(work / "run"), epochs=200)
    )
    model = load_model(result.model_dir)
    vocab = WordVocab.load(result.vocab_path)
    return {
        "rows": rows,
        "train_file": train_file,
        "result": result,
        "out_dir": work / "run",
        "model": model,
        "vocab": vocab,
    }


# per-criterion lines recorded by the acceptance gate; replayed in the
# terminal summary so they survive output capture
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
