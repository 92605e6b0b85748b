"""Builds a small local encoder checkpoint so tests run without network
access, and prints the exporter acceptance verdict after the run."""

import os

# must be set before transformers is imported anywhere in the session
os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_VERBOSITY", "error")
os.environ.setdefault("HF_HUB_DISABLE_PROGRESS_BARS", "1")

import pytest
from _fixtures import SENTENCES, WORDS, record_line


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    root = tmp_path_factory.mktemp("checkpoint")
    (root / "vocab.txt").write_text("\n".join(WORDS) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(root / "vocab.txt"), model_max_length=64)
    tokenizer.save_pretrained(root)
    config = BertConfig(
        vocab_size=len(WORDS),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(0)
    BertModel(config).save_pretrained(root)
    return str(root)


@pytest.fixture(scope="session")
def records_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("records") / "records.jsonl"
    lines = [record_line(toks, pos, sentence_id=i) for i, (toks, pos) in enumerate(SENTENCES)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


RESULTS: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def record(num: int, name: str, passed: bool, detail: str) -> None:
        RESULTS.append((num, name, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria (exporter)", sep="=")
    for num, name, passed, detail in sorted(RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {num} {status} {name}: {detail}")
