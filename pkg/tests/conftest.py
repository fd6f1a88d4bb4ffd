import pytest
import torch

from convrec import config as cfg
from convrec.data import corpus, toy

torch.set_num_threads(1)  # keeps tiny-tensor reductions serial and bit-stable


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("toycorpus")
    counts = toy.generate_unified(path, seed=7, n_dialogs=12)
    (path / "_counts.txt").write_text(repr(counts))
    return path


@pytest.fixture(scope="session")
def toy_counts(toy_dir):
    return eval((toy_dir / "_counts.txt").read_text())


@pytest.fixture(scope="session")
def bundle(toy_dir):
    return corpus.load_unified(toy_dir)


@pytest.fixture()
def base_tree():
    return cfg.load_config(None)
