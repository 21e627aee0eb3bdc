import numpy as np
import pytest
import torch

from trimodal.dataprep.archive import DatasetArchive
from trimodal.dataprep.builder import PrepConfig, build_dataset, write_toy_manifest
from trimodal.dataprep.models import MeshObject
from trimodal.encoders.config import EncoderConfig
from trimodal.trainer.config import TrainConfig

CUBE_OFF = """OFF
# unit cube, quad faces
8 6 0
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
4 0 3 2 1
4 4 5 6 7
4 0 1 5 4
4 2 3 7 6
4 1 2 6 5
4 0 4 7 3
"""


@pytest.fixture
def tetrahedron() -> MeshObject:
    return MeshObject(
        vertices=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        faces=np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]),
        object_id="tetra",
        class_label=0,
    )


@pytest.fixture
def cube_off() -> str:
    return CUBE_OFF


@pytest.fixture(scope="session")
def tiny_prep_config() -> PrepConfig:
    return PrepConfig(points=64, faces=32, views=3, resolution=16, seed=0)


@pytest.fixture(scope="session")
def tiny_archive(tmp_path_factory, tiny_prep_config) -> DatasetArchive:
    """
    Three families, 4 train + 2 test objects each, at thumbnail scale.
    """

    root = tmp_path_factory.mktemp("tiny")
    manifest = root / "toy.jsonl"
    write_toy_manifest(manifest, train_per_family=4, test_per_family=2, seed=0)
    build_dataset(manifest, root / "archive", config=tiny_prep_config)
    return DatasetArchive.open(root / "archive")


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    return TrainConfig(
        batch_size=4,
        iterations=4,
        decay_every=2,
        checkpoint_every=2,
        width_scale=0.125,
        edge_k=4,
        embed_dim=16,
        seed=0,
    )


@pytest.fixture
def tiny_encoder_config() -> EncoderConfig:
    return EncoderConfig(width_scale=0.125, k=4, faces=32, embed_dim=16)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)
