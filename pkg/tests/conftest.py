from pathlib import Path

import pytest

from mvg import cli
from mvg import dataset as ds


@pytest.fixture(scope="session")
def default_scene():
    return ds.default_scene()


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory) -> Path:
    """Full default dataset (5 curves x 20 frames), generated once."""
    out = tmp_path_factory.mktemp("dataset") / "default"
    rc = cli.main(["generate", "--out", str(out)])
    assert rc == 0
    return out


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory) -> Path:
    """A light dataset (fewer frames/samples) for fast CLI tests."""
    out = tmp_path_factory.mktemp("dataset") / "small"
    scene = ds.default_scene(frames=5, samples_per_curve=12)
    cli.write_dataset(scene, out)
    return out


def two_poses(scene, f1: int, f2: int):
    return (
        ds.orbit_pose(scene.orbit, scene.orbit.frame_time(f1), scene.intrinsics),
        ds.orbit_pose(scene.orbit, scene.orbit.frame_time(f2), scene.intrinsics),
    )
