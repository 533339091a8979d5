import json

import numpy as np
import pytest

from stereopass.scenes import generate_dataset


@pytest.fixture(scope="session")
def small_occluder_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds_occ")
    manifest = generate_dataset(root, count=3, resolution=(128, 128), seed=21)
    return root, manifest


@pytest.fixture(scope="session")
def small_clean_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds_clean")
    manifest = generate_dataset(root, count=3, resolution=(128, 128), seed=22, n_occluders=0)
    return root, manifest


def write_config(path, **overrides):
    cfg = {
        "version": 1,
        "rig": {
            "hmd_thickness": 0.093,
            "camera_offset": 0.02,
            "ipd": 0.06,
            "half_angle": 0.42,
            "focal_px": 64.0,
            "width": 128,
            "height": 128,
        },
        "depth": {"kind": "ground_truth", "d_max": 32},
        "sharpen": {},
        "filter": {},
        "fusion_weights": None,
        "stages": {},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    path.write_text(json.dumps(cfg))
    return path
