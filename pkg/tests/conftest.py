"""Shared fixtures.

The expensive artifacts (signal scan table, calibration, gains) are built
once per session from the default configuration and reused by the unit and
acceptance tests.
"""

import pytest

from eyeshift import calib
from eyeshift.experiments import PipelineSetup, calib_grid_from_table
from eyeshift.fusion import StreamConfig
from eyeshift.psog import PhotosensorLayout
from eyeshift.scan import ScanSpec, TableInterpolator, run_scan
from eyeshift.scene import SceneConfig
from eyeshift.vog import VogConfig, estimate_gains


@pytest.fixture(scope="session")
def scene_cfg():
    return SceneConfig()


@pytest.fixture(scope="session")
def layout():
    return PhotosensorLayout()


@pytest.fixture(scope="session")
def vog_cfg():
    return VogConfig()


@pytest.fixture(scope="session")
def stream_cfg():
    return StreamConfig()


@pytest.fixture(scope="session")
def scan_table(scene_cfg, layout):
    return run_scan(scene_cfg, layout, ScanSpec(), jobs=4)


@pytest.fixture(scope="session")
def interpolator(scan_table):
    return TableInterpolator(scan_table)


@pytest.fixture(scope="session")
def calib_model(scan_table):
    return calib.fit(calib_grid_from_table(scan_table))


@pytest.fixture(scope="session")
def gains(scene_cfg, vog_cfg):
    return estimate_gains(scene_cfg, vog_cfg)


@pytest.fixture(scope="session")
def setup(scene_cfg, layout, vog_cfg, stream_cfg, gains, calib_model, scan_table):
    return PipelineSetup(scene_cfg, layout, vog_cfg, stream_cfg, gains, calib_model, scan_table)
