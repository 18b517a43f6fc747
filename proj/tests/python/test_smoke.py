# Copyright 2026 The Autocam Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import autocam


def test_kelvin_ratios_anchor():
    r, b = autocam.kelvin_to_channel_ratios(6500.0)
    assert r == pytest.approx(1.0, abs=1e-12)
    assert b == pytest.approx(1.0, abs=1e-12)
    r_warm, b_warm = autocam.kelvin_to_channel_ratios(3000.0)
    assert r_warm > 1.0
    assert b_warm < 1.0


def test_render_and_cfa_round_trip(tmp_path):
    scene = autocam.SceneSpec(width=32, height=32, family="patches", scene_gain=300.0, seed=5)
    raw = autocam.render_raw(scene, cct_kelvin=4500.0, seed=7)
    samples = raw.samples
    assert samples.shape == (32, 32)
    assert samples.dtype == np.uint16
    assert samples.max() <= 1023

    again = autocam.render_raw(scene, cct_kelvin=4500.0, seed=7)
    assert np.array_equal(samples, again.samples)

    planes = autocam.decompose_cfa(raw)
    assert set(planes) == {"r", "gr", "gb", "b"}
    mosaic = autocam.recompose_cfa(planes, "RGGB")
    assert np.array_equal(mosaic, samples)

    path = tmp_path / "probe.craw"
    autocam.write_raw(raw, path)
    back = autocam.read_raw(path)
    assert np.array_equal(back.samples, samples)
    assert back.capture.iso == pytest.approx(raw.capture.iso)


def test_expected_iso_and_weights():
    bins = list(autocam.DEFAULT_BINS)
    probs = [0.0] * len(bins)
    probs[3] = 1.0
    assert autocam.expected_iso(bins, probs) == pytest.approx(800.0)
    assert autocam.expected_iso([400.0, 800.0], [0.5, 0.5]) == pytest.approx(600.0)

    w = autocam.iso_bin_weights(800.0, bins)
    assert w[3] == pytest.approx(1.0)
    assert min(w) == pytest.approx(0.1)


def test_colorimetry():
    white = autocam.srgb_to_lab(1.0, 1.0, 1.0)
    assert white[0] == pytest.approx(100.0, abs=1e-6)
    assert autocam.delta_e76((50, 0, 0), (50, 3, 4)) == pytest.approx(5.0)


def test_oracles_and_dataset(tmp_path):
    manifest = autocam.generate_dataset(str(tmp_path / "ds"), count=4, seed=11)
    rows = (tmp_path / "ds" / "manifest.csv").read_text().strip().splitlines()
    assert rows[0].startswith("path,gt_iso,")
    assert len(rows) == 5

    probe = autocam.read_raw(tmp_path / "ds" / rows[1].split(",")[0])
    assert probe.capture.iso == pytest.approx(1000.0)

    temp, dr, db = autocam.oracle_wb(6500.0, probe, 100.0, 100.0)
    assert temp == pytest.approx(6500.0)
    assert math.isfinite(dr) and math.isfinite(db)


def test_tiny_train_predict_quantize(tmp_path):
    manifest = autocam.generate_dataset(str(tmp_path / "ds"), count=6, seed=3)
    ckpt = str(tmp_path / "model.ckpt")
    info = autocam.train(manifest, ckpt, epochs_total=2, stage1_epochs=1, batch_size=3, seed=1)
    assert info["stage2_epochs_run"] == 1
    assert autocam.param_count(ckpt) < 2_300_000

    rows = (tmp_path / "ds" / "manifest.csv").read_text().strip().splitlines()
    probe_path = str(tmp_path / "ds" / rows[1].split(",")[0])
    pred = autocam.predict(ckpt, probe_path, capture2=probe_path)
    assert sum(pred["probs"]) == pytest.approx(1.0, abs=1e-9)
    assert 2500.0 <= pred["temp_kelvin"] <= 8500.0

    qckpt = str(tmp_path / "model_q.ckpt")
    assert autocam.quantize_checkpoint(ckpt, qckpt) > 0
    agg = autocam.evaluate(manifest, qckpt)
    assert agg["count"] == 6
