import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from speechmark.audio import AudioBuffer
from speechmark.engine import embed
from speechmark.estimator import SpeechWatermarker, check_key, check_signal
from speechmark.exceptions import BadSampleRate, ConfigError, TooShort

from conftest import KEY_HEX, T0


def test_params_round_trip(key):
    wm = SpeechWatermarker(key=key, wsr_db=-20.0, start_timestamp=T0)
    params = wm.get_params()
    assert params["wsr_db"] == -20.0 and params["key"] is key
    c = clone(wm)
    assert c.get_params() == params
    c.set_params(gamma=0.8)
    assert c.gamma == 0.8 and wm.gamma == 0.9


def test_repr_hides_key(key):
    assert KEY_HEX not in repr(SpeechWatermarker(key=key))


def test_fit_validates():
    with pytest.raises(ConfigError):
        SpeechWatermarker().fit()
    with pytest.raises(ConfigError):
        SpeechWatermarker(key=KEY_HEX, wsr_db=-5).fit()
    with pytest.raises(ConfigError):
        SpeechWatermarker(key=12345).fit()
    with pytest.raises(NotFittedError):
        SpeechWatermarker(key=KEY_HEX).transform(np.zeros(8000))


def test_transform_matches_engine(speech10, key, cfg):
    wm = SpeechWatermarker(key=KEY_HEX, start_timestamp=T0)
    out = wm.fit_transform(speech10.samples)
    assert isinstance(out, np.ndarray)
    assert np.array_equal(out, embed(speech10, key, cfg).samples)
    assert wm.n_frames_ == 10
    assert isinstance(wm.transform(speech10), AudioBuffer)


def test_predict_and_score(speech10, marked10, key):
    wm = SpeechWatermarker(key=key, start_timestamp=T0).fit()
    assert wm.predict(marked10) == "AUTHENTIC"
    assert wm.score(marked10) == 1.0
    assert wm.predict(speech10.samples) == "NO_WATERMARK"
    assert wm.verify(marked10).frames_valid == 10


def test_acquire_frames(marked60, key):
    # 20 s in: beyond the default +/-4 frame-index search
    ex = marked60.samples[160500:176500]
    assert SpeechWatermarker(key=key).fit().predict(ex) == "NO_WATERMARK"
    res = SpeechWatermarker(key=key, acquire_frames=64).fit().extract(ex)
    assert res.valid_frames and res.valid_frames[0].frame_index in (20, 21)


def test_check_signal():
    assert check_signal(np.zeros((10, 1))).samples.shape == (10,)
    with pytest.raises(ValueError):
        check_signal(np.zeros((10, 2)))
    with pytest.raises(BadSampleRate):
        check_signal(AudioBuffer(np.zeros(10), 16000))
    with pytest.raises(TooShort):
        check_signal(np.zeros(10), min_samples=8000)


def test_check_key(key):
    assert check_key(KEY_HEX) == key
    assert check_key(bytes.fromhex(KEY_HEX)) == key
    assert check_key(key) is key
