import json
import os

import pytest

from pjx.config import ModelConfig, QuestionConfig, RunConfig, TrainConfig, load_run_config
from pjx.utils import ConfigError

from tests.utils import temp_dirname_created_and_removed


def test_defaults_are_vqa():
    config = RunConfig()
    assert config.mode == "vqa"
    assert not config.model.act
    assert config.model.question_size == config.model.question.hidden_size
    assert config.train.conditioning == "gt"
    assert config.train.freeze_answerer


def test_act_mode_has_no_question_encoder():
    config = RunConfig.from_dict({"mode": "act", "pooled_size": 12})
    assert config.model.act
    assert config.model.question_size == 12
    assert "question_hidden_size" not in config.to_dict()


def test_full_scale_sizes():
    config = ModelConfig.full_scale()
    assert (config.channels, config.grid_rows, config.grid_cols) == (2048, 14, 14)
    assert config.answer_embed_size == 300
    assert config.question.hidden_size == 512
    assert ModelConfig.full_scale(act=True).question is None


def test_act_mode_rejects_question_options():
    with pytest.raises(ConfigError, match="question_hidden_size"):
        RunConfig.from_dict({"mode": "act", "question_hidden_size": 8})


def test_mode_must_match_model():
    with pytest.raises(ConfigError, match="does not match"):
        RunConfig(mode="act", model=ModelConfig())
    with pytest.raises(ConfigError, match="mode must be one of"):
        RunConfig.from_dict({"mode": "vqe"})


@pytest.mark.parametrize(
    "values, match",
    [
        ({"learning_rate": 0.0}, "learning_rate"),
        ({"batch_size": 0}, "batch_size"),
        ({"epochs": -1}, "epochs"),
        ({"dropout": 1.0}, "dropout"),
        ({"conditioning": "oracle"}, "conditioning"),
        ({"max_len": 0}, "max_len"),
        ({"beam_width": 0}, "beam_width"),
    ],
)
def test_train_config_validation(values, match):
    with pytest.raises(ConfigError, match=match):
        TrainConfig.from_dict(values)


def test_model_config_validation():
    with pytest.raises(ConfigError, match="channels"):
        ModelConfig(channels=0)
    with pytest.raises(ConfigError, match="question sizes"):
        QuestionConfig(embed_size=0)
    with pytest.raises(ConfigError, match="unknown ModelConfig option"):
        ModelConfig.from_dict({"channel": 3})


def test_unknown_method_and_metric():
    with pytest.raises(ConfigError, match="method"):
        RunConfig.from_dict({"method": "center"})
    with pytest.raises(ConfigError, match="METEOR"):
        RunConfig.from_dict({"metrics": ["BLEU4", "METEOR"]})


def test_to_dict_roundtrip():
    config = RunConfig.from_dict(
        {"channels": 9, "question_embed_size": 5, "epochs": 4, "conditioning": "pred", "dataset": "data"}
    )
    again = RunConfig.from_dict(config.to_dict())
    assert again == config
    assert again.model.question.embed_size == 5


def test_load_run_config_applies_overrides():
    with temp_dirname_created_and_removed() as dirname:
        path = os.path.join(dirname, "run.json")
        with open(path, "w") as f:
            json.dump({"channels": 9, "epochs": 4, "seed": 3}, f)
        config = load_run_config(path, {"epochs": 7, "seed": None})
        assert config.model.channels == 9
        assert config.train.epochs == 7
        assert config.seed == 3

        with open(path, "w") as f:
            f.write("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_run_config(path)

        with open(path, "w") as f:
            json.dump([1, 2], f)
        with pytest.raises(ConfigError, match="JSON object"):
            load_run_config(path)


def test_validate_paths():
    with temp_dirname_created_and_removed() as dirname:
        config = RunConfig(dataset=dirname, features=os.path.join(dirname, "missing"))
        config.validate_paths("dataset")
        with pytest.raises(FileNotFoundError, match="features"):
            config.validate_paths("features")
        with pytest.raises(ConfigError, match="'checkpoint' is required"):
            config.validate_paths("checkpoint")


def test_save_writes_flat_json():
    config = RunConfig.from_dict({"epochs": 2})
    with temp_dirname_created_and_removed() as dirname:
        path = os.path.join(dirname, "run_config.json")
        config.save(path)
        with open(path) as f:
            values = json.load(f)
    assert values["epochs"] == 2
    assert values["question_hidden_size"] == 32
    assert RunConfig.from_dict(values) == config
