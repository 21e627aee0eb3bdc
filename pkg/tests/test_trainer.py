import json
import shutil

import pytest
import torch
from pydantic import ValidationError

from trimodal import contrastive
from trimodal.encoders.checkpoint import checkpoint_name, load_checkpoint
from trimodal.errors import DatasetMismatchError, NonFiniteLossError
from trimodal.trainer import BatchSource, TrainConfig, build_state, fit, lr_at, train_step


def metrics_rows(run_dir):
    return [json.loads(line) for line in (run_dir / "metrics.jsonl").read_text().splitlines()]


class TestTrainConfig:
    def test_step_decay(self):
        config = TrainConfig(lr=0.001, lr_decay=0.1, decay_every=2)
        assert [lr_at(i, config) for i in range(6)] == pytest.approx([1e-3, 1e-3, 1e-4, 1e-4, 1e-5, 1e-5])

    def test_negative_iteration(self):
        with pytest.raises(ValueError):
            lr_at(-1, TrainConfig())

    @pytest.mark.parametrize(
        "iterations, decay_every, expected",
        [(2000, 500, 100), (160_000, 40_000, 8000), (3000, 700, 140), (50, 30, 30)],
    )
    def test_checkpoint_interval_divides_decay(self, iterations, decay_every, expected):
        config = TrainConfig(iterations=iterations, decay_every=decay_every)
        assert config.checkpoint_interval == expected
        assert decay_every % config.checkpoint_interval == 0

    def test_explicit_interval_must_divide_decay(self):
        with pytest.raises(ValidationError, match="divide"):
            TrainConfig(decay_every=500, checkpoint_every=300)

    def test_crop_scale(self):
        with pytest.raises(ValidationError):
            TrainConfig(crop_scale=(0.9, 0.5))

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            TrainConfig(learning_rate=0.1)

    def test_workers_do_not_change_the_hash(self):
        assert TrainConfig(workers=3).content_hash() == TrainConfig().content_hash()
        assert TrainConfig(tau=0.2).content_hash() != TrainConfig().content_hash()

    def test_paper_scale(self):
        config = TrainConfig.paper_scale()
        assert (config.batch_size, config.iterations, config.decay_every) == (96, 160_000, 40_000)
        assert config.encoder_config(faces=1024).width_scale == 1.0


class TestBatchSource:
    def test_epoch_covers_the_training_split(self, tiny_archive, tiny_train_config):
        source = BatchSource(tiny_archive, tiny_train_config)
        assert source.batches_per_epoch == 3
        seen = [object_id for i in range(3) for object_id in source.batch_ids(i)]
        assert sorted(seen) == sorted(tiny_archive.ids("train"))

    def test_batch_is_a_function_of_the_iteration(self, tiny_archive, tiny_train_config):
        source = BatchSource(tiny_archive, tiny_train_config)
        first, second = source[5], source[5]
        assert first["object_ids"] == second["object_ids"]
        for key in ("points", "centers", "first_views", "second_views"):
            torch.testing.assert_close(first[key], second[key])

    def test_batch_shapes(self, tiny_archive, tiny_train_config):
        batch = BatchSource(tiny_archive, tiny_train_config)[0]
        assert batch["points"].shape == (4, 64, 3)
        assert batch["centers"].shape == (4, 32, 3)
        assert batch["corners"].shape == (4, 32, 3, 3)
        assert batch["neighbors"].dtype == torch.int64
        assert batch["first_views"].shape == (4, 16, 16, 3)
        assert not torch.equal(batch["first_views"], batch["second_views"])

    def test_batch_too_large(self, tiny_archive, tiny_train_config):
        with pytest.raises(ValueError, match="can't fill"):
            BatchSource(tiny_archive, tiny_train_config.model_copy(update={"batch_size": 13}))


class TestTrainStep:
    def test_updates_parameters(self, tiny_archive, tiny_train_config):
        state = build_state(tiny_train_config, faces=32)
        before = [p.detach().clone() for p in state.network.parameters()]
        state, losses = train_step(state, BatchSource(tiny_archive, tiny_train_config)[0], tiny_train_config)
        assert state.iteration == 1
        assert losses.is_finite()
        assert any(not torch.equal(a, b) for a, b in zip(before, state.network.parameters()))

    def test_every_subnetwork_moves(self, tiny_archive, tiny_train_config):
        state = build_state(tiny_train_config, faces=32)
        before = {
            name: [p.detach().clone() for p in subnetwork.parameters()]
            for name, subnetwork in state.network.subnetworks().items()
        }
        state, _ = train_step(state, BatchSource(tiny_archive, tiny_train_config)[0], tiny_train_config)
        for name, subnetwork in state.network.subnetworks().items():
            delta = sum(
                torch.linalg.vector_norm(p.detach() - b) ** 2 for p, b in zip(subnetwork.parameters(), before[name])
            )
            assert delta > 0, name

    def test_weight_decay_with_zero_gradient(self, tiny_archive, tiny_train_config, monkeypatch):
        def flat(*args, **kwargs):
            losses = contrastive.total_loss(*args, **kwargs)
            losses.total = losses.total * 0.0
            return losses

        monkeypatch.setattr("trimodal.trainer.loop.total_loss", flat)
        config = tiny_train_config.model_copy(update={"lr": 0.1, "weight_decay": 0.01})
        state = build_state(config, faces=32)
        before = [p.detach().clone() for p in state.network.parameters()]
        state, _ = train_step(state, BatchSource(tiny_archive, config)[0], config)
        for a, b in zip(before, state.network.parameters()):
            torch.testing.assert_close(b.detach(), a * (1 - 0.1 * 0.01))

    def test_non_finite_loss_leaves_parameters(self, tiny_archive, tiny_train_config, monkeypatch):
        def exploding(*args, **kwargs):
            losses = contrastive.total_loss(*args, **kwargs)
            losses.L_PI = losses.L_PI * float("nan")
            return losses

        monkeypatch.setattr("trimodal.trainer.loop.total_loss", exploding)
        state = build_state(tiny_train_config, faces=32)
        before = [p.detach().clone() for p in state.network.parameters()]
        batch = BatchSource(tiny_archive, tiny_train_config)[0]
        with pytest.raises(NonFiniteLossError) as error:
            train_step(state, batch, tiny_train_config)
        assert error.value.iteration == 1
        assert error.value.object_ids == batch["object_ids"]
        assert state.iteration == 0
        for a, b in zip(before, state.network.parameters()):
            assert torch.equal(a, b)


class TestFit:
    def test_deterministic_only_while_fitting(self, tmp_path, tiny_archive, tiny_train_config):
        during = []
        assert not torch.are_deterministic_algorithms_enabled()
        fit(
            tiny_archive,
            tiny_train_config,
            tmp_path / "run",
            on_step=lambda i, r: during.append(torch.are_deterministic_algorithms_enabled()),
        )
        assert during == [True] * tiny_train_config.iterations
        assert not torch.are_deterministic_algorithms_enabled()

    def test_outputs(self, tmp_path, tiny_archive, tiny_train_config):
        steps = []
        result = fit(tiny_archive, tiny_train_config, tmp_path / "run", on_step=lambda i, r: steps.append(i))
        assert result.iteration == 4
        assert steps == [1, 2, 3, 4]
        assert [p.name for p in result.checkpoints] == [checkpoint_name(2), checkpoint_name(4)]

        rows = metrics_rows(tmp_path / "run")
        assert [row["iter"] for row in rows] == [1, 2, 3, 4]
        assert {"lr", "L_MP", "L_MI", "L_PI", "L_II", "total", "wall_ms"} <= set(rows[0])
        assert rows[2]["lr"] == pytest.approx(rows[0]["lr"] * tiny_train_config.lr_decay)

        resolved = json.loads((tmp_path / "run" / "resolved_config.json").read_text())
        assert resolved["config_hash"] == tiny_train_config.content_hash()
        assert resolved["dataset_hash"] == tiny_archive.config_hash
        assert not (tmp_path / "run" / "abort.json").exists()

    def test_same_seed_same_losses(self, tmp_path, tiny_archive, tiny_train_config):
        fit(tiny_archive, tiny_train_config, tmp_path / "a")
        fit(tiny_archive, tiny_train_config, tmp_path / "b")
        assert [r["total"] for r in metrics_rows(tmp_path / "a")] == [r["total"] for r in metrics_rows(tmp_path / "b")]

    def test_resume_matches_an_uninterrupted_run(self, tmp_path, tiny_archive, tiny_train_config):
        fit(tiny_archive, tiny_train_config, tmp_path / "full")
        interrupted = tmp_path / "interrupted"
        fit(tiny_archive, tiny_train_config, interrupted)
        # pretend the run died after the first checkpoint
        last = interrupted / "checkpoints" / checkpoint_name(4)
        shutil.rmtree(last)

        result = fit(tiny_archive, tiny_train_config, interrupted, resume=True)
        assert result.iteration == 4
        assert [row["iter"] for row in metrics_rows(interrupted)] == [1, 2, 3, 4]

        expected, _ = load_checkpoint(tmp_path / "full" / "checkpoints" / checkpoint_name(4))
        resumed, _ = load_checkpoint(last)
        for name, tensor in expected.state_dict().items():
            torch.testing.assert_close(resumed.state_dict()[name], tensor)

    def test_resume_with_another_config(self, tmp_path, tiny_archive, tiny_train_config):
        fit(tiny_archive, tiny_train_config, tmp_path / "run")
        with pytest.raises(DatasetMismatchError, match="config"):
            fit(tiny_archive, tiny_train_config.model_copy(update={"tau": 0.5}), tmp_path / "run", resume=True)

    def test_resume_without_checkpoint_starts_fresh(self, tmp_path, tiny_archive, tiny_train_config):
        assert fit(tiny_archive, tiny_train_config, tmp_path / "run", resume=True).iteration == 4

    def test_archive_too_small(self, tmp_path, tiny_archive, tiny_train_config):
        with pytest.raises(DatasetMismatchError):
            fit(tiny_archive, tiny_train_config.model_copy(update={"batch_size": 13}), tmp_path / "run")

    def test_abort_dump(self, tmp_path, tiny_archive, tiny_train_config, monkeypatch):
        def exploding(*args, **kwargs):
            losses = contrastive.total_loss(*args, **kwargs)
            losses.L_MP = losses.L_MP * float("inf")
            return losses

        monkeypatch.setattr("trimodal.trainer.loop.total_loss", exploding)
        with pytest.raises(NonFiniteLossError):
            fit(tiny_archive, tiny_train_config, tmp_path / "run")
        dump = json.loads((tmp_path / "run" / "abort.json").read_text())
        assert dump["iteration"] == 1
        assert len(dump["object_ids"]) == 4
        assert set(dump["components"]) == {"L_MP", "L_MI", "L_PI", "L_II", "total"}
