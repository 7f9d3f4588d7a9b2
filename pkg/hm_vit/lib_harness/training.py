#!/usr/bin/env python3


"""
Name: Training Session

Description: Manages a two stage training session

Stage 1 trains encoders, fusion and heads on single modality scenes
(all camera or all LiDAR). Only parameters that the regime's modality
depends on are updated, the rest keep their initial values.

Stage 2 builds one model out of the camera and the LiDAR stage 1
checkpoints, freezes the encoders and fine-tunes everything else on mixed
scenes.

A checkpoint is written at the end of every epoch and holds the optimizer
state, so --resume continues exactly where the last epoch stopped.

"""


import json
import math
import os
import sys
import time

import numpy as np

from lib_autodiff.checkpoint_io import save_checkpoint, load_checkpoint, read_checkpoint
from lib_autodiff.errors import ConfigurationError, CheckpointError, MissingCheckpointError
from lib_autodiff.functions import scale
from lib_autodiff.optimizer import AdamW, cosine_lr
from lib_autodiff.tensor import Tape
from lib_detection.losses import detection_loss
from lib_fusion.modality import Modality, MODALITIES, edge_name, owner_modalities, parse_modality

from lib_harness.dataset import load_split, prepare_sample
from lib_harness.pipeline import build_grid, sensor_config, fusion_config, init_model, forward_scene
from lib_harness.status_report import StatusReport
from lib_scene.scenario import apply_regime


# Single modality regime of each stage 1 run
STAGE1_REGIMES = {'v2v-c': Modality.CAMERA, 'v2v-l': Modality.LIDAR}

# Second word of the rng seed that shuffles the training set each epoch
SHUFFLE_STREAM = 11

TRAIN_LOG = 'train_log.jsonl'


def stage1_name(modality, rate):
    return f"stage1_{parse_modality(modality).value}_r{rate}.ckpt"


def stage2_name(rate):
    return f"stage2_r{rate}.ckpt"


def check_meta(meta, settings, path, rate=None):
    """
    Raises CheckpointError when a checkpoint was trained with a
    different model shape or compression rate
    """
    if meta.get('fingerprint') != settings.fingerprint():
        raise CheckpointError(
            f"{path} was trained with different [grid]/[model]/[fusion]/[fov] settings "
            f"(fingerprint {meta.get('fingerprint')}, expected {settings.fingerprint()})"
        )
    if rate is not None and meta.get('rate') != rate:
        raise CheckpointError(f"{path} was trained at compression rate {meta.get('rate')}, not {rate}")


def stage1_filter(store, modality):
    """
    Name predicate accepting the parameters a single modality run trains
    """
    def accept(name):
        return owner_modalities(store.entry(name).owner) <= {modality}
    return accept


def _source_name(name, owner):
    """
    Which stage 1 checkpoint and entry a stage 2 parameter starts from

    Node and same-type edge parameters come from the checkpoint of their
    modality. A cross-type edge s->r never existed in stage 1 and starts
    from the receiver's r->r edge. Shared parameters come from LiDAR.

    Returns:
        (Modality, entry name)
    """
    if owner.startswith('node:'):
        return owner_modalities(owner).pop(), name
    if owner.startswith('edge:'):
        sender, receiver = (parse_modality(item) for item in owner[len('edge:'):].split('->'))
        if sender == receiver:
            return receiver, name
        return receiver, name.replace(edge_name(sender, receiver), edge_name(receiver, receiver))
    return Modality.LIDAR, name


def merge_stage1(store, settings, checkpoint_dir, rate):
    """
    Fills store from the camera and LiDAR stage 1 checkpoints

    Raises:
        CheckpointError when a checkpoint is missing or incompatible
    """
    arrays = {}
    for modality in MODALITIES:
        path = os.path.join(checkpoint_dir, stage1_name(modality, rate))
        if not os.path.isfile(path):
            regime = 'v2v-c' if modality == Modality.CAMERA else 'v2v-l'
            raise MissingCheckpointError(
                f"Stage 2 needs {path}. Train it first with: "
                f"train --stage 1 --regime {regime} --rate {rate} --out {checkpoint_dir}"
            )
        header, values = read_checkpoint(path)
        check_meta(header.get('meta', {}), settings, path, rate)
        arrays[modality] = values

    for name, item in store.items():
        modality, source = _source_name(name, item.owner)
        if source not in arrays[modality]:
            raise CheckpointError(f"Stage 1 {modality.value} checkpoint has no entry for {source}")
        store.set_data(name, arrays[modality][source])


class TrainingSession:
    """
    Used to manage one training run
    """

    def __init__(self, settings, stage, regime, data_dir, out_dir, rate=None):
        """
        Basic initialization function

        Inputs:
            settings: Validated Settings

            stage: 1 or 2

            regime: 'v2v-c' or 'v2v-l' for stage 1, 'v2v-h' for stage 2

            data_dir: Where generate wrote the splits

            out_dir: Where checkpoints and the training log go

            rate: Compression rate, defaults to [compression] rate

        Returns:
            TrainingSession
        """
        if stage == 1 and regime not in STAGE1_REGIMES:
            raise ConfigurationError(f"Stage 1 trains on v2v-c or v2v-l, not {regime}")
        if stage == 2 and regime != 'v2v-h':
            raise ConfigurationError(f"Stage 2 fine-tunes on v2v-h, not {regime}")
        if stage not in (1, 2):
            raise ConfigurationError(f"Unknown training stage: {stage}")

        self.settings = settings
        self.stage = stage
        self.regime = regime
        self.data_dir = data_dir
        self.out_dir = out_dir
        self.rate = settings.compression.rate if rate is None else rate
        self.config = fusion_config(settings, self.rate)

        if stage == 1:
            self.epochs = settings.training.epochs_stage1
            self.checkpoint_path = os.path.join(out_dir, stage1_name(STAGE1_REGIMES[regime], self.rate))
        else:
            self.epochs = settings.training.epochs_stage2
            self.checkpoint_path = os.path.join(out_dir, stage2_name(self.rate))

        # Filled in by setup()
        self.store = None
        self.optimizer = None
        self.train_samples = []
        self.val_samples = []
        self.report = None

    def _samples(self, split):
        grid = build_grid(self.settings)
        sensors = sensor_config(self.settings)
        return [
            prepare_sample(apply_regime(scenario, self.regime), grid, sensors)
            for scenario in load_split(self.data_dir, split)
        ]

    def setup(self):
        """
        Loads the data and builds the model and optimizer
        """
        print(f"[*] Loading training data from {self.data_dir}")
        self.train_samples = self._samples('train')
        self.val_samples = self._samples('val')
        print(f"[+] {len(self.train_samples)} training / {len(self.val_samples)} validation scenes")

        self.store = init_model(self.settings, self.config)
        training = self.settings.training
        if self.stage == 1:
            param_filter = stage1_filter(self.store, STAGE1_REGIMES[self.regime])
        else:
            print("[*] Merging the stage 1 camera and LiDAR checkpoints")
            merge_stage1(self.store, self.settings, self.out_dir, self.rate)
            self.store.freeze('encoder')
            param_filter = None

        self.optimizer = AdamW(self.store, weight_decay=training.weight_decay, param_filter=param_filter)
        self.report = StatusReport(self.stage, self.regime, self.epochs * self.steps_per_epoch())

    def steps_per_epoch(self):
        return math.ceil(len(self.train_samples) / self.settings.training.batch_size)

    def _meta(self):
        return {
            'stage': self.stage,
            'regime': self.regime,
            'rate': self.rate,
            'fingerprint': self.settings.fingerprint(),
            'seed': self.settings.training.seed,
            'status': self.report.to_meta(),
        }

    def _save(self):
        save_checkpoint(self.checkpoint_path, self.store, self.optimizer, self._meta())

    def _restore(self, path):
        print(f"[*] Restoring saved progress from {path}", file=sys.stderr)
        _, meta = load_checkpoint(path, self.store, self.optimizer)
        check_meta(meta, self.settings, path, self.rate)
        if meta.get('stage') != self.stage or meta.get('regime') != self.regime:
            raise CheckpointError(
                f"{path} is a stage {meta.get('stage')} {meta.get('regime')} checkpoint, "
                f"cannot resume stage {self.stage} {self.regime} from it"
            )
        self.report.load(meta.get('status', {}))

    def train_step(self, batch, lr):
        """
        One optimizer step on a batch of samples

        The batch loss is the mean of the scene losses. Gradients are
        accumulated scene by scene in batch order

        Returns:
            (mean focal loss, mean regression loss)
        """
        self.store.zero_grad()
        weight = 1.0 / len(batch)
        loss_cls = 0.0
        loss_reg = 0.0
        for sample in batch:
            with Tape() as tape:
                cls, reg = forward_scene(sample, self.store, self.config, mode='train')
                total, focal, regression = detection_loss(
                    cls, reg, sample.cls_target, sample.reg_target, sample.pos_mask
                )
                loss = scale(total, weight)
            tape.backward(loss)
            loss_cls += weight * float(focal.data)
            loss_reg += weight * float(regression.data)
        self.optimizer.step(lr)
        return loss_cls, loss_reg

    def validation_loss(self):
        """
        Mean total loss over the validation scenes, heads in eval mode
        """
        if not self.val_samples:
            return 0.0
        losses = []
        for sample in self.val_samples:
            cls, reg = forward_scene(sample, self.store, self.config, mode='eval')
            total, _, _ = detection_loss(cls, reg, sample.cls_target, sample.reg_target, sample.pos_mask)
            losses.append(float(total.data))
        return float(np.mean(losses))

    def epoch_order(self, epoch):
        rng = np.random.default_rng([self.settings.training.seed, SHUFFLE_STREAM, epoch])
        return rng.permutation(len(self.train_samples))

    def run(self, resume=None):
        """
        Trains until every epoch has run or validation stops
        improving

        Inputs:
            resume: Optional checkpoint path to continue from

        Returns:
            The path of the written checkpoint
        """
        if self.store is None:
            self.setup()
        os.makedirs(self.out_dir, exist_ok=True)
        if resume is not None:
            self._restore(resume)

        training = self.settings.training
        total_steps = self.report.total_steps
        batch_size = training.batch_size
        log_path = os.path.join(self.out_dir, TRAIN_LOG)

        print(f"[*] Stage {self.stage} training on {self.regime}, rate {self.rate}, "
              f"{self.epochs} epochs of {self.steps_per_epoch()} steps", file=sys.stderr)

        with open(log_path, 'a', encoding='utf-8') as log:
            while self.report.epoch < self.epochs:
                if training.patience and self.report.epochs_since_best() >= training.patience:
                    print(f"[+] Validation loss has not improved for {training.patience} epochs, stopping",
                          file=sys.stderr)
                    break

                order = self.epoch_order(self.report.epoch)
                for start in range(0, len(order), batch_size):
                    batch = [self.train_samples[index] for index in order[start:start + batch_size]]
                    lr = cosine_lr(self.report.step, total_steps, training.lr, training.lr_min)

                    started = time.perf_counter()
                    loss_cls, loss_reg = self.train_step(batch, lr)
                    wall_ms = (time.perf_counter() - started) * 1000.0

                    self.report.update(self.report.step + 1, loss_cls, loss_reg)
                    record = {
                        'step': self.report.step,
                        'lr': lr,
                        'loss_cls': loss_cls,
                        'loss_reg': loss_reg,
                        'wall_ms': round(wall_ms, 3),
                    }
                    log.write(json.dumps(record, sort_keys=True) + '\n')

                    if self.report.step % training.status_every == 0:
                        self.report.print_status()

                self.report.epoch += 1
                self.report.val_history.append(self.validation_loss())
                self.report.print_status()
                self._save()
                log.flush()

        print(f"[+] Saved {self.checkpoint_path}", file=sys.stderr)
        return self.checkpoint_path


def load_model(settings, path, rate):
    """
    Builds a model shaped by settings and fills it from a checkpoint

    Returns:
        (store, meta)
    """
    if not os.path.isfile(path):
        raise MissingCheckpointError(f"No checkpoint at {path}. Run the train command first")
    store = init_model(settings, fusion_config(settings, rate))
    _, meta = load_checkpoint(path, store)
    check_meta(meta, settings, path, rate)
    return store, meta
