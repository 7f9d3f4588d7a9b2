#!/usr/bin/env python3


#######################################################
# Unit tests for the two stage training session
#
#######################################################


import io
import json
import os
import shutil
import tempfile
import unittest
from contextlib import redirect_stdout, redirect_stderr

import numpy as np

## Functions and classes to tests
#
from ..training import TrainingSession, stage1_filter, stage1_name, stage2_name, _source_name
from ..training import load_model, TRAIN_LOG
from ..dataset import generate_dataset
from ..pipeline import fusion_config, init_model
from .tiny_profile import tiny_settings
from lib_autodiff.errors import ConfigurationError, CheckpointError
from lib_fusion.modality import Modality


def _silent(function, *args, **kwargs):
    """
    Calls function with the progress output swallowed
    """
    with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
        return function(*args, **kwargs)


def _read(path):
    with open(path, 'rb') as file:
        return file.read()


## Responsible for testing how stage 1 and stage 2 parameters relate
#
# Note:
# + = positive test, (valid input handling)
# - = stress test, (invalid input handling)
#
# ==Current Tests==
# + Test the stage 1 filter only accepts the regime's parameters
# + Test where each stage 2 entry is copied from
# + Test checkpoint names
# - Test stage and regime combinations that make no sense
#
class Test_Stage_Rules(unittest.TestCase):


    ## Single modality runs
    #
    def test_stage1_filter(self):

        settings = tiny_settings()
        store = init_model(settings, fusion_config(settings))
        accept = stage1_filter(store, Modality.LIDAR)

        assert accept('encoder.lidar.conv1.weight')
        assert accept('head.lidar.out.bias')
        assert not accept('encoder.camera.conv1.weight')
        assert not accept('head.camera.out.bias')
        for name in store.names():
            owner = store.entry(name).owner
            if owner == 'edge:lidar->lidar' or owner == 'shared':
                assert accept(name)
            if 'camera' in owner:
                assert not accept(name)


    ## Stage 2 sources
    #
    def test_source_name(self):

        name = 'fusion.iter0.local.attn.relation.camera->lidar.weight'
        assert _source_name(name, 'edge:camera->lidar') == (
            Modality.LIDAR, 'fusion.iter0.local.attn.relation.lidar->lidar.weight'
        )
        name = 'fusion.iter1.global.attn.relation.lidar->camera.weight'
        assert _source_name(name, 'edge:lidar->camera') == (
            Modality.CAMERA, 'fusion.iter1.global.attn.relation.camera->camera.weight'
        )
        name = 'fusion.iter0.local.attn.relation.camera->camera.weight'
        assert _source_name(name, 'edge:camera->camera') == (Modality.CAMERA, name)
        assert _source_name('head.camera.out.bias', 'node:camera') == (Modality.CAMERA, 'head.camera.out.bias')
        assert _source_name('fusion.shared.scale', 'shared') == (Modality.LIDAR, 'fusion.shared.scale')


    ## File names
    #
    def test_names(self):

        assert stage1_name(Modality.CAMERA, 8) == 'stage1_camera_r8.ckpt'
        assert stage1_name('lidar', 1) == 'stage1_lidar_r1.ckpt'
        assert stage2_name(32) == 'stage2_r32.ckpt'


    ## Bad combinations
    #
    def test_bad_session(self):

        settings = tiny_settings()
        with self.assertRaises(ConfigurationError):
            TrainingSession(settings, 1, 'v2v-h', 'data', 'runs')
        with self.assertRaises(ConfigurationError):
            TrainingSession(settings, 2, 'v2v-l', 'data', 'runs')
        with self.assertRaises(ConfigurationError):
            TrainingSession(settings, 3, 'v2v-h', 'data', 'runs')


## Responsible for testing TrainingSession runs
#
# Note:
# + = positive test, (valid input handling)
# - = stress test, (invalid input handling)
#
# ==Current Tests==
# + Test stage 1 writes a checkpoint and one log line per step
# + Test stage 1 leaves the other modality's parameters alone
# + Test stage 2 merges stage 1 and keeps encoders bitwise frozen
# + Test resuming gives the same checkpoint as an uninterrupted run
# + Test the loss goes down over the first 50 steps on one batch
# - Test stage 2 without stage 1 checkpoints
# - Test loading a checkpoint trained with other settings
#
class Test_Training_Session(unittest.TestCase):


    @classmethod
    def setUpClass(cls):

        cls.folder = tempfile.mkdtemp()
        cls.data_dir = os.path.join(cls.folder, 'data')
        cls.settings = tiny_settings()
        _silent(generate_dataset, cls.settings, cls.data_dir)


    @classmethod
    def tearDownClass(cls):

        shutil.rmtree(cls.folder, ignore_errors=True)


    def _out(self, name):
        return os.path.join(self.folder, name)


    ## Checkpoint and log
    #
    def test_stage1(self):

        out_dir = self._out('stage1')
        session = TrainingSession(self.settings, 1, 'v2v-l', self.data_dir, out_dir)
        path = _silent(session.run)

        assert path == os.path.join(out_dir, 'stage1_lidar_r1.ckpt')
        assert os.path.isfile(path)

        with open(os.path.join(out_dir, TRAIN_LOG), 'r', encoding='utf-8') as file:
            records = [json.loads(line) for line in file]
        # 3 scenes in batches of 2, 2 epochs
        assert len(records) == 4
        assert [item['step'] for item in records] == [1, 2, 3, 4]
        for item in records:
            assert set(item) == {'step', 'lr', 'loss_cls', 'loss_reg', 'wall_ms'}
            assert np.isfinite(item['loss_cls'])

        store, meta = load_model(self.settings, path, 1)
        assert meta['stage'] == 1
        assert meta['regime'] == 'v2v-l'
        assert meta['fingerprint'] == self.settings.fingerprint()
        assert meta['status']['epoch'] == 2
        assert len(meta['status']['val_history']) == 2


    ## Camera parameters untouched by a LiDAR run
    #
    def test_stage1_filter_applied(self):

        out_dir = self._out('stage1_filter')
        settings = tiny_settings(training={'epochs_stage1': 1})
        session = TrainingSession(settings, 1, 'v2v-l', self.data_dir, out_dir)
        _silent(session.setup)
        before = session.store.snapshot()
        _silent(session.run)

        after = session.store.snapshot()
        changed = [name for name in before if not np.array_equal(before[name], after[name])]
        assert changed
        for name in before:
            owner = session.store.entry(name).owner
            if 'camera' in owner:
                assert np.array_equal(before[name], after[name]), name
        assert not np.array_equal(before['head.lidar.out.weight'], after['head.lidar.out.weight'])


    ## Stage 2
    #
    def test_stage2(self):

        out_dir = self._out('stage2')
        settings = tiny_settings(training={'epochs_stage1': 1, 'epochs_stage2': 1})
        _silent(TrainingSession(settings, 1, 'v2v-c', self.data_dir, out_dir).run)
        _silent(TrainingSession(settings, 1, 'v2v-l', self.data_dir, out_dir).run)

        session = TrainingSession(settings, 2, 'v2v-h', self.data_dir, out_dir)
        _silent(session.setup)

        # Merged values come from the matching stage 1 checkpoint
        camera, _ = load_model(settings, os.path.join(out_dir, 'stage1_camera_r1.ckpt'), 1)
        lidar, _ = load_model(settings, os.path.join(out_dir, 'stage1_lidar_r1.ckpt'), 1)
        assert np.array_equal(session.store['encoder.camera.conv1.weight'].data,
                              camera['encoder.camera.conv1.weight'].data)
        assert np.array_equal(session.store['head.lidar.out.weight'].data,
                              lidar['head.lidar.out.weight'].data)

        encoders = {name: session.store[name].data.copy() for name in session.store.names(group='encoder')}
        assert encoders
        others = session.store.snapshot()
        path = _silent(session.run)
        assert path == os.path.join(out_dir, 'stage2_r1.ckpt')

        for name, values in encoders.items():
            assert np.array_equal(session.store[name].data, values), name
        changed = [name for name in others
                   if name not in encoders and not np.array_equal(others[name], session.store[name].data)]
        assert changed


    ## Missing stage 1
    #
    def test_stage2_missing(self):

        session = TrainingSession(self.settings, 2, 'v2v-h', self.data_dir, self._out('empty'))
        with self.assertRaises(CheckpointError):
            _silent(session.setup)


    ## Interrupted and resumed
    #
    def test_resume(self):

        whole_dir = self._out('whole')
        whole = _silent(TrainingSession(self.settings, 1, 'v2v-c', self.data_dir, whole_dir).run)

        # Stop after the first of two planned epochs
        half_dir = self._out('half')
        half = TrainingSession(self.settings, 1, 'v2v-c', self.data_dir, half_dir)
        _silent(half.setup)
        half.epochs = 1
        first = _silent(half.run)

        resumed_dir = self._out('resumed')
        resumed = TrainingSession(self.settings, 1, 'v2v-c', self.data_dir, resumed_dir)
        second = _silent(resumed.run, resume=first)

        assert _read(second) == _read(whole)
        with open(os.path.join(resumed_dir, TRAIN_LOG), 'r', encoding='utf-8') as file:
            assert [json.loads(line)['step'] for line in file] == [3, 4]


    ## Fitting one batch
    #
    def test_loss_decreases(self):

        session = TrainingSession(self.settings, 1, 'v2v-l', self.data_dir, self._out('fit'))
        _silent(session.setup)
        batch = session.train_samples[:2]
        losses = [sum(session.train_step(batch, 5e-3)) for _ in range(50)]
        assert all(np.isfinite(losses))
        assert losses[-1] < losses[0]
        assert np.mean(losses[-5:]) < np.mean(losses[:5])


    ## Other model settings
    #
    def test_wrong_fingerprint(self):

        out_dir = self._out('fingerprint')
        settings = tiny_settings(training={'epochs_stage1': 1})
        path = _silent(TrainingSession(settings, 1, 'v2v-l', self.data_dir, out_dir).run)

        other = tiny_settings(fov={'camera': 10.0})
        with self.assertRaises(CheckpointError):
            load_model(other, path, 1)
        with self.assertRaises(CheckpointError):
            load_model(settings, path, 8)
        with self.assertRaises(CheckpointError):
            load_model(settings, os.path.join(out_dir, 'missing.ckpt'), 1)


if __name__ == '__main__':
    unittest.main()
