#!/usr/bin/env python3


"""

Checkpoint reading and writing

File layout:

    8 bytes    little-endian unsigned length of the header
    header     UTF-8 JSON: {"format", "version", "meta", "entries": [...]}
    blob       little-endian raw values of every entry, in header order

Each entry records name, owner, group, kind, dtype, shape, byte offset
and byte count. Optimizer moments are stored as extra entries with group
'optimizer'. JSON keys are sorted so identical stores give identical files.

"""


import json
import struct

import numpy as np

from lib_autodiff.errors import CheckpointError, MissingCheckpointError
from lib_autodiff.param_store import ParamStore


CHECKPOINT_FORMAT = 'hm-vit-checkpoint'
CHECKPOINT_VERSION = 1

_DTYPE_NAMES = {
    np.dtype(np.float64): '<f8',
    np.dtype(np.float32): '<f4',
}


def save_checkpoint(path, store, optimizer=None, meta=None):
    """
    Writes the store (and optionally the optimizer state) to path

    Inputs:
        path: File to create

        store: ParamStore

        optimizer: Optional AdamW whose moments and step count are saved

        meta: Optional dict of JSON-serializable run information

    Returns:
        None. IO errors are passed back up
    """
    meta = dict(meta or {})
    records = []
    for name, item in store.items():
        records.append((name, item.owner, item.group, item.kind, item.tensor.data))

    if optimizer is not None:
        meta['optimizer_step'] = optimizer.step_count
        for name, array in optimizer.state_arrays().items():
            records.append((name, 'optimizer', 'optimizer', 'state', array))

    entries = []
    chunks = []
    offset = 0
    for name, owner, group, kind, array in records:
        dtype_name = _DTYPE_NAMES.get(array.dtype)
        if dtype_name is None:
            raise CheckpointError(f"Unsupported dtype {array.dtype} for {name}")
        raw = np.ascontiguousarray(array).astype(np.dtype(dtype_name), copy=False).tobytes()
        entries.append({
            'name': name,
            'owner': owner,
            'group': group,
            'kind': kind,
            'dtype': dtype_name,
            'shape': list(array.shape),
            'offset': offset,
            'nbytes': len(raw),
        })
        chunks.append(raw)
        offset += len(raw)

    header = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'meta': meta,
        'entries': entries,
    }
    header_bytes = json.dumps(header, sort_keys=True, indent=1).encode('utf-8')

    with open(path, 'wb') as output:
        output.write(struct.pack('<Q', len(header_bytes)))
        output.write(header_bytes)
        for raw in chunks:
            output.write(raw)


def read_checkpoint(path):
    """
    Reads a checkpoint file without interpreting it

    Returns:
        (header dict, {name: numpy array})
    """
    try:
        with open(path, 'rb') as checkpoint:
            raw = checkpoint.read()
    except FileNotFoundError as msg:
        raise MissingCheckpointError(f"No checkpoint at {path}") from msg
    except OSError as msg:
        raise CheckpointError(f"Could not read checkpoint {path}: {msg}") from msg

    if len(raw) < 8:
        raise CheckpointError(f"Checkpoint {path} is truncated")
    (header_len,) = struct.unpack('<Q', raw[:8])
    try:
        header = json.loads(raw[8:8 + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as msg:
        raise CheckpointError(f"Checkpoint {path} has a corrupt header") from msg

    if header.get('format') != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not an HM-ViT checkpoint")

    blob = raw[8 + header_len:]
    arrays = {}
    for entry in header['entries']:
        start = entry['offset']
        stop = start + entry['nbytes']
        if stop > len(blob):
            raise CheckpointError(f"Checkpoint {path} is truncated at {entry['name']}")
        array = np.frombuffer(blob[start:stop], dtype=np.dtype(entry['dtype']))
        arrays[entry['name']] = array.reshape(entry['shape']).astype(np.float64)

    return header, arrays


def load_checkpoint(path, store=None, optimizer=None):
    """
    Loads a checkpoint

    Inputs:
        path: Checkpoint file

        store: Optional existing ParamStore. When given, every one of its
        entries must be present in the file with the same shape, and the
        values are copied in. When None a new store is built

        optimizer: Optional AdamW to restore moments and step count into

    Returns:
        (store, meta)
    """
    header, arrays = read_checkpoint(path)
    entries = {entry['name']: entry for entry in header['entries']}

    if store is None:
        store = ParamStore()
        for name in sorted(entries):
            entry = entries[name]
            if entry['group'] == 'optimizer':
                continue
            store.add(name, arrays[name], entry['owner'], entry['group'], entry['kind'])
    else:
        for name in store.names():
            if name not in entries:
                raise CheckpointError(f"Checkpoint {path} has no entry for {name}")
            if tuple(entries[name]['shape']) != store[name].shape:
                raise CheckpointError(
                    f"Checkpoint {path}: shape of {name} is {entries[name]['shape']}, "
                    f"model expects {list(store[name].shape)}"
                )
            store.set_data(name, arrays[name])

    meta = header.get('meta', {})
    if optimizer is not None:
        moments = {
            name: arrays[name] for name, entry in entries.items()
            if entry['group'] == 'optimizer'
        }
        optimizer.load_state_arrays(moments, meta.get('optimizer_step', 0))

    return store, meta
