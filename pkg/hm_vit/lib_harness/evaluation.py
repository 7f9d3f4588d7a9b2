#!/usr/bin/env python3


"""

Evaluation of HM-ViT against the No Fusion and Late Fusion baselines

Every method sees the same test scenes under the same modality setting.
A setting is an EvalCase: the regime plus, for mixed scenes, the ego's
modality, the share of LiDAR collaborators and the number of agents kept.

Boxes are rounded to the precision of the detections export before AP is
computed, so the report can be recomputed from the exported files alone.

"""


import os
from dataclasses import dataclass
from typing import Optional

import pandas as pd
from joblib import Parallel, delayed

from lib_autodiff.errors import ConfigurationError
from lib_detection.boxes import Detection
from lib_detection.detection_io import write_detections
from lib_detection.metrics import average_precision, IOU_THRESHOLDS
from lib_fusion.fusion_loop import FusionTrace
from lib_fusion.modality import MODALITIES
from lib_scene.scenario import apply_regime, REGIMES

from lib_harness.dataset import load_split, prepare_sample
from lib_harness.pipeline import build_grid, sensor_config, fusion_config, detect_scene, baseline_detections
from lib_harness.training import load_model, stage2_name


METHODS = ('no_fusion', 'late_fusion', 'hm_vit')

SWEEPS = ('ratio', 'agents', 'compression')

EXPORT_DECIMALS = 6

COLUMNS = [
    'sweep', 'case', 'regime', 'ego', 'lidar_ratio', 'n_agents', 'rate', 'method',
    'scenes', 'ap50', 'ap70', 'bytes_per_agent',
]


@dataclass(frozen=True)
class EvalCase:
    label: str
    regime: str
    ego: Optional[str] = None
    lidar_ratio: Optional[float] = None
    n_agents: Optional[int] = None

    def applies_to(self, scenario):
        return self.n_agents is None or len(scenario.agents) >= self.n_agents

    def apply(self, scenario):
        return apply_regime(scenario, self.regime, ego_modality=self.ego,
                            lidar_ratio=self.lidar_ratio, n_agents=self.n_agents)


## Case lists
#
def regime_cases(regime=None):
    """
    v2v-c, v2v-l and v2v-h once per ego modality
    """
    if regime is not None and regime not in REGIMES:
        raise ConfigurationError(f"Unknown regime: {regime}")
    cases = [EvalCase('v2v-c', 'v2v-c'), EvalCase('v2v-l', 'v2v-l')]
    cases += [EvalCase(f"v2v-h_ego-{m.value}", 'v2v-h', ego=m.value) for m in MODALITIES]
    return [case for case in cases if regime is None or case.regime == regime]


def ratio_cases(ratios):
    return [
        EvalCase(f"ego-{m.value}_ratio-{ratio:g}", 'v2v-h', ego=m.value, lidar_ratio=ratio)
        for m in MODALITIES
        for ratio in ratios
    ]


def agent_cases(max_agents):
    cases = []
    for ego in MODALITIES:
        for collaborator in MODALITIES:
            ratio = 1.0 if collaborator.value == 'lidar' else 0.0
            for count in range(1, max_agents + 1):
                label = f"ego-{ego.value}_with-{collaborator.value}_n-{count}"
                cases.append(EvalCase(label, 'v2v-h', ego=ego.value, lidar_ratio=ratio, n_agents=count))
    return cases


## Per scene work, run in the joblib workers
#
def _exported(detections):
    return [
        Detection(item.box.rounded(EXPORT_DECIMALS), round(item.score, EXPORT_DECIMALS))
        for item in detections
    ]


def evaluate_scene(scenario, case, settings, store, rate):
    """
    Runs every method on one scene

    Returns:
        dict with 'truths', one detection list per method, and the
        fusion payload 'bytes' and 'senders'
    """
    config = fusion_config(settings, rate)
    sample = prepare_sample(case.apply(scenario), build_grid(settings), sensor_config(settings))
    trace = FusionTrace()
    result = {'hm_vit': _exported(detect_scene(sample, store, config, settings.eval, trace))}
    for method, found in baseline_detections(sample, store, config, settings.eval).items():
        result[method] = _exported(found)
    result['truths'] = [box.rounded(EXPORT_DECIMALS) for box in sample.truths]
    result['bytes'] = trace.total_bytes()
    result['senders'] = len(trace.bytes_sent)
    return result


def evaluate_case(scenarios, case, settings, store, rate, sweep='regimes'):
    """
    Evaluates one case over the scenes it applies to

    Returns:
        (rows, exports) with one report row per method and
        exports {method: (detections per scene, truths per scene)}
    """
    scenes = [scenario for scenario in scenarios if case.applies_to(scenario)]
    results = Parallel(n_jobs=settings.eval.n_jobs)(
        delayed(evaluate_scene)(scenario, case, settings, store, rate) for scenario in scenes
    )
    truths = [item['truths'] for item in results]
    senders = sum(item['senders'] for item in results)
    fused_bytes = sum(item['bytes'] for item in results)

    rows = []
    exports = {}
    for method in METHODS:
        detections = [item[method] for item in results]
        exports[method] = (detections, truths)
        if method == 'hm_vit':
            per_agent = fused_bytes / senders if senders else 0.0
        else:
            per_agent = 0.0 if method == 'no_fusion' else None
        row = {
            'sweep': sweep,
            'case': case.label,
            'regime': case.regime,
            'ego': case.ego or '',
            'lidar_ratio': case.lidar_ratio,
            'n_agents': case.n_agents,
            'rate': rate,
            'method': method,
            'scenes': len(scenes),
            'bytes_per_agent': per_agent,
        }
        for threshold, column in zip(IOU_THRESHOLDS, ('ap50', 'ap70')):
            row[column] = average_precision(detections, truths, threshold) if scenes else None
        rows.append(row)
    return rows, exports


## Whole runs
#
def _write_exports(out_dir, name, case, exports):
    folder = os.path.join(out_dir, 'detections', name)
    os.makedirs(folder, exist_ok=True)
    for method, (detections, truths) in exports.items():
        write_detections(os.path.join(folder, f"{case.label}_{method}.tsv"), detections, truths)


def run_evaluation(settings, data_dir, checkpoint_dir, out_dir, regime=None, sweep=None,
                   checkpoint=None, rate=None):
    """
    Evaluates the test split and writes the report

    Inputs:
        settings: Validated Settings

        data_dir: Where the splits live

        checkpoint_dir: Where stage2_r<rate>.ckpt files live

        out_dir: Report destination

        regime: Restricts the plain regime report to one regime

        sweep: None, 'ratio', 'agents' or 'compression'

        checkpoint: Explicit checkpoint file, not used by the compression
        sweep

        rate: Compression rate of the model, defaults to [compression] rate

    Returns:
        pandas DataFrame, also written to out_dir/metrics_<name>.csv
    """
    if sweep is not None and sweep not in SWEEPS:
        raise ConfigurationError(f"Unknown sweep: {sweep}")
    rate = settings.compression.rate if rate is None else rate
    scenarios = load_split(data_dir, 'test')
    print(f"[*] Evaluating {len(scenarios)} test scenes")

    if sweep == 'compression':
        plans = [
            (candidate, os.path.join(checkpoint_dir, stage2_name(candidate)), regime_cases('v2v-h'))
            for candidate in settings.eval.rates
        ]
    else:
        if sweep == 'ratio':
            cases = ratio_cases(settings.eval.ratios)
        elif sweep == 'agents':
            cases = agent_cases(settings.eval.max_agents)
        else:
            cases = regime_cases(regime)
        path = checkpoint or os.path.join(checkpoint_dir, stage2_name(rate))
        plans = [(rate, path, cases)]

    name = sweep or 'regimes'
    rows = []
    for plan_rate, path, cases in plans:
        store, _ = load_model(settings, path, plan_rate)
        print(f"[+] Loaded {path}")
        for case in cases:
            print(f"[*] {case.label} at rate {plan_rate}")
            case_rows, exports = evaluate_case(scenarios, case, settings, store, plan_rate, sweep=name)
            rows.extend(case_rows)
            export_case = case if sweep != 'compression' else EvalCase(f"{case.label}_r{plan_rate}", case.regime)
            _write_exports(out_dir, name, export_case, exports)

    frame = pd.DataFrame(rows, columns=COLUMNS).astype({'n_agents': 'Int64'})
    os.makedirs(out_dir, exist_ok=True)
    frame.to_csv(os.path.join(out_dir, f"metrics_{name}.csv"), index=False, float_format='%.6f')
    return frame
