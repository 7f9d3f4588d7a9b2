#!/usr/bin/env python3


"""

Name: HM-ViT

  Hetero-modal cooperative BEV perception at desk scale

  Camera and LiDAR equipped vehicles share pose aligned BEV feature maps
  and fuse them with heterogeneous 3D graph attention before detecting
  oriented vehicle boxes. Everything runs on synthetic ray cast scenes.

Subcommands:

  generate   - Writes the train / val / test scene splits
  train      - Stage 1 (--regime v2v-c or v2v-l) or stage 2 (v2v-h) training
  eval       - No Fusion vs Late Fusion vs HM-ViT report, optional sweeps
  render     - SVG picture of one test scene with detections and ground truth
  gradcheck  - Finite difference suite over the whole model
  fuse-once  - One scene through encoders and fusion, dumps the messages

Exit codes: 0 success, 2 invalid settings / command line / checkpoint,
1 any other failure, including a checkpoint that was never trained

"""


# Including this to print error message if python < 3.0 is used
from __future__ import print_function
import sys
# Check for python3 and error out if not
if sys.version_info[0] < 3:
    print("This program requires Python 3.x", file=sys.stderr)
    sys.exit(1)

# Global imports
import argparse
import os

# Local imports
from lib_autodiff.errors import HMViTError, ConfigurationError, CheckpointError, MissingCheckpointError
from lib_detection.detection_io import read_detections
from lib_fusion.fusion_loop import FusionTrace, fuse
from lib_fusion.messages import share, bandwidth_report
from lib_harness.banner_info import print_banner, print_error
from lib_harness.config_file import load_settings, DEFAULT_PROFILE
from lib_harness.dataset import generate_dataset, load_split, make_scene, prepare_sample
from lib_harness.evaluation import run_evaluation, SWEEPS
from lib_harness.gradcheck_suite import run_gradcheck_suite, suite_passed
from lib_harness.pipeline import build_grid, sensor_config, fusion_config, init_model, build_graph, detect_scene
from lib_harness.render import write_scene_svg, write_energy_png
from lib_harness.training import TrainingSession, load_model, stage2_name
from lib_scene.scenario import apply_regime, REGIMES


COMMANDS = ['generate', 'train', 'eval', 'render', 'gradcheck', 'fuse-once']

# Where each command writes when --out is not given
DEFAULT_OUT = {
    'generate': 'data',
    'train': 'runs',
    'eval': 'reports',
    'render': 'renders',
    'gradcheck': None,
    'fuse-once': 'fuse_once',
}

EXIT_CODES_HELP = '''exit codes:
  0  success
  1  runtime failure, including a stage 1 or stage 2 checkpoint that has not been trained yet
  2  invalid command line, settings, or a checkpoint trained with other settings'''


def parse_command_line(program_info, argv=None):
    """
    Responsible for parsing the command line.

    Inputs:

        program_info: A dictionary that contains the default values of
        command line options. Results overwrite the default values and the
        dictionary is returned after this function is done.

        argv: Optional argument list, sys.argv when None

    Returns:
        True: If the command line was parsed successfully

        False: If an error occured parsing the command line

        (Program Exits): If the --help option is specified on the command line
    """

    parser = argparse.ArgumentParser(
        description= program_info['name'] +
        ', version: ' +
        program_info['version'],
        epilog = EXIT_CODES_HELP,
        formatter_class = argparse.RawDescriptionHelpFormatter
    )

    parser.add_argument(
        'command',
        help = 'What to run. One of: ' + ', '.join(COMMANDS),
        choices = COMMANDS
    )

    ## Standard options
    #
    parser.add_argument(
        '--config',
        '-c',
        help = 'Settings profile name under Settings/ or a path to an INI file. Default is ' +
            program_info['config'],
        metavar = 'PATH',
        default = program_info['config']
    )

    parser.add_argument(
        '--seed',
        help = 'Overrides [training] seed',
        type = int,
        default = program_info['seed']
    )

    parser.add_argument(
        '--out',
        '-o',
        help = 'Output directory. Defaults: ' +
            ', '.join(f"{key} -> {value}" for key, value in DEFAULT_OUT.items() if value),
        metavar = 'DIR',
        default = program_info['out']
    )

    parser.add_argument(
        '--data',
        help = 'Dataset directory written by generate. Default is ' + program_info['data'],
        metavar = 'DIR',
        default = program_info['data']
    )

    parser.add_argument(
        '--checkpoints',
        help = 'Directory holding the stage checkpoints. Default is ' + program_info['checkpoints'],
        metavar = 'DIR',
        default = program_info['checkpoints']
    )

    ## Training and evaluation options
    #
    parser.add_argument(
        '--stage',
        help = 'Training stage',
        type = int,
        choices = [1, 2],
        default = program_info['stage']
    )

    parser.add_argument(
        '--regime',
        help = 'Agent modality regime. Stage 1 needs v2v-c or v2v-l',
        choices = list(REGIMES),
        default = program_info['regime']
    )

    parser.add_argument(
        '--sweep',
        help = 'Evaluation sweep',
        choices = list(SWEEPS),
        default = program_info['sweep']
    )

    parser.add_argument(
        '--rate',
        help = 'Compression rate, overrides [compression] rate',
        type = int,
        default = program_info['rate']
    )

    parser.add_argument(
        '--resume',
        help = 'Continue training from this checkpoint',
        metavar = 'CHECKPOINT',
        default = program_info['resume']
    )

    parser.add_argument(
        '--checkpoint',
        help = 'Explicit model checkpoint for eval, render and fuse-once',
        metavar = 'CHECKPOINT',
        default = program_info['checkpoint']
    )

    ## Render options
    #
    parser.add_argument(
        '--index',
        help = 'Scene index in the test split for render',
        type = int,
        default = program_info['index']
    )

    parser.add_argument(
        '--detections',
        help = 'Detections file from eval to draw instead of running the model',
        metavar = 'TSV',
        default = program_info['detections']
    )

    ## Self test
    #
    parser.add_argument(
        '--inject-fault',
        help = 'Adds a deliberately wrong gradient to the gradcheck suite',
        dest = 'inject_fault',
        action = 'store_const',
        const = not program_info['inject_fault'],
        default = program_info['inject_fault']
    )

    # Parse all the args and save them
    args = parser.parse_args(argv)

    program_info['command'] = args.command
    program_info['config'] = args.config
    program_info['seed'] = args.seed
    program_info['out'] = args.out if args.out else DEFAULT_OUT[args.command]
    program_info['data'] = args.data
    program_info['checkpoints'] = args.checkpoints
    program_info['stage'] = args.stage
    program_info['regime'] = args.regime
    program_info['sweep'] = args.sweep
    program_info['rate'] = args.rate
    program_info['resume'] = args.resume
    program_info['checkpoint'] = args.checkpoint
    program_info['index'] = args.index
    program_info['detections'] = args.detections
    program_info['inject_fault'] = args.inject_fault

    # Check validity of options
    if program_info['command'] == 'train' and program_info['stage'] == 1 and program_info['regime'] is None:
        print("Stage 1 training needs --regime v2v-c or --regime v2v-l", file=sys.stderr)
        return False

    if program_info['index'] < 0:
        print(f"--index must not be negative. The value specified was {program_info['index']}", file=sys.stderr)
        return False

    return True


## Commands
#
def run_generate(settings, program_info):
    counts = generate_dataset(settings, program_info['out'])
    print(f"[+] Wrote {sum(counts.values())} scenes to {program_info['out']}")
    return 0


def run_train(settings, program_info):
    regime = program_info['regime']
    if program_info['stage'] == 2 and regime is None:
        regime = 'v2v-h'
    session = TrainingSession(
        settings,
        program_info['stage'],
        regime,
        program_info['data'],
        program_info['out'],
        rate=program_info['rate'],
    )
    session.run(resume=program_info['resume'])
    return 0


def run_eval(settings, program_info):
    frame = run_evaluation(
        settings,
        program_info['data'],
        program_info['checkpoints'],
        program_info['out'],
        regime=program_info['regime'],
        sweep=program_info['sweep'],
        checkpoint=program_info['checkpoint'],
        rate=program_info['rate'],
    )
    print("-----------------------------------------------------------------")
    print(frame.to_string(index=False))
    print("-----------------------------------------------------------------")
    print(f"[+] Report written to {program_info['out']}")
    return 0


def _scene_sample(settings, scenario, regime):
    if regime is not None:
        scenario = apply_regime(scenario, regime)
    return prepare_sample(scenario, build_grid(settings), sensor_config(settings))


def run_render(settings, program_info):
    scenarios = load_split(program_info['data'], 'test')
    index = program_info['index']
    if index >= len(scenarios):
        raise ConfigurationError(f"Test split has {len(scenarios)} scenes, no index {index}")
    sample = _scene_sample(settings, scenarios[index], program_info['regime'])

    if program_info['detections']:
        detections_per_scene, _ = read_detections(program_info['detections'])
        detections = detections_per_scene[index] if index < len(detections_per_scene) else []
    else:
        rate = program_info['rate'] or settings.compression.rate
        path = program_info['checkpoint'] or os.path.join(program_info['checkpoints'], stage2_name(rate))
        store, _ = load_model(settings, path, rate)
        detections = detect_scene(sample, store, fusion_config(settings, rate), settings.eval)

    os.makedirs(program_info['out'], exist_ok=True)
    path = os.path.join(program_info['out'], f"scene_{index:05d}.svg")
    write_scene_svg(
        path, sample.scenario, detections, sample.truths, build_grid(settings),
        {'camera': settings.fov.camera, 'lidar': settings.fov.lidar},
        title=f"test scene {index}",
    )
    print(f"[+] {len(detections)} detections, {len(sample.truths)} ground truth boxes -> {path}")
    return 0


def run_gradcheck(settings, program_info):
    results = run_gradcheck_suite(inject_fault=program_info['inject_fault'], seed=settings.training.seed)
    if suite_passed(results):
        print(f"[+] All {len(results)} gradient checks passed")
        return 0
    failed = [item.name for item in results if not item.passed]
    print(f"[!] {len(failed)} gradient check(s) failed: {', '.join(failed)}")
    return 1


def run_fuse_once(settings, program_info):
    rate = program_info['rate'] or settings.compression.rate
    config = fusion_config(settings, rate)
    scenario = make_scene(settings, settings.training.seed)
    sample = _scene_sample(settings, scenario, program_info['regime'] or 'v2v-h')

    if program_info['checkpoint']:
        store, _ = load_model(settings, program_info['checkpoint'], rate)
    else:
        store = init_model(settings, config)

    graph = build_graph(sample, store, config)
    trace = FusionTrace()
    fused = fuse(graph, store, config, trace)
    report = bandwidth_report(graph, config)

    out = program_info['out']
    os.makedirs(out, exist_ok=True)
    print("-----------------------------------------------------------------")
    print(f"Ego: agent {graph.ego_id} ({graph.ego.modality.value}), rate {rate}")
    for agent in graph.agents:
        sent = report['per_agent'].get(agent.agent_id, 0)
        print(f"  agent {agent.agent_id:<3} {agent.modality.value:<7} bytes sent {sent:,}")
        write_energy_png(os.path.join(out, f"observation_{agent.agent_id}.png"),
                         sample.observations[agent.agent_id])
        if agent.agent_id != graph.ego_id:
            message = share(graph, agent.agent_id, graph.ego_id, store, rate)
            with open(os.path.join(out, f"message_{agent.agent_id}_to_{graph.ego_id}.bin"), 'wb') as file:
                file.write(message.to_bytes())
    print(f"  total bytes {report['total']:,}")
    print("-----------------------------------------------------------------")

    write_energy_png(os.path.join(out, 'fused_ego.png'), fused[graph.ego_id])
    print(f"[+] Messages and previews written to {out}")
    return 0


DISPATCH = {
    'generate': run_generate,
    'train': run_train,
    'eval': run_eval,
    'render': run_render,
    'gradcheck': run_gradcheck,
    'fuse-once': run_fuse_once,
}


def main(argv=None):
    """
    Main function, starts everything off

    Inputs:
        argv: Optional argument list

    Returns:
        Exit code
    """

    # Information about this program
    program_info = {

        # Program and Contact Info
        'name': 'HM-ViT',
        'version': '1.0',
        'author': 'HM-ViT developers',
        'contact': 'see readme.md',

        # Standard Options
        'command': None,
        'config': DEFAULT_PROFILE,
        'seed': None,
        'out': None,
        'data': 'data',
        'checkpoints': 'runs',

        # Training and evaluation options
        'stage': 1,
        'regime': None,
        'sweep': None,
        'rate': None,
        'resume': None,
        'checkpoint': None,

        # Render options
        'index': 0,
        'detections': None,

        # Self test
        'inject_fault': False,
    }

    print_banner()
    print("Version: " + str(program_info['version']), file=sys.stderr)
    print('', file=sys.stderr)

    # Parsing the command line
    if not parse_command_line(program_info, argv):
        # There was a problem with the command line so exit
        print("Exiting...", file=sys.stderr)
        return 2

    try:
        settings = load_settings(program_info['config'], seed=program_info['seed'])
        print(f"[*] Settings: {program_info['config']} (fingerprint {settings.fingerprint()})", file=sys.stderr)
        return DISPATCH[program_info['command']](settings, program_info)

    except MissingCheckpointError as msg:
        print(f"[!] {msg}", file=sys.stderr)
        print_error()
        return 1

    except (ConfigurationError, CheckpointError) as msg:
        print(f"[!] {msg}", file=sys.stderr)
        print("Exiting...", file=sys.stderr)
        return 2

    except (HMViTError, OSError) as msg:
        print(f"[!] {msg}", file=sys.stderr)
        print_error()
        return 1


if __name__ == "__main__":
    sys.exit(main())
