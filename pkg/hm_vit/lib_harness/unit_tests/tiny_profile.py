#!/usr/bin/env python3


#######################################################
# A very small settings profile so the harness tests
# run end to end in seconds
#
#######################################################


from ..config_file import parse_settings


TINY_INI = """
[grid]
height = 8
width = 8
resolution = 4.0

[model]
channels = 8
heads = 2
window = 2
mlp_ratio = 1.0

[fusion]
iterations = 1

[fov]
camera = 12.0
lidar = 20.0

[training]
epochs_stage1 = 2
epochs_stage2 = 1
batch_size = 2
patience = 0
status_every = 1000

[dataset]
train_scenes = 3
val_scenes = 2
test_scenes = 2
vehicles = 4
min_agents = 2
max_agents = 3
extent = 40.0
n_rays = 180

[eval]
ratios = 0.0, 1.0
rates = 1, 8
max_agents = 2
"""


def with_overrides(settings, **sections):
    """
    Copy of settings with per section overrides, for example
    with_overrides(settings, training={'epochs_stage1': 5})
    """
    for section, values in sections.items():
        part = getattr(settings, section).model_copy(update=values)
        settings = settings.model_copy(update={section: part})
    return settings


def tiny_settings(**sections):
    """
    The tiny profile, sections as in with_overrides()
    """
    return with_overrides(parse_settings(TINY_INI, source='tiny'), **sections)
