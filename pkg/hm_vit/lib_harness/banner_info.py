#!/usr/bin/env python3


"""
Contains banner ascii art and displays for the command line program

Note: Everything goes to stderr so reports written to stdout stay clean
"""


import sys


def print_banner():
    """
    ASCII art for the banner
    """
    print('', file=sys.stderr)
    print(r'''    __  ____  ___      _    ___ ______''', file=sys.stderr)
    print(r'''   / / / /  |/  /     | |  / (_)_  __/''', file=sys.stderr)
    print(r'''  / /_/ / /|_/ /______| | / / / / /   ''', file=sys.stderr)
    print(r''' / __  / /  / /_____/ | |/ / / / /    ''', file=sys.stderr)
    print(r'''/_/ /_/_/  /_/        |___/_/ /_/     ''', file=sys.stderr)
    print(r'''   cooperative BEV perception, camera + LiDAR''', file=sys.stderr)
    print('', file=sys.stderr)


def print_error():
    """
    ASCII art for displaying an error state before quitting
    """
    print('', file=sys.stderr)
    print('An error occured, shutting down', file=sys.stderr)
    print('', file=sys.stderr)
    print(r'   ___        ___        ___        ___  ', file=sys.stderr)
    print(r'  |o o|      |- o|      |x x|      |- -| ', file=sys.stderr)
    print(r' [|___|]    [|___|]    [|___|]    [|___|]', file=sys.stderr)
    print(r'  ego car   winking   crashed    parked  ', file=sys.stderr)
    print('', file=sys.stderr)
