import sys


def parse_args(argv):
    options = {}
    for arg in argv:
        key, _, value = arg.partition("=")
        options[key] = value
    return options
