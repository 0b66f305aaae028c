"""Collects the one-line verdict of each acceptance criterion."""
LINES = []


def record(line):
    LINES.append(line)
    print(line)
