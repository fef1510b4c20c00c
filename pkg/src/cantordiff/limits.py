"""Resource caps for desk-scale runs, overridable via environment variables."""

import os

_DEFAULTS = {
    # maximum number of atoms a materialized/expanded distribution may hold
    "CANTORDIFF_ATOM_CAP": 1_000_000,
    # maximum survivors in a single sampled realization
    "CANTORDIFF_SURVIVOR_CAP": 5_000_000,
    # maximum (X, Y, e) evaluations in a witness search
    "CANTORDIFF_SEARCH_BUDGET": 10_000_000,
    # maximum nodes visited per word length in the minimal-product search
    "CANTORDIFF_NODE_BUDGET": 2_000_000,
    # maximum M**n for rasterized images and FFT index space
    "CANTORDIFF_PIXEL_CAP": 1 << 22,
    "CANTORDIFF_FFT_CAP": 1 << 26,
    # maximum number of squares drawn into one SVG
    "CANTORDIFF_SQUARE_CAP": 20_000,
}


def cap(name: str) -> int:
    return int(os.environ.get(name, _DEFAULTS[name]))


def atom_cap() -> int:
    return cap("CANTORDIFF_ATOM_CAP")


def survivor_cap() -> int:
    return cap("CANTORDIFF_SURVIVOR_CAP")


def search_budget() -> int:
    return cap("CANTORDIFF_SEARCH_BUDGET")


def node_budget() -> int:
    return cap("CANTORDIFF_NODE_BUDGET")


def pixel_cap() -> int:
    return cap("CANTORDIFF_PIXEL_CAP")


def fft_cap() -> int:
    return cap("CANTORDIFF_FFT_CAP")


def square_cap() -> int:
    return cap("CANTORDIFF_SQUARE_CAP")
