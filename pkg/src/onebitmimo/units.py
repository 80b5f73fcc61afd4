"""Power-unit conversions. All internal computation uses linear watts."""

import numpy as np


def dbm_to_watt(x):
    """dBm -> watts."""
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(x):
    """Watts -> dBm."""
    return 10.0 * np.log10(np.asarray(x, dtype=float)) + 30.0


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))
