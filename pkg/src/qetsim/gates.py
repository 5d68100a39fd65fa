"""Transistor gate matrices.

All three gates conserve excitation number: every nonzero entry connects
basis states of equal Hamming weight, so population can only move between
``|01>`` and ``|10>``-type configurations.
"""

import numpy as np

from .statevector import LocalUnitary


def qet_matrix(theta: float) -> LocalUnitary:
    """Partial excitation transfer between two cells.

    Rotates the single-excitation pair ``|01>``, ``|10>`` by ``theta``;
    the transferred component picks up a factor ``i`` at full transfer
    (``theta = pi``).
    """
    c = np.cos(theta / 2)
    s = 1j * np.sin(theta / 2)
    m = np.eye(4, dtype=complex)
    m[1, 1] = c
    m[1, 2] = s
    m[2, 1] = s
    m[2, 2] = c
    return LocalUnitary((2, 2), m)


def phase_matrix(theta: float, phi: float) -> LocalUnitary:
    """Relative phase ``theta`` between ``|01>`` and ``|10>``.

    ``phi`` shifts both single-excitation states together and is the
    knob for trimming the overall phase of encoded-subspace sequences.
    """
    m = np.diag([
        1.0,
        np.exp(-0.5j * theta + 0.5j * phi),
        np.exp(0.5j * theta + 0.5j * phi),
        1.0,
    ]).astype(complex)
    return LocalUnitary((2, 2), m)


def cqet_matrix() -> LocalUnitary:
    """Controlled full transfer on three cells.

    The first listed qubit is the control cell.  The transfer block sits
    on basis indices 1 and 2 (``|001>`` and ``|010>``), so the swap fires
    when the control qubit is ``|0>``; with the control in ``|1>`` the
    pair is left alone.  The transfer angle is fixed at ``pi``, making
    the block exactly ``[[0, i], [i, 0]]``.
    """
    m = np.eye(8, dtype=complex)
    m[1, 1] = 0
    m[2, 2] = 0
    m[1, 2] = 1j
    m[2, 1] = 1j
    return LocalUnitary((2, 2, 2), m)
