"""Shared test oracles, kept deliberately independent of the library's
FFT-based implementations: everything here is direct summation against
the DFT definition."""

import numpy as np


def dft_matrix(n: int) -> np.ndarray:
    """Orthonormal DFT matrix, exp(-2j*pi*j*k/n)/sqrt(n)."""
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(-2j * np.pi * j * k / n) / np.sqrt(n)


def oracle_fft2(volume: np.ndarray) -> np.ndarray:
    """Direct-summation orthonormal 2D DFT over the (a, b) axes."""
    a, b = volume.shape[-3], volume.shape[-2]
    wa = dft_matrix(a)
    wb = dft_matrix(b)
    return np.einsum("ka,lb,...abt->...klt", wa, wb, volume)


def oracle_slice_dft(stack: np.ndarray) -> np.ndarray:
    """Direct-summation orthonormal DFT along the leading slice axis."""
    m = stack.shape[0]
    wm = dft_matrix(m)
    return np.einsum("km,mabt->kabt", wm, stack)


def oracle_fft3d(stack: np.ndarray) -> np.ndarray:
    return oracle_slice_dft(oracle_fft2(stack))


def oracle_acquire_lines(stack: np.ndarray, acquired_rows) -> np.ndarray:
    """Composite modulated readout by explicit summation over slices."""
    m, a, b, t = stack.shape
    per_slice = oracle_fft2(stack)
    out = np.zeros((a, b, t), dtype=complex)
    for ky, frame in acquired_rows:
        line = np.zeros(b, dtype=complex)
        for i in range(m):
            line += np.exp(-2j * np.pi * i * ky / m) * per_slice[i, ky, :, frame]
        out[ky, :, frame] = line
    return out


def embed_rows_on_helix(composite: np.ndarray, acquired_rows, m: int) -> np.ndarray:
    """Place composite k-space rows into band ky mod m of a 3D volume."""
    a, b, t = composite.shape
    out = np.zeros((m, a, b, t), dtype=complex)
    for ky, frame in acquired_rows:
        out[ky % m, ky, :, frame] = composite[ky, :, frame]
    return out


def complex_array(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)
