import numpy as np
import pytest


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def beamsplitter(tau, n_modes=2, modes=(0, 1)):
    """Symplectic of a beamsplitter with transmittance tau on two modes."""
    s = np.eye(2 * n_modes)
    i, j = modes
    t, r = np.sqrt(tau), np.sqrt(1.0 - tau)
    for q in range(2):
        s[2 * i + q, 2 * i + q] = t
        s[2 * i + q, 2 * j + q] = r
        s[2 * j + q, 2 * i + q] = -r
        s[2 * j + q, 2 * j + q] = t
    return s


def random_symplectic_two_mode(rng):
    """Product of rotations, bounded squeezers and a beamsplitter."""
    def local(theta1, theta2, r1, r2):
        blocks = []
        for theta, r in ((theta1, r1), (theta2, r2)):
            sq = np.diag([np.exp(r), np.exp(-r)])
            blocks.append(rotation(theta) @ sq)
        out = np.zeros((4, 4))
        out[:2, :2] = blocks[0]
        out[2:, 2:] = blocks[1]
        return out

    s1 = local(*rng.uniform(0, 2 * np.pi, 2), *rng.uniform(-0.8, 0.8, 2))
    s2 = local(*rng.uniform(0, 2 * np.pi, 2), *rng.uniform(-0.8, 0.8, 2))
    return s2 @ beamsplitter(rng.uniform(0.05, 0.95)) @ s1


def random_physical_two_mode(rng):
    """gamma = S diag(nu1, nu1, nu2, nu2) S^T with random symplectic S."""
    nus = 1.0 + rng.exponential(1.5, size=2)
    s = random_symplectic_two_mode(rng)
    return s @ np.diag([nus[0], nus[0], nus[1], nus[1]]) @ s.T, np.sort(nus)[::-1]


def two_mode_nu_closed_form(m):
    """Textbook nu_+- for a two-mode covariance matrix (independent oracle)."""
    a = np.linalg.det(m[:2, :2])
    b = np.linalg.det(m[2:, 2:])
    c = np.linalg.det(m[:2, 2:])
    delta = a + b + 2 * c
    disc = np.sqrt(max(delta * delta - 4 * np.linalg.det(m), 0.0))
    return (
        np.sqrt((delta + disc) / 2.0),
        np.sqrt(max((delta - disc) / 2.0, 0.0)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
