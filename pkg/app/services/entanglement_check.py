"""Zero phase error of the virtual two-qubit state, checked in small Fock spaces.

For photon number k the joint state of qubits A, B and optical modes a, b is

    (|Bell_1> |+dtheta>^k + |Bell_2> |-dtheta>^k) / sqrt(2)

with (phi-, psi-) for odd k and (phi+, psi+) for even k. The k-photon mode
states are orthogonal, so the reduced qubit state is an equal mixture of two
Bell states sharing the same X-basis correlation (-1)^k.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np
from scipy.special import comb

from app.errors import DomainError
from app.services.coherent_math import PseudoPhotonSpec, pseudo_photon_prob

logger = logging.getLogger(__name__)

_SQRT_HALF = 1 / math.sqrt(2)

# qubit basis order: |+z+z>, |+z-z>, |-z+z>, |-z-z>
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) * _SQRT_HALF
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) * _SQRT_HALF
PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) * _SQRT_HALF
PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) * _SQRT_HALF

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
X_X = np.kron(PAULI_X, PAULI_X)


@dataclass(frozen=True, eq=False)
class JointState:
    """
    Pure state over |q_A> (x) |q_B> (x) |j, k-j>, dimension 4 (k+1).

    ``amplitudes`` is indexed as (2 q_A + q_B) * (k+1) + j, where j counts
    photons in mode a.
    """
    k: int
    delta_theta: float
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (4 * (self.k + 1),):
            raise DomainError(
                f"joint state for k={self.k} needs {4 * (self.k + 1)} amplitudes, "
                f"got {self.amplitudes.shape}"
            )
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1) > 1e-12:
            raise DomainError(f"joint state is not normalised (norm {norm:.15f})")

    def reduced_qubits(self) -> np.ndarray:
        """4 x 4 density matrix of A and B after tracing out the modes."""
        block = self.amplitudes.reshape(4, self.k + 1)
        return block @ block.conj().T


def kphoton_mode_state(k: int, sign: int, delta_theta: float) -> np.ndarray:
    """
    (a^dag +/- e^{i dtheta} b^dag)^k |00> / sqrt(2^k k!) over |j, k-j>.

    Entry j is sqrt(C(k, j) / 2^k) (+/- e^{i dtheta})^(k-j).
    """
    if k < 0:
        raise DomainError(f"photon number must be nonnegative, got {k}")
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    j = np.arange(k + 1)
    magnitude = np.sqrt(comb(k, j) / 2.0**k)
    return magnitude * (sign * np.exp(1j * delta_theta)) ** (k - j)


def build_rho_k_state(k: int, delta_theta: float) -> JointState:
    """Pure k-photon branch of the joint qubit-mode state."""
    first_bell, second_bell = (PHI_MINUS, PSI_MINUS) if k % 2 else (PHI_PLUS, PSI_PLUS)
    plus = kphoton_mode_state(k, 1, delta_theta)
    minus = kphoton_mode_state(k, -1, delta_theta)
    # k = 0: both branches sit on the vacuum, giving |+x>|+x>
    amplitudes = (np.kron(first_bell, plus) + np.kron(second_bell, minus)) * _SQRT_HALF
    return JointState(k=k, delta_theta=delta_theta, amplitudes=amplitudes)


def x_basis_parity(state: JointState) -> float:
    """<X (x) X> on the reduced two-qubit state."""
    return float(np.real(np.trace(state.reduced_qubits() @ X_X)))


def z_basis_agreement(state: JointState) -> float:
    """Probability that Z-basis outcomes of A and B agree."""
    rho = state.reduced_qubits()
    return float(np.real(rho[0, 0] + rho[3, 3]))


def _branch_error(k: int, delta_theta: float) -> float:
    return (1 - abs(x_basis_parity(build_rho_k_state(k, delta_theta)))) / 2


def phase_error_rate(k_list: Iterable[int], delta_theta_list: Iterable[float]) -> float:
    """Worst X-basis disagreement over a (k, dtheta) grid."""
    ks = list(k_list)
    thetas = list(delta_theta_list)
    if not ks or not thetas:
        raise DomainError("phase_error_rate needs nonempty k and delta_theta lists")
    worst = max(_branch_error(k, t) for k in ks for t in thetas)
    logger.debug(
        "Phase error rate evaluated",
        extra={'extra_fields': {'k_values': len(ks), 'delta_thetas': len(thetas), 'max_error': worst}}
    )
    return worst


def joint_mixture_weights(mu: float, m: int, kmax: int) -> List[float]:
    """Branch weights P^{2 mu}_m(k) for k < kmax."""
    if not 0 < kmax <= m:
        raise DomainError(f"kmax must satisfy 0 < kmax <= m={m}, got {kmax}")
    return [pseudo_photon_prob(PseudoPhotonSpec(mu=2 * mu, m=m, k=k)).to_float() for k in range(kmax)]


def mixture_phase_error_rate(
    mu: float,
    m: int,
    kmax: int,
    delta_theta_list: Iterable[float],
) -> float:
    """
    Weight-averaged branch phase error, worst over dtheta.

    Only even m: the photon numbers l m + k then share the parity of k.
    """
    if m % 2:
        raise DomainError(f"mixture check needs an even phase count, got m={m}")
    thetas = list(delta_theta_list)
    if not thetas:
        raise DomainError("mixture_phase_error_rate needs a nonempty delta_theta list")
    weights = np.array(joint_mixture_weights(mu, m, kmax))
    total = float(weights.sum())
    if total == 0:
        return 0.0
    worst = 0.0
    for theta in thetas:
        errors = np.array([_branch_error(k, theta) for k in range(kmax)])
        worst = max(worst, float(weights @ errors) / total)
    return worst
