"""Scalar mathematics of phase-randomized weak coherent states.

Covers photon-number statistics, pseudo photon-number states, phase
distributions and the discrimination probabilities that bound what an
eavesdropper can learn about the global phase. Magnitudes far below the
double range (1e-3657 and friends) are carried as ``LogScalar``.
"""
import functools
import itertools
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.special import gammaln, logsumexp

from app.errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Relative size below which a series term is dropped
SERIES_RELATIVE_TOLERANCE = 1e-30
_LN_SERIES_TOLERANCE = math.log(SERIES_RELATIVE_TOLERANCE)
# Poisson mass that the phase-distribution series must cover
PHASE_SERIES_MASS = 1.0 - 1e-14
PHASE_SERIES_MIN_TERMS = 30
# Largest m for which the exact USD sum is evaluated
USD_EXACT_MAX_M = 12
# Smallest m for which the secrecy-epsilon truncation is valid
SECRECY_MIN_M = 100

_EXACT_FACTORIAL_LIMIT = 256
_LOG_FACTORIALS = tuple(itertools.accumulate(
    (math.log(i) if i else 0.0 for i in range(_EXACT_FACTORIAL_LIMIT + 1)),
))


# =============================================================================
# LOG-SPACE SCALAR
# =============================================================================

@functools.total_ordering
@dataclass(frozen=True)
class LogScalar:
    """
    Nonnegative real stored as its natural logarithm.

    Attributes:
        is_zero: True for exact zero; ``ln_value`` is then ignored
        ln_value: Natural log of the magnitude (finite when not zero)
    """
    is_zero: bool = False
    ln_value: float = 0.0

    def __post_init__(self):
        if not self.is_zero and not math.isfinite(self.ln_value):
            if self.ln_value == -math.inf:
                object.__setattr__(self, "is_zero", True)
                object.__setattr__(self, "ln_value", 0.0)
            else:
                raise DomainError(f"LogScalar needs a finite ln value, got {self.ln_value}")

    @classmethod
    def zero(cls) -> "LogScalar":
        return cls(is_zero=True)

    @classmethod
    def one(cls) -> "LogScalar":
        return cls(ln_value=0.0)

    @classmethod
    def from_ln(cls, ln_value: float) -> "LogScalar":
        return cls(ln_value=float(ln_value))

    @classmethod
    def from_float(cls, value: float) -> "LogScalar":
        if value < 0 or math.isnan(value):
            raise DomainError(f"LogScalar holds nonnegative values, got {value}")
        if value == 0:
            return cls.zero()
        return cls(ln_value=math.log(value))

    def __mul__(self, other: "LogScalar") -> "LogScalar":
        if self.is_zero or other.is_zero:
            return LogScalar.zero()
        return LogScalar(ln_value=self.ln_value + other.ln_value)

    def __truediv__(self, other: "LogScalar") -> "LogScalar":
        if other.is_zero:
            raise ZeroDivisionError("LogScalar division by zero")
        if self.is_zero:
            return LogScalar.zero()
        return LogScalar(ln_value=self.ln_value - other.ln_value)

    def __add__(self, other: "LogScalar") -> "LogScalar":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        hi, lo = max(self.ln_value, other.ln_value), min(self.ln_value, other.ln_value)
        return LogScalar(ln_value=hi + math.log1p(math.exp(lo - hi)))

    def sqrt(self) -> "LogScalar":
        if self.is_zero:
            return self
        return LogScalar(ln_value=0.5 * self.ln_value)

    def log1p(self) -> float:
        """ln(1 + x) without overflow for huge x or loss for tiny x."""
        if self.is_zero:
            return 0.0
        if self.ln_value > 0:
            return self.ln_value + math.log1p(math.exp(-self.ln_value))
        return math.log1p(math.exp(self.ln_value))

    def to_float(self) -> float:
        """Plain double; underflows to 0.0 and overflows to inf."""
        if self.is_zero:
            return 0.0
        try:
            return math.exp(self.ln_value)
        except OverflowError:
            return math.inf

    @property
    def log10(self) -> float:
        if self.is_zero:
            return -math.inf
        return self.ln_value / math.log(10)

    def mantissa_exponent(self, digits: int = 3) -> Tuple[float, int]:
        """Base-10 mantissa (``digits`` significant digits) and exponent."""
        if self.is_zero:
            return 0.0, 0
        l10 = self.log10
        exponent = math.floor(l10)
        mantissa = round(10 ** (l10 - exponent), digits - 1)
        if mantissa >= 10:
            mantissa, exponent = round(mantissa / 10, digits - 1), exponent + 1
        return mantissa, exponent

    def render(self, digits: int = 3) -> str:
        """Scientific notation such as ``1.94e-3657``."""
        if self.is_zero:
            return "0"
        mantissa, exponent = self.mantissa_exponent(digits)
        return f"{mantissa:.{digits - 1}f}e{exponent:+d}".replace("e+", "e")

    def _key(self) -> float:
        return -math.inf if self.is_zero else self.ln_value

    def __eq__(self, other) -> bool:
        if not isinstance(other, LogScalar):
            return NotImplemented
        return self._key() == other._key()

    def __lt__(self, other: "LogScalar") -> bool:
        return self._key() < other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __str__(self) -> str:
        return self.render()


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class PseudoPhotonSpec:
    """
    Parameters of one pseudo photon-number component.

    Attributes:
        mu: Mean photon number of the coherent pulse
        m: Number of global phases
        k: Pseudo photon-number index, 0 <= k < m
    """
    mu: float
    m: int
    k: int = 0

    def __post_init__(self):
        if self.mu < 0 or not math.isfinite(self.mu):
            raise DomainError(f"mu must be a finite nonnegative intensity, got {self.mu}")
        if self.m < 1:
            raise DomainError(f"m must be a positive phase count, got {self.m}")
        if not 0 <= self.k < self.m:
            raise DomainError(f"k must satisfy 0 <= k < m={self.m}, got {self.k}")


class USDResult(NamedTuple):
    """Unambiguous-discrimination success probability."""
    approx: LogScalar  # m * mu^(m-1) / (m-1)!
    exact: Optional[float]  # only for m <= USD_EXACT_MAX_M


@dataclass(frozen=True)
class AnalysisReport:
    """
    Eavesdropper-facing figures for one (mu, m) operating point.

    ``secrecy_epsilon`` is None when m is below the range where its
    truncation is valid; ``p_usd_exact`` is None above the cancellation limit.
    """
    mu: float
    m: int
    p_usd: LogScalar
    p_usd_exact: Optional[float]
    p_min: float
    trace_distance_k0: LogScalar
    delta_k0: LogScalar
    secrecy_epsilon: Optional[LogScalar]
    random_guess_error: float


# =============================================================================
# FACTORIALS AND PHOTON STATISTICS
# =============================================================================

def _check_intensity(mu: float) -> None:
    if mu < 0 or not math.isfinite(mu):
        raise DomainError(f"mu must be a finite nonnegative intensity, got {mu}")


def log_factorial(n: int) -> float:
    """
    Natural log of n!.

    Exact cumulative summation up to 256, log-gamma beyond.
    """
    if n < 0 or int(n) != n:
        raise DomainError(f"log_factorial needs a nonnegative integer, got {n}")
    n = int(n)
    if n <= _EXACT_FACTORIAL_LIMIT:
        return _LOG_FACTORIALS[n]
    return float(gammaln(n + 1))


def poisson_pmf(mu: float, k: int) -> LogScalar:
    """Poisson weight e^{-mu} mu^k / k! in log space."""
    _check_intensity(mu)
    if k < 0:
        raise DomainError(f"photon number must be nonnegative, got {k}")
    if mu == 0:
        return LogScalar.one() if k == 0 else LogScalar.zero()
    return LogScalar.from_ln(-mu + k * math.log(mu) - log_factorial(k))


def _ln_series_terms(mu: float, m: int, k: int, start: int = 0) -> list:
    """
    ln of mu^{lm+k}/(lm+k)! for l = start, start+1, ...

    Stops once the terms are past their peak and a term falls below the
    relative tolerance of the running sum.
    """
    ln_mu = math.log(mu)
    terms = []
    running = -math.inf
    l = start
    while True:
        n = l * m + k
        ln_term = n * ln_mu - log_factorial(n)
        terms.append(ln_term)
        if running == -math.inf:
            running = ln_term
        else:
            hi, lo = max(running, ln_term), min(running, ln_term)
            running = hi + math.log1p(math.exp(lo - hi))
        if n > mu and ln_term - running < _LN_SERIES_TOLERANCE:
            break
        l += 1
    return terms


def pseudo_photon_prob(spec: PseudoPhotonSpec) -> LogScalar:
    """P^mu_m(k) = e^{-mu} sum_l mu^{lm+k} / (lm+k)!."""
    if spec.mu == 0:
        return LogScalar.one() if spec.k == 0 else LogScalar.zero()
    terms = _ln_series_terms(spec.mu, spec.m, spec.k)
    return LogScalar.from_ln(-spec.mu + float(logsumexp(terms)))


def prob_excess_delta(spec: PseudoPhotonSpec) -> LogScalar:
    """
    Relative excess of P^mu_m(k) over the Poisson weight.

    Delta = sum_{l>=1} mu^{lm} k! / (lm+k)!, so that
    P^mu_m(k) = poisson_pmf(mu, k) * (1 + Delta).
    """
    if spec.mu == 0:
        return LogScalar.zero()
    ln_k_fact = log_factorial(spec.k)
    shift = spec.k * math.log(spec.mu)
    # first term dominates; the tail is folded in by log-sum-exp
    terms = [t - shift + ln_k_fact for t in _ln_series_terms(spec.mu, spec.m, spec.k, start=1)]
    return LogScalar.from_ln(float(logsumexp(terms)))


def trace_distance_pseudo_fock(spec: PseudoPhotonSpec) -> LogScalar:
    """
    Trace distance between |lambda_k> and the Fock state |k>.

    D = sqrt(1 - |<lambda_k|k>|^2) = sqrt(Delta / (1 + Delta)).
    """
    delta = prob_excess_delta(spec)
    return (delta / (LogScalar.one() + delta)).sqrt()


def secrecy_epsilon(mu: float, m: int) -> LogScalar:
    """
    Distance between discrete and continuous phase randomization.

    epsilon ~ e^{-mu} mu^m / (2 m!), with the photon number truncated to m-1;
    valid only when m is large.
    """
    _check_intensity(mu)
    if m < SECRECY_MIN_M:
        raise DomainError(
            f"secrecy_epsilon assumes m is large enough (m >= {SECRECY_MIN_M}), got m={m}"
        )
    if mu == 0:
        return LogScalar.zero()
    return LogScalar.from_ln(-mu + m * math.log(mu) - log_factorial(m) - math.log(2))


# =============================================================================
# PHASE DISTRIBUTIONS
# =============================================================================

@functools.lru_cache(maxsize=256)
def _phase_amplitudes(mu: float) -> np.ndarray:
    """Fock amplitudes e^{-mu/2} mu^{k/2} / sqrt(k!) covering the Poisson mass."""
    if mu == 0:
        amps = np.zeros(PHASE_SERIES_MIN_TERMS)
        amps[0] = 1.0
        return amps
    ks = []
    mass = 0.0
    k = 0
    while mass < PHASE_SERIES_MASS or k < PHASE_SERIES_MIN_TERMS:
        ks.append(k)
        mass += poisson_pmf(mu, k).to_float()
        k += 1
        if k > mu + 60 * math.sqrt(mu) + 200:
            break
    ln_pmf = np.array([-mu + n * math.log(mu) - log_factorial(n) for n in ks])
    amps = np.exp(0.5 * ln_pmf)
    amps.setflags(write=False)
    return amps


def phase_pdf(mu: float, theta: float, x: ArrayLike) -> ArrayLike:
    """
    Phase-probability density P(x | mu, theta) of a coherent state.

    Accepts a scalar or an array of measured phases ``x``.
    """
    _check_intensity(mu)
    amps = _phase_amplitudes(float(mu))
    ks = np.arange(amps.size)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    phases = np.exp(-1j * np.outer(xs - theta, ks))
    density = np.abs(phases @ amps) ** 2 / (2 * math.pi)
    return float(density[0]) if np.ndim(x) == 0 else density


def avg_phase_pdf(mu: float, m: int, x: ArrayLike) -> ArrayLike:
    """Phase density averaged over the m discrete global phases 2*pi*j/m."""
    _check_intensity(mu)
    if m < 1:
        raise DomainError(f"m must be a positive phase count, got {m}")
    amps = _phase_amplitudes(float(mu))
    ks = np.arange(amps.size)
    thetas = 2 * math.pi * np.arange(m) / m
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.size)
    for i, xv in enumerate(xs):
        sums = np.exp(-1j * np.outer(xv - thetas, ks)) @ amps
        out[i] = np.mean(np.abs(sums) ** 2) / (2 * math.pi)
    return float(out[0]) if np.ndim(x) == 0 else out


def pseudo_photon_state(spec: PseudoPhotonSpec, cutoff: int) -> np.ndarray:
    """
    Amplitudes of |lambda_k> over Fock states 0..cutoff-1.

    Nonzero only on photon numbers lm+k; normalised by P^mu_m(k).
    """
    if cutoff <= spec.k:
        raise DomainError(f"cutoff {cutoff} must exceed k={spec.k}")
    state = np.zeros(cutoff)
    if spec.mu == 0:
        if spec.k == 0:
            state[0] = 1.0
        return state
    ln_norm = pseudo_photon_prob(spec).ln_value
    for n in range(spec.k, cutoff, spec.m):
        ln_amp = 0.5 * (-spec.mu + n * math.log(spec.mu) - log_factorial(n) - ln_norm)
        state[n] = math.exp(ln_amp)
    return state


def phase_randomized_density(mu: float, m: int, cutoff: int) -> np.ndarray:
    """
    (1/m) sum_j |sqrt(mu) e^{i 2 pi j/m}><...| in the truncated Fock basis.
    """
    _check_intensity(mu)
    ns = np.arange(cutoff)
    ln_mag = np.array([0.5 * (-mu + n * math.log(mu) - log_factorial(n)) if mu > 0
                       else (0.0 if n == 0 else -np.inf) for n in ns])
    magnitudes = np.exp(ln_mag)
    rho = np.zeros((cutoff, cutoff), dtype=complex)
    for j in range(m):
        vec = magnitudes * np.exp(1j * 2 * math.pi * j / m * ns)
        rho += np.outer(vec, vec.conj())
    return rho / m


# =============================================================================
# STATE DISCRIMINATION
# =============================================================================

def usd_probability(mu: float, m: int) -> USDResult:
    """
    Optimal unambiguous discrimination among the m symmetric coherent states.

    The asymptotic form is always returned; the exact circulant sum only for
    m <= 12, where compensated summation still resolves the result.
    """
    _check_intensity(mu)
    if m < 2:
        raise DomainError(f"USD needs at least two candidate states, got m={m}")

    if mu == 0:
        approx = LogScalar.zero()
    else:
        approx = LogScalar.from_ln(math.log(m) + (m - 1) * math.log(mu) - log_factorial(m - 1))

    exact = None
    if m <= USD_EXACT_MAX_M:
        candidates = []
        for r in range(m):
            re_terms, im_terms = [], []
            for j in range(m):
                angle = 2 * math.pi * j / m
                magnitude = math.exp(mu * (math.cos(angle) - 1))
                phase = mu * math.sin(angle) - angle * r
                re_terms.append(magnitude * math.cos(phase))
                im_terms.append(magnitude * math.sin(phase))
            re, im = math.fsum(re_terms), math.fsum(im_terms)
            if abs(im) >= 1e-9:
                raise AssertionError(f"USD imaginary residue {im:.3e} for r={r}")
            candidates.append(max(re, 0.0))
        exact = min(candidates)

    return USDResult(approx=approx, exact=exact)


def min_error_probability(mu: float, m: int) -> float:
    """
    Error probability of the square-root (minimum-error) measurement.

    Eigenvalues of the circulant Gram matrix come from one inverse FFT:
    lambda_r = sum_k exp(-mu (1 - e^{i 2 pi k/m})) e^{i 2 pi k r/m}.
    """
    _check_intensity(mu)
    if m < 1:
        raise DomainError(f"m must be a positive phase count, got {m}")

    ks = np.arange(m)
    gram_row = np.exp(-mu * (1 - np.exp(1j * 2 * np.pi * ks / m)))
    eigenvalues = np.fft.ifft(gram_row) * m

    scale = float(np.max(eigenvalues.real))
    residue = float(np.max(np.abs(eigenvalues.imag)))
    if residue >= 1e-9 * scale:
        raise AssertionError(
            f"Gram eigenvalue imaginary residue {residue:.3e} exceeds tolerance "
            f"(max eigenvalue {scale:.3e})"
        )

    roots = np.sqrt(np.clip(eigenvalues.real, 0.0, None))
    return float(1.0 - math.fsum(roots) ** 2 / m**2)


# =============================================================================
# SPECIAL FUNCTIONS
# =============================================================================

def bessel_i0(x: float) -> float:
    """Modified Bessel function I_0 by its power series."""
    if x < 0 or not math.isfinite(x):
        raise DomainError(f"bessel_i0 is evaluated for x >= 0, got {x}")
    quarter_sq = x * x / 4
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= quarter_sq / (k * k)
        total += term
        if term < 1e-15 * total:
            return total


def binary_entropy(x: float) -> float:
    """Shannon binary entropy h(x) in bits."""
    if not 0 <= x <= 1:
        raise DomainError(f"binary_entropy needs a probability in [0, 1], got {x}")
    if x == 0 or x == 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


# =============================================================================
# REPORT
# =============================================================================

def analysis_report(mu: float, m: int) -> AnalysisReport:
    """Bundle every discrimination figure for one operating point."""
    usd = usd_probability(mu, m)
    spec = PseudoPhotonSpec(mu=mu, m=m, k=0)
    report = AnalysisReport(
        mu=mu,
        m=m,
        p_usd=usd.approx,
        p_usd_exact=usd.exact,
        p_min=min_error_probability(mu, m),
        trace_distance_k0=trace_distance_pseudo_fock(spec),
        delta_k0=prob_excess_delta(spec),
        secrecy_epsilon=secrecy_epsilon(mu, m) if m >= SECRECY_MIN_M else None,
        random_guess_error=1.0 - 1.0 / m,
    )
    logger.info(
        "Analysis computed",
        extra={'extra_fields': {
            'mu': mu, 'm': m, 'p_min': report.p_min, 'p_usd': report.p_usd.render(),
        }}
    )
    return report
