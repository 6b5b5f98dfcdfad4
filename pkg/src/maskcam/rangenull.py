"""Range/null-space machinery on explicit operators, the Wiener-based
approximate range projection, and diffusion-schedule algebra.

At desk scale the imaging map is materialized as a dense matrix, so the
range projector and null-space completion are exact (SVD-based). At full
scale only the approximate projection exists: simulate the capture, undo
the crop with replicate padding, and Wiener-deconvolve.
"""

from dataclasses import dataclass

import numpy as np

from .imaging import ForwardSpec, LinearOperator, conv_forward, replicate_pad
from .recon import wiener_deconvolve

DEFAULT_RCOND = 1e-10


@dataclass(frozen=True)
class PseudoInverse:
    """SVD factorization of a LinearOperator with a singular-value cutoff.

    Singular values below ``rcond * sigma_max`` are treated as zero; the
    retained right singular vectors span the (numerical) range of A^T, so
    A_dag A = V_r V_r^T.
    """

    u: np.ndarray
    singular_values: np.ndarray
    vt: np.ndarray
    rank: int
    rcond: float
    scene_shape: tuple
    sensor_shape: tuple

    def pinv_matrix(self):
        """Dense Moore-Penrose inverse A_dag."""
        inv_s = np.zeros_like(self.singular_values)
        inv_s[: self.rank] = 1.0 / self.singular_values[: self.rank]
        return (self.vt.T * inv_s) @ self.u.T

    def apply(self, sensor):
        """A_dag y for a sensor grid or vector."""
        sensor = np.asarray(sensor, dtype=np.float64)
        vec = sensor.ravel()
        coeffs = (self.u.T @ vec)[: self.rank] / self.singular_values[: self.rank]
        return (self.vt[: self.rank].T @ coeffs).reshape(self.scene_shape)

    def project_range(self, scene_vec):
        """A_dag A v = V_r V_r^T v on flat scene vectors."""
        coeffs = self.vt[: self.rank] @ scene_vec
        return self.vt[: self.rank].T @ coeffs


def pseudo_inverse(operator, rcond=DEFAULT_RCOND):
    """SVD-based Moore-Penrose pseudo-inverse of a dense operator."""
    if not isinstance(operator, LinearOperator):
        raise TypeError("pseudo_inverse expects a LinearOperator")
    u, s, vt = np.linalg.svd(operator.matrix, full_matrices=False)
    cutoff = rcond * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    return PseudoInverse(u, s, vt, rank, rcond, operator.scene_shape,
                         operator.sensor_shape)


def range_project(x, pinv):
    """Range-space content A_dag A x, reshaped to scene dims."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != pinv.scene_shape:
        raise ValueError("scene dims do not match the operator")
    return pinv.project_range(x.ravel()).reshape(pinv.scene_shape)


def null_complete(range_content, proposal, pinv):
    """Measurement-consistent completion r + (I - A_dag A) proposal.

    Whenever ``range_content`` equals A_dag A x, the result maps to the
    same measurement as x for any proposal, since A (I - A_dag A) = 0.
    """
    range_content = np.asarray(range_content, dtype=np.float64)
    proposal = np.asarray(proposal, dtype=np.float64)
    if range_content.shape != pinv.scene_shape or proposal.shape != pinv.scene_shape:
        raise ValueError("scene dims do not match the operator")
    null_part = proposal.ravel() - pinv.project_range(proposal.ravel())
    return range_content + null_part.reshape(pinv.scene_shape)


def approx_range_project(x, h, forward=None, wiener_reg=3e-4):
    """Full-scale approximation of the range content via simulate-and-invert.

    Simulates the capture ``C(h * x) + n`` with the sensor stages of
    ``forward`` (noise and quantization on by default), undoes the crop
    with replicate padding, and Wiener-deconvolves with the same PSF. This
    is the training-target generator for kernel calibration.
    """
    if forward is None:
        forward = ForwardSpec()
    x = np.asarray(x, dtype=np.float64)
    y = conv_forward(
        x, h, crop=forward.crop, quant_bits=forward.quant_bits,
        noise_snr_db=forward.noise_snr_db, seed=forward.seed,
        quant_scale=forward.quant_scale,
    )
    padded = replicate_pad(y, forward.pad_factor)
    return wiener_deconvolve(padded.physical(), h, wiener_reg, x.shape)


@dataclass(frozen=True)
class DiffusionSchedule:
    """Gaussian forward-process coefficient sequences over t = 1..T.

    q(x_t | x_0) = N(alpha_t * x_0, sigma_t^2 I). The signal-to-noise
    ratio alpha_t^2 / sigma_t^2 must be strictly decreasing in t.
    """

    alphas: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=np.float64)
        sigmas = np.asarray(self.sigmas, dtype=np.float64)
        if alphas.ndim != 1 or alphas.shape != sigmas.shape or alphas.size < 1:
            raise ValueError("alphas and sigmas must be equal-length 1-D")
        if np.any(alphas <= 0) or np.any(alphas > 1):
            raise ValueError("alphas must lie in (0, 1]")
        if np.any(sigmas < 0):
            raise ValueError("sigmas must be nonnegative")
        # strict SNR decrease, compared cross-multiplied to tolerate sigma=0
        lhs = alphas[:-1] ** 2 * sigmas[1:] ** 2
        rhs = alphas[1:] ** 2 * sigmas[:-1] ** 2
        if np.any(lhs <= rhs):
            raise ValueError("signal-to-noise ratio must strictly decrease")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "sigmas", sigmas)

    def __len__(self):
        return self.alphas.size

    def coeffs(self, t):
        """(alpha_t, sigma_t) for a 1-based step index."""
        if not 1 <= t <= len(self):
            raise ValueError(f"step index {t} outside 1..{len(self)}")
        return float(self.alphas[t - 1]), float(self.sigmas[t - 1])

    @classmethod
    def variance_preserving_cosine(cls, steps, offset=0.008):
        """Cosine variance-preserving schedule (squared-cosine signal decay)."""
        t = np.arange(1, steps + 1) / steps
        f = np.cos((t + offset) / (1 + offset) * np.pi / 2.0) ** 2
        f0 = np.cos(offset / (1 + offset) * np.pi / 2.0) ** 2
        alpha_bar = np.clip(f / f0, 1e-12, 1.0)
        return cls(np.sqrt(alpha_bar), np.sqrt(1.0 - alpha_bar))

    @classmethod
    def linear_beta(cls, steps, beta_start=1e-4, beta_end=2e-2):
        """Variance-preserving schedule from a linear beta ramp."""
        betas = np.linspace(beta_start, beta_end, steps)
        alpha_bar = np.cumprod(1.0 - betas)
        return cls(np.sqrt(alpha_bar), np.sqrt(1.0 - alpha_bar))


def schedule_conditionals(s, t, sched):
    """Markov transition coefficients (alpha_t|s, sigma_t|s).

    alpha_t|s = alpha_t / alpha_s and sigma_t|s^2 = sigma_t^2 -
    alpha_t|s^2 * sigma_s^2; nonnegative by the decreasing-SNR invariant.
    The boundary s = t is allowed and gives (1, 0).
    """
    if s > t:
        raise ValueError("conditioning step s must not exceed t")
    alpha_s, sigma_s = sched.coeffs(s)
    alpha_t, sigma_t = sched.coeffs(t)
    alpha_ts = alpha_t / alpha_s
    var = sigma_t**2 - alpha_ts**2 * sigma_s**2
    return alpha_ts, float(np.sqrt(max(var, 0.0)))


def forward_diffuse(x0, t, sched, seed=0):
    """Sample x_t = alpha_t x_0 + sigma_t eps; returns (x_t, eps).

    The reparameterization eps = (x_t - alpha_t x_0) / sigma_t holds
    exactly for the returned pair.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    alpha_t, sigma_t = sched.coeffs(t)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(x0.shape)
    return alpha_t * x0 + sigma_t * eps, eps


def null_loss(eps_hat, eps, operator, approximate=False):
    """Squared noise-prediction error, measured through the operator.

    Exact mode returns ||A vec(eps_hat - eps)||^2: residuals confined to
    the null space of A cost nothing, which is what makes the completion
    measurement-consistent. Approximate mode drops A and returns the plain
    squared error.
    """
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps_hat.shape != eps.shape:
        raise ValueError("noise grids must share dims")
    diff = (eps_hat - eps).ravel()
    if approximate:
        return float(diff @ diff)
    if not isinstance(operator, LinearOperator):
        raise TypeError("null_loss needs a LinearOperator in exact mode")
    if diff.size != operator.matrix.shape[1]:
        raise ValueError("noise grid dims do not match the operator")
    projected = operator.matrix @ diff
    return float(projected @ projected)
