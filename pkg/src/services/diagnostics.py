"""Effective sample size and Gelman–Rubin potential scale reduction factors."""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.models.chain import Chain
from src.models.errors import DiagnosticsError
from src.models.summary import DiagnosticsReport

logger = logging.getLogger(__name__)


class ConvergenceDiagnostics:
    """ESS by Geyer's initial positive sequence; PSRF with the variance-ratio upper bound."""

    MIN_LENGTH = 4
    THRESHOLD = 1.01
    CONFIDENCE = 0.95
    PREFIX_STRIDE = 0.01

    # ------------------------------------------------------------------
    # Effective sample size
    # ------------------------------------------------------------------

    @staticmethod
    def autocorrelation(series: np.ndarray) -> np.ndarray:
        """Sample autocorrelation at every lag through a zero-padded FFT."""
        x = np.asarray(series, dtype=float)
        n = x.size
        centered = x - x.mean()
        size = 1 << int(np.ceil(np.log2(2 * n)))
        spectrum = np.fft.rfft(centered, size)
        acov = np.fft.irfft(spectrum * np.conjugate(spectrum), size)[:n] / n
        return acov / acov[0]

    def ess(self, series: Sequence[float]) -> float:
        """K / (−1 + 2 Σ_k Γ_k) over the initial positive run of paired autocorrelations Γ_k."""
        x = np.asarray(series, dtype=float)
        K = x.size
        if K < self.MIN_LENGTH:
            raise DiagnosticsError(f"ESS needs at least {self.MIN_LENGTH} draws, got {K}")
        if not np.all(np.isfinite(x)):
            raise DiagnosticsError("series contains non-finite values")
        if np.ptp(x) == 0:
            logger.warning("constant series; ESS set to the series length")
            return float(K)

        rho = self.autocorrelation(x)
        tau = -1.0
        for k in range(K // 2):
            gamma = rho[2 * k] + rho[2 * k + 1]
            if gamma <= 0:
                break
            tau += 2.0 * gamma
        return float(min(K, K / tau)) if tau > 0 else float(K)

    # ------------------------------------------------------------------
    # Potential scale reduction
    # ------------------------------------------------------------------

    def _as_chains(self, chains) -> np.ndarray:
        arrays = [np.asarray(c, dtype=float) for c in chains]
        if not arrays:
            raise DiagnosticsError("no chains supplied")
        lengths = {a.size for a in arrays}
        if len(lengths) != 1:
            raise DiagnosticsError(f"chains must have equal lengths, got {sorted(lengths)}")
        if len(arrays) == 1:
            # split-R̂: halves of the single chain, dropping a middle draw when odd
            x = arrays[0]
            half = x.size // 2
            arrays = [x[:half], x[x.size - half:]]
        data = np.vstack(arrays)
        if data.shape[1] < self.MIN_LENGTH:
            raise DiagnosticsError(f"PSRF needs chains of length >= {self.MIN_LENGTH}")
        return data

    def psrf(self, chains) -> Tuple[float, float]:
        """(point estimate, upper 97.5% estimate) of the potential scale reduction factor."""
        x = self._as_chains(chains)
        m, n = x.shape
        means = x.mean(axis=1)
        s2 = x.var(axis=1, ddof=1)
        W = s2.mean()
        B = n * means.var(ddof=1)
        fixed = (n - 1.0) / n
        if W == 0:
            if B > 0:
                return np.inf, np.inf
            return float(np.sqrt(fixed)), float(np.sqrt(fixed))

        var_w = s2.var(ddof=1) / m
        var_b = 2.0 * B ** 2 / (m - 1)
        cov_wb = (n / m) * (
            np.cov(s2, means ** 2)[0, 1] - 2.0 * means.mean() * np.cov(s2, means)[0, 1]
        )
        V = fixed * W + (1.0 + 1.0 / m) * B / n
        var_v = (
            fixed ** 2 * var_w
            + ((1.0 + 1.0 / m) / n) ** 2 * var_b
            + 2.0 * (n - 1.0) * (1.0 + 1.0 / m) / n ** 2 * cov_wb
        )
        df_adj = 1.0
        if var_v > 0:
            df_v = 2.0 * V ** 2 / var_v
            df_adj = (df_v + 3.0) / (df_v + 1.0)

        random = (1.0 + 1.0 / m) * B / (n * W)
        estimate = fixed + random
        upper = estimate
        if random > 0:
            df_w = 2.0 * W ** 2 / var_w if var_w > 0 else np.inf
            quantile = stats.f.ppf((1.0 + self.CONFIDENCE) / 2.0, m - 1, df_w)
            if not np.isfinite(quantile):
                quantile = stats.chi2.ppf((1.0 + self.CONFIDENCE) / 2.0, m - 1) / (m - 1)
            upper = fixed + quantile * random
        return float(np.sqrt(df_adj * estimate)), float(np.sqrt(df_adj * upper))

    def iterations_to_threshold(self, chains, threshold: Optional[float] = None) -> int:
        """Shortest prefix length (stride 1% of K) whose PSRF falls below ``threshold``; −1 if none."""
        threshold = self.THRESHOLD if threshold is None else threshold
        x = np.vstack([np.asarray(c, dtype=float) for c in chains])
        K = x.shape[1]
        stride = max(1, int(round(self.PREFIX_STRIDE * K)))
        min_length = 2 * self.MIN_LENGTH if x.shape[0] == 1 else self.MIN_LENGTH
        for length in range(stride, K + 1, stride):
            if length < min_length:
                continue
            estimate, _ = self.psrf(list(x[:, :length]))
            if estimate < threshold:
                return length
        return -1

    # ------------------------------------------------------------------
    # Multi-coordinate report
    # ------------------------------------------------------------------

    def report(self, chains: List, threshold: Optional[float] = None) -> DiagnosticsReport:
        """Per-coordinate diagnostics over chains given as Chain objects or (K, D) arrays.

        ESS is averaged over chains.
        """
        threshold = self.THRESHOLD if threshold is None else threshold
        arrays = [c.states if isinstance(c, Chain) else np.atleast_2d(np.asarray(c, dtype=float)) for c in chains]
        if not arrays:
            raise DiagnosticsError("no chains supplied")
        widths = {a.shape[1] for a in arrays}
        if len(widths) != 1:
            raise DiagnosticsError("chains have different dimensions")
        D = arrays[0].shape[1]

        ess, median, upper, iters, flags = [], [], [], [], []
        for j in range(D):
            columns = [a[:, j] for a in arrays]
            if all(np.ptp(c) == 0 for c in columns):
                flags.append(f'x{j + 1}: constant')
            ess.append(float(np.mean([self.ess(c) for c in columns])))
            point, high = self.psrf(columns)
            median.append(point)
            upper.append(high)
            iters.append(self.iterations_to_threshold(columns, threshold))
        return DiagnosticsReport(
            coordinates=[f'x{j + 1}' for j in range(D)],
            ess=np.array(ess),
            psrf_median=np.array(median),
            psrf_q975=np.array(upper),
            iterations_to_threshold=np.array(iters, dtype=int),
            threshold=threshold,
            flags=flags,
        )
