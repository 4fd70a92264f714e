"""Benchmark signal synthesis and spectral analysis (periodogram, DOG-12 CWT)."""

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError

DEFAULT_N_POINTS = 10_000
TABLE1_N = 10_080

# (amplitude, frequency in cycles per t.u.) of the dominant components of the
# AAPL percentage-change periodogram.
TABLE1 = (
    (7.37, 0.009),
    (7.22, 0.052),
    (7.52, 0.063),
    (7.58, 0.065),
    (7.33, 0.115),
    (7.68, 0.143),
    (7.65, 0.146),
    (7.10, 0.229),
    (7.34, 0.233),
    (7.58, 0.256),
    (7.72, 0.259),
    (7.30, 0.292),
    (7.09, 0.445),
)

# signal id -> (linear gradient, quadratic gradient, noise coefficient)
DISTORTIONS = {
    "F0": (0.0, 0.0, 0.0),
    "F2": (0.0, 0.0, 0.2),
    "F5": (0.0, 0.0, 0.5),
    "F8": (0.0, 0.0, 0.8),
    "F10": (0.0, 0.0, 1.0),
    "L0": (5e-2, 0.0, 0.0),
    "L2": (5e-2, 0.0, 0.2),
    "L5": (5e-2, 0.0, 0.5),
    "L8": (5e-2, 0.0, 0.8),
    "L10": (5e-2, 0.0, 1.0),
    "Q0": (0.0, 5e-5, 0.0),
    "Q2": (0.0, 5e-5, 0.2),
    "Q5": (0.0, 5e-5, 0.5),
    "Q8": (0.0, 5e-5, 0.8),
    "Q10": (0.0, 5e-5, 1.0),
}
SIGNAL_IDS = tuple(DISTORTIONS)


@dataclass(frozen=True)
class SinusoidComponent:
    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigurationError("amplitude must be non-negative")
        if not 0 <= self.frequency <= 0.5:
            raise ConfigurationError("frequency must lie in [0, 0.5]")


@dataclass
class SignalSpec:
    components: list = field(default_factory=list)
    linear_gradient: float = 0.0
    quadratic_gradient: float = 0.0
    noise_coefficient: float = 0.0
    n_points: int = DEFAULT_N_POINTS
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 2:
            raise ConfigurationError("n_points must be at least 2")
        if self.noise_coefficient < 0:
            raise ConfigurationError("noise_coefficient must be non-negative")
        self.components = [
            c if isinstance(c, SinusoidComponent) else SinusoidComponent(**c)
            for c in self.components
        ]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(**doc)
        except TypeError as exc:
            raise DataError(f"invalid signal spec: {exc}") from exc


@dataclass
class Series:
    values: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise DataError("series contains non-finite values")

    def __len__(self):
        return len(self.values)


@dataclass
class PeriodogramResult:
    frequencies: np.ndarray
    power: np.ndarray
    raw: np.ndarray
    n_used: int
    truncated: bool = False


@dataclass
class CwtResult:
    scales: np.ndarray
    coefficients: np.ndarray
    # number of samples at each end where the zero-padded wavelet support is cut
    edge: np.ndarray = None


def snap_to_grid(frequency, n):
    """Nearest Fourier frequency k/n."""
    return round(frequency * n) / n


def table1_components(n_grid=TABLE1_N, snap=True):
    out = []
    for amp, freq in TABLE1:
        f = snap_to_grid(freq, n_grid) if snap else freq
        out.append(SinusoidComponent(amp, f, 0.0))
    return out


def preset(signal_id, seed=0, n_points=DEFAULT_N_POINTS, snap_grid=TABLE1_N):
    """Benchmark spec for one of the fifteen signal ids (F0 ... Q10)."""
    if signal_id not in DISTORTIONS:
        raise KeyError(
            f"unknown signal id {signal_id!r}; expected one of {', '.join(SIGNAL_IDS)}"
        )
    lin, quad, noise = DISTORTIONS[signal_id]
    return SignalSpec(
        components=table1_components(snap_grid, snap=snap_grid is not None),
        linear_gradient=lin,
        quadratic_gradient=quad,
        noise_coefficient=noise,
        n_points=n_points,
        seed=seed,
    )


def deterministic_part(spec):
    i = np.arange(spec.n_points, dtype=float)
    x = np.zeros(spec.n_points)
    for c in spec.components:
        x += c.amplitude * np.sin(2 * np.pi * c.frequency * i + c.phase)
    return x + spec.linear_gradient * i + spec.quadratic_gradient * i**2


def synthesize(spec):
    """Sum of sinusoids plus trend plus range-scaled U(0,1) noise.

    Noise samples come from numpy's PCG64 generator seeded with ``spec.seed``.
    """
    x = deterministic_part(spec)
    if spec.noise_coefficient > 0:
        spread = float(x.max() - x.min())
        u = np.random.default_rng(spec.seed).uniform(0.0, 1.0, spec.n_points)
        x = x + spec.noise_coefficient * spread * u
    return Series(x)


def percent_change(prices):
    p = np.asarray(prices, dtype=float)
    if p.ndim != 1 or len(p) < 2:
        raise DataError("need at least two prices")
    bad = np.flatnonzero(~(p > 0))
    if len(bad):
        raise DataError(f"non-positive price {p[bad[0]]}", row=int(bad[0]) + 1)
    return Series(100.0 * np.diff(p) / p[:-1])


def periodogram(series):
    """Periodogram scaled so that sqrt(power) is a sinusoid's amplitude.

    An odd-length series drops its last point.
    """
    x = series.values if isinstance(series, Series) else np.asarray(series, dtype=float)
    truncated = len(x) % 2 == 1
    if truncated:
        x = x[:-1]
    n = len(x)
    if n < 4:
        raise ValueError("periodogram needs at least 4 points")
    raw = np.abs(np.fft.rfft(x)) ** 2
    scale = np.full(len(raw), (2.0 / n) ** 2)
    scale[0] = scale[-1] = (1.0 / n) ** 2
    dt = series.dt if isinstance(series, Series) else 1.0
    freqs = np.arange(n // 2 + 1) / (n * dt)
    return PeriodogramResult(freqs, raw * scale, raw, n, truncated)


def extract_peaks(result, threshold):
    """Local-maximum bins whose power exceeds ``threshold``, sorted by frequency."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    p = result.power
    left = np.concatenate([[-np.inf], p[:-1]])
    right = np.concatenate([p[1:], [-np.inf]])
    idx = np.flatnonzero((p > threshold) & (p >= left) & (p >= right))
    return [
        SinusoidComponent(float(np.sqrt(p[k])), float(result.frequencies[k]), 0.0)
        for k in idx
    ]


_DOG12_POLY = np.array([1, 0, -66, 0, 1485, 0, -13860, 0, 51975, 0, -62370, 0, 10395.0])
_DOG12_NORM = 64.0 / (315.0 * np.sqrt(3187041.0) * np.pi**0.25)


def dog12_wavelet(t):
    """Twelfth derivative-of-Gaussian mother wavelet, unit energy and zero mean."""
    t = np.asarray(t, dtype=float)
    return -_DOG12_NORM * np.exp(-0.5 * t * t) * np.polyval(_DOG12_POLY, t)


def cwt_scales(noct, nvoc, alpha):
    if noct < 1 or nvoc < 1 or alpha <= 0:
        raise ValueError("need noct >= 1, nvoc >= 1 and alpha > 0")
    return np.array(
        [alpha * 2.0 ** (o - 1) * 2.0 ** (v / nvoc) for o in range(1, noct + 1) for v in range(1, nvoc + 1)]
    )


# DOG-12 is below 1e-60 beyond |t| = 20, so the kernel is truncated there.
_SUPPORT = 20.0


def cwt(series, noct=12, nvoc=12, alpha=2.0):
    """Continuous wavelet transform with the DOG-12 wavelet, zero padded.

    ``w(u, s) = s^-1/2 sum_i x_i psi((i - u) / s)`` for every integer shift ``u``.
    """
    x = series.values if isinstance(series, Series) else np.asarray(series, dtype=float)
    n = len(x)
    scales = cwt_scales(noct, nvoc, alpha)
    coeffs = np.zeros((len(scales), n))
    edge = np.zeros(len(scales), dtype=int)
    if n == 0:
        return CwtResult(scales, coeffs, edge)
    nfft = 1
    for row, s in enumerate(scales):
        half = int(min(np.ceil(_SUPPORT * s), n - 1))
        edge[row] = half
        lags = np.arange(-half, half + 1)
        kernel = dog12_wavelet(lags / s) / np.sqrt(s)
        # w[u] = sum_m x[u + m] kernel[m]: correlation, i.e. convolution with the
        # reversed kernel
        size = n + len(lags) - 1
        nfft = 1 << (size - 1).bit_length()
        full = np.fft.irfft(np.fft.rfft(x, nfft) * np.fft.rfft(kernel[::-1], nfft), nfft)
        coeffs[row] = full[half : half + n]
    return CwtResult(scales, coeffs, edge)


def write_series_csv(path, series, meta=None):
    with open(path, "w", newline="") as fh:
        if meta is not None:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for i, v in enumerate(series.values):
            w.writerow([i, repr(float(v))])


def _data_lines(fh):
    for line in fh:
        if not line.startswith("#"):
            yield line


def read_series_csv(path):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open: {exc.strerror}", path=path) from exc
    with fh:
        reader = csv.reader(_data_lines(fh))
        header = next(reader, None)
        if header is None:
            raise DataError("empty file", path=path)
        header = [h.strip() for h in header]
        if "value" not in header:
            raise DataError("missing 'value' column", path=path)
        col = header.index("value")
        values = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                values.append(float(row[col]))
            except (ValueError, IndexError):
                raise DataError(f"unparsable value {row!r}", row=row_no, path=path)
    if not values:
        raise DataError("no data rows", path=path)
    return Series(np.array(values))


def write_peaks_csv(path, peaks, meta=None):
    with open(path, "w", newline="") as fh:
        if meta is not None:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["frequency", "amplitude", "power"])
        for c in peaks:
            w.writerow([repr(c.frequency), repr(c.amplitude), repr(c.amplitude**2)])


def write_periodogram_csv(path, result, meta=None):
    with open(path, "w", newline="") as fh:
        if meta is not None:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["frequency", "power"])
        for f, p in zip(result.frequencies, result.power):
            w.writerow([repr(float(f)), repr(float(p))])


def write_cwt_csv(path, result, meta=None):
    with open(path, "w", newline="") as fh:
        if meta is not None:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("scale,u,coefficient\n")
        for s, row in zip(result.scales, result.coefficients):
            s_txt = repr(float(s))
            fh.writelines(f"{s_txt},{u},{v!r}\n" for u, v in enumerate(row.tolist()))

