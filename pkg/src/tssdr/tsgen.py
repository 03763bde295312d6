"""Seeded generators for latent source processes, mixing, and response models.

Every generator is a pure function of ``(spec, length, seed)``: identical
inputs give bit-identical output.  Generated source components are
standardized to sample mean 0 and sample variance 1 (population denominator)
after a burn-in pass that discards initialization transients.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidSpecError

__all__ = [
    "ProcessSpec",
    "SimulationSpec",
    "ResponseModel",
    "RESPONSE_MODELS",
    "RECIPES",
    "gen_component",
    "gen_sources",
    "mix",
    "make_response",
    "simulate",
    "make_simulation",
    "write_panel_csv",
    "read_panel_csv",
]

PROCESS_KINDS = ("ar1", "ma1", "arma11", "arch2", "garch11", "iid")
INNOVATIONS = ("gauss", "t4", "uniform")

# offset between the per-column innovation streams of one simulation seed
COLUMN_SEED_STRIDE = 1000003


@dataclass(frozen=True)
class ProcessSpec:
    """One latent component process.

    ``arch_alphas`` holds the ARCH coefficients: ``(alpha,)`` for garch11 and
    ``(alpha1, alpha2)`` for arch2.  The GARCH/ARCH intercept is chosen so the
    unconditional variance is 1.
    """

    kind: str
    phi: float = 0.0
    theta: float = 0.0
    arch_alphas: tuple = ()
    garch_beta: float = 0.0
    innovation: str = "gauss"

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).lower())
        object.__setattr__(self, "innovation", str(self.innovation).lower())
        object.__setattr__(self, "arch_alphas", tuple(float(a) for a in self.arch_alphas))
        if self.kind not in PROCESS_KINDS:
            raise InvalidSpecError(f"unknown process kind {self.kind!r}")
        if self.innovation not in INNOVATIONS:
            raise InvalidSpecError(f"unknown innovation {self.innovation!r}")
        if self.kind in ("ar1", "arma11") and not abs(self.phi) < 1.0:
            raise InvalidSpecError(f"{self.kind} requires |phi| < 1, got {self.phi}")
        if self.kind == "arch2":
            if len(self.arch_alphas) != 2 or any(a < 0 for a in self.arch_alphas):
                raise InvalidSpecError("arch2 requires two nonnegative arch_alphas")
            if sum(self.arch_alphas) >= 1.0:
                raise InvalidSpecError("arch2 requires alpha1 + alpha2 < 1")
        if self.kind == "garch11":
            if len(self.arch_alphas) != 1 or self.arch_alphas[0] < 0 or self.garch_beta < 0:
                raise InvalidSpecError("garch11 requires one nonnegative alpha and beta >= 0")
            if self.arch_alphas[0] + self.garch_beta >= 1.0:
                raise InvalidSpecError("garch11 requires alpha + beta < 1")


def _innovations(rng, n, law):
    if law == "gauss":
        return rng.standard_normal(n)
    if law == "t4":
        # variance of t4 is 2; rescale so the innovation variance is 1
        return rng.standard_t(4, size=n) * np.sqrt(0.5)
    # U(-1, 1) has variance 1/3
    return rng.uniform(-1.0, 1.0, size=n) * np.sqrt(3.0)


def gen_component(spec, length, seed, burn_in=1000):
    """Generate one standardized component realization.

    Parameters
    ----------
    spec : ProcessSpec
    length : int
        Number of returned observations (after burn-in).
    seed : int
        Seed for the innovation stream.
    burn_in : int
        Initial values discarded before standardization.

    Returns
    -------
    ndarray, shape (length,)
        Realization with sample mean 0 and sample variance 1.
    """
    if length < 1:
        raise InvalidInputError(f"length must be >= 1, got {length}")
    if burn_in < 0:
        raise InvalidInputError("burn_in must be nonnegative")
    rng = np.random.default_rng(seed)
    n = length + burn_in
    eps = _innovations(rng, n, spec.innovation)

    if spec.kind == "iid":
        x = eps
    elif spec.kind == "ma1":
        x = eps.copy()
        x[1:] += spec.theta * eps[:-1]
    elif spec.kind in ("ar1", "arma11"):
        theta = spec.theta if spec.kind == "arma11" else 0.0
        x = np.empty(n)
        x[0] = eps[0]
        for t in range(1, n):
            x[t] = spec.phi * x[t - 1] + eps[t] + theta * eps[t - 1]
    elif spec.kind == "arch2":
        a1, a2 = spec.arch_alphas
        omega = 1.0 - a1 - a2
        x = np.empty(n)
        x[0] = eps[0]
        x[1] = eps[1]
        for t in range(2, n):
            sigma2 = omega + a1 * x[t - 1] ** 2 + a2 * x[t - 2] ** 2
            x[t] = np.sqrt(sigma2) * eps[t]
    else:  # garch11
        alpha = spec.arch_alphas[0]
        beta = spec.garch_beta
        omega = 1.0 - alpha - beta
        x = np.empty(n)
        sigma2 = 1.0
        x[0] = eps[0]
        for t in range(1, n):
            sigma2 = omega + alpha * x[t - 1] ** 2 + beta * sigma2
            x[t] = np.sqrt(sigma2) * eps[t]

    x = x[burn_in:]
    x = x - x.mean()
    sd = x.std()
    if sd == 0.0:
        raise InvalidInputError("degenerate component realization with zero variance")
    return x / sd


@dataclass(frozen=True, eq=False)
class SimulationSpec:
    """Full data-generating setup: components, mixing, and the response model."""

    components: tuple
    mixing: np.ndarray = None
    location: np.ndarray = None
    response_model: str = "A"
    response_noise_sd: float = 1.0
    burn_in: int = 1000

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        p = len(comps)
        if p < 1:
            raise InvalidSpecError("at least one component is required")
        mixing = np.eye(p) if self.mixing is None else np.asarray(self.mixing, dtype=np.float64)
        location = np.zeros(p) if self.location is None else np.asarray(self.location, dtype=np.float64)
        if mixing.shape != (p, p):
            raise InvalidSpecError(f"mixing must be {p}x{p}, got {mixing.shape}")
        if location.shape != (p,):
            raise InvalidSpecError(f"location must have length {p}")
        svals = np.linalg.svd(mixing, compute_uv=False)
        if svals[-1] <= 1e-10 * svals[0]:
            raise InvalidSpecError("mixing matrix is rank deficient")
        model = str(self.response_model).upper()
        if model not in RESPONSE_MODELS:
            raise InvalidSpecError(f"unknown response model {model!r}")
        object.__setattr__(self, "mixing", mixing)
        object.__setattr__(self, "location", location)
        object.__setattr__(self, "response_model", model)
        if RESPONSE_MODELS[model].width > p:
            raise InvalidSpecError(
                f"model {model} needs {RESPONSE_MODELS[model].width} sources, recipe has {p}"
            )

    @property
    def width(self):
        return len(self.components)


def gen_sources(spec, length, seed):
    """Generate the latent source panel ``z`` with independent seeded columns."""
    cols = [
        gen_component(comp, length, seed + COLUMN_SEED_STRIDE * i, spec.burn_in)
        for i, comp in enumerate(spec.components)
    ]
    return np.column_stack(cols)


def mix(z, omega, mu):
    """Apply the mixing map ``x_t = omega @ z_t + mu`` row by row."""
    z = np.asarray(z, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if z.ndim != 2 or omega.shape != (z.shape[1], z.shape[1]) or mu.shape != (z.shape[1],):
        raise InvalidInputError(
            f"shape mismatch: z {z.shape}, omega {omega.shape}, mu {mu.shape}"
        )
    return z @ omega.T + mu


def _lag(z, col, k):
    """Series ``z[t - k, col]`` aligned at ``t``, NaN where the lag reaches back too far."""
    out = np.full(z.shape[0], np.nan)
    out[k:] = z[:-k, col] if k > 0 else z[:, col]
    return out


@dataclass(frozen=True)
class ResponseModel:
    """Response recipe: signal builder, oracle regressors, and selection truth.

    ``truth`` lists (slot, lag) pairs describing which latent slots at which
    lags drive the response; slots are matched to recovered sources up to
    permutation when scoring a selection.
    """

    name: str
    width: int
    max_lag: int
    signal: callable
    oracle_terms: callable
    truth: tuple
    fixed_noise_sd: float = None


def _model_a(z):
    return 2.0 * _lag(z, 0, 1) + 3.0 * _lag(z, 1, 1)


def _model_b(z):
    return _lag(z, 0, 1) ** 2 + 3.0 * _lag(z, 1, 5)


def _model_c(z):
    return (2.0 * _lag(z, 0, 1) + 3.0 * _lag(z, 1, 1)) ** 2


def _model_d(z):
    return _lag(z, 0, 1) ** 2 + 3.0 * _lag(z, 1, 5) ** 2


def _model_e(z):
    return 2.0 * _lag(z, 0, 1) ** 3 + 3.0 * _lag(z, 1, 5) ** 2


def _model_m1(z):
    return _lag(z, 0, 1) + _lag(z, 0, 3)


def _model_m2(z):
    return 1.0 + _lag(z, 0, 1) ** 2 + _lag(z, 0, 3) ** 2


def _model_big(z):
    return _lag(z, 0, 1) + _lag(z, 1, 2) + 0.5 * _lag(z, 2, 4)


RESPONSE_MODELS = {
    "A": ResponseModel(
        "A", 2, 1, _model_a,
        lambda z: np.column_stack([_lag(z, 0, 1), _lag(z, 1, 1)]),
        ((0, 1),),
    ),
    "B": ResponseModel(
        "B", 2, 5, _model_b,
        lambda z: np.column_stack([_lag(z, 0, 1) ** 2, _lag(z, 1, 5)]),
        ((0, 1), (1, 5)),
    ),
    "C": ResponseModel(
        "C", 2, 1, _model_c,
        lambda z: np.column_stack(
            [_lag(z, 0, 1) ** 2, _lag(z, 0, 1) * _lag(z, 1, 1), _lag(z, 1, 1) ** 2]
        ),
        ((0, 1),),
    ),
    "D": ResponseModel(
        "D", 2, 5, _model_d,
        lambda z: np.column_stack([_lag(z, 0, 1) ** 2, _lag(z, 1, 5) ** 2]),
        ((0, 1), (1, 5)),
    ),
    "E": ResponseModel(
        "E", 2, 5, _model_e,
        lambda z: np.column_stack([_lag(z, 0, 1) ** 3, _lag(z, 1, 5) ** 2]),
        ((0, 1), (1, 5)),
    ),
    "M1": ResponseModel(
        "M1", 1, 3, _model_m1,
        lambda z: np.column_stack([_lag(z, 0, 1), _lag(z, 0, 3)]),
        ((0, 1), (0, 3)),
        fixed_noise_sd=np.sqrt(0.2),
    ),
    "M2": ResponseModel(
        "M2", 1, 3, _model_m2,
        lambda z: np.column_stack([_lag(z, 0, 1) ** 2, _lag(z, 0, 3) ** 2]),
        ((0, 1), (0, 3)),
        fixed_noise_sd=np.sqrt(0.2),
    ),
    "BIG": ResponseModel(
        "BIG", 3, 4, _model_big,
        lambda z: np.column_stack([_lag(z, 0, 1), _lag(z, 1, 2), _lag(z, 2, 4)]),
        ((0, 1), (1, 2), (2, 4)),
    ),
}


def make_response(model, z, noise_sd, seed):
    """Build the response series for a model id.

    Positions whose lags reach before the start of the sample are NaN.
    Models with a fixed noise level (M1, M2) ignore ``noise_sd``.
    """
    key = str(model).upper()
    if key not in RESPONSE_MODELS:
        raise InvalidInputError(f"unknown response model {key!r}")
    spec = RESPONSE_MODELS[key]
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] < spec.width:
        raise InvalidInputError(
            f"model {key} needs at least {spec.width} source columns, got {z.shape}"
        )
    if spec.max_lag >= z.shape[0]:
        raise InvalidInputError(f"model {key} max lag {spec.max_lag} >= length {z.shape[0]}")
    sd = spec.fixed_noise_sd if spec.fixed_noise_sd is not None else float(noise_sd)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sd, size=z.shape[0]) if sd > 0 else np.zeros(z.shape[0])
    return spec.signal(z) + noise


def simulate(spec, length, seed):
    """Generate ``(x, y, z)`` for one replicate of a simulation spec."""
    z = gen_sources(spec, length, seed)
    x = mix(z, spec.mixing, spec.location)
    y = make_response(
        spec.response_model, z, spec.response_noise_sd,
        seed + COLUMN_SEED_STRIDE * spec.width,
    )
    return x, y, z


# Named component recipes used throughout the simulation studies.
RECIPES = {
    "base": (
        ProcessSpec("ar1", phi=0.2),
        ProcessSpec("ar1", phi=0.2),
        ProcessSpec("arma11", phi=0.3, theta=0.4),
        ProcessSpec("ma1", theta=-0.4),
    ),
    "high": (
        ProcessSpec("ar1", phi=0.8),
        ProcessSpec("ar1", phi=0.8),
        ProcessSpec("arma11", phi=0.3, theta=0.4),
        ProcessSpec("ma1", theta=-0.4),
    ),
    "table1": (
        ProcessSpec("ar1", phi=0.2),
        ProcessSpec("ar1", phi=0.2),
        ProcessSpec("arma11", phi=0.3, theta=-0.4),
        ProcessSpec("ma1", theta=-0.4),
    ),
    "nearnonstat": (
        ProcessSpec("ar1", phi=0.97),
        ProcessSpec("ar1", phi=0.97),
        ProcessSpec("arma11", phi=0.3, theta=0.4),
        ProcessSpec("ma1", theta=-0.4),
    ),
    "garch": (
        ProcessSpec("garch11", arch_alphas=(0.1,), garch_beta=0.8),
        ProcessSpec("garch11", arch_alphas=(0.1,), garch_beta=0.8),
        ProcessSpec("arma11", phi=0.3, theta=0.4),
        ProcessSpec("ma1", theta=-0.4),
    ),
    "t4_low": (
        ProcessSpec("ar1", phi=0.2, innovation="t4"),
        ProcessSpec("ar1", phi=0.2, innovation="t4"),
        ProcessSpec("arma11", phi=0.3, theta=0.4),
        ProcessSpec("ma1", theta=-0.4),
    ),
    "t4_high": (
        ProcessSpec("ar1", phi=0.8, innovation="t4"),
        ProcessSpec("ar1", phi=0.8, innovation="t4"),
        ProcessSpec("arma11", phi=0.3, theta=0.4),
        ProcessSpec("ma1", theta=-0.4),
    ),
    "visual": (
        ProcessSpec("ar1", phi=0.1),
    ),
    "big": (
        ProcessSpec("ar1", phi=-0.2),
        ProcessSpec("ar1", phi=0.8, innovation="t4"),
        ProcessSpec("garch11", arch_alphas=(0.05,), garch_beta=0.93),
        ProcessSpec("ar1", phi=0.6, innovation="uniform"),
        ProcessSpec("ar1", phi=0.98),
        ProcessSpec("arch2", arch_alphas=(0.3, 0.4)),
        ProcessSpec("garch11", arch_alphas=(0.1,), garch_beta=0.8),
        ProcessSpec("arma11", phi=0.3, theta=-0.6),
        ProcessSpec("iid"),
        ProcessSpec("iid", innovation="t4"),
    ),
}


def make_simulation(model, recipe="base", noise_sd=1.0):
    """SimulationSpec for a named model and component recipe (identity mixing)."""
    key = str(recipe).lower()
    if key not in RECIPES:
        raise InvalidInputError(f"unknown recipe {key!r}; choices: {sorted(RECIPES)}")
    return SimulationSpec(
        components=RECIPES[key],
        response_model=model,
        response_noise_sd=noise_sd,
    )


def write_panel_csv(path, x, y):
    """Write a generated panel as CSV with header ``t,x1..xp,y``.

    Unavailable response positions are written as empty fields.  All numbers
    carry 17 significant digits.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise InvalidInputError(f"panel shape mismatch: x {x.shape}, y {y.shape}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(x.shape[1])] + ["y"])
        for t in range(x.shape[0]):
            row = [str(t + 1)] + [f"{v:.17g}" for v in x[t]]
            row.append("" if np.isnan(y[t]) else f"{y[t]:.17g}")
            writer.writerow(row)


def read_panel_csv(path):
    """Read a panel CSV written by :func:`write_panel_csv`; returns ``(x, y)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "t" or header[-1] != "y":
            raise InvalidInputError(f"{path}: expected header t,x1..xp,y, got {header}")
        p = len(header) - 2
        xs, ys = [], []
        for row in reader:
            if not row:
                continue
            if len(row) != p + 2:
                raise InvalidInputError(f"{path}: row has {len(row)} fields, expected {p + 2}")
            xs.append([float(v) for v in row[1:1 + p]])
            ys.append(float(row[-1]) if row[-1] != "" else np.nan)
    return np.asarray(xs), np.asarray(ys)
