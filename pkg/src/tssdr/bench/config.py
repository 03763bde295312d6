"""Experiment configuration: flat key-value files with a [study] section.

A configuration expands into a list of cells, one per combination of model,
recipe, length, method, slice count, hybrid weight, threshold, and strategy.
Cells differing only in estimation settings share replicate seeds, so
relative errors can be paired by seed.  An oracle cell is added automatically
for every (model, recipe, length) combination.

Method tokens may carry a slice-count override after a colon, e.g.
``tsave:2`` or ``tssh:10-2`` (hybrid pairs use ``-`` between the
first-moment and second-moment counts).
"""

import configparser
from dataclasses import dataclass, replace

from ..errors import InvalidInputError
from ..estimators import METHODS
from ..predict import BASIS_ALIASES, BASIS_DEGREES
from ..selection import STRATEGIES
from ..tsgen import RECIPES, RESPONSE_MODELS

__all__ = ["Cell", "ExperimentConfig", "read_config", "parse_config_text"]

CELL_METHODS = ("tsir", "tsave", "tssh", "vsir", "vsave", "oracle")


@dataclass(frozen=True)
class Cell:
    """One benchmark cell: a data-generating setup plus one estimation setup."""

    study: str
    model: str
    recipe: str
    length: int
    method: str
    n_slices: object
    weight: float
    threshold: float
    strategy: str
    basis: str
    lags: int
    replicates: int
    base_seed: int
    test_size: int

    @property
    def cell_id(self):
        parts = [self.model, self.recipe, f"T{self.length}", self.method]
        if self.method != "oracle":
            parts.append(f"H{format_slices(self.n_slices)}")
            if self.weight is not None:
                parts.append(f"a{self.weight:g}")
            parts.append(f"P{self.threshold:g}")
            parts.append(self.strategy)
            parts.append(self.basis)
        return "-".join(parts)

    @property
    def data_key(self):
        return (self.model, self.recipe, self.length)

    def meta(self):
        """Cell metadata as an ordered string mapping (CSV header block)."""
        return {
            "study": self.study,
            "cell": self.cell_id,
            "model": self.model,
            "recipe": self.recipe,
            "length": str(self.length),
            "method": self.method,
            "n_slices": format_slices(self.n_slices) if self.method != "oracle" else "",
            "weight": "" if self.weight is None else f"{self.weight:g}",
            "threshold": "" if self.threshold is None else f"{self.threshold:g}",
            "strategy": self.strategy or "",
            "basis": self.basis,
            "lags": str(self.lags),
            "replicates": str(self.replicates),
            "base_seed": str(self.base_seed),
            "test_size": str(self.test_size),
        }


def format_slices(n_slices):
    if n_slices is None:
        return ""
    if isinstance(n_slices, tuple):
        return "-".join(str(h) for h in n_slices)
    return str(n_slices)


def parse_slices(token):
    token = token.strip()
    if "-" in token:
        a, b = token.split("-", 1)
        return (int(a), int(b))
    return int(token)


def _parse_method(token):
    name, _, rest = token.strip().lower().partition(":")
    if name not in CELL_METHODS or name == "oracle":
        raise InvalidInputError(f"unknown method token {token!r}")
    return name, parse_slices(rest) if rest else None


@dataclass(frozen=True)
class ExperimentConfig:
    """Expanded study grid; see :func:`read_config` for the file format."""

    study: str
    models: tuple
    recipes: tuple
    lengths: tuple
    methods: tuple            # (name, n_slices_override) pairs
    n_slices: tuple
    weights: tuple
    thresholds: tuple
    strategies: tuple
    basis: str
    lags: int
    replicates: int
    base_seed: int
    test_size: int

    def __post_init__(self):
        if self.replicates < 1:
            raise InvalidInputError("replicates must be >= 1")
        for model in self.models:
            if model not in RESPONSE_MODELS:
                raise InvalidInputError(f"unknown model {model!r}")
        for recipe in self.recipes:
            if recipe not in RECIPES:
                raise InvalidInputError(f"unknown recipe {recipe!r}")
        for length in self.lengths:
            if length <= 200 + self.lags:
                raise InvalidInputError(
                    f"length {length} too short; need more than {200 + self.lags}"
                )
            if length <= self.test_size:
                raise InvalidInputError(f"length {length} not larger than the test window")
        for strategy in self.strategies:
            if strategy not in STRATEGIES:
                raise InvalidInputError(f"unknown strategy {strategy!r}")
        basis = BASIS_ALIASES.get(self.basis, self.basis)
        if basis not in BASIS_DEGREES:
            raise InvalidInputError(f"unknown basis {self.basis!r}")
        object.__setattr__(self, "basis", basis)
        for threshold in self.thresholds:
            if not 0.0 < threshold < 1.0:
                raise InvalidInputError(f"threshold {threshold} outside (0, 1)")

    def cells(self):
        """Deterministically ordered cells, oracle first within each data setup."""
        out = []
        for model in self.models:
            for recipe in self.recipes:
                for length in self.lengths:
                    base = Cell(
                        study=self.study, model=model, recipe=recipe, length=length,
                        method="oracle", n_slices=None, weight=None, threshold=None,
                        strategy=None, basis="linear", lags=self.lags,
                        replicates=self.replicates, base_seed=self.base_seed,
                        test_size=self.test_size,
                    )
                    out.append(base)
                    for name, override in self.methods:
                        slice_grid = [override] if override is not None else list(self.n_slices)
                        weight_grid = list(self.weights) if name == "tssh" else [None]
                        for h in slice_grid:
                            for weight in weight_grid:
                                for threshold in self.thresholds:
                                    for strategy in self.strategies:
                                        out.append(replace(
                                            base, method=name, n_slices=h, weight=weight,
                                            threshold=threshold, strategy=strategy,
                                            basis=self.basis,
                                        ))
        return out


_LIST_KEYS = {
    "models", "recipes", "lengths", "methods", "n_slices",
    "weights", "thresholds", "strategies",
}
_DEFAULTS = {
    "recipes": "base",
    "n_slices": "",
    "weights": "0.5",
    "thresholds": "0.8",
    "strategies": "biggest_values",
    "basis": "quadratic_spline",
    "lags": "12",
    "replicates": "100",
    "test_size": "100",
}
_REQUIRED = ("id", "models", "methods", "lengths", "base_seed")


def parse_config_text(text, source="<config>"):
    """Parse a study configuration from text; see :func:`read_config`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise InvalidInputError(f"{source}: {exc}") from exc
    if "study" not in parser:
        raise InvalidInputError(f"{source}: missing [study] section")
    section = parser["study"]
    for key in _REQUIRED:
        if key not in section:
            raise InvalidInputError(f"{source}: missing required key {key!r}")
    get = lambda key: section.get(key, _DEFAULTS.get(key, "")).strip()

    def split(key):
        raw = get(key)
        return [item.strip() for item in raw.split(",") if item.strip()]

    methods = tuple(_parse_method(tok) for tok in split("methods"))
    n_slices = tuple(parse_slices(tok) for tok in split("n_slices"))
    if not n_slices and any(override is None for _, override in methods):
        raise InvalidInputError(
            f"{source}: n_slices required when a method has no slice override"
        )
    return ExperimentConfig(
        study=get("id"),
        models=tuple(m.upper() for m in split("models")),
        recipes=tuple(r.lower() for r in split("recipes")),
        lengths=tuple(int(t) for t in split("lengths")),
        methods=methods,
        n_slices=n_slices,
        weights=tuple(float(a) for a in split("weights")),
        thresholds=tuple(float(p) for p in split("thresholds")),
        strategies=tuple(s.lower() for s in split("strategies")),
        basis=get("basis").lower(),
        lags=int(get("lags")),
        replicates=int(get("replicates")),
        base_seed=int(get("base_seed")),
        test_size=int(get("test_size")),
    )


def read_config(path):
    """Read a study configuration file.

    The file is flat key=value text under a ``[study]`` section.  Keys:

    ``id``            study name (output subdirectory)
    ``models``        comma list of response model ids (A..E, M1, M2, BIG)
    ``recipes``       comma list of component recipes (default ``base``)
    ``lengths``       comma list of series lengths T
    ``methods``       comma list of method tokens (``tsave``, ``tsir:10``,
                      ``tssh:10-2``, ``vsir``, ``vsave``); a token without a
                      slice override crosses with ``n_slices``
    ``n_slices``      comma list of slice counts (pairs as ``10-2``)
    ``weights``       comma list of hybrid weights (tssh only, default 0.5)
    ``thresholds``    comma list of selection thresholds P (default 0.8)
    ``strategies``    comma list of selection strategies (default
                      ``biggest_values``)
    ``basis``         regression basis (default ``quadratic_spline``)
    ``lags``          number of lags, uses 1..lags (default 12)
    ``replicates``    replicates per cell (default 100)
    ``base_seed``     seed offset; replicate r uses base_seed + r
    ``test_size``     rolling test window (default 100)
    """
    with open(path) as fh:
        return parse_config_text(fh.read(), source=str(path))
