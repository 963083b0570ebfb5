"""Run configuration: a JSON tree whose defaults reproduce the desk-scale setup."""

from __future__ import annotations

import copy
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .estimator import ConfigurationError
from .obsmodel import NOISE_KINDS, NoiseFamily, NoiseModel
from .phantoms import Phantom, default_phantom

OUTPUT_ENV = "TOMOSEL_OUTPUT_DIR"

DEFAULTS = {
    "phantom": default_phantom().to_dicts(),
    "dimension": 2,
    "x_star": 1.0,
    "m": 8,
    "q": 34,
    "q_star": 2.0,
    "delta": 0.1,
    "sigma_mode": "known",
    "noise": {
        "models": [{"kind": k, "sigma": 0.05} for k in NOISE_KINDS],
        "sigma_lo": 0.02,
        "sigma_hi": 0.1,
        "fourth_hi": 0.02,
        "primary": 0,
    },
    "grid": {"k_star": None, "epsilon": None, "k0": 1.0, "cap_plateau": True},
    "replications": 500,
    "moment_replications": 10000,
    "seed": 20240,
    "n_jobs": 1,
    "raster_resolution": 128,
    "required_checks": "all",
    "output_dir": "tomosel-out",
}


class ConfigError(ConfigurationError):
    """Invalid configuration; ``path`` is the offending key and ``line`` its line in the file."""

    def __init__(self, message: str, path: str = "", line: int | None = None, source: str | None = None):
        self.path, self.line, self.source = path, line, source
        where = source or "<config>"
        if line is not None:
            where += f":{line}"
        key = f" [{path}]" if path else ""
        super().__init__(f"{where}{key}: {message}")


def _locate(text: str | None, path: tuple) -> int | None:
    """Line of the last string key of ``path`` in ``text``, searched in nesting order."""
    if not text:
        return None
    pos, found = 0, None
    for part in path:
        if isinstance(part, int):
            continue
        m = re.compile(r'"' + re.escape(part) + r'"\s*:').search(text, pos)
        if m is None:
            break
        pos, found = m.end(), m.start()
    return None if found is None else text.count("\n", 0, found) + 1


def _merge(base: dict, over: dict, path=()) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise KeyError(path + (k,))
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, path + (k,))
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    tree: dict
    source: str | None = None
    text: str | None = field(default=None, repr=False)

    # construction ----------------------------------------------------------
    @classmethod
    def default(cls) -> "RunConfig":
        cfg = cls(copy.deepcopy(DEFAULTS))
        cfg.validate()
        return cfg

    @classmethod
    def from_dict(cls, data: dict, source: str | None = None, text: str | None = None) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("top level must be an object", source=source, line=1)
        try:
            tree = _merge(DEFAULTS, data)
        except KeyError as e:
            path = e.args[0]
            raise ConfigError("unknown key", ".".join(map(str, path)), _locate(text, path), source) from None
        cfg = cls(tree, source, text)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read configuration: {e.strerror}", source=str(path)) from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", line=e.lineno, source=str(path)) from None
        return cls.from_dict(data, str(path), text)

    def to_json(self) -> str:
        return json.dumps(self.tree, indent=2, sort_keys=True)

    # validation --------------------------------------------------------------
    def _fail(self, message: str, *path):
        raise ConfigError(message, ".".join(map(str, path)), _locate(self.text, path), self.source)

    def _number(self, value, *path, integer=False, positive=False):
        ok = isinstance(value, int) if integer else isinstance(value, (int, float))
        if isinstance(value, bool) or not ok:
            self._fail(f"expected {'an integer' if integer else 'a number'}, got {value!r}", *path)
        if positive and value <= 0:
            self._fail(f"must be positive, got {value!r}", *path)
        return value

    def validate(self) -> None:
        t = self.tree
        d = self._number(t["dimension"], "dimension", integer=True)
        if d != 2:
            self._fail(f"only dimension 2 is supported, got {d}", "dimension")
        self._number(t["x_star"], "x_star", positive=True)
        m = self._number(t["m"], "m", integer=True, positive=True)
        self._number(t["q_star"], "q_star", positive=True)
        delta = self._number(t["delta"], "delta")
        if not 0 < delta < 1 / 8:
            self._fail(f"delta = {delta} must lie in the open interval (0, 1/8)", "delta")
        if t["sigma_mode"] not in ("known", "estimated"):
            self._fail(f"sigma_mode must be 'known' or 'estimated', got {t['sigma_mode']!r}", "sigma_mode")
        q = t["q"]
        if q != "auto":
            self._number(q, "q", integer=True, positive=True)
        q = self.q
        if q < 2 * d * m + 2:
            self._fail(f"q = {q} violates q >= 2 d m + 2 = {2 * d * m + 2}", "q")
        if t["sigma_mode"] == "estimated":
            if m < 4:
                self._fail(f"estimated variance needs m >= 4, got {m}", "m")
            if not m**d <= q <= t["q_star"] * m**d:
                self._fail(f"estimated variance needs m^d <= q <= q_star m^d, got q = {q}", "q")
        for key in ("replications", "moment_replications", "n_jobs", "raster_resolution"):
            self._number(t[key], key, integer=True, positive=True)
        if t["replications"] < 100:
            self._fail("risk estimates need at least 100 replications", "replications")
        if t["raster_resolution"] < 8:
            self._fail("raster resolution must be at least 8", "raster_resolution")
        self._number(t["seed"], "seed", integer=True)
        if t["seed"] < 0:
            self._fail("seed must be nonnegative", "seed")
        if not isinstance(t["output_dir"], str):
            self._fail("expected a path string", "output_dir")
        rc = t["required_checks"]
        if rc != "all" and not (isinstance(rc, list) and all(isinstance(x, str) for x in rc)):
            self._fail("expected 'all' or a list of check names", "required_checks")
        self._validate_grid()
        try:
            self.phantom
        except (ValueError, TypeError, KeyError) as e:
            self._fail(str(e), "phantom")
        self._validate_noise()

    def _validate_grid(self):
        g = self.tree["grid"]
        if g["k_star"] is not None:
            self._number(g["k_star"], "grid", "k_star", integer=True, positive=True)
        if g["epsilon"] is not None:
            e = self._number(g["epsilon"], "grid", "epsilon")
            if not 0 < e < 1:
                self._fail(f"epsilon must lie in (0, 1), got {e}", "grid", "epsilon")
        self._number(g["k0"], "grid", "k0")
        if not isinstance(g["cap_plateau"], bool):
            self._fail("expected true or false", "grid", "cap_plateau")

    def _validate_noise(self):
        n = self.tree["noise"]
        if not isinstance(n["models"], list) or not n["models"]:
            self._fail("need a nonempty list of noise models", "noise", "models")
        for i, md in enumerate(n["models"]):
            if not isinstance(md, dict) or set(md) != {"kind", "sigma"}:
                self._fail("each model needs exactly the keys kind and sigma", "noise", "models", i)
            if md["kind"] not in NOISE_KINDS:
                self._fail(f"unknown noise kind {md['kind']!r}", "noise", "models", i, "kind")
            self._number(md["sigma"], "noise", "models", i, "sigma")
        kinds = [md["kind"] for md in n["models"]]
        if len(set(kinds)) != len(kinds):
            self._fail("noise kinds must be distinct", "noise", "models")
        for key in ("sigma_lo", "sigma_hi", "fourth_hi"):
            self._number(n[key], "noise", key)
        p = self._number(n["primary"], "noise", "primary", integer=True)
        if not 0 <= p < len(n["models"]):
            self._fail(f"primary must index the model list, got {p}", "noise", "primary")
        try:
            self.noise_family
        except ValueError as e:
            self._fail(str(e), "noise")

    # derived views -------------------------------------------------------------
    @property
    def q(self) -> int:
        t = self.tree
        if t["q"] != "auto":
            return int(t["q"])
        m, d = t["m"], t["dimension"]
        q = max(2 * d * m + 2, m**d)
        if q > t["q_star"] * m**d:
            self._fail(f"auto q = {q} exceeds q_star m^d", "q")
        return q

    @property
    def phantom(self) -> Phantom:
        return Phantom.from_dicts(self.tree["phantom"], self.tree["x_star"], self.tree["dimension"])

    @property
    def noise_family(self) -> NoiseFamily:
        n = self.tree["noise"]
        models = tuple(NoiseModel(md["kind"], float(md["sigma"])) for md in n["models"])
        return NoiseFamily(models, float(n["sigma_lo"]), float(n["sigma_hi"]), float(n["fourth_hi"]))

    @property
    def primary_noise(self) -> NoiseModel:
        return self.noise_family.models[self.tree["noise"]["primary"]]

    def __getitem__(self, key):
        return self.tree[key]

    def output_dir(self) -> Path:
        """``$TOMOSEL_OUTPUT_DIR`` if set, else ``output_dir`` relative to the config file."""
        env = os.environ.get(OUTPUT_ENV)
        if env:
            return Path(env)
        out = Path(self.tree["output_dir"])
        if not out.is_absolute() and self.source:
            out = Path(self.source).resolve().parent / out
        return out

    def risk_setup(self, q: int | None = None):
        from .riskharness import RiskSetup

        t, g = self.tree, self.tree["grid"]
        return RiskSetup(
            self.phantom,
            t["m"],
            q if q is not None else self.q,
            t["delta"],
            t["sigma_mode"],
            float(t["noise"]["sigma_hi"]),
            g["k_star"],
            g["epsilon"],
            g["k0"],
            g["cap_plateau"],
        )
