"""Experiment configuration: INI-style text with full-file validation.

Sections mirror the parameter groupings of the problem: ``[scenario]`` for
network constants, ``[sensing]`` for the detection stack, ``[mac]`` for the
protocol variant, ``[run]`` for experiment orchestration.  All values carry
defaults matching the small reference network, so an empty file is a valid
configuration.  Validation collects every violation before reporting.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field

from .chain import ControlDesign, ErrorModel, MacVariant, ModelKind
from .errors import ValidationError
from .scene import BITS_PER_KB, RadioScene
from .sensing import ReportingScheme

_VARIANT_CODES = ("b0s0", "b0s1", "b1s0", "b1s1")
_TRAFFIC_CODES = ("bernoulli", "ee", "le", "el", "ll", "eu", "uu")
_SWEEPABLE = ("q_p", "d_kb", "t_p", "N", "kappa", "t_e")
_MODES = ("curve", "chain", "simulate", "optimize", "compare")

_DEFAULTS = {
    "scenario": {
        "m": "3",
        "n": "12",
        "c": "1.0",
        "b": "1.0",
        "d_kb": "5.0",
        "q_p": "0.1",
        "gamma_db": "-5.0",
        "p_e": "0.0",
        "p": "auto",
        "t_t": "1000.0",
        "t_p": "100.0",
        "t_d_max": "1000.0",
        "model": "micro",
    },
    "sensing": {
        "schemes": "ttdma",
        "alpha": "auto",
        "n_g": "1",
        "kappa": "1",
        "t_e": "20.0",
        "p_d_min": "0.99",
        "p_d": "0.99",
        "p_f": "0.1",
        "t_q": "100.0",
        "kappa_values": "auto",
        "t_e_values": "auto",
        "n_g_values": "auto",
        "p_f_values": "auto",
    },
    "mac": {
        "control": "dcc_shared",
        "variants": "b1s0",
        "error_model": "e0",
    },
    "run": {
        "mode": "chain",
        "seed": "20260810",
        "batches": "100",
        "events_per_batch": "1000",
        "warmup": "100",
        "output": "",
        "sweep": "q_p",
        "sweep_values": "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
        "traffic": "bernoulli",
        "jobs": "1",
    },
}


@dataclass
class ExperimentConfig:
    """Validated, normalized experiment description."""

    scenario: dict = field(default_factory=dict)
    sensing: dict = field(default_factory=dict)
    mac: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    # -- derived accessors ---------------------------------------------------

    def scene(self, **overrides) -> RadioScene:
        s = dict(self.scenario)
        s.update(overrides)
        p = s["p"]
        return RadioScene(
            M=s["m"], N=s["n"], C=s["c"], b=s["b"],
            d=s["d_kb"] * BITS_PER_KB,
            q_p=s["q_p"], gamma_db=s["gamma_db"], p_e=s["p_e"],
            t_t=s["t_t"], t_p=s["t_p"], t_d_max=s["t_d_max"],
            p=None if p == "auto" else p,
        )

    @property
    def model_kind(self) -> ModelKind:
        return ModelKind(self.scenario["model"])

    @property
    def alpha(self) -> float:
        a = self.sensing["alpha"]
        return 1.0 / self.scenario["m"] if a == "auto" else a

    def variants(self) -> list[MacVariant]:
        control = ControlDesign(self.mac["control"])
        error = ErrorModel(self.mac["error_model"])
        out = []
        for code in self.mac["variants"]:
            buffering = code[1] == "1"
            switching = code[3] == "1"
            out.append(
                MacVariant(control, buffering=buffering, switching=switching, error_model=error)
            )
        return out

    def schemes(self) -> list[ReportingScheme]:
        return [ReportingScheme(s) for s in self.sensing["schemes"]]

    def to_text(self) -> str:
        """Normalized serialization; parse(to_text()) is the identity."""
        buf = io.StringIO()
        for section in ("scenario", "sensing", "mac", "run"):
            buf.write(f"[{section}]\n")
            data = getattr(self, section)
            for key in sorted(data):
                value = data[key]
                if isinstance(value, (list, tuple)):
                    value = ",".join(str(v) for v in value)
                buf.write(f"{key} = {value}\n")
            buf.write("\n")
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def _parse_float(raw, key, errors, allow_auto=False):
    raw = raw.strip()
    if allow_auto and raw.lower() == "auto":
        return "auto"
    try:
        return float(raw)
    except ValueError:
        errors.append(f"{key}: expected a number, got {raw!r}")
        return math.nan


def _parse_int(raw, key, errors):
    try:
        return int(raw)
    except ValueError:
        errors.append(f"{key}: expected an integer, got {raw!r}")
        return 0


def _parse_list(raw, key, errors, kind=float, allow_auto=False):
    raw = raw.strip()
    if allow_auto and raw.lower() == "auto":
        return "auto"
    items = [x.strip() for x in raw.split(",") if x.strip()]
    out = []
    for item in items:
        try:
            out.append(kind(item))
        except ValueError:
            errors.append(f"{key}: bad list item {item!r}")
    return tuple(out)


def _parse_choice(raw, key, choices, errors):
    value = raw.strip().lower()
    if value not in choices:
        errors.append(f"{key}: {raw!r} not one of {sorted(choices)}")
        return choices[0] if isinstance(choices, tuple) else next(iter(choices))
    return value


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises ValidationError carrying *all* detected violations, or a parse
    error with the offending line number for malformed syntax.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"config parse error: {exc}") from exc

    errors: list[str] = []
    for section in parser.sections():
        if section not in _DEFAULTS:
            errors.append(f"unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in _DEFAULTS[section]:
                errors.append(f"unknown key {key!r} in [{section}]")

    def raw(section, key):
        if parser.has_option(section, key):
            return parser.get(section, key)
        return _DEFAULTS[section][key]

    sc: dict = {}
    sc["m"] = _parse_int(raw("scenario", "m"), "scenario.m", errors)
    sc["n"] = _parse_int(raw("scenario", "n"), "scenario.n", errors)
    for key in ("c", "b", "d_kb", "q_p", "gamma_db", "p_e", "t_t", "t_p", "t_d_max"):
        sc[key] = _parse_float(raw("scenario", key), f"scenario.{key}", errors)
    sc["p"] = _parse_float(raw("scenario", "p"), "scenario.p", errors, allow_auto=True)
    sc["model"] = _parse_choice(raw("scenario", "model"), "scenario.model", ("micro", "macro"), errors)

    se: dict = {}
    se["schemes"] = tuple(
        _parse_choice(x, "sensing.schemes", tuple(s.value for s in ReportingScheme), errors)
        for x in raw("sensing", "schemes").split(",")
        if x.strip()
    )
    se["alpha"] = _parse_float(raw("sensing", "alpha"), "sensing.alpha", errors, allow_auto=True)
    se["n_g"] = _parse_int(raw("sensing", "n_g"), "sensing.n_g", errors)
    se["kappa"] = _parse_int(raw("sensing", "kappa"), "sensing.kappa", errors)
    for key in ("t_e", "p_d_min", "p_d", "p_f", "t_q"):
        se[key] = _parse_float(raw("sensing", key), f"sensing.{key}", errors)
    se["kappa_values"] = _parse_list(raw("sensing", "kappa_values"), "sensing.kappa_values", errors, int, allow_auto=True)
    se["t_e_values"] = _parse_list(raw("sensing", "t_e_values"), "sensing.t_e_values", errors, float, allow_auto=True)
    se["n_g_values"] = _parse_list(raw("sensing", "n_g_values"), "sensing.n_g_values", errors, int, allow_auto=True)
    se["p_f_values"] = _parse_list(raw("sensing", "p_f_values"), "sensing.p_f_values", errors, float, allow_auto=True)

    mc: dict = {}
    mc["control"] = _parse_choice(
        raw("mac", "control"), "mac.control", tuple(c.value for c in ControlDesign), errors
    )
    variants_raw = raw("mac", "variants").strip().lower()
    if variants_raw == "all":
        mc["variants"] = _VARIANT_CODES
    else:
        mc["variants"] = tuple(
            _parse_choice(x, "mac.variants", _VARIANT_CODES, errors)
            for x in variants_raw.split(",")
            if x.strip()
        )
    mc["error_model"] = _parse_choice(
        raw("mac", "error_model"), "mac.error_model", tuple(e.value for e in ErrorModel), errors
    )

    rn: dict = {}
    rn["mode"] = _parse_choice(raw("run", "mode"), "run.mode", _MODES, errors)
    for key in ("seed", "batches", "events_per_batch", "warmup", "jobs"):
        rn[key] = _parse_int(raw("run", key), f"run.{key}", errors)
    rn["output"] = raw("run", "output").strip()
    rn["sweep"] = _parse_choice(raw("run", "sweep"), "run.sweep", _SWEEPABLE, errors)
    rn["sweep_values"] = _parse_list(raw("run", "sweep_values"), "run.sweep_values", errors)
    rn["traffic"] = _parse_choice(raw("run", "traffic"), "run.traffic", _TRAFFIC_CODES, errors)

    config = ExperimentConfig(scenario=sc, sensing=se, mac=mc, run=rn)
    errors.extend(_cross_validate(config))
    if errors:
        raise ValidationError(
            "invalid configuration:\n  " + "\n  ".join(errors), violations=errors
        )
    return config


def _cross_validate(config: ExperimentConfig) -> list[str]:
    errors = []
    sc, se, mc, rn = config.scenario, config.sensing, config.mac, config.run
    if sc["m"] < 1:
        errors.append("scenario.m must be at least 1")
    if sc["n"] < 2:
        errors.append("scenario.n must be at least 2")
    if not 0.0 <= sc["q_p"] <= 1.0:
        errors.append("scenario.q_p must lie in [0, 1]")
    if not 0.0 <= sc["p_e"] < 1.0:
        errors.append("scenario.p_e must lie in [0, 1)")
    if sc["p"] != "auto" and not 0.0 < sc["p"] < 1.0:
        errors.append("scenario.p must lie in (0, 1) or be 'auto'")
    for key in ("c", "b", "d_kb", "t_t", "t_d_max"):
        if not sc[key] > 0:
            errors.append(f"scenario.{key} must be positive")
    if sc["t_p"] < 0:
        errors.append("scenario.t_p must be nonnegative")

    if sc["m"] >= 1 and sc["n"] >= 2:
        if not 1 <= se["n_g"] <= min(sc["m"], sc["n"]):
            errors.append("sensing.n_g must lie in [1, min(M, N)]")
        else:
            min_users = sc["n"] // se["n_g"]
            if se["kappa"] > min_users:
                errors.append(
                    f"sensing.kappa exceeds group size (kappa={se['kappa']}, min users {min_users})"
                )
    if se["kappa"] < 1:
        errors.append("sensing.kappa must be at least 1")
    if se["alpha"] != "auto" and sc["m"] >= 1 and not (
        1.0 / sc["m"] - 1e-12 <= se["alpha"] <= 1.0
    ):
        errors.append("sensing.alpha must lie in [1/M, 1]")
    if not 0.0 < se["p_d_min"] <= 1.0:
        errors.append("sensing.p_d_min must lie in (0, 1]")
    for key in ("p_d", "p_f"):
        if not 0.0 <= se[key] <= 1.0:
            errors.append(f"sensing.{key} must lie in [0, 1]")
    if se["t_q"] < 0 or se["t_e"] <= 0:
        errors.append("sensing times must be positive")

    control_is_hcc = mc["control"] == "hcc"
    for code in mc["variants"]:
        if code[3] == "1" and control_is_hcc:
            errors.append(f"mac.variants: {code} requires a dedicated control channel (not hcc)")
    if mc["error_model"] != "e0" and not control_is_hcc:
        errors.append("mac.error_model e1/e2 apply to hcc only")

    for key in ("batches", "events_per_batch"):
        if rn[key] < 2:
            errors.append(f"run.{key} must be at least 2")
    if rn["warmup"] < 0:
        errors.append("run.warmup must be nonnegative")
    if rn["jobs"] < 1:
        errors.append("run.jobs must be at least 1")
    if not rn["sweep_values"]:
        errors.append("run.sweep_values must not be empty")
    return errors
