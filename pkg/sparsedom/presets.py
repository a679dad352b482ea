# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Named functions, weights and multipliers referenced by experiment files.

Positions and widths of function and weight presets are relative to the sampled
window, so that u = 0 is its left end and u = 1 its right end. Frequencies are
angular and absolute.
"""
from dataclasses import dataclass
from dataclasses import field
import inspect
import logging

import numpy as np
from scipy import optimize
from sparsedom.multiplier import counterexample_build
from sparsedom.multiplier import GammaParametrization
from sparsedom.multiplier import MultiplierSpec
from sparsedom.multiplier import smooth_step
from sparsedom.signals import SampledFunction
from sparsedom.weights import aq_constant
from sparsedom.weights import Weight

logger = logging.getLogger(__name__)

KINDS = ("function", "weight", "multiplier")
MAX_LOG_SCALE = 64.0


@dataclass(frozen=True)
class Preset:
    """A named builder with its documented parameters."""

    name: str
    kind: str
    builder: object
    defaults: dict = field(default_factory=dict)
    description: str = ""

    def describe(self):
        """One line summary for --list-presets."""
        params = ", ".join(f"{key}={value!r}" for key, value in sorted(self.defaults.items()))
        return f"{self.kind:<10} {self.name:<16} {self.description} ({params})"


def _relative(grid):
    """Relative positions of the cell midpoints."""
    return (grid.midpoints - grid.origin) / (grid.size * grid.step)


def _window(u, start, stop, ramp):
    """Smooth cutoff equal to one on [start + ramp, stop - ramp] and zero outside [start, stop]."""
    return smooth_step((u - start) / ramp) * smooth_step((stop - u) / ramp)


def _trigonometric(rng, u, modes):
    k = np.arange(1, modes + 1)
    a, b = rng.normal(size=(2, modes)) / k
    phases = 2 * np.pi * np.outer(u, k)
    return np.cos(phases) @ a + np.sin(phases) @ b


def indicator(grid, rng, start=0.25, stop=0.75):
    """Indicator of [start, stop)."""
    u = _relative(grid)
    return grid.with_values(((u >= start) & (u < stop)).astype(float))


def smooth_bump(grid, rng, center=0.5, radius=0.25):
    """C-infinity bump exp(1 - 1/(1 - t**2)) with t = (u - center)/radius."""
    t = (_relative(grid) - center) / radius
    inside = np.abs(t) < 1
    values = np.zeros(grid.size)
    values[inside] = np.exp(1 - 1 / (1 - t[inside] ** 2))
    return grid.with_values(values)


def gaussian(grid, rng, center=0.5, width=0.1, frequency=0.0):
    """Gaussian of relative width, modulated by exp(i frequency x) when frequency is nonzero."""
    u = _relative(grid)
    values = np.exp(-0.5 * ((u - center) / width) ** 2)
    if frequency:
        values = values * np.exp(1j * frequency * grid.midpoints)
    return grid.with_values(values)


def random_smooth(grid, rng, modes=8, ramp=0.1, complex_values=False):
    """Random trigonometric polynomial with decaying coefficients, smoothly cut off."""
    u = _relative(grid)
    values = _trigonometric(rng, u, modes)
    if complex_values:
        values = values + 1j * _trigonometric(rng, u, modes)
    return grid.with_values(values * _window(u, 0.0, 1.0, ramp))


def packet_sum(grid, rng, count=4, width=0.05, max_frequency=64.0):
    """Sum of Gaussians with random centers, widths and frequencies."""
    u = _relative(grid)
    values = np.zeros(grid.size, dtype=complex)
    for _ in range(count):
        center = rng.uniform(0.2, 0.8)
        frequency = rng.uniform(-max_frequency, max_frequency)
        scale = width * rng.uniform(0.5, 1.5)
        values += np.exp(-0.5 * ((u - center) / scale) ** 2 + 1j * frequency * grid.midpoints)
    return grid.with_values(values)


def comb(grid, rng, count=4, spacing=8.0, width=0.2, center=0.5):
    """Gaussian window times the sum of exp(i n spacing x) over n < count."""
    u = _relative(grid)
    window = np.exp(-0.5 * ((u - center) / width) ** 2)
    total = sum(np.exp(1j * n * spacing * grid.midpoints) for n in range(count))
    return grid.with_values(window * total)


def constant_weight(grid, rng, value=1.0):
    """Constant weight."""
    return Weight(grid.with_values(np.full(grid.size, float(value))))


def two_step_weight(grid, rng, high=2.0, low=1.0, split=0.5):
    """Weight equal to high left of split and low right of it."""
    return Weight(grid.with_values(np.where(_relative(grid) < split, high, low).astype(float)))


def power_weight(grid, rng, a=0.3, shift=0.5):
    """Power weight |u - shift|**a in relative coordinates."""
    return Weight(grid.with_values(np.abs(_relative(grid) - shift) ** a))


def random_aq_weight(grid, rng, target=1.5, q=2, modes=6):
    """Weight exp(s g) for a random smooth g, with s chosen so that [v]_{A_q} equals target.

    :raises ValueError: if the target cannot be reached
    """
    if target < 1:
        raise ValueError(f"A_q constants are at least one, got target {target}")
    log_weight = _trigonometric(rng, _relative(grid), modes)
    log_weight = log_weight / np.max(np.abs(log_weight))

    def excess(scale):
        return aq_constant(Weight(grid.with_values(np.exp(scale * log_weight))), q) - target

    if target == 1:
        return constant_weight(grid, rng)
    upper = 1.0
    while excess(upper) < 0:
        upper *= 2
        if upper > MAX_LOG_SCALE:
            raise ValueError(f"A_{q} constant {target} is out of reach for this weight shape")
    scale = optimize.brentq(excess, 0.0, upper, xtol=1e-10)
    logger.debug(f"Random A_{q} weight: scale {scale:.6g} for target {target}")
    return Weight(grid.with_values(np.exp(scale * log_weight)))


def _parametrization(beta):
    return None if beta is None else GammaParametrization.from_beta(beta)


def identity_multiplier(rng):
    """The constant multiplier one."""
    return MultiplierSpec("identity")


def bht_multiplier(rng, beta=None):
    """sign(xi . beta), the bilinear Hilbert transform."""
    return MultiplierSpec("bht_sign", _parametrization(beta))


def counterexample_multiplier(rng, size=4, narrowing=2, dilation=1.0, beta=None):
    """Counterexample family member with random signs."""
    signs = rng.choice([-1, 1], size=int(size))
    return counterexample_build(signs, int(size), _parametrization(beta), narrowing, dilation)


def tabulated_multiplier(rng, path=""):
    """Multiplier interpolated from a CSV table with columns xi1,xi2,re,im."""
    if not path:
        raise ValueError("The tabulated preset needs a path")
    return MultiplierSpec.from_csv(path)


def _defaults(builder, positional):
    """Keyword defaults of a builder after its positional arguments."""
    parameters = list(inspect.signature(builder).parameters.values())[positional:]
    return {parameter.name: parameter.default for parameter in parameters}


def _table(kind, entries):
    positional = 1 if kind == "multiplier" else 2
    return {
        name: Preset(name, kind, builder, _defaults(builder, positional), description)
        for name, builder, description in entries
    }


PRESETS = {
    "function": _table(
        "function",
        [
            ("indicator", indicator, "indicator of [start, stop)"),
            ("bump", smooth_bump, "compactly supported smooth bump"),
            ("gaussian", gaussian, "modulated Gaussian"),
            ("random_smooth", random_smooth, "random smooth function"),
            ("packet_sum", packet_sum, "sum of random Gaussian packets"),
            ("comb", comb, "windowed frequency comb"),
        ],
    ),
    "weight": _table(
        "weight",
        [
            ("constant", constant_weight, "constant weight"),
            ("two_step", two_step_weight, "two valued step weight"),
            ("power", power_weight, "power weight |u - shift|**a"),
            ("random_aq", random_aq_weight, "random weight with a prescribed A_q constant"),
        ],
    ),
    "multiplier": _table(
        "multiplier",
        [
            ("identity", identity_multiplier, "m = 1"),
            ("bht_sign", bht_multiplier, "sign(xi . beta)"),
            ("counterexample", counterexample_multiplier, "sum of sign weighted bumps"),
            ("tabulated", tabulated_multiplier, "interpolated table"),
        ],
    ),
}


def split_reference(reference):
    """Split a preset reference into its name and parameters.

    :param reference: a name, or a dict with the key "preset" and parameters
    :return: tuple (name, params)
    """
    if isinstance(reference, str):
        return reference, {}
    if isinstance(reference, dict) and "preset" in reference:
        params = {key: value for key, value in reference.items() if key != "preset"}
        return reference["preset"], params
    raise ValueError(f"Preset reference must be a name or a dict with 'preset', got {reference}")


def lookup(kind, reference):
    """Find a preset and check its parameters.

    :return: tuple (Preset, params)
    :raises ValueError: for unknown kinds, names or parameters
    """
    if kind not in PRESETS:
        raise ValueError(f"Preset kind must be one of {KINDS}, got '{kind}'")
    name, params = split_reference(reference)
    seed = params.pop("seed", None)
    if name not in PRESETS[kind]:
        raise ValueError(f"Unknown {kind} preset '{name}', known: {sorted(PRESETS[kind])}")
    preset = PRESETS[kind][name]
    unknown = sorted(set(params) - set(preset.defaults))
    if unknown:
        raise ValueError(f"Unknown parameters {unknown} for {kind} preset '{name}'")
    if seed is not None:
        params["seed"] = seed
    return preset, params


def resolve(kind, reference, grid=None, seed=0):
    """Build the object a preset reference names.

    :param kind: "function", "weight" or "multiplier"
    :param reference: a name, or a dict with "preset", parameters and an optional "seed"
    :param grid: SampledFunction whose grid function and weight presets sample on
    :param seed: seed used when the reference carries none
    :return: SampledFunction, Weight or MultiplierSpec
    """
    preset, params = lookup(kind, reference)
    rng = np.random.default_rng(params.pop("seed", seed))
    arguments = {**preset.defaults, **params}
    if kind == "multiplier":
        return preset.builder(rng, **arguments)
    if grid is None:
        raise ValueError(f"{kind.capitalize()} presets need a grid")
    return preset.builder(grid, rng, **arguments)


def list_presets():
    """Lines describing every preset, sorted by kind and name."""
    return [
        PRESETS[kind][name].describe() for kind in KINDS for name in sorted(PRESETS[kind])
    ]


def sampled_window(resolution, start=0.0, stop=1.0):
    """Zero function on resolution cells of [start, stop)."""
    return SampledFunction(start, (stop - start) / resolution, np.zeros(int(resolution)))
