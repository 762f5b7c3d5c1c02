"""
3GPP TR 38.901 NLOS tapped-delay-line models TDL-A, TDL-B and TDL-C.

Tap tables are the normalized ones from TR 38.901 Tables 7.7.2-1/2/3:
delays have unit RMS delay spread and powers are relative to the strongest
tap. A physical profile is obtained by multiplying the delays by the
desired delay spread in ns.

Only the static average profile is produced; per-tap Rayleigh fading is
not realized.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .pdp import Frame, PdpError, PowerDelayProfile, db_to_linear


class TdlModel(str, enum.Enum):
    TDL_A = "TDL_A"
    TDL_B = "TDL_B"
    TDL_C = "TDL_C"

    @property
    def letter(self) -> str:
        return self.value[-1]

    @classmethod
    def parse(cls, value) -> "TdlModel":
        """Accept ``TDL_A``, ``TDL-A``, ``tdl_a`` or just ``A``."""
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_")
        if len(key) == 1:
            key = "TDL_" + key
        try:
            return cls(key)
        except ValueError:
            raise PdpError(f"unknown TDL model: {value!r}") from None


class Scenario(str, enum.Enum):
    UMI_O2I = "UMi_O2I"
    I2I = "I2I"

    @classmethod
    def parse(cls, value) -> "Scenario":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for member in cls:
            if member.value.lower() == key:
                return member
        raise PdpError(f"unknown scenario: {value!r}")


# (tap number, normalized delay, power dB) in published order
_TDL_A_ROWS = (
    (1, 0.0000, -13.4),
    (2, 0.3819, 0.0),
    (3, 0.4025, -2.2),
    (4, 0.5868, -4.0),
    (5, 0.4610, -6.0),
    (6, 0.5375, -8.2),
    (7, 0.6708, -9.9),
    (8, 0.5750, -10.5),
    (9, 0.7618, -7.5),
    (10, 1.5375, -15.9),
    (11, 1.8978, -6.6),
    (12, 2.2242, -16.7),
    (13, 2.1718, -12.4),
    (14, 2.4942, -15.2),
    (15, 2.5119, -10.8),
    (16, 3.0582, -11.3),
    (17, 4.0810, -12.7),
    (18, 4.4579, -16.2),
    (19, 4.5695, -18.3),
    (20, 4.7966, -18.9),
    (21, 5.0066, -16.6),
    (22, 5.3043, -19.9),
    (23, 9.6586, -29.7),
)

_TDL_B_ROWS = (
    (1, 0.0000, 0.0),
    (2, 0.1072, -2.2),
    (3, 0.2155, -4.0),
    (4, 0.2095, -3.2),
    (5, 0.2870, -9.8),
    (6, 0.2986, -1.2),
    (7, 0.3752, -3.4),
    (8, 0.5055, -5.2),
    (9, 0.3681, -7.6),
    (10, 0.3697, -3.0),
    (11, 0.5700, -8.9),
    (12, 0.5283, -9.0),
    (13, 1.1021, -4.8),
    (14, 1.2756, -5.7),
    (15, 1.5474, -7.5),
    (16, 1.7842, -1.9),
    (17, 2.0169, -7.6),
    (18, 2.8294, -12.2),
    (19, 3.0219, -9.8),
    (20, 3.6187, -11.4),
    (21, 4.1067, -14.9),
    (22, 4.2790, -9.2),
    (23, 4.7834, -11.3),
)

_TDL_C_ROWS = (
    (1, 0.0000, -4.4),
    (2, 0.2099, -1.2),
    (3, 0.2219, -3.5),
    (4, 0.2329, -5.2),
    (5, 0.2176, -2.5),
    (6, 0.6366, 0.0),
    (7, 0.6448, -2.2),
    (8, 0.6560, -3.9),
    (9, 0.6584, -7.4),
    (10, 0.7935, -7.1),
    (11, 0.8213, -10.7),
    (12, 0.9336, -11.1),
    (13, 1.2285, -5.1),
    (14, 1.3083, -6.8),
    (15, 2.1704, -8.7),
    (16, 2.7105, -13.2),
    (17, 4.2589, -13.9),
    (18, 4.6003, -13.9),
    (19, 5.4902, -15.8),
    (20, 5.6077, -17.1),
    (21, 6.3065, -16.0),
    (22, 6.6374, -15.7),
    (23, 7.0427, -21.6),
    (24, 8.6523, -22.8),
)

_ROWS = {
    TdlModel.TDL_A: _TDL_A_ROWS,
    TdlModel.TDL_B: _TDL_B_ROWS,
    TdlModel.TDL_C: _TDL_C_ROWS,
}


@dataclass(frozen=True, eq=False)
class TdlModelTable:
    """Normalized tap table, sorted by delay.

    ``tap_numbers`` keeps the row numbering of the published table, which
    is not in delay order.
    """

    id: TdlModel
    normalized_delays: np.ndarray
    powers_db: np.ndarray
    tap_numbers: tuple[int, ...]
    fading_tag: str = "NLOS-Rayleigh"

    def __len__(self):
        return self.normalized_delays.size


def _build_table(model: TdlModel) -> TdlModelTable:
    rows = sorted(_ROWS[model], key=lambda r: r[1])
    num, d, p = zip(*rows)
    d = np.array(d)
    p = np.array(p)
    d.flags.writeable = False
    p.flags.writeable = False
    return TdlModelTable(model, d, p, tuple(num))


_TABLES = {m: _build_table(m) for m in TdlModel}


def model_table(model) -> TdlModelTable:
    return _TABLES[TdlModel.parse(model)]


def scaled_profile(model, ds_ns: float) -> PowerDelayProfile:
    """Peak-relative PDP with normalized delays scaled by ``ds_ns``."""
    if not ds_ns > 0:
        raise PdpError("invalid delay spread")
    table = model_table(model)
    return PowerDelayProfile(
        table.normalized_delays * ds_ns,
        table.powers_db,
        frame=Frame.PEAK_RELATIVE_DB,
        source_id=f"{table.id.value}@{ds_ns:g}ns",
    )


def normalization_check(model) -> float:
    """Power-weighted RMS spread of the normalized delays (should be ~1)."""
    table = model_table(model)
    w = db_to_linear(table.powers_db)
    tau = table.normalized_delays
    mean = np.sum(w * tau) / np.sum(w)
    return float(np.sqrt(np.sum(w * (tau - mean) ** 2) / np.sum(w)))


@dataclass(frozen=True)
class ScenarioPreset:
    scenario: Scenario
    model: TdlModel
    profile_label: str
    ds_ns: float


PRESETS: tuple[ScenarioPreset, ...] = (
    ScenarioPreset(Scenario.UMI_O2I, TdlModel.TDL_A, "Normal", 240.0),
    ScenarioPreset(Scenario.I2I, TdlModel.TDL_A, "Normal", 36.0),
    ScenarioPreset(Scenario.UMI_O2I, TdlModel.TDL_B, "Normal", 240.0),
    ScenarioPreset(Scenario.I2I, TdlModel.TDL_B, "Normal", 36.0),
    ScenarioPreset(Scenario.UMI_O2I, TdlModel.TDL_C, "Long", 616.0),
    ScenarioPreset(Scenario.I2I, TdlModel.TDL_C, "Long", 57.0),
)


def get_preset(scenario, model) -> ScenarioPreset:
    try:
        scenario = Scenario.parse(scenario)
        model = TdlModel.parse(model)
    except PdpError:
        raise PdpError(f"no preset for ({scenario!r}, {model!r})") from None
    for preset in PRESETS:
        if preset.scenario is scenario and preset.model is model:
            return preset
    raise PdpError(f"no preset for ({scenario.value}, {model.value})")


def preset_ds(scenario, model) -> float:
    return get_preset(scenario, model).ds_ns


def preset_profile(scenario, model) -> PowerDelayProfile:
    preset = get_preset(scenario, model)
    return scaled_profile(preset.model, preset.ds_ns)
