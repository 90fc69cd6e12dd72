"""Closed-form delay and device-energy models for tiered health reporting.

A scenario describes one report cycle: sensor accumulation on the phone,
uplink/downlink transfers (each with a failure-rate multiplier), and
processing split across phone, fog node, and cloud. Delay terms:

    ca   = delay_mob + max(delay_h, delay_c)
    com  = Σ uplinks (1+f)·D/R + Σ downlinks (1+f)·D/R
    pro  = D_mob/S_mob + D_f/S_f + D_c/S_c
    total = ca + com + pro

Device energy charges transmit/receive power for the phone's own links,
idle power while other tiers talk or compute, and active power while the
phone accumulates or processes. The cloud-only variant of a scenario has no
fog processing share (D_f = 0) and routes the payload over WAN links.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

MB_BITS = 8_000_000.0


class FogError(ValueError):
    """Invalid scenario parameter."""


@dataclass(frozen=True)
class Link:
    bits: float
    rate_bps: float
    failure_rate: float
    smartphone: bool

    def __post_init__(self) -> None:
        if self.rate_bps <= 0:
            raise FogError(f"link rate must be > 0, got {self.rate_bps}")
        if self.bits < 0 or self.failure_rate < 0:
            raise FogError("link bits and failure rate must be >= 0")

    @property
    def airtime_s(self) -> float:
        return (1.0 + self.failure_rate) * self.bits / self.rate_bps


@dataclass(frozen=True)
class FogScenario:
    delay_mob: float
    delay_h: float
    delay_c: float
    uplinks: tuple[Link, ...]
    downlinks: tuple[Link, ...]
    d_mob: float
    s_mob: float
    d_f: float
    s_f: float
    d_c: float
    s_c: float
    p_t: float
    p_r: float
    p_a: float
    p_i: float

    def __post_init__(self) -> None:
        for name in ("s_mob", "s_f", "s_c"):
            if getattr(self, name) <= 0:
                raise FogError(f"{name} must be > 0")
        for name in ("delay_mob", "delay_h", "delay_c", "d_mob", "d_f", "d_c", "p_t", "p_r", "p_a", "p_i"):
            if getattr(self, name) < 0:
                raise FogError(f"{name} must be >= 0")

    @property
    def m(self) -> int:
        return len(self.uplinks)

    @property
    def n(self) -> int:
        return len(self.downlinks)

    @property
    def k(self) -> int:
        return sum(1 for l in self.uplinks if l.smartphone)

    @property
    def q(self) -> int:
        return sum(1 for l in self.downlinks if l.smartphone)


@dataclass(frozen=True)
class CostBreakdown:
    ca: float
    com: float
    pro: float

    @property
    def total(self) -> float:
        return self.ca + self.com + self.pro


def delay_total(s: FogScenario) -> CostBreakdown:
    """Per-phase delays in seconds."""
    ca = s.delay_mob + max(s.delay_h, s.delay_c)
    com = sum(l.airtime_s for l in s.uplinks) + sum(l.airtime_s for l in s.downlinks)
    pro = s.d_mob / s.s_mob + s.d_f / s.s_f + s.d_c / s.s_c
    return CostBreakdown(ca=ca, com=com, pro=pro)


def power_total(s: FogScenario) -> CostBreakdown:
    """Per-phase smartphone energy in joules."""
    ca = s.p_a * s.delay_mob + s.p_r * max(s.delay_h, s.delay_c)
    com = (
        s.p_t * sum(l.airtime_s for l in s.uplinks if l.smartphone)
        + s.p_r * sum(l.airtime_s for l in s.downlinks if l.smartphone)
        + s.p_i * sum(l.airtime_s for l in s.uplinks if not l.smartphone)
        + s.p_i * sum(l.airtime_s for l in s.downlinks if not l.smartphone)
    )
    pro = s.p_a * (s.d_mob / s.s_mob) + s.p_i * (s.d_f / s.s_f) + s.p_i * (s.d_c / s.s_c)
    return CostBreakdown(ca=ca, com=com, pro=pro)


@dataclass(frozen=True)
class ArchitectureComparison:
    delay_reduction_pct: float
    power_reduction_pct: float


def compare_architectures(fog: FogScenario, cloud_only: FogScenario) -> ArchitectureComparison:
    """Percent total-delay and total-energy reduction of fog over cloud-only."""
    cloud_delay = delay_total(cloud_only).total
    cloud_power = power_total(cloud_only).total
    if cloud_delay == 0 or cloud_power == 0:
        raise FogError("cloud-only totals must be nonzero for a comparison")
    fog_delay = delay_total(fog).total
    fog_power = power_total(fog).total
    return ArchitectureComparison(
        delay_reduction_pct=100.0 * (cloud_delay - fog_delay) / cloud_delay,
        power_reduction_pct=100.0 * (cloud_power - fog_power) / cloud_power,
    )


# ---------------------------------------------------------------------------
# Reference pipeline parameters and payload sweep

@dataclass(frozen=True)
class PipelineParams:
    """Rates, shares, and power states for building payload-sized scenarios.

    These are repository configuration values typical of an LTE smartphone
    reporting through a LAN-attached fog node versus directly to a WAN cloud;
    they are the committed basis for the reduction-band checks.
    """

    delay_mob: float = 0.05
    delay_h: float = 0.4
    delay_c: float = 0.25
    # link rates (bits/s) and failure rates
    lan_up_rate: float = 8e6
    lan_up_fail: float = 0.02
    lan_down_rate: float = 3e7
    lan_down_fail: float = 0.02
    wan_up_rate: float = 1e7
    wan_up_fail: float = 0.05
    wan_down_rate: float = 2e7
    wan_down_fail: float = 0.05
    phone_wan_up_rate: float = 5e6
    phone_wan_up_fail: float = 0.08
    phone_wan_down_rate: float = 8e6
    phone_wan_down_fail: float = 0.08
    # processing shares of the payload and tier speeds (bits/s)
    share_mob: float = 0.1
    share_fog: float = 0.85
    share_cloud: float = 0.05
    summary_share: float = 0.05
    result_share: float = 0.01
    s_mob: float = 5e7
    s_f: float = 2e8
    s_c: float = 1e9
    # phone power states (W)
    p_t: float = 1.8
    p_r: float = 1.2
    p_a: float = 2.0
    p_i: float = 0.1


def reference_scenarios(payload_bits: float, params: PipelineParams | None = None) -> tuple[FogScenario, FogScenario]:
    """(fog, cloud_only) scenarios for one payload size.

    In the fog pipeline the phone uploads the payload over the LAN, the fog
    node processes most of it and forwards a summary to the cloud. The
    cloud-only pipeline ships the payload straight to the cloud over the
    phone's WAN link and moves the fog processing share to the cloud.
    """
    p = params or PipelineParams()
    if payload_bits <= 0:
        raise FogError("payload_bits must be > 0")
    d = payload_bits
    common = dict(
        delay_mob=p.delay_mob,
        delay_h=p.delay_h,
        delay_c=p.delay_c,
        d_mob=p.share_mob * d,
        s_mob=p.s_mob,
        s_f=p.s_f,
        s_c=p.s_c,
        p_t=p.p_t,
        p_r=p.p_r,
        p_a=p.p_a,
        p_i=p.p_i,
    )
    fog = FogScenario(
        uplinks=(
            Link(d, p.lan_up_rate, p.lan_up_fail, smartphone=True),
            Link(p.summary_share * d, p.wan_up_rate, p.wan_up_fail, smartphone=False),
        ),
        downlinks=(
            Link(p.result_share * d, p.wan_down_rate, p.wan_down_fail, smartphone=False),
            Link(p.result_share * d, p.lan_down_rate, p.lan_down_fail, smartphone=True),
        ),
        d_f=p.share_fog * d,
        d_c=p.share_cloud * d,
        **common,
    )
    cloud = FogScenario(
        uplinks=(Link(d, p.phone_wan_up_rate, p.phone_wan_up_fail, smartphone=True),),
        downlinks=(Link(p.result_share * d, p.phone_wan_down_rate, p.phone_wan_down_fail, smartphone=True),),
        d_f=0.0,
        d_c=(p.share_fog + p.share_cloud) * d,
        **common,
    )
    return fog, cloud


def sweep_payloads(
    payloads_bits: Sequence[float], params: PipelineParams | None = None
) -> list[dict]:
    """Delay/energy comparison rows across payload sizes."""
    rows = []
    for d in payloads_bits:
        fog, cloud = reference_scenarios(d, params)
        cmp = compare_architectures(fog, cloud)
        rows.append(
            {
                "payload_bits": d,
                "fog_delay_s": delay_total(fog).total,
                "cloud_delay_s": delay_total(cloud).total,
                "delay_reduction_pct": cmp.delay_reduction_pct,
                "fog_energy_j": power_total(fog).total,
                "cloud_energy_j": power_total(cloud).total,
                "power_reduction_pct": cmp.power_reduction_pct,
            }
        )
    return rows


SWEEP_COLUMNS = (
    "payload_bits",
    "fog_delay_s",
    "cloud_delay_s",
    "delay_reduction_pct",
    "fog_energy_j",
    "cloud_energy_j",
    "power_reduction_pct",
)


def sweep_to_csv(rows: Sequence[Mapping[str, float]]) -> str:
    out = io.StringIO()
    out.write(",".join(SWEEP_COLUMNS) + "\n")
    for row in rows:
        out.write(",".join(repr(float(row[c])) for c in SWEEP_COLUMNS) + "\n")
    return out.getvalue()


DEFAULT_SWEEP_MB = tuple(float(x) for x in (1, 2, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100))


# ---------------------------------------------------------------------------
# Flat key-value scenario files

_SCENARIO_HEADER = "# epimob-fog-scenario v1"


def save_scenario(s: FogScenario) -> str:
    lines = [_SCENARIO_HEADER]
    for name in ("delay_mob", "delay_h", "delay_c", "d_mob", "s_mob", "d_f", "s_f", "d_c", "s_c", "p_t", "p_r", "p_a", "p_i"):
        lines.append(f"{name} = {getattr(s, name)!r}")
    for i, l in enumerate(s.uplinks, start=1):
        lines.append(f"uplink{i} = {l.bits!r} {l.rate_bps!r} {l.failure_rate!r} {'phone' if l.smartphone else 'other'}")
    for j, l in enumerate(s.downlinks, start=1):
        lines.append(f"downlink{j} = {l.bits!r} {l.rate_bps!r} {l.failure_rate!r} {'phone' if l.smartphone else 'other'}")
    return "\n".join(lines) + "\n"


def load_scenario(text: str) -> FogScenario:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _SCENARIO_HEADER:
        raise FogError(f"missing scenario header {_SCENARIO_HEADER!r}")
    scalars: dict[str, float] = {}
    uplinks: dict[int, Link] = {}
    downlinks: dict[int, Link] = {}
    for ln, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FogError(f"line {ln}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("uplink") or key.startswith("downlink"):
            pool = uplinks if key.startswith("uplink") else downlinks
            idx = int(key.removeprefix("uplink").removeprefix("downlink") or "0")
            fields = value.split()
            if len(fields) != 4 or fields[3] not in ("phone", "other"):
                raise FogError(f"line {ln}: link needs 'bits rate failure phone|other'")
            pool[idx] = Link(float(fields[0]), float(fields[1]), float(fields[2]), fields[3] == "phone")
        else:
            scalars[key] = float(value)
    required = {"delay_mob", "delay_h", "delay_c", "d_mob", "s_mob", "d_f", "s_f", "d_c", "s_c", "p_t", "p_r", "p_a", "p_i"}
    missing = required - scalars.keys()
    if missing:
        raise FogError(f"scenario missing keys: {sorted(missing)}")
    return FogScenario(
        uplinks=tuple(uplinks[i] for i in sorted(uplinks)),
        downlinks=tuple(downlinks[i] for i in sorted(downlinks)),
        **{k: scalars[k] for k in required},
    )
