"""
Relay topology and per-hop channel processes.

The network is a directed graph ``tx -> relay_n -> rx`` plus the direct
edge ``tx -> rx``.  Every edge is a hop with its own channel process; a
link is a simple path from ``tx`` to ``rx`` (index 0 direct, index n the
two-hop path through relay n).

Two channel scenarios share one interface:

* ``los``   -- one LOS path per hop with Gauss-Markov drift and Markov
  blockage.
* ``trace`` -- paths ray-traced every slot from vehicle trajectories; the
  blockage chain and drift are disabled.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from app.beams.rate import se_table
from app.channel.arrays import PulseShape, build_codebook, raised_cosine
from app.channel.mobility import MobilityTrace, ingest_trajectories, synth_highway
from app.channel.paths import (
    PathSet,
    beamspace_gains,
    draw_pathset,
    evolve_paths,
    step_blockage,
)
from app.channel.raytrace import facing_ends, raytrace_paths
from app.core.config import ChannelParams, ExperimentConfig
from app.core.errors import ConfigError

logger = logging.getLogger(__name__)

Hop = tuple[str, str]

TX, RX = "tx", "rx"
_ROLE_RETRIES = 20


def relay_node(n: int) -> str:
    return f"relay{n}"


# ── Topology ───────────────────────────────────────────────────────

class RelayTopology:
    """Directed relay graph with deterministic link and hop ordering."""

    def __init__(self, n_relays: int) -> None:
        if n_relays < 0:
            raise ValueError("n_relays must be non-negative")
        self.n_relays = n_relays
        self.graph = nx.DiGraph()
        self.graph.add_node(TX, role="tx")
        self.graph.add_node(RX, role="rx")
        self.graph.add_edge(TX, RX)
        for n in range(1, n_relays + 1):
            self.graph.add_node(relay_node(n), role="relay", index=n)
            self.graph.add_edge(TX, relay_node(n))
            self.graph.add_edge(relay_node(n), RX)
        self._links = self._enumerate_links()

    def _enumerate_links(self) -> list[list[str]]:
        def key(path: list[str]) -> int:
            return 0 if len(path) == 2 else self.graph.nodes[path[1]]["index"]

        paths = sorted(nx.all_simple_paths(self.graph, TX, RX, cutoff=2), key=key)
        if len(paths) != self.n_relays + 1:
            raise RuntimeError("relay graph does not have one path per relay")
        return paths

    @property
    def n_links(self) -> int:
        return len(self._links)

    def link_nodes(self, link: int) -> list[str]:
        return list(self._links[link])

    def link_hops(self, link: int) -> list[Hop]:
        """Hops of *link* in transmission order."""
        nodes = self._links[link]
        return list(zip(nodes[:-1], nodes[1:]))

    @property
    def hops(self) -> list[Hop]:
        """Every hop once: the direct hop, then both hops of each relay."""
        return [hop for link in range(self.n_links) for hop in self.link_hops(link)]


# ── Per-hop state ──────────────────────────────────────────────────

@dataclass
class HopChannel:
    """Channel state of one hop plus the codebooks of its endpoints."""

    params: ChannelParams
    cb_tx: np.ndarray
    cb_rx: np.ndarray
    pulse: PulseShape
    pathset: PathSet = field(default_factory=PathSet)
    _gains: np.ndarray | None = field(default=None, repr=False)
    _tables: dict[float, np.ndarray] = field(default_factory=dict, repr=False)

    def set_pathset(self, pathset: PathSet) -> None:
        self.pathset = pathset
        self._gains = None
        self._tables.clear()

    @property
    def blocked(self) -> bool:
        return self.pathset.is_blocked

    def gains(self) -> np.ndarray:
        """Beam-space gains (K, |W|, |F|) of the current slot."""
        if self._gains is None:
            self._gains = beamspace_gains(
                self.pathset, self.params, self.cb_tx, self.cb_rx, self.pulse
            )
        return self._gains

    def table(self, snr: float) -> np.ndarray:
        """Spectral efficiency (|W|, |F|) of every pair at *snr*."""
        if snr not in self._tables:
            self._tables[snr] = se_table(self.gains(), snr)
        return self._tables[snr]

    def best_se(self, snr: float) -> float:
        return float(self.table(snr).max())


def _codebook_size(cfg: ExperimentConfig, node: str) -> int:
    if node == TX:
        return cfg.beams.codebook_tx
    if node == RX:
        return cfg.beams.codebook_rx
    return cfg.beams.codebook_relay


def _build_hops(cfg: ExperimentConfig, topology: RelayTopology) -> dict[Hop, HopChannel]:
    hops: dict[Hop, HopChannel] = {}
    for src, dst in topology.hops:
        params = cfg.hop_params(src, dst)
        hops[(src, dst)] = HopChannel(
            params=params,
            cb_tx=build_codebook(params.n_tx, _codebook_size(cfg, src)),
            cb_rx=build_codebook(params.n_rx, _codebook_size(cfg, dst)),
            pulse=raised_cosine(params.symbol_period, params.rolloff),
        )
    return hops


# ── Channel processes ──────────────────────────────────────────────

class ChannelProcess(ABC):
    """Time-varying channels of every hop, advanced one slot at a time."""

    def __init__(self, cfg: ExperimentConfig, topology: RelayTopology) -> None:
        self.cfg = cfg
        self.topology = topology
        self.hops = _build_hops(cfg, topology)
        self.slot = 0

    def hop(self, hop: Hop) -> HopChannel:
        if hop not in self.hops:
            raise KeyError(f"Unknown hop {hop!r}")
        return self.hops[hop]

    @abstractmethod
    def advance(self) -> None:
        """Move every hop to the next slot."""
        ...


class LosChannelProcess(ChannelProcess):
    """Single LOS path per hop, Gauss-Markov drift and Markov blockage."""

    def __init__(
        self, cfg: ExperimentConfig, topology: RelayTopology, rng: np.random.Generator
    ) -> None:
        super().__init__(cfg, topology)
        self.rng = rng
        for hop in self.hops.values():
            hop.set_pathset(draw_pathset(hop.params, rng, n_paths=1))

    def advance(self) -> None:
        for hop in self.hops.values():
            ps = evolve_paths(hop.pathset, hop.params, self.rng)
            hop.set_pathset(step_blockage(ps, hop.params, self.rng))
        self.slot += 1


class TraceChannelProcess(ChannelProcess):
    """Paths ray-traced from vehicle positions at ``slot * slot_duration``."""

    def __init__(
        self, cfg: ExperimentConfig, topology: RelayTopology, trace: MobilityTrace
    ) -> None:
        super().__init__(cfg, topology)
        if trace.roles is None:
            raise ConfigError("trace scenario needs role assignments")
        if len(trace.roles.relays) < topology.n_relays:
            raise ConfigError(
                f"trace assigns {len(trace.roles.relays)} relays, need {topology.n_relays}"
            )
        self.trace = trace
        self.vehicles = {TX: trace.roles.tx, RX: trace.roles.rx}
        for n in range(1, topology.n_relays + 1):
            self.vehicles[relay_node(n)] = trace.roles.relays[n - 1]
        self.d_ref = self._reference_distance()
        self._clamped = False
        self._trace_hops()

    def _reference_distance(self) -> float:
        # median LOS length at t=0 is normalised to the configured SNR
        lengths = []
        for src, dst in self.hops:
            a, b = facing_ends(self.trace, self.vehicles[src], self.vehicles[dst], 0.0)
            lengths.append(float(np.hypot(a[0] - b[0], a[1] - b[1])))
        return float(np.median(lengths))

    def _time(self) -> float:
        t = self.slot * self.cfg.slot_duration
        end = self.trace.end_time
        if t > end:
            if not self._clamped:
                logger.warning("Trace ends at %.3f s; holding final positions", end)
                self._clamped = True
            t = end
        return t

    def _trace_hops(self) -> None:
        t = self._time()
        mob = self.cfg.mobility
        for (src, dst), hop in self.hops.items():
            hop.set_pathset(
                raytrace_paths(
                    self.trace,
                    self.vehicles[src],
                    self.vehicles[dst],
                    t,
                    vehicle_width=mob.vehicle_width,
                    carrier_freq=mob.carrier_freq,
                    d_ref=self.d_ref,
                )
            )

    def advance(self) -> None:
        self.slot += 1
        self._trace_hops()


def load_trace(cfg: ExperimentConfig, rng: np.random.Generator) -> MobilityTrace:
    """
    Trajectories for the trace scenario: the configured file, or a
    synthetic highway long enough for the run.  Synthetic draws without
    enough vehicles for the roles are retried.
    """
    mob = cfg.mobility
    if mob.trace_file is not None:
        return ingest_trajectories(mob.trace_file, roles=mob.roles)

    duration = cfg.horizon * cfg.slot_duration
    for attempt in range(1, _ROLE_RETRIES + 1):
        trace = synth_highway(
            mob.density,
            mob.speed_kmh,
            mob.lanes,
            mob.road_length,
            duration,
            rng,
            speed_spread=mob.speed_spread,
            lane_width=mob.lane_width,
            vehicle_length=mob.vehicle_length,
            sample_period=mob.sample_period,
            n_relays=cfg.n_relays,
            link_distance=mob.link_distance,
        )
        if trace.roles is not None:
            return trace
        logger.warning(
            "Synthetic highway drew %d vehicles, too few for %d relays (attempt %d)",
            len(trace), cfg.n_relays, attempt,
        )
    raise ConfigError(
        f"Could not draw a highway with {cfg.n_relays + 2} vehicles "
        f"after {_ROLE_RETRIES} attempts; raise mobility.density"
    )


def build_channel_process(
    cfg: ExperimentConfig,
    topology: RelayTopology,
    channel_rng: np.random.Generator,
    mobility_rng: np.random.Generator,
) -> ChannelProcess:
    if cfg.scenario == "los":
        return LosChannelProcess(cfg, topology, channel_rng)
    return TraceChannelProcess(cfg, topology, load_trace(cfg, mobility_rng))
