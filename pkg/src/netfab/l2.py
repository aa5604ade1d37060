"""MAC-learning Layer-2 switches with per-port VLAN membership and LAG hashing."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .packet import (Frame, FlowKey, InvalidVid, check_vid, classify_dst,
                     frame_flow_key, pop_tag, push_tag)

DEFAULT_FDB_AGING_US = 300_000_000  # 300 s


class L2Error(Exception):
    pass


class UnknownPort(L2Error):
    pass


class NoLiveMember(L2Error):
    pass


@dataclass
class PortConfig:
    port_id: int
    mode: str  # "access" | "trunk"
    vid: Optional[int] = None
    allowed: frozenset = frozenset()
    lag_group: Optional[str] = None
    up: bool = True

    def __post_init__(self):
        if self.mode == "access":
            check_vid(self.vid)
            self.allowed = frozenset()
        elif self.mode == "trunk":
            if not self.allowed:
                raise InvalidVid("trunk allowed set must be non-empty")
            self.allowed = frozenset(check_vid(v) for v in self.allowed)
            self.vid = None
        else:
            raise ValueError(f"unknown port mode {self.mode!r}")

    def member_of(self, vid: int) -> bool:
        if self.mode == "access":
            return self.vid == vid
        return vid in self.allowed


@dataclass
class FdbEntry:
    vlan: int
    mac: "MacAddress"
    port: int
    last_seen: int


def lag_select(members: list, key: FlowKey, salt: bytes = b"") -> int:
    """Pick a LAG member for a flow by rendezvous hashing.

    Deterministic per key, near-uniform over random keys, and a member
    going down only remaps the flows that used it.
    """
    if not members:
        raise NoLiveMember("no live member in LAG group")
    raw = (f"{key.src_ip},{key.dst_ip},{key.protocol},"
           f"{key.src_port},{key.dst_port}|").encode() + salt
    best, best_w = None, -1
    for m in members:
        w = int.from_bytes(
            hashlib.blake2b(raw + str(m).encode(), digest_size=8).digest(), "big")
        if w > best_w:
            best, best_w = m, w
    return best


class Switch:
    """One VLAN-aware learning bridge; owned by a single engine."""

    def __init__(self, name: str, fdb_aging_us: int = DEFAULT_FDB_AGING_US,
                 hash_salt: bytes = b""):
        self.name = name
        self.ports: dict[int, PortConfig] = {}
        self.fdb: dict[tuple, FdbEntry] = {}
        self.fdb_aging_us = fdb_aging_us
        self.hash_salt = hash_salt
        self.counters: dict[int, dict[str, int]] = {}

    def _counters(self, port_id: int) -> dict[str, int]:
        c = self.counters.get(port_id)
        if c is None:
            c = {"rx_frames": 0, "rx_bytes": 0, "tx_frames": 0,
                 "tx_bytes": 0, "drop_frames": 0, "drop_bytes": 0}
            self.counters[port_id] = c
        return c

    def configure_port(self, port_id: int, mode: str, vid: Optional[int] = None,
                       allowed=(), lag_group: Optional[str] = None) -> PortConfig:
        if port_id in self.ports and lag_group is None:
            lag_group = self.ports[port_id].lag_group
        cfg = PortConfig(port_id=port_id, mode=mode, vid=vid,
                         allowed=frozenset(allowed), lag_group=lag_group)
        self.ports[port_id] = cfg
        self._counters(port_id)
        # purge learned entries for VLANs this port no longer carries
        stale = [k for k, e in self.fdb.items()
                 if e.port == port_id and not cfg.member_of(e.vlan)]
        for k in stale:
            del self.fdb[k]
        return cfg

    def set_port_up(self, port_id: int, up: bool):
        if port_id not in self.ports:
            raise UnknownPort(f"{self.name} has no port {port_id}")
        self.ports[port_id].up = up

    def vlan_members(self, vid: int) -> list[int]:
        return [p for p, cfg in sorted(self.ports.items()) if cfg.member_of(vid)]

    def _drop(self, port_id: int, frame: Frame):
        c = self._counters(port_id)
        c["drop_frames"] += 1
        c["drop_bytes"] += frame.size_bytes

    def ingress(self, port_id: int, frame: Frame, now: int) -> list[tuple[int, Frame]]:
        """Process an arriving frame; returns (egress port, frame) emissions."""
        if port_id not in self.ports:
            raise UnknownPort(f"{self.name} has no port {port_id}")
        port = self.ports[port_id]
        c = self._counters(port_id)
        c["rx_frames"] += 1
        c["rx_bytes"] += frame.size_bytes
        if not port.up:
            self._drop(port_id, frame)
            return []

        # VLAN classification
        if frame.tag is None and port.mode == "access":
            vid = port.vid
            inner = frame
        elif frame.tag is not None and port.mode == "trunk" and frame.tag.vid in port.allowed:
            inner, vid = pop_tag(frame)
        else:
            self._drop(port_id, frame)
            return []

        # learning
        if not frame.src.is_multicast:
            self.fdb[(vid, frame.src)] = FdbEntry(vid, frame.src, port_id, now)

        # forwarding decision
        targets: list[int] = []
        entry = self.fdb.get((vid, frame.dst)) if classify_dst(inner) == "unicast" else None
        if entry is not None:
            if entry.port != port_id:
                tcfg = self.ports.get(entry.port)
                if tcfg is not None and tcfg.member_of(vid):
                    targets = [self._lag_resolve(entry.port, vid, inner)]
                    targets = [t for t in targets if t is not None]
            # destination behind the ingress port: filter silently
        else:
            targets = self._flood_targets(port_id, vid, inner)

        out: list[tuple[int, Frame]] = []
        for t in targets:
            tcfg = self.ports[t]
            if tcfg.mode == "access":
                emitted = inner
            else:
                emitted = push_tag(inner, vid)
            tc = self._counters(t)
            tc["tx_frames"] += 1
            tc["tx_bytes"] += emitted.size_bytes
            out.append((t, emitted))
        return out

    def _lag_resolve(self, port_id: int, vid: int, inner: Frame) -> Optional[int]:
        """Map a chosen port to a live member of its LAG group (itself if ungrouped)."""
        cfg = self.ports[port_id]
        if cfg.lag_group is None:
            return port_id if cfg.up else None
        live = [p for p, c in sorted(self.ports.items())
                if c.lag_group == cfg.lag_group and c.up and c.member_of(vid)]
        if not live:
            return None
        return lag_select(live, frame_flow_key(inner), self.hash_salt)

    def _flood_targets(self, ingress_port: int, vid: int, inner: Frame) -> list[int]:
        targets = []
        seen_groups = set()
        ingress_group = self.ports[ingress_port].lag_group
        for p, cfg in sorted(self.ports.items()):
            if p == ingress_port or not cfg.up or not cfg.member_of(vid):
                continue
            if cfg.lag_group is not None:
                if cfg.lag_group == ingress_group or cfg.lag_group in seen_groups:
                    continue
                seen_groups.add(cfg.lag_group)
                choice = self._lag_resolve(p, vid, inner)
                if choice is not None:
                    targets.append(choice)
            else:
                targets.append(p)
        return targets

    def age_fdb(self, now: int):
        stale = [k for k, e in self.fdb.items()
                 if now - e.last_seen > self.fdb_aging_us]
        for k in stale:
            del self.fdb[k]

    def reset_dynamic(self):
        self.fdb.clear()
