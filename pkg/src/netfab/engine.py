"""Deterministic discrete-event core: time, links, hosts, middleboxes, metrics."""
from __future__ import annotations

import heapq
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .firewall import Firewall, NoScope, PoolExhausted, Shaper
from .l2 import Switch
from .l3 import ZonePolicy, ZoneRouter
from .packet import (Arp, BROADCAST, Frame, MacAddress, Packet, FlowKey,
                     flow_key, in_network, ip_str, make_frame, pop_tag,
                     prefix_mask, push_tag)
from .resilience import LoadBalancer, Unavailable

DEFAULT_PROP_US = 5
DEFAULT_LINK_QUEUE = 256
DEFAULT_SHAPE_INTERVAL_US = 1_000
FDB_AGE_SWEEP_US = 60_000_000
NAT_SWEEP_US = 10_000_000
ARP_RETRY_US = 1_000_000
BULK_WINDOW = 65_536
BULK_SEGMENT = 1_460
BULK_ACK_EVERY = 4
CBR_PACKET = 1_500
PING_INTERVAL_US = 1_000_000


class UnknownTarget(Exception):
    pass


def bulk_transfer_time(rate_cap_bps: float, total_bytes: float) -> float:
    """Ideal lower bound (seconds) for a transfer through a rate-capped path."""
    if rate_cap_bps <= 0:
        raise ValueError("rate_cap must be > 0")
    return total_bytes * 8 / rate_cap_bps


@dataclass
class TrafficSpec:
    kind: str  # cbr | bulk | ping
    src: str
    dst: str
    flow_id: str
    dst_ip: int = 0
    start_us: int = 0
    stop_us: Optional[int] = None
    rate_bps: int = 0
    total_bytes: int = 0
    count: int = 0
    src_port: int = 0
    dst_port: int = 0


@dataclass
class Link:
    link_id: str
    a: tuple[str, object]
    b: tuple[str, object]
    bandwidth_bps: int
    prop_us: int = DEFAULT_PROP_US
    up: bool = True
    queue_cap: int = DEFAULT_LINK_QUEUE
    busy_until: list = field(default_factory=lambda: [0, 0])
    pending: list = field(default_factory=lambda: [0, 0])
    bytes_dir: list = field(default_factory=lambda: [0, 0])

    def other_end(self, direction: int) -> tuple[str, object]:
        return self.b if direction == 0 else self.a


@dataclass
class FlowStats:
    offered_packets: int = 0
    offered_bytes: int = 0
    offered_payload: int = 0
    delivered_packets: int = 0
    delivered_bytes: int = 0
    delivered_payload: int = 0
    first_tx: Optional[int] = None
    completed_at: Optional[int] = None


class Metrics:
    def __init__(self):
        self.flows: dict[str, FlowStats] = {}
        self.drops: Counter = Counter()
        self.link_bytes: Counter = Counter()
        self.fw_window: dict[str, Counter] = defaultdict(Counter)
        self.unavailable = 0
        self.frames_created = 0
        self.frames_consumed = 0
        self.frames_filtered = 0
        self.host_delivered = 0

    def flow(self, fid: str) -> FlowStats:
        st = self.flows.get(fid)
        if st is None:
            st = FlowStats()
            self.flows[fid] = st
        return st

    def drop(self, node: str, reason: str):
        self.drops[(node, reason)] += 1

    def dropped_total(self) -> int:
        return sum(self.drops.values())

    def fw_forwarded_bytes(self, fw: str) -> int:
        return sum(self.fw_window[fw].values())

    def fw_rate_bps(self, fw: str, t0_s: int, t1_s: int) -> float:
        total = sum(v for sec, v in self.fw_window[fw].items() if t0_s <= sec < t1_s)
        return total * 8 / max(t1_s - t0_s, 1)

    def summary_lines(self) -> list[str]:
        lines = [
            f"frames_created={self.frames_created}",
            f"frames_consumed={self.frames_consumed}",
            f"frames_filtered={self.frames_filtered}",
            f"host_delivered={self.host_delivered}",
            f"drops_total={self.dropped_total()}",
            f"unavailable={self.unavailable}",
        ]
        for (node, reason), n in sorted(self.drops.items()):
            lines.append(f"drop.{node}.{reason}={n}")
        for fw in sorted(self.fw_window):
            lines.append(f"fw_forwarded_bytes.{fw}={self.fw_forwarded_bytes(fw)}")
        lines.append("flow\toffered_B\tdelivered_B\tpayload_B\tcompleted_s")
        for fid in sorted(self.flows):
            st = self.flows[fid]
            done = f"{st.completed_at / 1e6:.6f}" if st.completed_at is not None else "-"
            lines.append(f"{fid}\t{st.offered_bytes}\t{st.delivered_bytes}"
                         f"\t{st.delivered_payload}\t{done}")
        return lines


class Engine:
    """Single-owner event loop; identical (scenario, seed) gives identical traces."""

    def __init__(self, seed: int = 0, trace: bool = False):
        self.seed = seed
        self.rng = random.Random(seed)
        self.hash_salt = seed.to_bytes(8, "big", signed=True)
        self.now = 0
        self._seq = 0
        self._heap: list = []
        self.nodes: dict[str, "Node"] = {}
        self.links: dict[str, Link] = {}
        self.link_at: dict[tuple, Link] = {}
        self.metrics = Metrics()
        self.trace_enabled = trace
        self.trace_lines: list[str] = []

    # -- construction ------------------------------------------------------

    def add_node(self, node: "Node") -> "Node":
        if node.name in self.nodes:
            raise ValueError(f"duplicate node {node.name}")
        self.nodes[node.name] = node
        return node

    def add_link(self, a_node: str, a_port, b_node: str, b_port,
                 bandwidth_bps: int, prop_us: int = DEFAULT_PROP_US,
                 queue_cap: int = DEFAULT_LINK_QUEUE) -> Link:
        link_id = f"{a_node}:{a_port}-{b_node}:{b_port}"
        link = Link(link_id, (a_node, a_port), (b_node, b_port),
                    bandwidth_bps, prop_us, queue_cap=queue_cap)
        self.links[link_id] = link
        self.link_at[(a_node, a_port)] = link
        self.link_at[(b_node, b_port)] = link
        return link

    # -- event machinery ---------------------------------------------------

    def schedule(self, at: int, kind: str, target: str, payload=None):
        self._seq += 1
        heapq.heappush(self._heap, (at, self._seq, kind, target, payload))

    def inject_fault(self, at_us: int, action: str, target: str):
        if action not in ("fail_node", "fail_link", "recover"):
            raise ValueError(f"unknown fault action {action!r}")
        if target not in self.nodes and target not in self.links:
            raise UnknownTarget(target)
        self.schedule(at_us, "fault", target, action)

    def run_until(self, t_end_us: int) -> Metrics:
        if t_end_us < self.now:
            raise ValueError("cannot run backwards")
        while self._heap and self._heap[0][0] <= t_end_us:
            at, _seq, kind, target, payload = heapq.heappop(self._heap)
            self.now = at
            self._dispatch(kind, target, payload)
        self.now = t_end_us
        return self.metrics

    def _dispatch(self, kind: str, target: str, payload):
        if kind == "fault":
            self._apply_fault(target, payload)
            return
        if kind == "deliver":
            port, frame, link, direction = payload
            link.pending[direction] -= 1
            self.metrics.frames_consumed += 1
            if not link.up:
                self.metrics.drop(link.link_id, "link-down")
                return
            node = self.nodes[target]
            if node.failed:
                self.metrics.drop(target, "fault")
                self.trace(target, "drop", None, None, "node failed")
                return
            node.on_frame(port, frame)
            return
        node = self.nodes.get(target)
        if node is None:
            return
        if kind == "traffic" and node.failed:
            return
        # tick chains stay alive across faults; handlers skip work while failed
        node.on_event(kind, payload)

    def _apply_fault(self, target: str, action: str):
        self.trace(target, "fault", None, None, action)
        if target in self.links:
            self.links[target].up = action == "recover"
            return
        node = self.nodes[target]
        if action == "recover":
            node.failed = False
            node.reset_dynamic()
        else:
            node.failed = True

    # -- frame transport ---------------------------------------------------

    def send(self, node_name: str, port, frame: Frame):
        link = self.link_at.get((node_name, port))
        if link is None:
            self.metrics.drop(node_name, "no-link")
            return
        if not link.up:
            self.metrics.drop(node_name, "link-down")
            return
        direction = 0 if link.a == (node_name, port) else 1
        if link.pending[direction] >= link.queue_cap:
            self.metrics.drop(node_name, "queue")
            return
        ser = frame.size_bytes * 8 * 1_000_000 // link.bandwidth_bps
        start = max(self.now, link.busy_until[direction])
        link.busy_until[direction] = start + ser
        arrival = start + ser + link.prop_us
        link.pending[direction] += 1
        link.bytes_dir[direction] += frame.size_bytes
        self.metrics.link_bytes[link.link_id] += frame.size_bytes
        self.metrics.frames_created += 1
        dest_node, dest_port = link.other_end(direction)
        self.schedule(arrival, "deliver", dest_node,
                      (dest_port, frame, link, direction))

    def residual_frames(self) -> int:
        return sum(l.pending[0] + l.pending[1] for l in self.links.values())

    # -- trace -------------------------------------------------------------

    def trace(self, node: str, ev: str, vlan, flow, info: str):
        if not self.trace_enabled:
            return
        vstr = str(vlan) if vlan is not None else "-"
        fstr = str(flow) if flow is not None else "-"
        self.trace_lines.append(
            f"t={self.now}\tnode={node}\tev={ev}\tvlan={vstr}\tflow={fstr}\tinfo={info}")

    def trace_text(self) -> str:
        return "\n".join(self.trace_lines) + ("\n" if self.trace_lines else "")


class Node:
    kind = "node"

    def __init__(self, engine: Engine, name: str):
        self.engine = engine
        self.name = name
        self.failed = False
        engine.add_node(self)

    def on_frame(self, port, frame: Frame):
        raise NotImplementedError

    def on_event(self, kind: str, payload):
        pass

    def reset_dynamic(self):
        pass


class SwitchNode(Node):
    kind = "switch"

    def __init__(self, engine: Engine, name: str, fdb_aging_us=None):
        super().__init__(engine, name)
        kwargs = {"hash_salt": engine.hash_salt}
        if fdb_aging_us is not None:
            kwargs["fdb_aging_us"] = fdb_aging_us
        self.switch = Switch(name, **kwargs)
        engine.schedule(FDB_AGE_SWEEP_US, "age_tick", name)

    def on_frame(self, port, frame: Frame):
        for out_port, out_frame in self.switch.ingress(port, frame, self.engine.now):
            self.engine.send(self.name, out_port, out_frame)

    def on_event(self, kind: str, payload):
        if kind == "age_tick":
            self.engine.schedule(self.engine.now + FDB_AGE_SWEEP_US,
                                 "age_tick", self.name)
            if not self.failed:
                self.switch.age_fdb(self.engine.now)

    def reset_dynamic(self):
        self.switch.reset_dynamic()


class HostNode(Node):
    kind = "host"

    def __init__(self, engine: Engine, name: str, mac: MacAddress, ip: int,
                 prefix_len: int, gw_ip: Optional[int] = None,
                 group: Optional[str] = None):
        super().__init__(engine, name)
        self.mac = mac
        self.ip = ip
        self.prefix_len = prefix_len
        self.gw_ip = gw_ip
        self.group = group
        self.port = 0
        self.arp_cache: dict[int, MacAddress] = {}
        self.arp_last_req: dict[int, int] = {}
        self.arp_pending: dict[int, list[Packet]] = {}
        self.bulk_send: dict[str, dict] = {}
        self.bulk_recv: dict[str, dict] = {}
        self.ping_seen: Counter = Counter()
        self.generators: list[TrafficSpec] = []

    # -- traffic -----------------------------------------------------------

    def add_generator(self, spec: TrafficSpec):
        idx = len(self.generators)
        self.generators.append(spec)
        self.engine.schedule(spec.start_us, "traffic", self.name, ("start", idx))

    def on_event(self, kind: str, payload):
        if kind != "traffic":
            return
        if payload[0] == "ping":
            _, idx, seq = payload
            self._send_ping(self.generators[idx], idx, seq)
            return
        _, idx = payload
        spec = self.generators[idx]
        now = self.engine.now
        if spec.kind == "cbr":
            if spec.stop_us is not None and now >= spec.stop_us:
                return
            payload_bytes = CBR_PACKET - 40
            pkt = Packet(src_ip=self.ip, dst_ip=spec.dst_ip, protocol="udp",
                         src_port=spec.src_port, dst_port=spec.dst_port,
                         payload_bytes=payload_bytes,
                         meta=("cbr", spec.flow_id))
            self.send_packet(pkt, offered=True)
            interval = CBR_PACKET * 8 * 1_000_000 // spec.rate_bps
            self.engine.schedule(now + interval, "traffic", self.name, ("start", idx))
        elif spec.kind == "bulk":
            st = {"spec": spec, "sent": 0, "acked": 0}
            self.bulk_send[spec.flow_id] = st
            self._bulk_pump(spec.flow_id)
        elif spec.kind == "ping":
            self._send_ping(spec, idx, 0)

    def _send_ping(self, spec: TrafficSpec, idx: int, seq: int):
        pkt = Packet(src_ip=self.ip, dst_ip=spec.dst_ip, protocol="icmp",
                     payload_bytes=56, meta=("ping", spec.flow_id, "req", seq))
        self.send_packet(pkt, offered=True)
        if seq + 1 < spec.count:
            self.engine.schedule(self.engine.now + PING_INTERVAL_US, "traffic",
                                 self.name, ("ping", idx, seq + 1))

    def _bulk_pump(self, fid: str):
        st = self.bulk_send[fid]
        spec = st["spec"]
        while (st["sent"] < spec.total_bytes
               and st["sent"] - st["acked"] < BULK_WINDOW):
            seg = min(BULK_SEGMENT, spec.total_bytes - st["sent"])
            pkt = Packet(src_ip=self.ip, dst_ip=spec.dst_ip, protocol="tcp",
                         src_port=spec.src_port, dst_port=spec.dst_port,
                         payload_bytes=seg,
                         meta=("bulk", fid, "data", seg, spec.total_bytes))
            st["sent"] += seg
            self.send_packet(pkt, offered=True)

    # -- sending -----------------------------------------------------------

    def _next_hop(self, dst_ip: int) -> int:
        net = self.ip & prefix_mask(self.prefix_len)
        if in_network(dst_ip, net, self.prefix_len) or self.gw_ip is None:
            return dst_ip
        return self.gw_ip

    def send_packet(self, packet: Packet, offered: bool = False):
        if offered and packet.meta:
            st = self.engine.metrics.flow(packet.meta[1])
            st.offered_packets += 1
            st.offered_bytes += packet.size
            st.offered_payload += packet.payload_bytes
            if st.first_tx is None:
                st.first_tx = self.engine.now
            self.engine.trace(self.name, "tx", None, flow_key(packet),
                              f"kind={packet.meta[0]}")
        nh = self._next_hop(packet.dst_ip)
        mac = self.arp_cache.get(nh)
        if mac is not None:
            frame = make_frame(self.mac, mac, packet)
            self.engine.send(self.name, self.port, frame)
            return
        self.arp_pending.setdefault(nh, []).append(packet)
        last = self.arp_last_req.get(nh)
        if last is None or self.engine.now - last >= ARP_RETRY_US:
            self.arp_last_req[nh] = self.engine.now
            req = Arp("request", self.ip, self.mac, nh)
            self.engine.send(self.name, self.port,
                             make_frame(self.mac, BROADCAST, req))

    # -- receiving ---------------------------------------------------------

    def on_frame(self, port, frame: Frame):
        payload = frame.payload
        if isinstance(payload, Arp):
            self._on_arp(payload)
            return
        if not isinstance(payload, Packet):
            self.engine.metrics.frames_filtered += 1
            return
        if frame.dst != self.mac and not frame.dst.is_broadcast:
            self.engine.metrics.frames_filtered += 1
            return
        if payload.dst_ip != self.ip:
            self.engine.metrics.frames_filtered += 1
            return
        self._deliver(payload)

    def _on_arp(self, arp: Arp):
        if arp.op == "request" and arp.target_ip == self.ip:
            self.arp_cache[arp.sender_ip] = arp.sender_mac
            reply = Arp("reply", self.ip, self.mac, arp.sender_ip)
            self.engine.send(self.name, self.port,
                             make_frame(self.mac, arp.sender_mac, reply))
        elif arp.op == "reply" and arp.target_ip == self.ip:
            self.arp_cache[arp.sender_ip] = arp.sender_mac
            for pkt in self.arp_pending.pop(arp.sender_ip, []):
                mac = self.arp_cache[arp.sender_ip]
                self.engine.send(self.name, self.port,
                                 make_frame(self.mac, mac, pkt))
        else:
            self.engine.metrics.frames_filtered += 1

    def _deliver(self, pkt: Packet):
        m = self.engine.metrics
        meta = pkt.meta
        is_forward = bool(meta) and not (
            meta[0] == "bulk" and meta[2] == "ack") and not (
            meta[0] == "ping" and meta[2] == "rep")
        if meta and is_forward:
            st = m.flow(meta[1])
            st.delivered_packets += 1
            st.delivered_bytes += pkt.size
            st.delivered_payload += pkt.payload_bytes
            m.host_delivered += 1
            self.engine.trace(self.name, "rx", None, flow_key(pkt),
                              f"kind={meta[0]}")
        if not meta:
            return
        if meta[0] == "bulk":
            self._on_bulk(pkt)
        elif meta[0] == "ping":
            self._on_ping(pkt)

    def _on_bulk(self, pkt: Packet):
        _, fid, kind, *rest = pkt.meta
        if kind == "data":
            seg, total = rest
            st = self.bulk_recv.setdefault(fid, {"received": 0, "segs": 0})
            st["received"] += seg
            st["segs"] += 1
            done = st["received"] >= total
            if done and self.engine.metrics.flow(fid).completed_at is None:
                self.engine.metrics.flow(fid).completed_at = self.engine.now
            if st["segs"] % BULK_ACK_EVERY == 0 or done:
                ack = Packet(src_ip=self.ip, dst_ip=pkt.src_ip, protocol="tcp",
                             src_port=pkt.dst_port, dst_port=pkt.src_port,
                             payload_bytes=0,
                             meta=("bulk", fid, "ack", st["received"]))
                self.send_packet(ack)
        else:  # ack
            acked = rest[0]
            st = self.bulk_send.get(fid)
            if st is None:
                return
            st["acked"] = max(st["acked"], acked)
            self._bulk_pump(fid)

    def _on_ping(self, pkt: Packet):
        _, fid, kind, seq = pkt.meta
        if kind == "req":
            reply = Packet(src_ip=self.ip, dst_ip=pkt.src_ip, protocol="icmp",
                           payload_bytes=pkt.payload_bytes,
                           meta=("ping", fid, "rep", seq))
            self.send_packet(reply)
        else:
            self.ping_seen[fid] += 1
            st = self.engine.metrics.flow(fid)
            st.completed_at = self.engine.now

    def reset_dynamic(self):
        self.arp_cache.clear()
        self.arp_pending.clear()
        self.arp_last_req.clear()


class L3Node(Node):
    kind = "l3"

    def __init__(self, engine: Engine, name: str, mac: MacAddress,
                 router: Optional[ZoneRouter] = None):
        super().__init__(engine, name)
        self.mac = mac
        self.router = router or ZoneRouter(name)
        self.trunk_port = "trunk"
        self.arp: dict[int, dict[int, MacAddress]] = defaultdict(dict)
        self.arp_last_req: dict[tuple, int] = {}
        self.pending: dict[tuple, list[Packet]] = {}
        engine.schedule(FDB_AGE_SWEEP_US, "age_tick", name)

    def on_event(self, kind: str, payload):
        if kind == "age_tick":
            self.engine.schedule(self.engine.now + FDB_AGE_SWEEP_US,
                                 "age_tick", self.name)
            if not self.failed:
                self.router.conn.sweep(self.engine.now)

    def _iface_for_port(self, port):
        for iface in self.router.interfaces.values():
            if iface.port == port:
                return iface
        return None

    def _emit(self, vid: int, frame_payload, dst_mac: MacAddress):
        iface = self.router.interfaces[vid]
        frame = make_frame(self.mac, dst_mac, frame_payload)
        if iface.port is not None:
            self.engine.send(self.name, iface.port, frame)
        else:
            self.engine.send(self.name, self.trunk_port, push_tag(frame, vid))

    def _send_on_interface(self, vid: int, packet: Packet, target_ip: int):
        mac = self.arp[vid].get(target_ip)
        if mac is not None:
            self._emit(vid, packet, mac)
            return
        key = (vid, target_ip)
        self.pending.setdefault(key, []).append(packet)
        last = self.arp_last_req.get(key)
        if last is None or self.engine.now - last >= ARP_RETRY_US:
            self.arp_last_req[key] = self.engine.now
            iface = self.router.interfaces[vid]
            req = Arp("request", iface.ip, self.mac, target_ip)
            self._emit(vid, req, BROADCAST)

    def on_frame(self, port, frame: Frame):
        if port == self.trunk_port:
            if frame.tag is None or frame.tag.vid not in self.router.interfaces:
                self.engine.metrics.drop(self.name, "vlan")
                return
            inner, vid = pop_tag(frame)
        else:
            iface = self._iface_for_port(port)
            if iface is None or frame.tag is not None:
                self.engine.metrics.drop(self.name, "vlan")
                return
            inner, vid = frame, iface.vid
        iface = self.router.interfaces[vid]
        payload = inner.payload
        if isinstance(payload, Arp):
            self._on_arp(vid, iface, payload)
            return
        if not isinstance(payload, Packet):
            self.engine.metrics.frames_filtered += 1
            return
        if inner.dst != self.mac and not inner.dst.is_broadcast:
            self.engine.metrics.frames_filtered += 1
            return
        if self.router.is_local_ip(payload.dst_ip):
            self.engine.metrics.frames_filtered += 1
            return
        result = self.router.forward(payload, vid, self.engine.now)
        if result[0] == "drop":
            reason = result[1]
            self.engine.metrics.drop(self.name, reason)
            self.engine.trace(self.name, "drop", vid, flow_key(payload), reason)
            return
        _, egress_vid, next_hop, out = result
        target = next_hop if next_hop is not None else out.dst_ip
        self._send_on_interface(egress_vid, out, target)

    def _on_arp(self, vid: int, iface, arp: Arp):
        self.arp[vid][arp.sender_ip] = arp.sender_mac
        if arp.op == "request" and arp.target_ip == iface.ip:
            reply = Arp("reply", iface.ip, self.mac, arp.sender_ip)
            self._emit(vid, reply, arp.sender_mac)
        elif arp.op == "reply":
            for pkt in self.pending.pop((vid, arp.sender_ip), []):
                self._emit(vid, pkt, arp.sender_mac)

    def reset_dynamic(self):
        self.arp.clear()
        self.pending.clear()
        self.arp_last_req.clear()
        self.router.reset_dynamic()


@dataclass
class FirewallSide:
    side: str  # "inside" | "outside"
    mode: str = "routed"  # "routed" | "inline"
    ip: Optional[int] = None
    prefix_len: int = 24
    zone: str = "dmz"
    gw_ip: Optional[int] = None
    peer_mac: Optional[MacAddress] = None  # inline: far-end router MAC
    routes: list = field(default_factory=list)  # (net, plen, via_ip)


class FirewallNode(Node):
    kind = "firewall"

    def __init__(self, engine: Engine, name: str, mac: MacAddress,
                 fw: Firewall, inside: FirewallSide, outside: FirewallSide,
                 cap_bps: int, queue_frames: int = 256,
                 shape_interval_us: int = DEFAULT_SHAPE_INTERVAL_US,
                 enforce_zones: bool = True):
        super().__init__(engine, name)
        self.mac = mac
        self.fw = fw
        self.sides = {"inside": inside, "outside": outside}
        self.cap_bps = cap_bps
        self.shape_interval_us = shape_interval_us
        self.enforce_zones = enforce_zones
        self.policy = ZonePolicy()
        self.shapers = {s: Shaper(cap_bps, queue_frames) for s in self.sides}
        self.tick_scheduled = {s: False for s in self.sides}
        self.arp: dict[str, dict[int, MacAddress]] = {s: {} for s in self.sides}
        self.arp_last_req: dict[tuple, int] = {}
        self.pending: dict[tuple, list[Packet]] = {}
        engine.schedule(NAT_SWEEP_US, "age_tick", name)

    @staticmethod
    def _other(side: str) -> str:
        return "outside" if side == "inside" else "inside"

    def on_event(self, kind: str, payload):
        now = self.engine.now
        if kind == "age_tick":
            self.engine.schedule(now + NAT_SWEEP_US, "age_tick", self.name)
            if not self.failed:
                self.fw.sweep_expired(now)
        elif kind == "shape_tick":
            side = payload
            self.tick_scheduled[side] = False
            if self.failed:
                return
            released = self.shapers[side].shape(now, self.shape_interval_us)
            for pkt, mac_hint in released:
                self._emit_packet(side, pkt, mac_hint)
            if self.shapers[side].queue:
                self._schedule_tick(side)

    def _schedule_tick(self, side: str):
        if self.tick_scheduled[side]:
            return
        self.tick_scheduled[side] = True
        interval = self.shape_interval_us
        next_at = (self.engine.now // interval + 1) * interval
        self.engine.schedule(next_at, "shape_tick", self.name, side)

    def _enqueue(self, out_side: str, pkt: Packet, mac_hint):
        if not self.shapers[out_side].offer(pkt.size, (pkt, mac_hint)):
            self.engine.metrics.drop(self.name, "queue")
            return
        self._schedule_tick(out_side)

    def _emit_packet(self, out_side: str, pkt: Packet, mac_hint):
        self.engine.metrics.fw_window[self.name][self.engine.now // 1_000_000] += pkt.size
        cfg = self.sides[out_side]
        if mac_hint is not None:
            self.engine.send(self.name, out_side,
                             make_frame(self.mac, mac_hint, pkt))
            return
        target = self._resolve_target(cfg, pkt.dst_ip)
        mac = self.arp[out_side].get(target)
        if mac is not None:
            self.engine.send(self.name, out_side, make_frame(self.mac, mac, pkt))
            return
        key = (out_side, target)
        self.pending.setdefault(key, []).append(pkt)
        last = self.arp_last_req.get(key)
        if last is None or self.engine.now - last >= ARP_RETRY_US:
            self.arp_last_req[key] = self.engine.now
            sender_ip = cfg.ip if cfg.ip is not None else 0
            req = Arp("request", sender_ip, self.mac, target)
            self.engine.send(self.name, out_side,
                             make_frame(self.mac, BROADCAST, req))

    def _resolve_target(self, cfg: FirewallSide, dst_ip: int) -> int:
        if cfg.ip is not None and in_network(
                dst_ip, cfg.ip & prefix_mask(cfg.prefix_len), cfg.prefix_len):
            return dst_ip
        best = None
        for net, plen, via in cfg.routes:
            if in_network(dst_ip, net, plen):
                if best is None or plen > best[0]:
                    best = (plen, via)
        if best is not None:
            return best[1]
        return cfg.gw_ip if cfg.gw_ip is not None else dst_ip

    def on_frame(self, side, frame: Frame):
        out_side = self._other(side)
        cfg = self.sides[side]
        payload = frame.payload
        now = self.engine.now
        if isinstance(payload, Arp):
            self._on_arp(side, cfg, out_side, frame, payload)
            return
        if not isinstance(payload, Packet):
            self.engine.metrics.frames_filtered += 1
            return
        if cfg.mode == "routed" and frame.dst != self.mac and not frame.dst.is_broadcast:
            self.engine.metrics.frames_filtered += 1
            return
        pkt = payload
        if pkt.protocol == "probe":
            # health checks are control-plane: no NAT, no shaping
            hint = frame.dst if self.sides[out_side].mode == "inline" else None
            self._emit_transit(out_side, pkt, hint)
            return
        if side == "inside":
            self._outbound(pkt, frame, now)
        else:
            self._inbound(pkt, frame, now)

    def _emit_transit(self, out_side: str, pkt: Packet, mac_hint):
        cfg = self.sides[out_side]
        if mac_hint is None and cfg.mode == "inline":
            mac_hint = cfg.peer_mac or BROADCAST
        self._emit_packet(out_side, pkt, mac_hint)

    def _outbound(self, pkt: Packet, frame: Frame, now: int):
        out_cfg = self.sides["outside"]
        if self.enforce_zones:
            zf = self.sides["inside"].zone
            zt = out_cfg.zone
            key = flow_key(pkt)
            if (self.policy.verdict(zf, zt) == "deny-new"
                    and not self.fw.conn.established(key, now)):
                self.engine.metrics.drop(self.name, "acl")
                self.engine.trace(self.name, "drop", None, key, "acl")
                return
        try:
            translated = self.fw.masquerade_out(pkt, now)
            self.engine.trace(self.name, "nat", None, flow_key(pkt),
                              f"out via {ip_str(translated.src_ip)}:{translated.src_port}")
            out = translated
        except NoScope:
            out = pkt
        except PoolExhausted:
            self.engine.metrics.drop(self.name, "nat-full")
            self.engine.trace(self.name, "drop", None, flow_key(pkt), "nat-full")
            return
        self.fw.conn.note(flow_key(pkt), now)
        hint = frame.dst if out_cfg.mode == "inline" else None
        self._enqueue("outside", out, hint)

    def _inbound(self, pkt: Packet, frame: Frame, now: int):
        in_cfg = self.sides["inside"]
        if pkt.dst_ip in self.fw.external_ips:
            translated = self.fw.masquerade_in(pkt, now)
            if translated is None:
                self.engine.metrics.drop(self.name, "no-binding")
                self.engine.trace(self.name, "drop", None, flow_key(pkt),
                                  "no-binding")
                return
            self.engine.trace(self.name, "nat", None, flow_key(pkt),
                              f"in to {ip_str(translated.dst_ip)}:{translated.dst_port}")
            hint = in_cfg.peer_mac if in_cfg.mode == "inline" else None
            self._enqueue("inside", translated, hint)
            return
        if in_cfg.mode == "inline":
            # transit toward the L3 switch, which owns zone policy here
            self._enqueue("inside", pkt, frame.dst)
            return
        # routed inbound to an untranslated address: stateful zone check
        zf = self.sides["outside"].zone
        zt = in_cfg.zone
        key = flow_key(pkt)
        if (self.policy.verdict(zf, zt) == "deny-new"
                and not self.fw.conn.established(key, now)):
            self.engine.metrics.drop(self.name, "acl")
            self.engine.trace(self.name, "drop", None, key, "acl")
            return
        self.fw.conn.note(key, now)
        self._enqueue("inside", pkt, None)

    def _on_arp(self, side: str, cfg: FirewallSide, out_side: str,
                frame: Frame, arp: Arp):
        if cfg.mode == "routed" or side == "outside":
            self.arp[side][arp.sender_ip] = arp.sender_mac
        owned = set()
        if cfg.ip is not None:
            owned.add(cfg.ip)
        if side == "outside":
            owned |= self.fw.external_ips
        if arp.op == "request" and arp.target_ip in owned:
            reply_ip = arp.target_ip
            reply = Arp("reply", reply_ip, self.mac, arp.sender_ip)
            self.engine.send(self.name, side,
                             make_frame(self.mac, arp.sender_mac, reply))
            return
        if arp.op == "reply" and (cfg.mode == "routed" or side == "outside"):
            for pkt in self.pending.pop((side, arp.sender_ip), []):
                self.engine.send(self.name, side,
                                 make_frame(self.mac, arp.sender_mac, pkt))
            if cfg.mode == "routed":
                return
        if cfg.mode == "inline":
            # transparent for the spanned segment's address resolution
            self.engine.send(self.name, out_side, frame)

    def reset_dynamic(self):
        self.fw.reset_dynamic()
        for s in self.shapers.values():
            s.reset_dynamic()
        self.tick_scheduled = {s: False for s in self.sides}
        for d in self.arp.values():
            d.clear()
        self.pending.clear()
        self.arp_last_req.clear()


class BalancerNode(Node):
    kind = "balancer"

    def __init__(self, engine: Engine, name: str, mac: MacAddress, ip: int,
                 peer_ip: int, lb: LoadBalancer):
        super().__init__(engine, name)
        self.mac = mac
        self.ip = ip
        self.peer_ip = peer_ip
        self.lb = lb
        engine.schedule(lb.probe_interval_us, "probe_tick", name)

    def on_event(self, kind: str, payload):
        if kind != "probe_tick":
            return
        now = self.engine.now
        self.engine.schedule(now + self.lb.probe_interval_us, "probe_tick",
                             self.name)
        if self.failed:
            return
        due = self.lb.probe_tick(now)
        self._drain_transitions()
        for pid in due:
            pkt = Packet(src_ip=self.ip, dst_ip=self.peer_ip, protocol="probe",
                         meta=("probe", self.name, "req", pid))
            self.engine.trace(self.name, "probe", None, flow_key(pkt),
                              f"send path={pid}")
            self.engine.send(self.name, pid, make_frame(self.mac, BROADCAST, pkt))

    def _drain_transitions(self):
        for pid, state in self.lb.transitions:
            self.engine.trace(self.name, f"path_{state}", None, None,
                              f"path={pid}")
        self.lb.transitions.clear()

    def on_frame(self, port, frame: Frame):
        payload = frame.payload
        if port == "front":
            self._from_front(frame, payload)
        else:
            self._from_back(port, frame, payload)

    def _from_front(self, frame: Frame, payload):
        up = self.lb.up_paths()
        if isinstance(payload, Arp):
            owner = self.lb.dest_override.get(payload.target_ip)
            pid = owner if owner in up else (up[0] if up else None)
            if pid is None:
                self.engine.metrics.drop(self.name, "unavailable")
                return
            self.engine.send(self.name, pid, frame)
            return
        if not isinstance(payload, Packet):
            self.engine.metrics.frames_filtered += 1
            return
        key = flow_key(payload)
        try:
            pid = self.lb.dispatch(key, payload.dst_ip)
        except Unavailable:
            self.engine.metrics.unavailable += 1
            self.engine.metrics.drop(self.name, "unavailable")
            self.engine.trace(self.name, "drop", None, key, "unavailable")
            return
        self.engine.trace(self.name, "tx", None, key, f"dispatch path={pid}")
        self.engine.send(self.name, pid, frame)

    def _from_back(self, port, frame: Frame, payload):
        if isinstance(payload, Packet) and payload.protocol == "probe" \
                and payload.dst_ip == self.ip:
            meta = payload.meta
            if meta and meta[0] == "probe" and meta[2] == "req":
                reply = Packet(src_ip=self.ip, dst_ip=payload.src_ip,
                               protocol="probe",
                               meta=("probe", self.name, "rep", meta[3]))
                self.engine.send(self.name, port,
                                 make_frame(self.mac, BROADCAST, reply))
            elif meta and meta[0] == "probe" and meta[2] == "rep":
                self.engine.trace(self.name, "probe", None, flow_key(payload),
                                  f"reply path={port}")
                self.lb.on_probe_reply(port, self.engine.now)
                self._drain_transitions()
            return
        self.engine.send(self.name, "front", frame)

    def reset_dynamic(self):
        self.lb.reset_dynamic()
