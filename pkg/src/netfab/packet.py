"""Frames, VLAN tags, IPv4 packets and flow keys shared by every layer."""
from __future__ import annotations

import functools
import hashlib
import ipaddress
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

TPID = 0x8100
MIN_FRAME = 64
MAX_UNTAGGED = 1518
MAX_TAGGED = 1522
ETH_OVERHEAD = 18  # header + FCS, untagged
IP_HEADER_BYTES = 40  # modeled IPv4 + transport header cost

PORTLESS_PROTOCOLS = frozenset({"icmp", "probe"})
PROTOCOLS = frozenset({"tcp", "udp", "icmp", "probe"})


class TagError(Exception):
    pass


class AlreadyTagged(TagError):
    pass


class NotTagged(TagError):
    pass


class InvalidVid(ValueError):
    pass


def check_vid(vid: int) -> int:
    if not isinstance(vid, int) or not 1 <= vid <= 4094:
        raise InvalidVid(f"vid must be in [1, 4094], got {vid!r}")
    return vid


def ip_addr(value: Union[int, str]) -> int:
    """Parse a dotted-quad string (or pass through an int) to a 32-bit address."""
    if isinstance(value, int):
        if not 0 <= value < 2**32:
            raise ValueError(f"address out of range: {value}")
        return value
    return int(ipaddress.IPv4Address(value))


@functools.lru_cache(maxsize=8192)
def ip_str(addr: int) -> str:
    return str(ipaddress.IPv4Address(addr))


def ip_network(value: str) -> tuple[int, int]:
    """Parse "a.b.c.d/len" to (network int, prefix length)."""
    net = ipaddress.IPv4Network(value, strict=False)
    return int(net.network_address), net.prefixlen


def prefix_mask(prefix_len: int) -> int:
    return ((1 << prefix_len) - 1) << (32 - prefix_len) if prefix_len else 0


def in_network(addr: int, net: int, prefix_len: int) -> bool:
    return (addr & prefix_mask(prefix_len)) == net


@dataclass(frozen=True, slots=True)
class MacAddress:
    octets: bytes

    def __post_init__(self):
        if len(self.octets) != 6:
            raise ValueError("MAC address needs exactly 6 octets")

    @classmethod
    def parse(cls, text: str) -> "MacAddress":
        parts = text.split(":")
        if len(parts) != 6:
            raise ValueError(f"bad MAC address {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    @property
    def is_broadcast(self) -> bool:
        return self.octets == b"\xff" * 6

    @property
    def is_multicast(self) -> bool:
        return bool(self.octets[0] & 1)

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)


BROADCAST = MacAddress(b"\xff" * 6)


@dataclass(frozen=True, slots=True)
class VlanTag:
    vid: int
    pcp: int = 0

    tpid = TPID

    def __post_init__(self):
        check_vid(self.vid)
        if not 0 <= self.pcp <= 7:
            raise ValueError(f"pcp must be in [0, 7], got {self.pcp}")


class FlowKey(NamedTuple):
    src_ip: int
    dst_ip: int
    protocol: str
    src_port: int
    dst_port: int

    def mirrored(self) -> "FlowKey":
        return FlowKey(self.dst_ip, self.src_ip, self.protocol,
                       self.dst_port, self.src_port)

    def __str__(self) -> str:
        return (f"{ip_str(self.src_ip)}:{self.src_port}->"
                f"{ip_str(self.dst_ip)}:{self.dst_port}")


@dataclass(frozen=True, slots=True)
class Packet:
    src_ip: int
    dst_ip: int
    protocol: str
    src_port: int = 0
    dst_port: int = 0
    payload_bytes: int = 0
    ttl: int = 64
    meta: tuple = ()

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        portless = self.protocol in PORTLESS_PROTOCOLS
        if portless and (self.src_port or self.dst_port):
            raise ValueError(f"{self.protocol} packets carry no ports")
        if not portless and not (0 <= self.src_port <= 65535 and 0 <= self.dst_port <= 65535):
            raise ValueError("ports must be 16-bit")
        if self.payload_bytes < 0:
            raise ValueError("payload_bytes must be >= 0")

    @property
    def size(self) -> int:
        """Modeled on-the-wire IP packet size."""
        return self.payload_bytes + IP_HEADER_BYTES


@dataclass(frozen=True, slots=True)
class Arp:
    """In-VLAN address resolution: broadcast request, unicast reply."""
    op: str  # "request" | "reply"
    sender_ip: int
    sender_mac: MacAddress
    target_ip: int


Payload = Union[Packet, Arp, int]


def payload_size(payload: Payload) -> int:
    if isinstance(payload, Packet):
        return payload.size
    if isinstance(payload, Arp):
        return 28
    return int(payload)


@dataclass(frozen=True, slots=True)
class Frame:
    src: MacAddress
    dst: MacAddress
    payload: Payload
    size_bytes: int
    tag: Optional[VlanTag] = None

    def __post_init__(self):
        limit = MAX_TAGGED if self.tag is not None else MAX_UNTAGGED
        if not MIN_FRAME <= self.size_bytes <= limit:
            raise ValueError(
                f"frame size {self.size_bytes} outside [{MIN_FRAME}, {limit}]")


def make_frame(src: MacAddress, dst: MacAddress, payload: Payload,
               tag: Optional[VlanTag] = None) -> Frame:
    size = max(MIN_FRAME, payload_size(payload) + ETH_OVERHEAD)
    if tag is not None:
        size += 4
    return Frame(src=src, dst=dst, payload=payload, size_bytes=size, tag=tag)


def push_tag(frame: Frame, vid: int, pcp: int = 0) -> Frame:
    if frame.tag is not None:
        raise AlreadyTagged(f"frame already tagged with vid {frame.tag.vid}")
    check_vid(vid)
    return Frame(src=frame.src, dst=frame.dst, payload=frame.payload,
                 size_bytes=frame.size_bytes + 4, tag=VlanTag(vid=vid, pcp=pcp))


def pop_tag(frame: Frame) -> tuple[Frame, int]:
    if frame.tag is None:
        raise NotTagged("frame carries no 802.1Q tag")
    vid = frame.tag.vid
    stripped = Frame(src=frame.src, dst=frame.dst, payload=frame.payload,
                     size_bytes=frame.size_bytes - 4, tag=None)
    return stripped, vid


def classify_dst(frame: Frame) -> str:
    if frame.dst.is_broadcast:
        return "broadcast"
    if frame.dst.is_multicast:
        return "multicast"
    return "unicast"


def flow_key(packet: Packet) -> FlowKey:
    return FlowKey(packet.src_ip, packet.dst_ip, packet.protocol,
                   packet.src_port, packet.dst_port)


def frame_flow_key(frame: Frame) -> FlowKey:
    """Flow key for hashing decisions; MAC-derived fallback for non-IP frames."""
    if isinstance(frame.payload, Packet):
        return flow_key(frame.payload)
    src = int.from_bytes(frame.src.octets[2:], "big")
    dst = int.from_bytes(frame.dst.octets[2:], "big")
    return FlowKey(src, dst, "icmp", 0, 0)


def flow_digest(key: FlowKey, salt: bytes = b"") -> int:
    """Deterministic 64-bit digest of a flow key."""
    raw = (f"{key.src_ip},{key.dst_ip},{key.protocol},"
           f"{key.src_port},{key.dst_port}").encode()
    return int.from_bytes(hashlib.blake2b(raw + salt, digest_size=8).digest(), "big")
