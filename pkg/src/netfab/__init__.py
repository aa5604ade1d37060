"""netfab: deterministic packet-level simulator of a VLAN-segmented beamline network."""

__version__ = "0.1.0"
