"""Positional MAC labels: rack-encoded addresses for tree routing.

A host's routable address is a 48-bit locally-administered MAC whose value
encodes its location: first octet 0x02, then a 20-bit rack field and a 20-bit
slot within the rack.  Fabric switches can then match a 28-bit prefix (octet
plus rack) to cover a whole rack with one entry, and only the destination ToR
needs per-host state: an entry matching the full label that rewrites it to
the host's flat factory MAC before delivery.

The directory models endpoint identity, not physical attachment.  When a
host migrates, it gets a fresh label under the destination rack (address
resolution answers with the new label from then on) and the destination ToR
additionally gets a remap rule translating the old label, so peers still
holding the stale address keep reaching the host until the rule ages out.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO

from .topology import Topology

LABEL_OCTET = 0x02   # locally administered, unicast
FLAT_OCTET = 0x0A    # distinct octet keeps flat MACs out of the label space
RACK_BITS = 20
SLOT_BITS = 20
PREFIX_BITS = 8 + RACK_BITS  # matchable rack prefix

_RACK_LIMIT = 1 << RACK_BITS
_SLOT_LIMIT = 1 << SLOT_BITS


def encode_label(rack: int, slot: int) -> int:
    if not 0 <= rack < _RACK_LIMIT:
        raise ValueError(f"rack {rack} outside {RACK_BITS}-bit field")
    if not 0 <= slot < _SLOT_LIMIT:
        raise ValueError(f"slot {slot} outside {SLOT_BITS}-bit field")
    return (LABEL_OCTET << 40) | (rack << SLOT_BITS) | slot


def decode_label(label: int) -> tuple[int, int]:
    if not 0 <= label < 1 << 48:
        raise ValueError(f"{label:#x} is not a 48-bit value")
    if label >> 40 != LABEL_OCTET:
        raise ValueError(f"{format_mac(label)} is not a positional label")
    return (label >> SLOT_BITS) & (_RACK_LIMIT - 1), label & (_SLOT_LIMIT - 1)


def rack_prefix(rack: int) -> int:
    """The 28-bit value a switch matches to cover every label in a rack."""
    if not 0 <= rack < _RACK_LIMIT:
        raise ValueError(f"rack {rack} outside {RACK_BITS}-bit field")
    return (LABEL_OCTET << RACK_BITS) | rack


def flat_mac(host: int) -> int:
    """The host's location-independent factory MAC."""
    if not 0 <= host < 1 << 40:
        raise ValueError(f"host id {host} outside 40-bit field")
    return (FLAT_OCTET << 40) | host


def format_mac(mac: int) -> str:
    if not 0 <= mac < 1 << 48:
        raise ValueError(f"{mac:#x} is not a 48-bit value")
    return ":".join(f"{(mac >> s) & 0xFF:02x}" for s in range(40, -8, -8))


def parse_mac(text: str) -> int:
    parts = text.strip().split(":")
    if len(parts) != 6:
        raise ValueError(f"malformed MAC {text!r}")
    try:
        octets = [int(p, 16) for p in parts]
    except ValueError:
        raise ValueError(f"malformed MAC {text!r}") from None
    if any(not 0 <= o <= 0xFF for o in octets):
        raise ValueError(f"malformed MAC {text!r}")
    value = 0
    for o in octets:
        value = (value << 8) | o
    return value


@dataclass(frozen=True)
class RemapRule:
    """Old-label translation installed at the ToR of the host's new rack."""

    old_label: int
    host: int
    rack: int  # rack whose ToR holds the rule == the host's current rack
    install_time: float


class HostDirectory:
    """Host id -> (rack, slot, flat MAC) plus pending old-label remaps.

    Slots are never reused within a rack, so every label ever issued stays
    unique and remap rules cannot be shadowed by a later assignment.
    """

    def __init__(self, topology: Topology, remap_timeout: float = 5.0):
        if topology.rack_count > _RACK_LIMIT:
            raise ValueError("too many racks for the rack field")
        if topology.hosts_per_rack > _SLOT_LIMIT:
            raise ValueError("too many hosts per rack for the slot field")
        self.topology = topology
        self.remap_timeout = remap_timeout
        self._location: dict[int, tuple[int, int]] = {}
        self._next_slot = [topology.hosts_per_rack] * topology.rack_count
        self.remaps: dict[int, RemapRule] = {}
        for h in range(topology.host_count):
            self._location[h] = (topology.rack_of_host(h),
                                 h % topology.hosts_per_rack)

    def location_of(self, host: int) -> tuple[int, int]:
        try:
            return self._location[host]
        except KeyError:
            raise ValueError(f"unknown host {host}") from None

    def label_of(self, host: int) -> int:
        rack, slot = self.location_of(host)
        return encode_label(rack, slot)

    def flat_mac_of(self, host: int) -> int:
        self.location_of(host)
        return flat_mac(host)

    def arp_resolve(self, host: int) -> int:
        """What a peer's address query returns: the current label."""
        return self.label_of(host)

    def hosts_in_rack(self, rack: int) -> list[int]:
        return sorted(h for h, (r, _) in self._location.items() if r == rack)

    def purge_expired(self, now: float) -> None:
        if self.remap_timeout <= 0:
            return
        dead = [l for l, r in self.remaps.items()
                if now - r.install_time > self.remap_timeout]
        for l in dead:
            del self.remaps[l]

    def lookup_label(self, label: int, now: float = 0.0) -> int:
        """Host a labeled frame reaches: current assignment or live remap."""
        rack, slot = decode_label(label)
        for h, loc in self._location.items():
            if loc == (rack, slot):
                return h
        rule = self.remaps.get(label)
        if rule is not None and (self.remap_timeout <= 0
                                 or now - rule.install_time <= self.remap_timeout):
            return rule.host
        raise ValueError(f"label {format_mac(label)} maps to no host")

    def migrate_host(self, host: int, new_rack: int, now: float = 0.0,
                     tables=None) -> tuple[int, RemapRule | None]:
        """Reassign the host's label under ``new_rack``.

        Returns (new label, remap rule or None for a same-rack no-op).  With
        ``tables`` given, the delivery entry moves from the old ToR to the
        new one; the remap itself lives in the directory.
        """
        old_rack, old_slot = self.location_of(host)
        if not 0 <= new_rack < self.topology.rack_count:
            raise ValueError(f"unknown rack {new_rack}")
        old_label = encode_label(old_rack, old_slot)
        self.purge_expired(now)
        if new_rack == old_rack:
            return old_label, None
        slot = self._next_slot[new_rack]
        if slot >= _SLOT_LIMIT:
            raise ValueError(f"rack {new_rack} has no free slots")
        self._next_slot[new_rack] = slot + 1
        self._location[host] = (new_rack, slot)
        new_label = encode_label(new_rack, slot)
        # rules at ToRs the host has left would violate the containment
        # invariant; drop them before recording the fresh one
        stale = [l for l, r in self.remaps.items()
                 if r.host == host and r.rack != new_rack]
        for l in stale:
            del self.remaps[l]
        rule = RemapRule(old_label, host, new_rack, now)
        self.remaps[old_label] = rule
        if tables is not None:
            topo = self.topology
            tables.remove_wildcard_host(topo.tor_of_rack(old_rack), host)
            tables.install_wildcard_host(
                topo.tor_of_rack(new_rack), host, topo.hosts[host], now,
                rewrite=(new_label, flat_mac(host)))
        return new_label, rule

    def dump(self, fp: IO[str]) -> None:
        fp.write("host,rack,slot,label,flat_mac\n")
        for h in sorted(self._location):
            rack, slot = self._location[h]
            fp.write(f"{h},{rack},{slot},{format_mac(encode_label(rack, slot))},"
                     f"{format_mac(flat_mac(h))}\n")
        for label in sorted(self.remaps):
            r = self.remaps[label]
            fp.write(f"# remap {format_mac(label)} -> host {r.host} "
                     f"(rack {r.rack}, t={r.install_time:.6f})\n")
