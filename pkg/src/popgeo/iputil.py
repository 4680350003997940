"""Small IPv4 helpers shared by the parsers and serializers."""

import ipaddress


def ip_to_int(ip: str) -> int:
    """Dotted-quad string to its 32-bit integer value; ValueError on bad input."""
    return int(ipaddress.IPv4Address(ip))


def int_to_ip(value: int) -> str:
    return str(ipaddress.IPv4Address(value))


def sort_ips(ips) -> list[str]:
    """Sort dotted-quad strings by numeric address value."""
    return sorted(ips, key=ip_to_int)
