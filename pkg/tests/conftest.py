"""Shared oracles plus the acceptance-verdict summary hook."""

_acceptance_lines = []


def record_acceptance(line):
    """Collect a criterion verdict for the end-of-run summary."""
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def vlan_reach_oracle(cfg, src_host):
    """Hosts a broadcast from src_host must reach, by graph search.

    Independent of the switch implementation: BFS over the switch graph
    using only declared VLAN membership of the port pairs.
    """
    src = cfg.hosts[src_host]
    vid = src.vlan
    attach = {}
    for link in cfg.links:
        for (na, pa), (nb, pb) in ((link.a, link.b), (link.b, link.a)):
            if na in cfg.hosts and nb in cfg.switches:
                attach[na] = nb
    edges = {}
    for link in cfg.links:
        (na, pa), (nb, pb) = link.a, link.b
        if na in cfg.switches and nb in cfg.switches:
            sa = cfg.switches[na].ports[pa]
            sb = cfg.switches[nb].ports[pb]
            if _member(sa, vid) and _member(sb, vid):
                edges.setdefault(na, []).append(nb)
                edges.setdefault(nb, []).append(na)
    start = attach[src_host]
    seen = {start}
    frontier = [start]
    while frontier:
        node = frontier.pop()
        for nxt in edges.get(node, []):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return {h for h, d in cfg.hosts.items()
            if h != src_host and d.vlan == vid and attach.get(h) in seen}


def _member(spec, vid):
    return spec.vid == vid if spec.mode == "access" else vid in spec.allowed
