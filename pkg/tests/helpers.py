"""Scenario builders shared by the test modules."""

from fractions import Fraction

from renofriendly.core import AimdParams, BufferPolicy, CcaKind, FlowGroup, LinkConfig, validate_scenario
from renofriendly.friendliness import creno_params

RENO = FlowGroup(CcaKind.RENO, AimdParams.reno())


def creno(b=Fraction(7, 10), a=None, count=1, tag=""):
    params = creno_params(b) if a is None else AimdParams(a, b)
    return FlowGroup(CcaKind.CRENO, params, count, tag)


def reno(count=1, tag=""):
    return FlowGroup(CcaKind.RENO, AimdParams.reno(), count, tag)


def link(mbps=40.0, rtt=0.010, buffer_s=0.025, buffer_pkts=None):
    buf = BufferPolicy.by_packets(buffer_pkts) if buffer_pkts is not None else BufferPolicy.by_time(buffer_s)
    return LinkConfig(mbps * 1e6, rtt, buffer=buf)


def scenario(groups, **kw):
    return validate_scenario(link(**kw), groups)
