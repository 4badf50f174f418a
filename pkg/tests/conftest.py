import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from iaas_select.core import TSG, ConsumerRequest, Polarity, Provider, QosAttribute, TimeSeries
from iaas_select.experiments import CorpusConfig, build_corpus

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BEN = QosAttribute("throughput", Polarity.BENEFIT)
COST = QosAttribute("price", Polarity.COST)
AVAIL = QosAttribute("availability", Polarity.BENEFIT)


def ts(values, start=0):
    return TimeSeries.from_values(values, start)


def tsg(columns: dict, attrs=None, start=0):
    attrs = attrs or {}
    names = list(columns)
    m = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    objs = [attrs.get(n, QosAttribute(n)) for n in names]
    return TSG.from_matrix(objs, np.arange(start, start + m.shape[0]), m)


def provider(pid, columns, attrs=None, **kw):
    return Provider(pid, tsg(columns, attrs), **kw)


def consumer(columns, workload=None, attrs=None, segments=1, segment_length=None, dominant=()):
    t = tsg(columns, attrs)
    n = len(t.timestamps)
    w = ts(np.zeros(n) if workload is None else workload)
    return ConsumerRequest(n, w, t, dominant, segments, segment_length or n // segments)


@pytest.fixture(scope="session")
def reference_corpus():
    return build_corpus(CorpusConfig(seed=0))
