import random

from hypothesis import given, settings
from hypothesis import strategies as st

from packetwash.node import Dropped, Enqueued, EnqueuedWashed, ForwardNode, NodeConfig, NodeMode
from packetwash.wash import DropReason, apply_wash
from packetwash.wire import QFunction, WashDirective, encode, make_coded_packet, make_packet


def pkt(sizes=(100, 100, 100), sigs=(3, 1, 2), threshold=1, tos=0, seq=0, param=90):
    d = WashDirective(condition_param=param, q_threshold=threshold)
    return make_packet([(bytes([seq % 256]) * n, s) for n, s in zip(sizes, sigs)], d, tos=tos, seq=seq)


def node(capacity, mode=NodeMode.QUALITATIVE, **kw):
    return ForwardNode(NodeConfig("n", capacity, mode, **kw))


def test_empty_queue_enqueues_unchanged():
    n = node(1000)
    p = pkt()
    r = n.admit(p)
    assert isinstance(r, Enqueued) and r.packet is p
    assert n.occupied_bytes == p.wire_size


def test_legacy_is_droptail():
    n = node(600, NodeMode.LEGACY_DROPTAIL)
    a, b = pkt(seq=1), pkt(seq=2)
    assert isinstance(n.admit(a), Enqueued)
    assert n.admit(b) == Dropped(DropReason.QUEUE_FULL)
    assert n.dequeue() is a
    assert n.dequeue() is None


def test_hot_queue_washes_arrival():
    p = pkt()  # 16 + 24 + 300 = 340 bytes
    n = node(2000)
    n.admit(pkt(sizes=(1826,), sigs=(1,), seq=9))  # 1850 bytes: 92.5% full
    r = n.admit(p)
    assert isinstance(r, EnqueuedWashed)
    assert r.quality < 1
    assert r.packet.surviving() == [0]
    assert n.occupied_bytes <= 2000


def test_wash_only_when_condition_met():
    # 59% full: below the 90% condition, so the arrival is dropped rather than washed
    small = node(6100)
    small.admit(pkt(sizes=(1200, 1200, 1200), seq=1))
    r = small.admit(pkt(sizes=(1200, 1200, 1200), seq=2, param=90))
    assert r == Dropped(DropReason.QUEUE_FULL)


def test_fairness_trims_intact_resident_first():
    n = node(600)
    resident = pkt(seq=1, tos=1, param=50)  # intact, tos 1
    upstream = apply_wash(pkt(sizes=(100, 100, 100, 100), sigs=(3, 1, 2, 4), seq=2, param=50), [1])  # washed, tos 1
    assert resident.wire_size == 340 and upstream.wire_size == 348
    n.admit(resident)
    r = n.admit(upstream)
    assert isinstance(r, Enqueued)
    assert r.packet is upstream  # arrival kept all its remaining chunks
    kept = n.queue.packets[0]
    assert kept.washed and kept.surviving() == [0, 2]
    log = n.drain_log()
    assert [e.action for e in log] == ["admit", "wash", "admit"]
    assert log[1].outcome == "resident"


def test_fairness_ignores_other_tos_and_washed_residents():
    n = node(600)
    n.admit(pkt(seq=1, tos=0, param=50))
    r = n.admit(apply_wash(pkt(sizes=(100, 100, 100, 100), sigs=(3, 1, 2, 4), seq=2, param=50), [1]))
    assert isinstance(r, EnqueuedWashed)
    assert n.queue.packets[0].washed is False


def test_fifo_order_and_size_bookkeeping():
    n = node(100_000)
    ps = [pkt(seq=i) for i in range(5)]
    for p in ps:
        n.admit(p)
    out = [n.dequeue() for _ in ps]
    assert out == ps
    assert n.occupied_bytes == 0


def test_dequeued_washed_packet_reencodes_to_reduced_size():
    n = node(700)
    n.admit(pkt(seq=1))
    n.admit(pkt(seq=2))
    while (p := n.dequeue()) is not None:
        assert len(encode(p)) == p.wire_size
    assert n.occupied_bytes == 0


def test_priority_dequeue_serves_highest_tos():
    n = node(100_000, priority_dequeue=True)
    a, b = pkt(seq=1, tos=0), pkt(seq=2, tos=3)
    n.admit(a)
    n.admit(b)
    assert n.dequeue() is b


def test_coded_threshold_drop():
    d = WashDirective(q_function=QFunction.CODED_RANDOM, q_threshold=3, condition_param=0)
    p = make_coded_packet([(bytes([i + 1]), bytes(100)) for i in range(3)], d, k=1, group_id=0)
    n = node(p.wire_size + 50)
    n.admit(p)
    assert n.admit(p) == Dropped(DropReason.THRESHOLD_EXCEEDED)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(list(NodeMode)))
def test_never_exceed_and_conservation(seed, mode):
    rng = random.Random(seed)
    cap = rng.randint(400, 3000)
    n = node(cap, mode, wash_seed=seed)
    admitted = dequeued = removed = 0
    for i in range(200):
        if rng.random() < 0.6:
            k = rng.randint(1, 5)
            p = pkt(
                sizes=[rng.randint(1, 60) for _ in range(k)],
                sigs=[rng.randint(0, 3) for _ in range(k)],
                threshold=rng.randint(1, k),
                tos=rng.randint(0, 2),
                seq=i,
                param=rng.choice([0, 50, 90]),
            )
            if p.wire_size >= cap:
                continue
            r = n.admit(p, now_us=i)
            if not isinstance(r, Dropped):
                admitted += p.wire_size
        else:
            q = n.dequeue()
            if q is not None:
                dequeued += q.wire_size
        for ev in n.drain_log():
            if ev.action == "wash":
                removed += ev.bytes_removed
                assert mode is NodeMode.QUALITATIVE
        assert n.occupied_bytes <= cap
        assert n.occupied_bytes == sum(p.wire_size for p in n.queue.packets)
    assert admitted == dequeued + removed + n.occupied_bytes
