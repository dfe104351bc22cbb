import struct
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conoma.orchestrator.drm import ExchangeMessage
from conoma.orchestrator.transport import (KIND_ABORT, KIND_DATA, KIND_FLAG, Frame, InProcessBus,
                                           SocketTransport, TransportAborted, TransportTimeout,
                                           decode_frame, encode_frame, make_transport)


def test_frame_layout_bit_exact():
    data = encode_frame(Frame(2, 7, np.array([1.0, -0.5])))
    # length 10 + 16, sender u16, round u32, count u32, then big-endian doubles
    want = struct.pack(">IHII", 26, 2, 7, 2) + struct.pack(">dd", 1.0, -0.5)
    assert data == want
    assert data.hex() == "0000001a000200000007000000023ff0000000000000bfe0000000000000"


@settings(max_examples=100, deadline=None)
@given(sender=st.integers(0, 2**16 - 1), rnd=st.integers(0, 2**32 - 1),
       vals=st.lists(st.floats(allow_nan=False), max_size=20))
def test_frame_round_trip(sender, rnd, vals):
    fr = decode_frame(encode_frame(Frame(sender, rnd, np.array(vals, dtype=float))))
    assert (fr.sender, fr.round) == (sender, rnd)
    np.testing.assert_array_equal(fr.values, vals)


def test_decode_rejects_bad_lengths():
    data = encode_frame(Frame(0, 0, np.array([1.0])))
    with pytest.raises(ValueError):
        decode_frame(data[:-1])  # truncated payload
    wrong_count = data[:10] + struct.pack(">I", 2) + data[14:]
    with pytest.raises(ValueError):
        decode_frame(wrong_count)  # header claims more doubles than the length allows


def test_exchange_message_frame_round_trip():
    msg = ExchangeMessage(1, 4, np.array([[0, 3, 1e-9], [5, 3, 2e-10]]), np.array([[2, 5, 3e-11]]))
    back = ExchangeMessage.from_frame(decode_frame(encode_frame(msg.to_frame())))
    assert (back.sender, back.iteration) == (1, 4)
    np.testing.assert_array_equal(back.interference, msg.interference)
    np.testing.assert_array_equal(back.d2d, msg.d2d)
    with pytest.raises(ValueError):
        ExchangeMessage(0, 0, np.array([[0, 1, -1.0]])).check()


@pytest.fixture(params=["inprocess", "socket"])
def transport(request):
    tr = make_transport(request.param)
    tr.open([0, 1, 2])
    yield tr
    tr.close()


def _data(sender, rnd, x):
    return Frame(sender, rnd, np.array([KIND_DATA, x]))


def test_receive_orders_by_sender(transport):
    transport.send(0, _data(2, 1, 20.0))
    transport.send(0, _data(1, 1, 10.0))
    got = transport.receive(0, 1, KIND_DATA, 2, timeout=5.0)
    assert [f.sender for f in got] == [1, 2]
    assert [f.values[1] for f in got] == [10.0, 20.0]


def test_barrier_never_hands_out_another_round(transport):
    transport.send(0, _data(1, 3, 3.0))  # early message of round 3
    transport.send(0, _data(1, 2, 2.0))
    transport.send(0, Frame(2, 2, np.array([KIND_FLAG, 0, 1, 0.0])))
    (r2,) = transport.receive(0, 2, KIND_DATA, 1, timeout=5.0)
    assert r2.round == 2 and r2.values[1] == 2.0
    with pytest.raises(TransportTimeout) as exc:
        transport.receive(0, 2, KIND_DATA, 1, timeout=0.2)
    assert exc.value.round_index == 2
    # the early round-3 message and the flag were buffered, not dropped
    (r3,) = transport.receive(0, 3, KIND_DATA, 1, timeout=5.0)
    assert r3.values[1] == 3.0
    (fl,) = transport.receive(0, 2, KIND_FLAG, 1, timeout=5.0)
    assert fl.sender == 2


def test_abort_interrupts_waiting(transport):
    def late_abort():
        transport.send(0, Frame(1, 0, np.array([KIND_ABORT])))

    th = threading.Timer(0.1, late_abort)
    th.start()
    with pytest.raises(TransportAborted) as exc:
        transport.receive(0, 5, KIND_DATA, 2, timeout=5.0)
    th.join()
    assert exc.value.sender == 1


def test_concurrent_senders(transport):
    def worker(p):
        for rnd in range(20):
            transport.send(0, _data(p, rnd, p * 100 + rnd))

    ths = [threading.Thread(target=worker, args=(p,)) for p in (1, 2)]
    for th in ths:
        th.start()
    for rnd in range(20):
        got = transport.receive(0, rnd, KIND_DATA, 2, timeout=5.0)
        assert [f.values[1] for f in got] == [100 + rnd, 200 + rnd]
    for th in ths:
        th.join()
    assert transport.sent_by_kind[KIND_DATA] == 40


def test_unknown_transport_name():
    with pytest.raises(ValueError):
        make_transport("carrier-pigeon")
    assert isinstance(make_transport(), InProcessBus)
    assert isinstance(make_transport("socket"), SocketTransport)
