"""Smoke test for the mpa_transfer extension module.

Build and run:
    cargo build -p mpa-py --features extension-module --release
    cp target/release/libmpa_transfer.so python/mpa_transfer.so
    python3 python/smoke_test.py
"""
import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import mpa_transfer as m


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    pairs = [(0, 0), (0, 0), (0, 1), (1, 1)]
    assert m.compute_mpa(pairs) == 0.75
    mapping, hits = m.fit_majority(pairs, num_source=3, num_target=2)
    assert mapping == [0, 1, 0] and hits == 3, (mapping, hits)

    a = [[3.0, 0.0], [0.0, 4.0]]
    assert close(m.spectral_norm(a), 4.0)
    assert close(m.norm_21([[3.0, 1.0], [4.0, 0.0]]), 6.0)

    r = m.pearson_r([1.0, 2.0, 3.0, 4.0], [2.0, 4.1, 5.9, 8.0])
    assert r > 0.99
    assert 0.0 <= m.p_value(r, 4) < 0.01
    assert close(m.p_value(0.0, 10), 1.0)

    model = {
        "layers": [
            {"kind": "dense", "weights": [[1.0, -1.0], [0.5, 2.0]], "activation": "relu"},
            {"kind": "dense", "weights": [[1.0, 0.0], [0.0, 1.0]], "activation": "identity"},
        ],
        "split_index": 1,
    }
    net = m.Network.from_json(json.dumps(model))
    assert (net.input_dim, net.output_dim, net.num_layers, net.split_index) == (2, 2, 2, 1)
    out = net.forward([1.0, 2.0])
    assert out == [0.0, 4.5], out
    assert net.predict([[1.0, 2.0], [3.0, -1.0]]) == [1, 0]
    back = m.Network.from_json(net.to_json())
    assert back.weights() == net.weights()

    w = net.weights()
    expected = 2 * 1.0 * m.spectral_norm(w[0]) * (
        (m.norm_21(w[0]) / m.spectral_norm(w[0])) ** (2 / 3) + (math.sqrt(2.0) / 1.0) ** (2 / 3)
    ) ** 1.5
    zeros = [[[0.0] * 2 for _ in range(2)] for _ in range(2)]
    assert close(m.capacity_fc(w, zeros), expected, 1e-9)

    try:
        m.compute_mpa([])
    except ValueError:
        pass
    else:
        raise AssertionError("empty pairs should raise")
    try:
        net.forward([1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("wrong input length should raise")

    print("python smoke test OK:", repr(net))


if __name__ == "__main__":
    main()
