import numpy as np
import pytest

from dataenrich import (
    ConfigError,
    Constraint,
    ConstraintSpec,
    GroupedDataset,
    ParameterStack,
    SynthesisSpec,
    generate,
    load_dataset,
    load_params,
    save_dataset,
    save_params,
)
from dataenrich.io import read_trace_csv, trace_header, write_trace_csv, read_json, write_json


def sample_instance(seed=0):
    spec = SynthesisSpec(p=5, G=2, n_per_group=(7, 9), sparsity=2,
                         noise_sigma=0.25, seed=seed)
    return generate(spec)


def test_dataset_roundtrip_exact(tmp_path):
    inst = sample_instance()
    d = tmp_path / "ds"
    save_dataset(d, inst.dataset, truth=inst.truth, constraints=inst.constraints,
                 sigma=0.25, seed=0)
    loaded, truth, cons, manifest = load_dataset(d)
    assert loaded.counts == inst.dataset.counts
    for (Xa, ya), (Xb, yb) in zip(inst.dataset.groups, loaded.groups):
        assert np.array_equal(Xa, Xb)
        assert np.array_equal(ya, yb)
    assert manifest["sigma"] == 0.25
    assert manifest["seed"] == 0
    assert np.array_equal(truth.as_matrix(), inst.truth.as_matrix())
    assert cons.entries[1].kind == "l1"
    assert cons.entries[1].radius == inst.constraints.entries[1].radius


def test_dataset_roundtrip_minimal(tmp_path):
    inst = sample_instance(1)
    d = tmp_path / "bare"
    save_dataset(d, inst.dataset)
    loaded, truth, cons, _ = load_dataset(d)
    assert loaded.n == inst.dataset.n
    assert truth is None
    assert cons is None


def test_params_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(2)
    stack = ParameterStack(rng.standard_normal(6) * 1e-7,
                           tuple(rng.standard_normal(6) * 10 for _ in range(3)))
    path = tmp_path / "params.csv"
    save_params(path, stack)
    back = load_params(path)
    # 17 significant digits reproduce float64 exactly
    assert np.array_equal(back.as_matrix(), stack.as_matrix())


def test_load_params_shape_check(tmp_path):
    rng = np.random.default_rng(3)
    stack = ParameterStack(rng.standard_normal(4), (rng.standard_normal(4),))
    path = tmp_path / "params.csv"
    save_params(path, stack)
    assert load_params(path, n_groups=1, dim=4).dim == 4
    with pytest.raises(ConfigError):
        load_params(path, n_groups=2, dim=4)
    with pytest.raises(ConfigError):
        load_params(path, n_groups=1, dim=5)


def test_trace_roundtrip(tmp_path):
    t = np.arange(1, 21)
    obj = 1.0 / t
    rel = np.exp(-0.1 * t)[:, None] * np.ones((1, 3))
    wgt = np.exp(-0.05 * t)
    path = tmp_path / "trace.csv"
    write_trace_csv(path, t, obj, rel_errors=rel, weighted=wgt)
    head = open(path).readline().strip()
    assert head == ",".join(trace_header(2))
    assert head.split(",")[:2] == ["iter", "objective"]
    cols = read_trace_csv(path)
    assert np.array_equal(cols["iter"], t)
    assert np.array_equal(cols["objective"], obj)
    assert np.array_equal(cols["err_rel_1"], rel[:, 1])
    assert np.array_equal(cols["weighted_err"], wgt)


def test_trace_without_errors(tmp_path):
    t = np.arange(1, 6)
    path = tmp_path / "trace.csv"
    write_trace_csv(path, t, 1.0 / t)
    cols = read_trace_csv(path)
    assert list(cols.keys()) == ["iter", "objective"]


def test_malformed_trace_row_named(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("iter,objective\n1,0.5\n2,0.25,99\n")
    with pytest.raises(ConfigError) as exc:
        read_trace_csv(path)
    msg = str(exc.value)
    assert "bad.csv" in msg and "3" in msg


def test_malformed_manifest(tmp_path):
    d = tmp_path / "ds"
    d.mkdir()
    (d / "manifest.json").write_text('{"G": 1, "p": 3}')
    with pytest.raises(ConfigError):
        load_dataset(d)


def test_wrong_shape_named(tmp_path):
    inst = sample_instance(4)
    d = tmp_path / "ds"
    save_dataset(d, inst.dataset)
    # truncate one response file
    y = (d / "y_2.csv").read_text().splitlines()
    (d / "y_2.csv").write_text("\n".join(y[:-2]) + "\n")
    with pytest.raises(ConfigError) as exc:
        load_dataset(d)
    assert "y_2" in str(exc.value)


def test_missing_directory():
    with pytest.raises((ConfigError, OSError)):
        load_dataset("/nonexistent/nowhere")


def test_json_roundtrip(tmp_path):
    payload = {"b": [1, 2], "a": {"x": 0.5}}
    path = tmp_path / "meta.json"
    write_json(path, payload)
    assert read_json(path) == payload
    # stable key order for byte-level reproducibility
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')


def test_save_dataset_bytes_stable(tmp_path):
    inst = sample_instance(5)
    d1 = tmp_path / "one"
    d2 = tmp_path / "two"
    for d in (d1, d2):
        save_dataset(d, inst.dataset, truth=inst.truth,
                     constraints=inst.constraints, seed=5)
    for name in ("manifest.json", "X_1.csv", "y_1.csv", "params.csv"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
