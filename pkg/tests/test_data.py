import numpy as np
import pytest
import scipy.sparse as sp

from spg_scls import (ConfigError, IndexOutOfRange, NonFiniteEntry, ParseError, ProblemData, SchemaError,
                      compile_problem)
from spg_scls.data import (CsvSchema, GenSpec, Scenario, generate, generate_planted, generate_with_truth, load_csv,
                           load_sparse, read_descriptor, synthesize_z, write_csv, write_descriptor, write_sparse)
from spg_scls.paths import descriptor_path_for, instance_paths, instance_stem


def test_noiseless_dense_labels_are_linear():
    data, w0 = generate_with_truth(GenSpec(m=40, n=10, noise_sigma=0.0, seed=3))

    np.testing.assert_array_equal(data.y, data.X @ w0)


def test_generation_is_deterministic():
    spec = GenSpec(m=50, n=20, density=0.1, seed=11, scenario=Scenario.SEVERE)
    first, second = generate(spec), generate(spec)

    assert (first.X != second.X).nnz == 0
    np.testing.assert_array_equal(first.y, second.y)
    np.testing.assert_array_equal(first.z, second.z)


def test_different_seeds_differ():
    first = generate(GenSpec(m=20, n=5, seed=1))
    second = generate(GenSpec(m=20, n=5, seed=2))

    assert not np.array_equal(first.X, second.X)


def test_sparse_density_concentrates():
    data = generate(GenSpec(m=10_000, n=10_000, density=1e-3, seed=0))

    assert data.is_sparse
    assert 0.8e-3 <= data.X.nnz / (data.m * data.n) <= 1.2e-3


def test_severe_targets_move_further_than_modest():
    modest = generate(GenSpec(m=100, n=20, seed=5, scenario=Scenario.MODEST))
    severe = generate(GenSpec(m=100, n=20, seed=5, scenario=Scenario.SEVERE))

    np.testing.assert_array_equal(modest.y, severe.y)
    assert np.linalg.norm(severe.z - severe.y) > np.linalg.norm(modest.z - modest.y)


def test_synthesize_z_scales_with_label_spread():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    u = np.array([1.0, -1.0, 0.5, 0.0])

    z = synthesize_z(y, u, Scenario.MODEST)

    np.testing.assert_allclose(z, y + 0.5 * np.std(y, ddof=1) * u)


def test_synthesize_z_with_constant_labels():
    z = synthesize_z(np.full(3, 2.0), np.array([1.0, 0.0, -1.0]), Scenario.SEVERE)

    np.testing.assert_allclose(z, [4.0, 2.0, 0.0])


def test_explicit_targets_are_read_from_file(tmp_path):
    z_file = tmp_path / "z.txt"
    z_file.write_text("".join(f"{v}\n" for v in range(6)))

    data = generate(GenSpec(m=6, n=2, scenario=Scenario.EXPLICIT, z_file=str(z_file)))

    np.testing.assert_array_equal(data.z, np.arange(6.0))


def test_explicit_targets_need_matching_length(tmp_path):
    z_file = tmp_path / "z.txt"
    z_file.write_text("1\n2\n")

    with pytest.raises(SchemaError):
        generate(GenSpec(m=6, n=2, scenario=Scenario.EXPLICIT, z_file=str(z_file)))


@pytest.mark.parametrize("changes", [{"m": 0}, {"n": 0}, {"density": 0.0}, {"density": 1.5}, {"gamma": 0.0},
                                     {"noise_sigma": -1.0}, {"scenario": Scenario.EXPLICIT}])
def test_gen_spec_validation(changes):
    with pytest.raises(ConfigError):
        GenSpec(**{"m": 5, "n": 3, **changes})


def test_gen_spec_accepts_scenario_names():
    assert GenSpec(m=5, n=3, scenario="severe").scenario is Scenario.SEVERE


def test_csv_fixture(tmp_path):
    path = tmp_path / "three.csv"
    path.write_text("x0,x1,y,z\n1,2,3,4\n5,6,7,8\n9,10,11,12\n")

    data = load_csv(path, CsvSchema(y_column="y", z_column="z", gamma=0.5))

    np.testing.assert_array_equal(data.X, [[1, 2], [5, 6], [9, 10]])
    np.testing.assert_array_equal(data.y, [3, 7, 11])
    np.testing.assert_array_equal(data.z, [4, 8, 12])
    assert data.gamma == 0.5


def test_csv_explicit_feature_columns(tmp_path):
    path = tmp_path / "cols.csv"
    path.write_text("id,a,b,label\n0,1,2,3\n1,4,5,6\n")

    data = load_csv(path, CsvSchema(y_column="label", feature_columns=("a", "b")))

    np.testing.assert_array_equal(data.X, [[1, 2], [4, 5]])


def test_csv_malformed_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x0,x1,y,z\n1,2,3,4\n5,oops,7,8\n")

    with pytest.raises(ParseError) as info:
        load_csv(path, CsvSchema(y_column="y", z_column="z"))

    assert (info.value.line, info.value.column) == (3, "x1")


def test_csv_missing_label_column(tmp_path):
    path = tmp_path / "nolabel.csv"
    path.write_text("x0,x1\n1,2\n")

    with pytest.raises(SchemaError):
        load_csv(path, CsvSchema(y_column="y"))


def test_csv_without_targets_synthesizes_them(tmp_path):
    path = tmp_path / "noz.csv"
    path.write_text("x0,y\n1,1\n2,3\n3,2\n4,5\n")
    schema = CsvSchema(y_column="y", scenario=Scenario.MODEST, seed=4)

    first, second = load_csv(path, schema), load_csv(path, schema)

    np.testing.assert_array_equal(first.z, second.z)
    assert not np.array_equal(first.z, first.y)


def test_csv_round_trip(tmp_path):
    data = generate(GenSpec(m=12, n=4, seed=2))
    write_csv(data, tmp_path / "data.csv")

    loaded = load_csv(tmp_path / "data.csv", CsvSchema(y_column="y", z_column="z", gamma=data.gamma))

    np.testing.assert_array_equal(loaded.X, data.X)
    np.testing.assert_array_equal(loaded.y, data.y)
    np.testing.assert_array_equal(loaded.z, data.z)


def test_csv_written_with_full_precision(tmp_path):
    data = ProblemData(X=np.array([[0.1], [1 / 3]]), y=np.array([2 / 3, 1e-300]), z=np.array([np.pi, -0.0]),
                       gamma=0.1)
    write_csv(data, tmp_path / "data.csv")

    lines = (tmp_path / "data.csv").read_text().splitlines()
    assert lines[0] == "x0,y,z"
    assert float(lines[2].split(",")[0]) == 1 / 3

    loaded = load_csv(tmp_path / "data.csv", CsvSchema(y_column="y", z_column="z", gamma=0.1))
    np.testing.assert_array_equal(loaded.X, data.X)
    np.testing.assert_array_equal(loaded.y, data.y)
    np.testing.assert_array_equal(loaded.z, data.z)


def test_csv_spelled_nan_is_not_a_parse_error(tmp_path):
    path = tmp_path / "nan.csv"
    path.write_text("x0,y,z\n1,2,3\nNaN,4,5\n")

    with pytest.raises(NonFiniteEntry):
        load_csv(path, CsvSchema(y_column="y", z_column="z"))


def test_csv_malformed_target_reports_its_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x0,y,z\n1,2,3\n4,5,6\n7,8,1..5\n")

    with pytest.raises(ParseError) as info:
        load_csv(path, CsvSchema(y_column="y", z_column="z"))

    assert (info.value.line, info.value.column) == (4, "z")


def test_synthesize_z_refuses_the_explicit_scenario():
    with pytest.raises(ConfigError):
        synthesize_z(np.arange(4.0), np.zeros(4), Scenario.EXPLICIT)


def test_csv_explicit_scenario_needs_targets(tmp_path):
    path = tmp_path / "noz.csv"
    path.write_text("x0,y\n1,1\n2,3\n")

    with pytest.raises(ConfigError):
        load_csv(path, CsvSchema(y_column="y", scenario=Scenario.EXPLICIT))


def test_csv_explicit_scenario_reads_z_file(tmp_path):
    path = tmp_path / "noz.csv"
    path.write_text("x0,y\n1,1\n2,3\n")
    z_file = tmp_path / "z.txt"
    z_file.write_text("0.5\n-1.5\n")

    data = load_csv(path, CsvSchema(y_column="y", scenario=Scenario.EXPLICIT, z_file=str(z_file)))

    np.testing.assert_array_equal(data.z, [0.5, -1.5])


def test_planted_instance_has_the_requested_spectrum():
    eigenvalues = np.linspace(0.1, 0.5, 5)
    data, r_star = generate_planted(50, eigenvalues, 3.0, seed=2)
    prob = compile_problem(data)

    assert (data.m, data.n) == (50, 4)
    np.testing.assert_allclose(np.linalg.eigvalsh(prob.dense_H), eigenvalues, atol=1e-12)
    assert np.linalg.norm(r_star) == pytest.approx(1.0)
    # (H + lam I) r = -g at the planted minimizer
    np.testing.assert_allclose(prob.dense_H @ r_star + 3.0 * r_star, -prob.g, atol=1e-10)


@pytest.mark.parametrize("eigenvalues, multiplier, m", [
    ([0.5], 1.0, 10),
    ([0.1, -0.2], 1.0, 10),
    ([0.3, 0.1], 1.0, 10),
    ([0.1, 0.2], -0.5, 10),
    ([0.1, 0.2, 0.3], 1.0, 2),
])
def test_planted_instance_validation(eigenvalues, multiplier, m):
    with pytest.raises(ConfigError):
        generate_planted(m, np.array(eigenvalues), multiplier)


@pytest.mark.parametrize("density", [1.0, 0.05])
def test_sparse_round_trip(tmp_path, density):
    data = generate(GenSpec(m=40, n=15, density=density, seed=6))
    write_sparse(data, tmp_path / "inst.spm")

    loaded = load_sparse(tmp_path / "inst.spm", gamma=data.gamma)

    np.testing.assert_array_equal(loaded.dense_X(), data.dense_X())
    np.testing.assert_array_equal(loaded.y, data.y)
    np.testing.assert_array_equal(loaded.z, data.z)


def test_sparse_empty_matrix_is_an_error(tmp_path):
    path = tmp_path / "empty.spm"
    path.write_text("0 0 0\n")

    with pytest.raises(ParseError):
        load_sparse(path)


def test_sparse_empty_file(tmp_path):
    path = tmp_path / "blank.spm"
    path.write_text("\n")

    with pytest.raises(ParseError):
        load_sparse(path)


def test_sparse_malformed_value(tmp_path):
    path = tmp_path / "bad.spm"
    path.write_text("2 2 1\n0 1 abc\n1\n2\n3\n4\n")

    with pytest.raises(ParseError) as info:
        load_sparse(path)

    assert info.value.line == 2


def test_sparse_index_out_of_range(tmp_path):
    path = tmp_path / "range.spm"
    path.write_text("2 2 1\n0 2 1.5\n1\n2\n3\n4\n")

    with pytest.raises(IndexOutOfRange):
        load_sparse(path)


def test_sparse_truncated_file(tmp_path):
    path = tmp_path / "short.spm"
    path.write_text("2 2 1\n0 1 1.5\n1\n2\n3\n")

    with pytest.raises(ParseError):
        load_sparse(path)


def test_hand_written_sparse_instance(tmp_path):
    path = tmp_path / "hand.spm"
    path.write_text("2 3 2\n0 0 1.5\n1 2 -2\n1\n2\n\n3\n4\n")

    data = load_sparse(path, gamma=0.2)

    assert sp.issparse(data.X)
    np.testing.assert_array_equal(data.dense_X(), [[1.5, 0, 0], [0, 0, -2]])
    np.testing.assert_array_equal(data.y, [1, 2])
    np.testing.assert_array_equal(data.z, [3, 4])
    assert isinstance(data, ProblemData) and data.gamma == 0.2


def test_descriptor_round_trip(tmp_path):
    descriptor = GenSpec(m=10, n=3, density=0.5, seed=9).descriptor()
    write_descriptor(descriptor, tmp_path / "d.json")

    assert read_descriptor(tmp_path / "d.json") == descriptor


def test_corrupt_descriptor(tmp_path):
    (tmp_path / "d.json").write_text("{not json")

    with pytest.raises(ParseError):
        read_descriptor(tmp_path / "d.json")


def test_instance_naming(tmp_path):
    descriptor = GenSpec(m=100, n=50, density=0.001, gamma=0.1, seed=1).descriptor()
    stem = instance_stem(descriptor)

    assert stem == "spg_m100_n50_d0.001_g0.1_modest_s1"

    instance, desc = instance_paths(tmp_path, stem)
    assert instance.name == f"{stem}.spm"
    assert descriptor_path_for(instance) == desc
