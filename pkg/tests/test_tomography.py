import math

import numpy as np
import pytest

from wcfb.errors import DimensionError, ParameterError
from wcfb.functions import BallDistanceTerm, BinaryPenalty
from wcfb.linalg import CsrMatrix, matvec
from wcfb.solver import SolverConfig
from wcfb.tomography import (BinaryImage, ScanGeometry, build_projector, default_step, default_theta,
                             lsqr_solve, make_phantom, misclassification_rate, read_pgm,
                             read_sinogram_csv, reconstruct_crbt, simulate_sinogram,
                             threshold_to_binary, write_pgm, write_sinogram_csv)

from oracles import clip_length, dense_projector


def test_two_by_two_single_angle():
    geom = ScanGeometry([0.0], 2, detector_spacing=1.0)
    A = build_projector(2, 2, geom).to_dense()
    assert A.shape == (2, 4)
    for row in A:
        assert np.count_nonzero(row) == 2 and np.all(row[row > 0] == 1.0) and row.sum() == 2.0
    assert np.array_equal(A, dense_projector(2, 2, [0.0], geom.offsets(2, 2)))


def test_row_count_and_geometry_errors():
    geom = ScanGeometry.uniform(5, 7)
    A = build_projector(6, 4, geom)
    assert A.shape == (35, 24)
    with pytest.raises(ParameterError):
        ScanGeometry([0.0], 0)
    with pytest.raises(ParameterError):
        ScanGeometry([], 3)


def test_ninety_degrees_is_transposed_zero():
    n, nd = 4, 6
    A0 = build_projector(n, n, ScanGeometry([0.0], nd)).to_dense()
    A90 = build_projector(n, n, ScanGeometry([90.0], nd)).to_dense()
    # swapping rows and columns of pixel indices maps vertical rays to horizontal ones
    perm = np.array([c * n + r for r in range(n) for c in range(n)])
    rows0 = sorted(tuple(r) for r in A0)
    rows90 = sorted(tuple(r) for r in A90[:, perm])
    assert rows0 == rows90


@pytest.mark.parametrize("shape", [(4, 4), (5, 3), (7, 6)])
def test_projector_matches_dense_clipping(shape):
    n1, n2 = shape
    # an even detector count keeps every ray off the pixel edges, where the
    # clipping oracle would count a ray in both neighbouring pixels
    geom = ScanGeometry((0.0, 17.0, 45.0, 90.0, 123.4, 160.0), 8)
    A = build_projector(n1, n2, geom).to_dense()
    ref = dense_projector(n1, n2, geom.angles_deg, geom.offsets(n1, n2))
    assert np.max(np.abs(A - ref)) < 1e-12


@pytest.mark.parametrize("shape", [(4, 4), (7, 6)])
def test_row_sums_equal_chord_length(shape):
    # holds also for rays running along pixel edges
    n1, n2 = shape
    geom = ScanGeometry((0.0, 17.0, 45.0, 90.0, 123.4, 160.0), 9)
    A = build_projector(n1, n2, geom).to_dense()
    k = 0
    for ang in geom.angles_deg:
        phi = math.radians(ang)
        dx, dy = math.cos(phi), math.sin(phi)
        dx = 0.0 if abs(dx) < 1e-12 else dx
        dy = 0.0 if abs(dy) < 1e-12 else dy
        for s in geom.offsets(n1, n2):
            chord = clip_length(-n1 / 2, n1 / 2, -n2 / 2, n2 / 2, -s * dy, s * dx, dx, dy)
            assert abs(A[k].sum() - chord) < 1e-12
            k += 1


def test_projector_entries_bounded():
    A = build_projector(10, 10, ScanGeometry.uniform(13, 15))
    assert np.all(A.values >= 0) and np.all(A.values <= math.sqrt(2) + 1e-12)


def test_mass_conservation_at_zero_degrees():
    for spacing in (1.0, 0.5):
        geom = ScanGeometry([0.0], 12, detector_spacing=spacing)
        A = build_projector(6, 6, geom).to_dense()
        ref = dense_projector(6, 6, [0.0], geom.offsets(6, 6))
        assert np.array_equal(A.sum(axis=0), ref.sum(axis=0))


def test_every_pixel_covered_with_default_spacing():
    A = build_projector(8, 5, ScanGeometry.uniform(4, 12)).to_dense()
    blocks = A.reshape(4, 12, 40)
    assert np.all(blocks.sum(axis=1) > 0)


def test_disk_phantom():
    img = make_phantom("disk", 16, 16)
    cx = np.arange(16) + 0.5 - 8
    X, Y = np.meshgrid(cx, -cx)
    assert np.array_equal(img.pixels, np.where(X ** 2 + Y ** 2 <= 25, 1.0, -1.0))
    assert img.pixels[8, 8] == 1.0 and img.pixels[0, 0] == -1.0


@pytest.mark.parametrize("kind", ["disk", "bars", "blob"])
def test_phantoms_deterministic_and_balanced(kind):
    for seed in range(5):
        a = make_phantom(kind, 12, 9, seed)
        assert a == make_phantom(kind, 12, 9, seed)
        frac = np.mean(a.pixels > 0)
        assert 0.1 <= frac <= 0.9


def test_phantom_errors():
    with pytest.raises(ParameterError):
        make_phantom("disk", 3, 8)
    with pytest.raises(ValueError):
        make_phantom("star", 8, 8)


def test_sinogram_noise():
    A = CsrMatrix.identity(10_000)
    x = threshold_to_binary(np.ones(10_000), 100, 100)
    clean = simulate_sinogram(A, x, 0.0)
    assert np.array_equal(clean.y, x.vector())
    s1 = simulate_sinogram(A, x, 0.3, seed=5)
    s2 = simulate_sinogram(A, x, 0.3, seed=5)
    assert np.array_equal(s1.y, s2.y)
    assert not np.array_equal(s1.y, simulate_sinogram(A, x, 0.3, seed=6).y)
    assert abs(np.std(s1.y - x.vector()) / 0.3 - 1.0) < 0.05
    with pytest.raises(DimensionError):
        simulate_sinogram(A, threshold_to_binary(np.ones(4), 2, 2), 0.1)


def test_lsqr_identity_and_zero():
    y = np.array([1.0, -2.0, 3.5])
    assert np.max(np.abs(lsqr_solve(CsrMatrix.identity(3), y, 2) - y)) < 1e-10
    assert np.array_equal(lsqr_solve(CsrMatrix.identity(3), np.zeros(3)), np.zeros(3))


def test_lsqr_matches_normal_equations():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((12, 5))
    x_true = rng.standard_normal(5)
    y = M @ x_true
    L = np.linalg.cholesky(M.T @ M)
    ref = np.linalg.solve(L.T, np.linalg.solve(L, M.T @ y))
    x = lsqr_solve(CsrMatrix.from_dense(M), y, 50)
    assert np.max(np.abs(x - ref)) < 1e-8


def test_lsqr_residual_nonincreasing():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((20, 8))
    y = rng.standard_normal(20)
    A = CsrMatrix.from_dense(M)
    res = [np.linalg.norm(M @ lsqr_solve(A, y, k) - y) for k in range(1, 9)]
    assert all(b <= a + 1e-10 for a, b in zip(res, res[1:]))


def test_threshold_examples():
    assert np.array_equal(threshold_to_binary([0.2, -0.3]).vector(), [1.0, -1.0])
    assert np.array_equal(threshold_to_binary([1.0, -1.0, 1.0]).vector(), [1.0, -1.0, 1.0])
    assert np.array_equal(threshold_to_binary(np.zeros(4), 2, 2).vector(), np.ones(4))


def test_misclassification_examples():
    a = make_phantom("disk", 8, 8)
    flipped = BinaryImage(8, 8, -a.pixels)
    half = a.pixels.copy()
    half[:4] *= -1
    assert misclassification_rate(a, a) == 0.0
    assert misclassification_rate(a, flipped) == 1.0
    assert misclassification_rate(a, BinaryImage(8, 8, half)) == 0.5
    with pytest.raises(DimensionError):
        misclassification_rate(a, make_phantom("disk", 8, 10))


def test_binary_image_validation():
    with pytest.raises(ValueError):
        BinaryImage(2, 1, [1.0, 0.5])
    with pytest.raises(DimensionError):
        BinaryImage(2, 2, [1.0, 1.0, 1.0])


def test_pgm_roundtrip_and_ascii(tmp_path):
    img = make_phantom("blob", 11, 7, 3)
    path = tmp_path / "b.pgm"
    write_pgm(img, path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n11 7\n255\n") and len(raw) == 12 + 77
    assert read_pgm(path) == img
    ascii_path = tmp_path / "a.pgm"
    ascii_path.write_text("P2\n# comment\n3 1\n15\n0 8 15\n")
    assert np.array_equal(read_pgm(ascii_path).vector(), [-1.0, 1.0, 1.0])


def test_sinogram_csv_roundtrip(tmp_path):
    geom = ScanGeometry.uniform(3, 4)
    A = build_projector(5, 5, geom)
    sino = simulate_sinogram(A, make_phantom("disk", 5, 5), 0.05, seed=9)
    path = tmp_path / "s.csv"
    write_sinogram_csv(sino, geom, path)
    back = read_sinogram_csv(path)
    assert np.array_equal(back.y, sino.y) and back.sigma == 0.05 and back.seed == 9


def test_default_parameters():
    assert default_theta(24, 0.01) == pytest.approx(10 * 0.24 ** 2, rel=1e-15)
    assert default_theta(24, 0.0) == 1e-8
    assert default_step(4.0) == 0.9 * 0.25
    assert default_step(1.0) == 0.45


def small_setup(n=8, n_angles=8, n_det=12):
    geom = ScanGeometry.uniform(n_angles, n_det)
    A = build_projector(n, n, geom)
    truth = make_phantom("disk", n, n)
    return A, truth, simulate_sinogram(A, truth, 0.0)


def test_crbt_noiseless_small_disk():
    A, truth, sino = small_setup()
    rec, traj = reconstruct_crbt(A, sino, 8, 8, theta=1e-8, truth=truth, mu=1.0)
    assert misclassification_rate(rec, truth) == 0.0
    assert traj.n_iterations <= 2000
    obj = traj.column("objective")
    assert np.all(obj[:-1] - obj[1:] >= -1e-12)


def test_crbt_from_ground_truth_stops():
    A, truth, sino = small_setup()
    rec, traj = reconstruct_crbt(A, sino, 8, 8, theta=1.0, x0=truth.vector())
    assert traj.n_iterations == 1 and traj.records[1].step_norm == 0.0
    assert rec == truth


def test_ground_truth_has_zero_objective():
    A, truth, sino = small_setup()
    term = BallDistanceTerm(A, sino.y, 1e-8)
    pen = BinaryPenalty(-1.0, 1.0, 64)
    assert pen.value(truth.vector()) == 0.0
    assert term.value(truth.vector()) == 0.0
    # every other point has positive objective
    rng = np.random.default_rng(0)
    for _ in range(50):
        z = truth.vector() + 0.1 * rng.standard_normal(64)
        assert pen.value(z) + term.value(z) > 0.0


def test_crbt_dimension_and_theta_errors():
    A, truth, sino = small_setup()
    with pytest.raises(DimensionError):
        reconstruct_crbt(A, sino, 4, 4, theta=1.0)
    with pytest.raises(ParameterError):
        reconstruct_crbt(A, sino, 8, 8)
    with pytest.raises(ParameterError):
        reconstruct_crbt(A, sino, 8, 8, theta=1.0, config=SolverConfig(alpha=0.6))


def test_projection_of_disk_is_symmetric_in_angle():
    # the disk is symmetric under 90 degree rotation, so its 0 and 90 degree
    # views coincide up to detector order
    n, nd = 16, 24
    truth = make_phantom("disk", n, n)
    y0 = matvec(build_projector(n, n, ScanGeometry([0.0], nd)), truth.vector())
    y90 = matvec(build_projector(n, n, ScanGeometry([90.0], nd)), truth.vector())
    assert np.max(np.abs(np.sort(y0) - np.sort(y90))) < 1e-12
