import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

import gnnla


def tridiag(n):
    dense = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    return gnnla.SparseMatrix.from_dense(dense), dense


class SparseTest(unittest.TestCase):
    def test_roundtrip_arrays(self):
        a, dense = tridiag(6)
        b = gnnla.SparseMatrix(6, 6, a.indptr, a.indices, a.data)
        np.testing.assert_array_equal(b.to_dense(), dense)
        self.assertEqual(a.nnz, 16)

    def test_matrix_market(self):
        a, dense = tridiag(5)
        with tempfile.TemporaryDirectory() as d:
            path = Path(d) / "a.mtx"
            gnnla.write_matrix_market(a, str(path))
            np.testing.assert_array_equal(gnnla.read_matrix_market(str(path)).to_dense(), dense)

    def test_bad_csr_raises(self):
        with self.assertRaises(gnnla.Error):
            gnnla.SparseMatrix(2, 2, np.array([0, 1]), np.array([0]), np.array([1.0]))


class KernelTest(unittest.TestCase):
    def test_spmv_matches_numpy(self):
        a, dense = tridiag(7)
        x = np.linspace(-1, 1, 7)
        np.testing.assert_allclose(gnnla.gnn_spmv(a, x), dense @ x, atol=1e-14)
        np.testing.assert_allclose(gnnla.gnn_spmv(a, x, self_edges=False), dense @ x, atol=1e-14)

    def test_jacobi_and_power(self):
        a, dense = tridiag(8)
        b = np.ones(8)
        x = gnnla.gnn_jacobi(a, b, np.zeros(8), 1.0, 2000)
        np.testing.assert_allclose(dense @ x, b, atol=1e-8)
        _, lam = gnnla.gnn_power_method(a, np.ones(8) + np.arange(8), 3000)
        self.assertAlmostEqual(lam, np.linalg.eigvalsh(dense).max(), places=6)

    def test_weighted_norm(self):
        a, dense = tridiag(4)
        x = np.array([1.0, -2.0, 0.5, 3.0])
        self.assertAlmostEqual(gnnla.gnn_weighted_norm(a, x), np.sqrt(x @ dense @ x), places=12)


class AmgTest(unittest.TestCase):
    def test_two_level_converges(self):
        a, _ = tridiag(31)
        _, history = gnnla.two_level_solve(a, np.ones(31), iters=10)
        self.assertLess(history[-1], 1e-6)

    def test_interpolation_rows_sum_to_one(self):
        n = 9
        dense = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
        dense[0, 0] = dense[-1, -1] = 1.0
        a = gnnla.SparseMatrix.from_dense(dense)
        s = gnnla.soc_classic(a, 0.25)
        cf = gnnla.cf_split_greedy(s)
        p = gnnla.direct_interpolation(a, s, cf).to_dense()
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


class ModelTest(unittest.TestCase):
    def test_param_counts(self):
        self.assertEqual(gnnla.jacobi_param_count(), 1341)
        self.assertEqual(gnnla.diffusion_param_count(), 14002)

    def test_dst_basis_sizes(self):
        lf, hf = gnnla.dst_basis(38, 38)
        self.assertEqual(lf.shape[1] + hf.shape[1], 1444)
        np.testing.assert_allclose(hf.T @ hf, np.eye(hf.shape[1]), atol=1e-10)

    def test_train_small_jacobi(self):
        cfg = gnnla.RunConfig.from_json(json.dumps({
            "version": 1, "seed": 3,
            "dataset": {"kind": "jacobi", "n_y": 8, "beta_min": 0.01, "beta_max": 0.05,
                        "n_train": 3, "n_val": 2, "n_test": 2},
            "train": {"epochs_max": 2, "batch_size": 1, "lr": 1e-4},
        }))
        data = gnnla.generate_dataset(cfg)
        ckpt = gnnla.train(cfg, data)
        self.assertEqual(ckpt.model.param_count, 1341)
        self.assertEqual(len(ckpt.val_loss), 3)
        d = gnnla.jacobi_diagonal(ckpt.model, data.test[0].a)
        self.assertTrue(np.all(np.isfinite(d)))
        report = gnnla.compare_methods(data.test, ckpt.model, k=4)
        self.assertEqual(len(report["matrices"]), 2)
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp) / "data"
            gnnla.save_dataset(data, cfg, str(root))
            again = gnnla.load_dataset(str(root))
            np.testing.assert_array_equal(again.test[0].a.to_dense(), data.test[0].a.to_dense())
            path = Path(tmp) / "ckpt.json"
            ckpt.save(str(path))
            np.testing.assert_array_equal(gnnla.load_checkpoint(str(path)).model.parameters, ckpt.model.parameters)

    def test_config_rejects_unknown_key(self):
        with self.assertRaises(gnnla.Error):
            gnnla.RunConfig.from_json('{"version": 1, "bogus": 2}')


if __name__ == "__main__":
    unittest.main()
