import unittest
import logging
import math
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

from Documents import load_document
from evaluation import (
    ArrivalSeries,
    MetricsError,
    arrivals,
    compare_replications,
    config_hash,
    format_report,
    read_series,
    route_share,
    series_frame,
    write_report,
    write_series,
)

logging.basicConfig(level=logging.INFO)

COLUMNS = ["t_s", "agent", "event", "junction", "alternative", "probabilities", "train"]


def _log(rows):
    return pd.DataFrame([(t, a, e, j, alt, p, -1) for t, a, e, j, alt, p in rows], columns=COLUMNS)


def _arrival_log(times, spawn=0.0):
    rows = [(spawn, f"a{k}", "SPAWN", "", "", "") for k in range(len(times))]
    rows += [(t, f"a{k}", "ARRIVE_STATION", "", "", "") for k, t in enumerate(sorted(times))]
    return _log(rows)


class TestArrivals(unittest.TestCase):

    def setUp(self):
        logging.info("Setup complete")

    def test_arrivals(self):
        logging.info("Testing arrivals method")
        series = arrivals(_arrival_log([10.0, 20.0, 310.0]), 300.0)
        self.assertEqual(series.bins, [(0.0, 2), (300.0, 1)])
        self.assertEqual(series.total, 3)

        finer = arrivals(_arrival_log([10.0, 20.0, 310.0]), 150.0)
        self.assertEqual(finer.total, 3)
        self.assertEqual(finer.counts.tolist(), [2, 0, 1])

        empty = arrivals(_log([(0.0, "a", "SPAWN", "", "", "")]))
        self.assertEqual(empty.total, 0)
        self.assertEqual(empty.bins, [])
        with self.assertRaises(MetricsError):
            arrivals(_arrival_log([1.0]), 0.0)
        logging.info("arrivals method passed")

    def test_bins_start_at_first_spawn(self):
        logging.info("Testing arrivals bin alignment")
        series = arrivals(_arrival_log([700.0, 1000.0], spawn=650.0), 300.0)
        self.assertEqual(series.start, 600.0)
        self.assertEqual(series.counts.tolist(), [1, 1])
        logging.info("arrivals bin alignment passed")

    def test_series_validation(self):
        logging.info("Testing ArrivalSeries validation")
        with self.assertRaises(MetricsError):
            ArrivalSeries(300.0, 0.0, [1, -1])
        frame = pd.DataFrame({"bin_start_s": [0.0, 300.0, 900.0], "count": [1, 2, 3]})
        with self.assertRaises(MetricsError):
            ArrivalSeries.from_frame(frame)
        logging.info("ArrivalSeries validation passed")


class TestErrors(unittest.TestCase):

    def setUp(self):
        self.reference = ArrivalSeries(300.0, 0.0, [10, 20])
        logging.info("Setup complete")

    def test_mae_rmse(self):
        logging.info("Testing mae_rmse method")
        from evaluation import mae_rmse

        self.assertEqual(mae_rmse(self.reference, self.reference), (0.0, 0.0))
        mae, rmse = mae_rmse(self.reference, ArrivalSeries(300.0, 0.0, [12, 16]))
        self.assertAlmostEqual(mae, 3.0)
        self.assertAlmostEqual(rmse, math.sqrt(10.0))

        mae, rmse = mae_rmse(self.reference, ArrivalSeries(300.0, 0.0, [15, 25]))
        self.assertAlmostEqual(mae, 5.0)
        self.assertAlmostEqual(rmse, 5.0)

        # bins missing from one side count zero
        mae, _ = mae_rmse(self.reference, ArrivalSeries(300.0, 300.0, [20, 4]))
        self.assertAlmostEqual(mae, (10 + 0 + 4) / 3)

        mae, _ = mae_rmse(self.reference, ArrivalSeries(300.0, 0.0, [12, 16]), cumulative=True)
        self.assertAlmostEqual(mae, (2 + 2) / 2)
        self.assertEqual(mae_rmse(ArrivalSeries(), ArrivalSeries()), (0.0, 0.0))
        logging.info("mae_rmse method passed")

    def test_mismatched_bins(self):
        logging.info("Testing mae_rmse with mismatched bins")
        from evaluation import mae_rmse

        with self.assertRaises(MetricsError):
            mae_rmse(self.reference, ArrivalSeries(60.0, 0.0, [1, 2]))
        with self.assertRaises(MetricsError):
            mae_rmse(self.reference, ArrivalSeries(300.0, 100.0, [1, 2]))
        logging.info("mae_rmse with mismatched bins passed")

    def test_rmse_dominates_mae(self):
        logging.info("Testing RMSE >= MAE")
        from evaluation import mae_rmse

        rng = np.random.default_rng(6)
        for _ in range(50):
            a = ArrivalSeries(300.0, 0.0, rng.integers(0, 100, size=12))
            b = ArrivalSeries(300.0, 300.0 * rng.integers(0, 3), rng.integers(0, 100, size=10))
            mae, rmse = mae_rmse(a, b)
            self.assertGreaterEqual(rmse, mae - 1e-12)
            self.assertGreaterEqual(mae, 0.0)
        logging.info("RMSE >= MAE passed")


class TestRouteShare(unittest.TestCase):

    def setUp(self):
        self.logs = [
            _log(
                [
                    (1.0, "a", "DECIDE", "J", "Route1", "0.6;0.4"),
                    (1.5, "a", "DECIDE", "J", "Route2", "0.3;0.7"),
                    (2.0, "b", "DECIDE", "J", "Route1", "0.6;0.4"),
                    (2.0, "s", "DECIDE", "J", "Route2", "scripted"),
                ]
            ),
            _log(
                [
                    (1.0, "a", "DECIDE", "J", "Route1", ""),
                    (2.0, "b", "DECIDE", "J", "Route1", ""),
                    (2.0, "s", "DECIDE", "J", "Route2", "scripted"),
                ]
            ),
        ]
        logging.info("Setup complete")

    def test_route_share(self):
        logging.info("Testing route_share method")
        share = route_share(self.logs, "J")
        self.assertEqual(share.alternatives, ["Route1", "Route2"])
        np.testing.assert_array_equal(share.counts, [[1, 1], [2, 0]])
        np.testing.assert_allclose(share.mean, [1.5, 0.5])
        np.testing.assert_allclose(share.sd, [math.sqrt(0.5), math.sqrt(0.5)])

        with_scripted = route_share(self.logs, "J", include_scripted=True)
        np.testing.assert_array_equal(with_scripted.counts.sum(axis=1), [3, 3])
        self.assertEqual(route_share(self.logs[:1], "J").sd.tolist(), [0.0, 0.0])
        logging.info("route_share method passed")


class TestReports(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name)
        logging.info("Setup complete")

    def tearDown(self):
        self.directory.cleanup()

    def test_compare_and_write(self):
        logging.info("Testing compare_replications and write_report")
        reference = ArrivalSeries(300.0, 0.0, [2, 1])
        logs = [_arrival_log([10.0, 20.0, 310.0]), _arrival_log([10.0, 310.0, 320.0])]
        report = compare_replications(reference, logs, seeds=[5, 6], scenario="toy", policy="DCM", config_hash="abc")
        np.testing.assert_allclose(report.mae, [0.0, 1.0])
        self.assertAlmostEqual(report.mae_mean, 0.5)
        self.assertAlmostEqual(report.mae_sd, math.sqrt(0.5))

        # permutation invariance
        swapped = compare_replications(reference, logs[::-1])
        self.assertAlmostEqual(swapped.mae_mean, report.mae_mean)
        self.assertAlmostEqual(swapped.rmse_sd, report.rmse_sd)

        with self.assertRaises(MetricsError):
            compare_replications(reference, logs, bin_width=60.0)

        document = load_document(write_report(self.path / "metrics.xml", report), "metrics")
        self.assertEqual(document["@config_hash"], "abc")
        self.assertEqual(document["@base_seed"], "5")
        self.assertEqual(float(document["mae"]["@mean"]), 0.5)
        self.assertIn("MAE", format_report(report))
        self.assertNotIn("elapsed_s", document)
        self.assertTrue(math.isnan(report.elapsed_mean))
        logging.info("compare_replications and write_report passed")

    def test_elapsed_and_unchosen_alternatives(self):
        logging.info("Testing computation time and full route-share tables")
        reference = ArrivalSeries(300.0, 0.0, [2, 1])
        logs = [_arrival_log([10.0, 20.0, 310.0]), _arrival_log([10.0, 310.0, 320.0])]
        for log in logs:
            log.loc[len(log)] = (5.0, "a0", "DECIDE", "J", "Route1", "", -1)
        report = compare_replications(
            reference,
            logs,
            seeds=[5, 6],
            junctions=["J"],
            alternatives={"J": ["Route1", "Route2"]},
            elapsed=[1.0, 3.0],
        )
        self.assertAlmostEqual(report.elapsed_mean, 2.0)
        self.assertAlmostEqual(report.elapsed_sd, math.sqrt(2.0))
        share = report.route_shares[0]
        self.assertEqual(share.alternatives, ["Route1", "Route2"])
        np.testing.assert_array_equal(share.mean, [1.0, 0.0])
        self.assertEqual(compare_replications(reference, logs, junctions=["J"]).route_shares[0].alternatives, ["Route1"])
        self.assertEqual(compare_replications(reference, logs[:1], elapsed=[4.0]).elapsed_sd, 0.0)

        document = load_document(write_report(self.path / "metrics.xml", report), "metrics")
        self.assertEqual(float(document["elapsed_s"]["@mean"]), 2.0)
        self.assertEqual([r["@seed"] for r in document["elapsed_s"]["replication"]], ["5", "6"])
        names = [a["@name"] for a in document["route_share"]["alternative"]]
        self.assertEqual(names, ["Route1", "Route2"])
        text = format_report(report)
        self.assertIn("time s", text)
        self.assertIn("Route2", text)
        logging.info("computation time and full route-share tables passed")

    def test_series_file(self):
        logging.info("Testing series files")
        reference = ArrivalSeries(300.0, 0.0, [2, 1])
        simulated = [ArrivalSeries(300.0, 300.0, [4, 2])]
        frame = series_frame(reference, simulated, [1])
        self.assertEqual(frame["bin_start_s"].tolist(), [0.0, 300.0, 600.0])
        self.assertEqual(frame["reference"].tolist(), [2, 1, 0])
        self.assertEqual(frame["seed_1"].tolist(), [0, 4, 2])
        path = write_series(self.path / "series.csv", frame[["bin_start_s", "reference"]].rename(columns={"reference": "count"}))
        loaded = read_series(path)
        self.assertEqual(loaded.bin_width, 300.0)
        self.assertEqual(loaded.counts.tolist(), [2, 1, 0])
        logging.info("series files passed")

    def test_config_hash(self):
        logging.info("Testing config_hash method")
        path = self.path / "a.txt"
        path.write_text("one")
        first = config_hash(path, "DCM", 1)
        self.assertEqual(first, config_hash(str(path), "DCM", 1))
        path.write_text("two")
        self.assertNotEqual(first, config_hash(path, "DCM", 1))
        self.assertNotEqual(config_hash("x", "y"), config_hash("xy"))
        logging.info("config_hash method passed")


if __name__ == '__main__':
    unittest.main()
