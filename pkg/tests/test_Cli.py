import unittest
import logging
import os
import shutil
import tempfile
from pathlib import Path
from unittest.mock import patch

from dcm import read_model, read_observations
from Documents import load_document
from evaluation import OUT_ENV, cli

logging.basicConfig(level=logging.INFO)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

MINI_NETWORK = """<?xml version="1.0" encoding="utf-8"?>
<network name="mini" destination="X" distance_unit="1000">
	<nodes>
		<node id="O"/>
		<node id="J"/>
		<node id="M"/>
		<node id="X"/>
	</nodes>
	<links>
		<link id="in" from="O" to="J" length="10" width="2"/>
		<link id="short" from="J" to="X" length="50" width="2"/>
		<link id="long1" from="J" to="M" length="40" width="2"/>
		<link id="long2" from="M" to="X" length="40" width="2"/>
	</links>
	<origins>
		<origin>O</origin>
	</origins>
	<junctions>
		<junction node="J">
			<alternative name="Route1" link="short"/>
			<alternative name="Route2" link="long1"/>
		</junction>
	</junctions>
	<guidance junction="J">
		<interval start="0" end="600" alternative="1"/>
	</guidance>
</network>
"""

MINI_SCENARIO = """<?xml version="1.0" encoding="utf-8"?>
<scenario name="mini" mode="FIREWORK" network="network.xml" model="model.xml" policy="SP" replications="2" seed="3">
	<departures origin="O" width="60">
		<bin start="0" count="20"/>
		<bin start="60" count="10"/>
	</departures>
</scenario>
"""


class TestCli(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name)
        (self.path / "network.xml").write_text(MINI_NETWORK)
        (self.path / "scenario.xml").write_text(MINI_SCENARIO)
        shutil.copy(SCENARIOS / "firework_model.xml", self.path / "model.xml")
        self.out = str(self.path / "out")
        logging.info("Setup complete")

    def tearDown(self):
        self.directory.cleanup()

    def test_estimate(self):
        logging.info("Testing the estimate command")
        code = cli(["synth", "observations", "--model", str(SCENARIOS / "evacuation_model.xml"), "--n", "3000",
                    "--per-individual", "5", "--out", self.out, "--seed", "4"])
        self.assertEqual(code, 0)
        observations = Path(self.out) / "observations.csv"
        self.assertEqual(len(read_observations(observations)), 3000)

        code = cli(["estimate", "--observations", str(observations), "--folds", "3", "--out", self.out])
        self.assertEqual(code, 0)
        document = load_document(Path(self.out) / "model.xml", "model")
        self.assertEqual(document["estimation"]["@converged"], "true")
        self.assertEqual(read_model(Path(self.out) / "model.xml").spec.factor_names, ("DIST", "CH", "NF", "NB"))

        self.assertEqual(cli(["cv", "--observations", str(observations), "--folds", "4", "--grouping", "observation"]), 0)
        logging.info("estimate command passed")

    def test_simulate_and_evaluate(self):
        logging.info("Testing the simulate and evaluate commands")
        scenario = str(self.path / "scenario.xml")
        self.assertEqual(cli(["simulate", "--scenario", scenario, "--out", self.out, "--workers", "2", "--audit"]), 0)
        runs = Path(self.out) / "mini_sp"
        self.assertEqual(sorted(p.name for p in runs.glob("events_*.csv")), ["events_3.csv", "events_4.csv"])
        self.assertTrue((runs / "summary_3.csv").is_file())
        run_record = load_document(runs / "run_3.xml", "run")
        self.assertEqual(run_record["@seed"], "3")
        self.assertGreater(float(run_record["@elapsed_s"]), 0.0)

        self.assertEqual(cli(["synth", "reference", "--scenario", scenario, "--out", self.out]), 0)
        reference = str(Path(self.out) / "reference.csv")
        self.assertEqual(cli(["evaluate", "--runs", str(runs), "--reference", reference, "--scenario", scenario]), 0)
        metrics = load_document(runs / "metrics.xml", "metrics")
        self.assertEqual(metrics["@policy"], "SP")
        self.assertEqual(len(metrics["mae"]["replication"]), 2)
        self.assertEqual(len(metrics["elapsed_s"]["replication"]), 2)
        shares = metrics["route_share"]
        self.assertEqual(shares["@junction"], "J")
        self.assertEqual([a["@name"] for a in shares["alternative"]], ["Route1", "Route2"])
        self.assertEqual(float(shares["alternative"][1]["@mean"]), 0.0)
        self.assertTrue((runs / "series.csv").is_file())

        self.assertEqual(cli(["evaluate", "--runs", str(runs), "--reference", reference, "--bin-width", "60"]), 1)
        self.assertEqual(cli(["audit", "--runs", str(runs), "--scenario", scenario]), 0)
        logging.info("simulate and evaluate commands passed")

    def test_pipeline(self):
        logging.info("Testing the pipeline command")
        self.assertEqual(cli(["synth", "observations", "--model", str(self.path / "model.xml"), "--n", "2000",
                              "--out", self.out]), 0)
        scenario = str(self.path / "scenario.xml")
        self.assertEqual(cli(["synth", "reference", "--scenario", scenario, "--out", self.out]), 0)
        code = cli(["pipeline", "--observations", str(Path(self.out) / "observations.csv"), "--scenario", scenario,
                    "--reference", str(Path(self.out) / "reference.csv"), "--replications", "1", "--out", self.out])
        self.assertEqual(code, 0)
        self.assertTrue((Path(self.out) / "mini_dcm" / "metrics.xml").is_file())
        logging.info("pipeline command passed")

    def test_usage_errors(self):
        logging.info("Testing usage errors")
        self.assertEqual(cli(["estimate", "--observations", "x.csv", "--no-such-flag"]), 1)
        self.assertEqual(cli([]), 1)
        self.assertEqual(cli(["simulate", "--scenario", str(self.path / "scenario.xml"), "--policy", "random"]), 1)
        self.assertEqual(cli(["synth", "observations", "--out", self.out]), 1)
        self.assertEqual(cli(["evaluate", "--runs", str(self.path), "--reference", "none.csv"]), 1)
        self.assertEqual(cli(["estimate", "--observations", str(self.path / "missing.csv"), "--out", self.out]), 2)
        logging.info("usage errors passed")

    def test_output_directory_from_environment(self):
        logging.info("Testing the output directory variable")
        with patch.dict(os.environ, {OUT_ENV: self.out}):
            code = cli(["synth", "observations", "--model", str(self.path / "model.xml"), "--n", "50"])
        self.assertEqual(code, 0)
        self.assertTrue((Path(self.out) / "observations.csv").is_file())
        logging.info("output directory variable passed")

    def test_main(self):
        logging.info("Testing main")
        from main import main

        with patch("sys.argv", ["crowdsim", "synth", "observations", "--model", str(self.path / "model.xml"),
                                "--n", "20", "--out", self.out]):
            self.assertEqual(main(), 0)
        logging.info("main passed")


if __name__ == '__main__':
    unittest.main()
