"""Pruebas de los subcomandos: configuración por capas, salidas CSV y códigos de error."""

import csv
import hashlib
import json
import os
import tempfile
import unittest
from pathlib import Path

from circlewalk import create_app, format_metric


ZERO_TRIAL_OUTPUTS = {
    "verify-relations": ("relations.csv", "exactness.csv"),
    "trajectories": ("trajectories.csv",),
    "contract-curve": ("contract_curve.csv",),
    "boundary-curve": ("boundary_curve.csv",),
    "stationary": ("stationary.csv", "stationary_check.csv"),
    "visit-fraction": ("visit_fraction.csv",),
    "rn-check": ("rn_check.csv",),
    "contract-interval": ("contract_interval.csv",),
    "conjugators": ("conjugators.csv",),
    "domination-z": ("domination_z.csv", "sparsity.csv"),
    "domination-w": ("domination_w.csv",),
    "good-collections": ("good_collections.csv",),
    "calibrate": ("calibration.csv",),
    "entropy-curve": ("entropy_curve.csv",),
    "cond-entropy": ("cond_entropy.csv",),
    "cocycle-check": ("cocycle_check.csv",),
    "stabilization": ("stabilization.csv",),
    "transience": ("transience.csv",),
    "harmonic": ("harmonic.csv",),
    "theorem-b": ("theorem_b.csv",),
}


class CliTestCase(unittest.TestCase):
    def setUp(self):
        os.environ["CIRCLEWALK_LOCALE"] = "es_ES"
        os.environ["LOG_LEVEL"] = "WARNING"
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)
        self.app = create_app(overrides={"RUN_ENV": {}, "CONFIG_FILE": None, "TESTING": True})
        self.ctx = self.app.app_context()
        self.ctx.push()
        self.runner = self.app.test_cli_runner()

    def tearDown(self):
        self.ctx.pop()
        self.tmp.cleanup()

    def invoke(self, *args):
        return self.runner.invoke(args=[*args, "--out", str(self.out)])

    def read_csv(self, name):
        with open(self.out / name, newline="", encoding="utf-8") as handle:
            return list(csv.reader(handle))

    def write_json(self, name, payload):
        path = self.out / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)


class OutputTest(CliTestCase):
    def test_zero_trials_writes_header_only(self):
        result = self.invoke("contract-curve", "--trials", "0")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(self.read_csv("contract_curve.csv"), [["n", "mean_distance", "ci_low", "ci_high"]])
        manifest = json.loads((self.out / "contract-curve.manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["seed"], 0)
        self.assertEqual(manifest["config"]["trials"], 0)
        self.assertIn("contract_curve.csv", manifest["outputs"])
        digest = hashlib.sha256((self.out / "contract_curve.csv").read_bytes()).hexdigest()
        self.assertEqual(manifest["outputs"]["contract_curve.csv"], digest)

    def test_every_subcommand_accepts_zero_trials(self):
        for subcommand, names in ZERO_TRIAL_OUTPUTS.items():
            with self.subTest(subcommand=subcommand):
                result = self.invoke(subcommand, "--trials", "0")
                self.assertEqual(result.exit_code, 0, result.output)
                for name in names:
                    rows = self.read_csv(name)
                    self.assertEqual(len(rows), 1, name)
                    self.assertTrue(rows[0], name)
                manifest = json.loads((self.out / f"{subcommand}.manifest.json").read_text(encoding="utf-8"))
                self.assertEqual(sorted(manifest["outputs"]), sorted(names))
                self.assertEqual(manifest["summary"]["trials"], 0)

    def test_stationary_headers(self):
        result = self.invoke("stationary", "--trials", "3", "--horizon", "20", "--bins", "4", "--seed", "2")
        self.assertEqual(result.exit_code, 0, result.output)
        histogram = self.read_csv("stationary.csv")
        self.assertEqual(histogram[0], ["bin_left", "bin_right", "count"])
        self.assertEqual(len(histogram), 5)
        self.assertEqual(sum(int(row[2]) for row in histogram[1:]), 3)
        check = self.read_csv("stationary_check.csv")
        self.assertEqual(check[0], ["bin_left", "bin_right", "xi_count", "pushed_count"])
        self.assertEqual([row[:2] for row in check[1:]], [row[:2] for row in histogram[1:]])

    def test_curve_collisions_go_to_manifest(self):
        result = self.invoke("contract-curve", "--trials", "2", "--n-max", "3", "--fit-start", "1")
        self.assertEqual(result.exit_code, 0, result.output)
        rows = self.read_csv("contract_curve.csv")
        self.assertEqual(rows[0], ["n", "mean_distance", "ci_low", "ci_high"])
        self.assertEqual([row[0] for row in rows[1:]], ["0", "1", "2", "3"])
        manifest = json.loads((self.out / "contract-curve.manifest.json").read_text(encoding="utf-8"))
        self.assertIn("collisions", manifest["summary"])

    def test_verify_relations(self):
        result = self.invoke("verify-relations", "--words", "5", "--max-length", "4")
        self.assertEqual(result.exit_code, 0, result.output)
        rows = self.read_csv("relations.csv")
        self.assertEqual(rows[0], ["relation", "identity"])
        self.assertEqual(len(rows), 6)
        self.assertTrue(all(row[1] == "1" for row in rows[1:]))
        self.assertTrue(all(row[1] == "0" for row in self.read_csv("exactness.csv")[1:]))
        self.assertIn("verify-relations:", result.output)

    def test_trajectories_export(self):
        result = self.invoke("trajectories", "--trials", "2", "--horizon", "3", "--seed", "9")
        self.assertEqual(result.exit_code, 0, result.output)
        rows = self.read_csv("trajectories.csv")
        self.assertEqual(len(rows), 7)
        self.assertEqual(rows[1][:2], ["0", "1"])

    def test_same_seed_same_output(self):
        self.invoke("trajectories", "--trials", "2", "--horizon", "5", "--seed", "4")
        first = (self.out / "trajectories.csv").read_bytes()
        self.invoke("trajectories", "--trials", "2", "--horizon", "5", "--seed", "4", "--workers", "2")
        self.assertEqual((self.out / "trajectories.csv").read_bytes(), first)

    def test_entropy_curve(self):
        result = self.invoke("entropy-curve", "--n-max", "2")
        self.assertEqual(result.exit_code, 0, result.output)
        rows = self.read_csv("entropy_curve.csv")
        self.assertEqual(rows[0], ["n", "H", "support_size", "truncated_flag"])
        self.assertEqual([row[0] for row in rows[1:]], ["1", "2"])
        self.assertEqual(rows[1][2], "9")

    def test_entropy_curve_truncated_flag(self):
        result = self.invoke("entropy-curve", "--n-max", "3", "--support-cap", "20")
        self.assertEqual(result.exit_code, 0, result.output)
        rows = self.read_csv("entropy_curve.csv")
        self.assertEqual(len(rows), 2)
        self.assertEqual(rows[-1][3], "1")

    def test_calibrate_writes_calibrated_file(self):
        result = self.invoke("calibrate", "--trials", "2", "--n-list", "4,8", "--seed", "3")
        self.assertEqual(result.exit_code, 0, result.output)
        payload = json.loads((self.out / "calibration.json").read_text(encoding="utf-8"))
        self.assertIs(payload["calibrated"], True)
        self.assertEqual(payload["seed"], 3)
        self.assertEqual(sorted(payload["z_floor"]), ["4", "8"])
        rows = self.read_csv("calibration.csv")
        self.assertEqual(rows[0], ["quantity", "n", "mean_over_n", "floor"])
        self.assertEqual([row[:2] for row in rows[1:]], [["Z", "4"], ["Z", "8"], ["W", "8"]])

    def test_cocycle_check(self):
        result = self.invoke("cocycle-check", "--trials", "5", "--max-length", "3")
        self.assertEqual(result.exit_code, 0, result.output)
        rows = self.read_csv("cocycle_check.csv")
        self.assertEqual(len(rows), 6)
        self.assertTrue(all(row[3:] == ["1", "1", "1"] for row in rows[1:]))


class ConfigurationTest(CliTestCase):
    def test_invalid_seed(self):
        result = self.invoke("contract-curve", "--seed", "-1")
        self.assertEqual(result.exit_code, 2)
        self.assertIn("invalid-config field=seed", result.output)

    def test_non_numeric_trials(self):
        result = self.invoke("contract-curve", "--trials", "muchos")
        self.assertEqual(result.exit_code, 2)
        self.assertIn("invalid-config field=trials", result.output)

    def test_unknown_subcommand(self):
        result = self.runner.invoke(args=["no-existe"])
        self.assertNotEqual(result.exit_code, 0)

    def test_missing_generator_file(self):
        result = self.invoke("verify-relations", "--generators", str(self.out / "no-existe.json"))
        self.assertEqual(result.exit_code, 2)
        self.assertIn("invalid-config field=generators", result.output)

    def test_config_file_layer(self):
        config = self.write_json("config.json", {"seed": 5, "trials": 0, "n_max": 4})
        result = self.invoke("contract-curve", "--config", config)
        self.assertEqual(result.exit_code, 0, result.output)
        manifest = json.loads((self.out / "contract-curve.manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["seed"], 5)
        self.assertEqual(manifest["config"]["n_max"], 4)

    def test_flags_override_config_file(self):
        config = self.write_json("config.json", {"seed": 5, "trials": 0})
        result = self.invoke("contract-curve", "--config", config, "--seed", "6")
        self.assertEqual(result.exit_code, 0, result.output)
        manifest = json.loads((self.out / "contract-curve.manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["seed"], 6)

    def test_unknown_config_key(self):
        config = self.write_json("config.json", {"semilla": 5})
        result = self.invoke("contract-curve", "--config", config)
        self.assertEqual(result.exit_code, 2)
        self.assertIn("invalid-config field=semilla", result.output)

    def test_environment_layer(self):
        self.app.config["RUN_ENV"] = {"seed": 11, "trials": 0}
        result = self.invoke("contract-curve")
        self.assertEqual(result.exit_code, 0, result.output)
        manifest = json.loads((self.out / "contract-curve.manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["seed"], 11)

    def test_runtime_failure_exit_code(self):
        measure = self.write_json("identidad.json", [{"word": [], "weight": "1"}])
        result = self.invoke(
            "theorem-b", "--measure", measure, "--k", "5", "--trials", "2", "--horizon", "5", "--xi-horizon", "5"
        )
        self.assertEqual(result.exit_code, 1)
        self.assertIn("run-failed subcommand=theorem-b", result.output)


class FormatMetricTest(CliTestCase):
    def test_locale_formatting(self):
        self.assertEqual(format_metric(1234.5, locale="es_ES"), "1.234,5")
        self.assertEqual(format_metric(1234.5, locale="en_US"), "1,234.5")
        self.assertEqual(format_metric(None), "—")


if __name__ == "__main__":
    unittest.main()
