import json

import numpy as np

from simulations.domain import ChargeDensity, SignedEnsemble
from simulations.exceptions import OutputError
from simulations.services import file_hash
from simulations.services.diagnostics import scan_negativity
from simulations.services.grids import conjugate_momentum_grid
from simulations.services.snapshot_writer import (
    downsample_wigner,
    emit_snapshot,
    load_charge_file,
    load_wigner_file,
    write_charge_file,
    write_norm_table,
    write_wigner_file,
)
from simulations.services.wigner import CONVENTION_TAG, marginal_position, wigner_from_ensemble
from simulations.tests.base import NumericsTestCase, TemporaryDirectoryMixin


class SnapshotFileTests(TemporaryDirectoryMixin, NumericsTestCase):
    def setUp(self):
        self.grid = self.small_grid(n_points=101)
        self.kgrid = conjugate_momentum_grid(self.grid)
        ensemble = SignedEnsemble.pure(self.packet(self.grid, x0=50.0, a0=6.0))
        self.field = wigner_from_ensemble(ensemble, self.kgrid)
        self.density = ChargeDensity(grid=self.grid, values=ensemble.terms[0].state.probability)
        self.directory = self.make_temp_dir()

    def test_downsampled_marginal_matches_kept_nodes(self):
        reduced, header = downsample_wigner(self.field, 4)
        self.assertEqual(reduced.shape, (26, 26))
        self.assertEqual((header["n_x"], header["n_k"]), (26, 26))
        self.assertAlmostEqual(header["dx"], 4 * self.grid.dx)
        self.assertEqual(header["convention"], CONVENTION_TAG)
        full = marginal_position(self.field).values[::4]
        self.assertAllClose(reduced.sum(axis=1) * header["dk"], full, atol=1e-12)

    def test_stride_one_keeps_the_field(self):
        reduced, header = downsample_wigner(self.field, 1)
        self.assertAllClose(reduced, self.field.values, atol=0.0)
        self.assertEqual(header["k_min"], self.kgrid.k_min)
        with self.assertRaises(OutputError):
            downsample_wigner(self.field, 0)

    def test_charge_file_roundtrip(self):
        path = self.directory / "charge.tsv"
        write_charge_file(path, self.density)
        self.assertEqual(path.read_text().splitlines()[0], "x_nm\tQ_per_nm")
        table = load_charge_file(path)
        self.assertAllClose(table[:, 0], self.grid.nodes, atol=0.0)
        self.assertAllClose(table[:, 1], self.density.values, atol=0.0)

    def test_wigner_file_layouts(self):
        reduced, header = downsample_wigner(self.field, 2)
        for binary, name in ((False, "field.txt"), (True, "field.bin")):
            with self.subTest(binary=binary):
                path = self.directory / name
                write_wigner_file(path, reduced, {**header, "time_fs": 6.0}, binary)
                loaded_header, values = load_wigner_file(path)
                self.assertEqual(loaded_header["format"], "binary" if binary else "text")
                self.assertEqual(loaded_header["time_fs"], 6.0)
                self.assertEqual(loaded_header["dk"], header["dk"])
                self.assertEqual(loaded_header["convention"], CONVENTION_TAG)
                self.assertAllClose(values, reduced, atol=0.0)

    def test_unreadable_wigner_file(self):
        path = self.directory / "broken.txt"
        path.write_text("# n_x=3 n_k=3 format=text\n1 2\n")
        with self.assertRaises(OutputError):
            load_wigner_file(path)

    def test_emit_snapshot(self):
        report = scan_negativity(self.density, time=6.0)
        files = emit_snapshot(
            self.directory, "snap00", 6.0, self.density, self.field, report,
            extra={"decomposition": {"total": 1.0}}, wigner_format="binary", stride=5,
        )
        self.assertEqual(
            files,
            {"charge": "snap00_charge.tsv", "wigner": "snap00_wigner.bin", "negativity": "snap00_negativity.json"},
        )
        payload = json.loads((self.directory / "snap00_negativity.json").read_text())
        self.assertEqual(payload["violation_count"], 0)
        self.assertEqual(payload["time_fs"], 6.0)
        self.assertEqual(payload["decomposition"], {"total": 1.0})
        header, values = load_wigner_file(self.directory / files["wigner"])
        self.assertEqual(header["x_stride"], 5)
        self.assertEqual(values.shape, (21, 21))

    def test_norm_table(self):
        path = self.directory / "norms.tsv"
        write_norm_table(path, [
            {"time_fs": 0.0, "positive": 1.0, "negative": 0.0, "total": 1.0, "min_q": 0.0, "min_x_nm": 0.0},
            {"time_fs": 6.0, "positive": 1.1, "negative": -0.1, "total": 1.0, "min_q": -0.01, "min_x_nm": 42.0},
        ])
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0].split("\t"), ["time_fs", "positive", "negative", "total", "min_q", "min_x_nm"])
        self.assertEqual(len(lines), 3)


class ManifestTests(TemporaryDirectoryMixin, NumericsTestCase):
    def setUp(self):
        self.directory = self.make_temp_dir()
        (self.directory / "a.tsv").write_text("x\n")
        (self.directory / "nested").mkdir()
        (self.directory / "nested" / "b.json").write_text("{}\n")

    def test_manifest_indexes_every_file(self):
        files = file_hash.write_manifest(self.directory, {"scenario": "demo"})
        self.assertEqual([entry["path"] for entry in files], ["a.tsv", "nested/b.json"])
        self.assertEqual(files[0]["sha256"], file_hash.get_file_hash(self.directory / "a.tsv"))
        self.assertEqual(files[0]["bytes"], 2)
        manifest = file_hash.load_manifest(self.directory)
        self.assertEqual(manifest["scenario"], "demo")
        self.assertEqual(manifest["files"], files)
        self.assertEqual(file_hash.verify_manifest(self.directory), [])

    def test_verify_detects_tampering(self):
        file_hash.write_manifest(self.directory, {})
        (self.directory / "a.tsv").write_text("y\n")
        (self.directory / "nested" / "b.json").unlink()
        (self.directory / "extra.txt").write_text("!")
        self.assertEqual(
            sorted(file_hash.verify_manifest(self.directory)),
            ["a.tsv: checksum mismatch", "extra.txt: not indexed", "nested/b.json: listed but missing"],
        )

    def test_missing_manifest(self):
        self.assertIsNone(file_hash.load_manifest(self.directory))
        self.assertEqual(file_hash.verify_manifest(self.directory), ["manifest.json is missing"])
        with self.assertRaises(OutputError):
            file_hash.read_manifest_file(self.directory)

    def test_read_manifest_by_path_or_directory(self):
        file_hash.write_manifest(self.directory, {"scenario": "demo"})
        by_directory = file_hash.read_manifest_file(self.directory)
        by_path = file_hash.read_manifest_file(self.directory / file_hash.MANIFEST_NAME)
        self.assertEqual(by_directory, by_path)

    def test_corrupt_manifest(self):
        (self.directory / file_hash.MANIFEST_NAME).write_text("{not json")
        with self.assertRaises(OutputError):
            file_hash.load_manifest(self.directory)

    def test_clear_previous_outputs_keeps_unlisted_files(self):
        file_hash.write_manifest(self.directory, {})
        (self.directory / file_hash.FAILURE_NAME).write_text("{}")
        (self.directory / "notes.md").write_text("keep me")
        file_hash.clear_previous_outputs(self.directory)
        remaining = sorted(path.name for path in self.directory.rglob("*") if path.is_file())
        self.assertEqual(remaining, ["notes.md"])
