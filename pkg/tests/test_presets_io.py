import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qcdirichlet.cli import main as cli_main
from qcdirichlet.config import ConfigError, parse_config
from qcdirichlet.fieldio import export_field, import_field, read_manifest
from qcdirichlet.fields import ComplexField, Grid, RealField, field_from_callable, wirtinger_derivatives
from qcdirichlet.presets import (
    boundary_data_preset,
    domain_preset,
    mu_preset,
    phi_gauge_preset,
    q_profile_preset,
    radial_stretch_map,
)


class TestMuPresets:
    def test_radial_stretch_formula(self):
        mu = mu_preset("radial-stretch", K=2.0)
        # modulus (K-1)/(K+1), axis z/conj(z); at z = 0.5 the phase is 1
        assert mu(np.array([0.5 + 0j]))[0] == pytest.approx(1 / 3)
        assert abs(mu(np.array([0.3 + 0.4j]))[0]) == pytest.approx(1 / 3)
        assert mu(np.array([1.5 + 0j]))[0] == 0

    def test_radial_stretch_pairs_with_its_map(self):
        # the oracle map f = z|z|^(K-1) must satisfy f_zbar = mu f_z for the
        # preset coefficient; verified by finite differences before any use
        g = Grid(0j, 2.0, 256)
        K = 3.0
        f = field_from_callable(g, radial_stretch_map(K))
        fz, fzb = wirtinger_derivatives(f)
        mu = field_from_callable(g, mu_preset("radial-stretch", K=K), supersample=1)
        Z = g.nodes()
        ring = (np.abs(Z) < 0.9) & (np.abs(Z) > 0.1)
        assert np.max(np.abs(fzb.values - mu.values * fz.values)[ring]) < 2e-2

    def test_tangent_preset_bounds(self):
        mu = mu_preset("tangent", k=0.5, z0=1.0)
        v = mu(np.array([1.5 + 0j, 1.0 + 0.2j]))
        assert np.allclose(np.abs(v), 0.5)
        with pytest.raises(ValueError, match="ellipticity"):
            mu_preset("tangent", k=1.0)

    def test_log_degenerate_pointwise_dilatation(self):
        mu = mu_preset("log-degenerate", lam=0.5, z0=1.0)
        z = 1.0 - math.exp(-4.0)
        k = abs(mu(np.array([z + 0j]))[0])
        K = (1 + k) / (1 - k)
        assert K == pytest.approx(math.sqrt(5.0), rel=1e-12)

    def test_boundary_blowup_presets_stay_elliptic(self):
        for name in ("exp-boundary", "inv-sq-boundary"):
            mu = mu_preset(name)
            g = Grid(0j, 2.0, 256)
            vals = field_from_callable(g, mu).values
            assert np.max(np.abs(vals)) < 1.0

    def test_unknown_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            mu_preset("spiral")


class TestGaugeAndProfilePresets:
    def test_exp_gauge_value(self):
        phi = phi_gauge_preset("exp", alpha=1.0)
        assert float(phi.eval(np.array([2.0]))[0]) == pytest.approx(math.e ** 2)

    def test_profiles_positive_on_lattice(self):
        r = np.geomspace(1e-12, 1.0, 200)
        for name in ("const", "log", "pow-log", "inv-r", "exp-integrable"):
            q = q_profile_preset(name)(r)
            assert np.all(q > 0)

    def test_gauges_convex_on_lattice(self):
        for name in ("exp", "power", "exp-sqrt", "exp-over-log"):
            phi_gauge_preset(name).validate()

    def test_domain_presets(self):
        disk = domain_preset("disk", radius=2.0, samples=128)
        assert disk.diameter() == pytest.approx(4.0, rel=1e-2)
        ell = domain_preset("ellipse", a=1.5, b=1.0, samples=128)
        assert ell.contains(np.array([1.4 + 0j, 0 + 0.9j, 1.4 + 0.9j])).tolist() == [True, True, False]
        poly = domain_preset("polygon", vertices=[0, 1, 1 + 1j, 1j], samples=128)
        assert poly.contains(np.array([0.5 + 0.5j]))[0]

    def test_boundary_presets(self):
        dom = domain_preset("disk", samples=128)
        t = 2 * np.pi * np.arange(128) / 128
        assert np.allclose(boundary_data_preset("cos-harmonic", dom).values, np.cos(t))
        assert np.allclose(boundary_data_preset("const", dom, c=2.0).values, 2.0)


class TestFieldIO:
    def test_csv_round_trip_bit_exact(self, tmp_path):
        g = Grid(0.5 + 0.25j, 1.5, 32)
        rng = np.random.default_rng(3)
        f = ComplexField(g, rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32)))
        path = tmp_path / "f.csv"
        export_field(f, path)
        back = import_field(path)
        assert np.array_equal(back.values, f.values)
        assert back.grid == g

    def test_masked_rows_omitted_and_counted(self, tmp_path):
        g = Grid(0j, 1.0, 16)
        mask = np.abs(g.nodes()) < 0.5
        f = RealField(g, np.ones((16, 16)), mask)
        path = tmp_path / "m.csv"
        manifest = export_field(f, path)
        assert manifest["masked_nodes_omitted"] == int(16 * 16 - mask.sum())
        n_rows = sum(1 for _ in open(path)) - 1
        assert n_rows == int(mask.sum())
        back = import_field(path)
        assert np.array_equal(back.unmasked, mask)
        assert np.all(back.values[mask] == 1.0)

    def test_zero_field_heatmap_mid_gray(self, tmp_path):
        g = Grid(0j, 1.0, 16)
        f = RealField(g, np.zeros((16, 16)))
        path = tmp_path / "z.pgm"
        manifest = export_field(f, path, format="pgm-heatmap")
        data = path.read_bytes()
        header_end = data.index(b"255\n") + 4
        pixels = np.frombuffer(data[header_end:], dtype=np.uint8)
        assert np.all((pixels == 127) | (pixels == 128))
        assert manifest["scale"]["zero_level"] == 127.5

    def test_manifest_hash_matches(self, tmp_path):
        from qcdirichlet.fieldio import file_sha256

        g = Grid(0j, 1.0, 16)
        f = RealField(g, np.ones((16, 16)))
        path = tmp_path / "h.csv"
        manifest = export_field(f, path)
        assert manifest["sha256"] == file_sha256(path)


class TestParseConfig:
    def write(self, tmp_path, payload):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(payload))
        return p

    def test_minimal_disk_defaults(self, tmp_path):
        cfg = parse_config(self.write(tmp_path, {
            "task": "beltrami",
            "domain": {"preset": "disk"},
            "mu": {"preset": "zero"},
            "sigma": {"preset": "zero"},
            "phi": {"preset": "cos-harmonic"},
        }))
        assert cfg.grid.n == 256 and cfg.grid.half_width == 2.0
        assert cfg.tolerances["solver"] == 1e-6
        assert cfg.problem is not None
        assert cfg.problem.anchor == cfg.problem.domain.centroid()

    def test_nonelliptic_preset_rejected_by_name(self, tmp_path):
        with pytest.raises(ConfigError, match="ellipticity"):
            parse_config(self.write(tmp_path, {
                "task": "beltrami",
                "domain": {"preset": "disk"},
                "mu": {"preset": "tangent", "k": 1.2},
                "sigma": {"preset": "zero"},
                "phi": {"preset": "const"},
            }))

    def test_sigma_margin_rejected_by_name(self, tmp_path):
        with pytest.raises(ConfigError, match="compact-support margin"):
            parse_config(self.write(tmp_path, {
                "task": "beltrami",
                "domain": {"preset": "disk"},
                "mu": {"preset": "zero"},
                "sigma": {"preset": "disk-indicator", "radius": 0.99},
                "phi": {"preset": "const"},
            }))

    def test_unknown_keys_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config(self.write(tmp_path, {
                "task": "beltrami",
                "domain": {"preset": "disk", "wobble": 3},
                "mu": {"preset": "zero"},
                "sigma": {"preset": "zero"},
                "phi": {"preset": "const"},
            }))

    def test_json_error_carries_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "task": "beltrami",,\n}')
        with pytest.raises(ConfigError, match="line 2"):
            parse_config(p)

    def test_bad_task(self, tmp_path):
        with pytest.raises(ConfigError, match="task"):
            parse_config(self.write(tmp_path, {"task": "heat-equation"}))

    def test_parse_export_parse_idempotent(self, tmp_path):
        payload = {
            "task": "beltrami",
            "grid": {"n": 128},
            "domain": {"preset": "disk", "samples": 128},
            "mu": {"preset": "radial-stretch", "K": 1.5},
            "sigma": {"preset": "zero"},
            "phi": {"preset": "cos-harmonic"},
            "seed": 99,
        }
        cfg1 = parse_config(self.write(tmp_path, payload))
        # the raw dict is the canonical exported form (embedded in manifests)
        p2 = tmp_path / "roundtrip.json"
        p2.write_text(json.dumps(cfg1.raw))
        cfg2 = parse_config(p2)
        assert cfg2.raw == cfg1.raw
        assert cfg2.grid == cfg1.grid
        assert cfg2.seed == cfg1.seed
        assert np.array_equal(cfg2.problem.mu.values, cfg1.problem.mu.values)

    def test_audit_boundary_samples_mode(self, tmp_path):
        cfg = parse_config(self.write(tmp_path, {
            "task": "audit",
            "Q": {"preset": "const"},
            "domain": {"preset": "disk", "samples": 128},
            "points": "boundary-samples",
            "stride": 32,
        }))
        assert len(cfg.audit["points"]) == 4
        assert all(abs(abs(p) - 1.0) < 1e-12 for p in cfg.audit["points"])


class TestCLI:
    def write(self, tmp_path, payload, name="cfg.json"):
        p = tmp_path / name
        p.write_text(json.dumps(payload))
        return p

    def test_solve_beltrami_exit_and_manifest(self, tmp_path):
        cfg = self.write(tmp_path, {
            "task": "beltrami",
            "grid": {"n": 128},
            "domain": {"preset": "disk", "samples": 256},
            "mu": {"preset": "zero"},
            "sigma": {"preset": "zero"},
            "phi": {"preset": "cos-harmonic"},
            "anchor": [0, 0],
        })
        out = tmp_path / "out"
        rc = cli_main(["solve-beltrami", str(cfg), "--out-dir", str(out), "--quiet"])
        assert rc == 0
        manifest = read_manifest(out / "run_manifest.json")
        assert manifest["residuals"]["interior_l2"] < 1e-3
        assert (out / "omega.csv").exists()
        omega = import_field(out / "omega.csv")
        assert abs(omega.at(0.5) - 0.5) < 1e-3

    def test_audit_writes_verdict_table(self, tmp_path):
        cfg = self.write(tmp_path, {
            "task": "audit",
            "Q": {"preset": "inv-r"},
            "points": [[0.0, 0.0]],
            "criteria": ["MEAN", "LEHTO"],
        })
        out = tmp_path / "audit_out"
        rc = cli_main(["audit-criteria", str(cfg), "--out-dir", str(out), "--quiet"])
        assert rc == 0
        rows = (out / "verdicts.csv").read_text().strip().splitlines()
        assert len(rows) == 3  # header + 2 criteria
        assert all("VIOLATED" in r for r in rows[1:])

    def test_qc_map_grid_override(self, tmp_path):
        cfg = self.write(tmp_path, {
            "task": "qc-map",
            "mu": {"preset": "radial-stretch", "K": 2},
        })
        out = tmp_path / "map_out"
        rc = cli_main(["qc-map", str(cfg), "--out-dir", str(out), "--grid-n", "128", "--quiet"])
        assert rc == 0
        manifest = read_manifest(out / "run_manifest.json")
        assert manifest["jacobian_min"] > 0
        f = import_field(out / "f.csv")
        assert f.grid.n == 128

    def test_bad_config_exits_3(self, tmp_path):
        rc = cli_main(["solve-beltrami", str(tmp_path / "missing.json"), "--quiet"])
        assert rc == 3

    def test_console_entry_point(self, tmp_path):
        cfg = self.write(tmp_path, {
            "task": "audit",
            "Q": {"preset": "const"},
            "points": [[0.0, 0.0]],
            "criteria": ["MEAN"],
        })
        proc = subprocess.run(
            [sys.executable, "-m", "qcdirichlet.cli", "audit-criteria", str(cfg),
             "--out-dir", str(tmp_path / "o"), "--quiet"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
