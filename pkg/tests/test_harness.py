"""Experiment specs, reports, paired engines, and the analysis helpers."""

import json

import numpy as np
import pytest

from holodisc import (
    ComparisonReport,
    ConfigError,
    DataError,
    EXPERIMENTS,
    ExperimentSpec,
    ModelConfig,
    SignalSpec,
    convergence_order,
    default_spec,
    fit_emergence_rate,
    nsm_series,
    rms,
    run_macro_forced,
    run_micro_field,
    spec_from_dict,
)
from holodisc.harness import consistency_experiment, default_window_start


class TestHelpers:
    def test_rms(self):
        assert np.isclose(rms([3.0, 4.0]), np.sqrt(12.5))

    def test_convergence_order_recovers_power(self):
        h = np.array([0.4, 0.2, 0.1, 0.05])
        errs = 3.0 * h**2.5
        assert np.isclose(convergence_order(h, errs), 2.5, atol=1e-10)

    def test_emergence_rate_fit(self):
        t = np.linspace(0.0, 4.0, 400)
        dev = 2.0 * np.exp(-1.7 * t)
        assert np.isclose(fit_emergence_rate(t, dev, 0.5, 3.5), 1.7, atol=1e-6)

    def test_emergence_rate_needs_decaying_samples(self):
        with pytest.raises(DataError):
            fit_emergence_rate([0.0, 1.0], [1.0, 0.5], 0.0, 1.0)
        with pytest.raises(DataError):
            fit_emergence_rate(
                np.linspace(0.0, 1.0, 50),
                np.zeros(50),
                0.0,
                1.0,
            )

    def test_window_start_scales_with_the_slowest_mode(self):
        assert np.isclose(default_window_start(np.pi), 8.0)


class TestExperimentSpec:
    def test_defaults_are_fig_friendly(self):
        spec = ExperimentSpec(name="demo")
        assert spec.alpha == 0.3
        assert spec.eps == 0.05
        assert spec.m == 4

    def test_window_validation(self):
        with pytest.raises(ConfigError):
            ExperimentSpec(name="bad", t0=0.0)
        with pytest.raises(ConfigError):
            ExperimentSpec(name="bad", t0=2.0, t1=1.0)

    def test_paired_runs_must_share_seed(self):
        with pytest.raises(ConfigError):
            ExperimentSpec(name="bad", micro_seed=1, macro_seed=2)

    def test_resolved_seed_prefers_explicit(self):
        spec = ExperimentSpec(name="demo", seed=5, micro_seed=9, macro_seed=9)
        assert spec.resolved_seed == 9

    def test_to_dict_round_trips_fields(self):
        spec = ExperimentSpec(name="demo", alpha=0.7)
        d = spec.to_dict()
        assert d["alpha"] == 0.7
        assert d["name"] == "demo"


class TestSpecFromDict:
    def test_overrides_defaults(self):
        spec = spec_from_dict("fig3", {"alpha": 0.5, "t1": 5.0})
        assert spec.alpha == 0.5
        assert spec.t1 == 5.0
        assert spec.signal.kind == "lorenz"

    def test_signal_subdict(self):
        spec = spec_from_dict(
            "fig3", {"signal": {"kind": "harmonic", "omega": 3.0}}
        )
        assert spec.signal.kind == "harmonic"
        assert spec.signal.omega == 3.0

    def test_unknown_fields_rejected(self):
        with pytest.raises(ConfigError):
            spec_from_dict("fig3", {"alpa": 0.5})

    def test_every_experiment_has_defaults(self):
        for name in EXPERIMENTS:
            spec = default_spec(name)
            assert spec.name == name

    def test_unknown_experiment_rejected(self):
        with pytest.raises(ConfigError):
            default_spec("fig9")


class TestComparisonReport:
    def report(self, **kw):
        base = dict(
            name="demo",
            config={"alpha": 0.3},
            metrics={"gap": 0.1},
            checks={"ok": True},
        )
        base.update(kw)
        return ComparisonReport(**base)

    def test_passed_requires_every_check(self):
        assert self.report().passed
        assert not self.report(checks={"ok": True, "tight": False}).passed

    def test_non_finite_metric_rejected(self):
        with pytest.raises(DataError):
            self.report(metrics={"gap": np.nan})

    def test_save_embeds_config_and_schema(self, tmp_path):
        path = tmp_path / "report.json"
        self.report().save(str(path))
        data = json.loads(path.read_text())
        assert data["schema_version"] == 1
        assert data["config"]["alpha"] == 0.3
        assert data["passed"] is True


class TestPairedEngines:
    def micro_args(self):
        n = 32
        x = (np.pi / 16.0) * np.arange(n)
        profile = np.cos(2.0 * x)
        signal = SignalSpec(kind="lorenz", xi0=10.0, eta0=8.0)
        return x, np.ones(n), profile, signal

    def test_micro_runs_are_seed_reproducible(self):
        x, u0, profile, signal = self.micro_args()
        out = []
        for _ in range(2):
            times, hist, vals = run_micro_field(
                x, u0, 0.3, 0.05, [(profile, signal)], 1e-3, 0.2,
                seed=77, record_every=10,
            )
            out.append((times, hist, vals))
        assert np.array_equal(out[0][1], out[1][1])
        assert np.array_equal(out[0][2], out[1][2])

    def test_micro_seed_changes_the_path(self):
        x, u0, profile, signal = self.micro_args()
        _, hist_a, _ = run_micro_field(
            x, u0, 0.3, 0.05, [(profile, signal)], 1e-3, 0.2, seed=77,
        )
        _, hist_b, _ = run_micro_field(
            x, u0, 0.3, 0.05, [(profile, signal)], 1e-3, 0.2, seed=78,
        )
        assert not np.array_equal(hist_a, hist_b)

    def test_micro_and_macro_share_forcing_paths(self):
        """The pairing invariant: same spec and seed, bit-identical signals."""
        x, u0, profile, signal = self.micro_args()
        _, _, vals_micro = run_micro_field(
            x, u0, 0.3, 0.05, [(profile, signal)], 1e-3, 0.5,
            seed=77, record_every=10,
        )
        cfg = ModelConfig(variant="ssm1", alpha=0.3, eps=0.05,
                          H=np.pi / 2.0, m=4)
        times, U_hist, bank_hist, vals_macro = run_macro_forced(
            cfg, np.ones(4), [signal], lambda v, t: v[0], 0.5,
            seed=77, record_every=10,
        )
        assert np.array_equal(vals_micro, vals_macro)
        assert nsm_series(cfg, U_hist, bank_hist).shape == U_hist.shape

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_macro_blowup_is_diagnosed(self):
        cfg = ModelConfig(variant="ssm1", alpha=0.3, eps=0.05,
                          H=np.pi / 2.0, m=4, dt=40.0)
        from holodisc import StabilityError

        with pytest.raises(StabilityError):
            run_macro_forced(
                cfg, 1e3 * np.array([1.0, -1.0, 1.0, -1.0]),
                [SignalSpec(kind="constant", value=0.0)],
                lambda v, t: v[0], 400.0, seed=1,
            )


class TestConsistencyExperiment:
    def test_report_shape_and_outcome(self, tmp_path):
        report = consistency_experiment(out_dir=str(tmp_path))
        assert report.passed
        assert report.metrics["order_full"] > 1.9
        assert report.metrics["order_linear"] > 3.8
        assert report.config["name"] == "consistency"
