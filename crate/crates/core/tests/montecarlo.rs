use entlink::analysis::{fit_sinusoid, Mode, ScanPlan};
use entlink::model::{
    expected_rates, AnalyzerSetting, DetectorParams, FiberParams, LinkScenario, SourceParams,
};
use entlink::simkit::{simulate_link, SimOptions};
use entlink::tsproc::find_coincidences;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn scenarios() -> Vec<(&'static str, LinkScenario)> {
    let base = LinkScenario {
        source: SourceParams {
            brightness_per_mw: 2.572690e6,
            visibility_hv: 0.98675,
            visibility_da: 0.95525,
            ..SourceParams::default()
        },
        path_efficiency_idler: 0.358135,
        ..LinkScenario::default()
    };
    vec![
        (
            "local, no analyzer",
            LinkScenario {
                path_efficiency_signal: 0.9,
                ..base.with_pump(0.38)
            },
        ),
        (
            "50 km, H/H",
            LinkScenario {
                fiber: FiberParams::smf28(50.0),
                path_efficiency_signal: 0.9,
                analyzer: Some(AnalyzerSetting::new(0.0, 0.0)),
                ..base.with_pump(15.0)
            },
        ),
        (
            "50 km, D/A",
            LinkScenario {
                fiber: FiberParams::smf28(50.0),
                path_efficiency_signal: 0.9,
                analyzer: Some(AnalyzerSetting::new(45.0, 135.0)),
                ..base.with_pump(6.0)
            },
        ),
        (
            "ideal detectors",
            LinkScenario {
                detector_signal: DetectorParams::ideal(0.15),
                detector_idler: DetectorParams::ideal(0.60),
                path_efficiency_idler: 1.0,
                ..base.with_pump(0.2)
            },
        ),
    ]
}

fn within(label: &str, what: &str, got: f64, want: f64, sigma: f64, k: f64) {
    assert!(
        (got - want).abs() <= k * sigma,
        "{label}: {what} {got} vs {want} (|Δ| = {:.2}σ)",
        (got - want).abs() / sigma
    );
}

#[test]
fn monte_carlo_rates_match_expected_rates() {
    for (k, (label, s)) in scenarios().into_iter().enumerate() {
        let duration = 0.5;
        let run = simulate_link(&s, duration, 40 + k as u64, &SimOptions::default()).unwrap();
        let p = expected_rates(&s).unwrap();
        let r = find_coincidences(
            &run.idler,
            &run.signal,
            s.coincidence_window_ns,
            run.report.fiber_delay_ps as i64,
        )
        .unwrap();
        let n_exp = p.total_coincidences * r.overlap_s;
        within(
            label,
            "coincidences",
            r.count as f64,
            n_exp,
            n_exp.sqrt(),
            3.0,
        );

        let n1 = run.signal.len() as f64;
        let n1_exp = p.singles_signal * run.signal.duration_s();
        within(label, "signal singles", n1, n1_exp, n1_exp.sqrt(), 3.0);
        let n2 = run.idler.len() as f64;
        let n2_exp = p.singles_idler * run.idler.duration_s();
        within(label, "idler singles", n2, n2_exp, n2_exp.sqrt(), 3.0);
    }
}

#[test]
fn shared_windows_and_dead_time() {
    // ~4% of true pairs share their window with another idler detection,
    // well beyond the statistical error.
    let s = LinkScenario {
        source: SourceParams {
            brightness_per_mw: 2.572690e6,
            pump_power_mw: 20.0,
            pair_correlation_fwhm_ps: 0.0,
            ..SourceParams::default()
        },
        detector_signal: DetectorParams::ideal(0.01),
        detector_idler: DetectorParams::ideal(0.60),
        ..LinkScenario::default()
    };
    let duration = 0.5;
    let run = simulate_link(&s, duration, 11, &SimOptions::default()).unwrap();
    let p = expected_rates(&s).unwrap();
    let r = find_coincidences(&run.idler, &run.signal, s.coincidence_window_ns, 0).unwrap();
    let n_exp = p.total_coincidences * r.overlap_s;
    within(
        "no dead time",
        "coincidences",
        r.count as f64,
        n_exp,
        n_exp.sqrt(),
        3.0,
    );
    let unshared = p.pair_rate * 0.01 * 0.60 * p.window_acceptance + p.accidental_coincidences;
    assert!(unshared * r.overlap_s - n_exp > 5.0 * n_exp.sqrt());

    // A dead time longer than the window keeps other idler detections out.
    let mut dead = s.clone();
    dead.detector_idler.dead_time_ns = 22.0;
    let run = simulate_link(&dead, duration, 12, &SimOptions::default()).unwrap();
    let p = expected_rates(&dead).unwrap();
    let r = find_coincidences(&run.idler, &run.signal, dead.coincidence_window_ns, 0).unwrap();
    let n_exp = p.total_coincidences * r.overlap_s;
    within(
        "22 ns idler dead time",
        "coincidences",
        r.count as f64,
        n_exp,
        n_exp.sqrt(),
        3.0,
    );
}

#[test]
fn truth_pairs_track_true_coincidences() {
    let (label, s) = scenarios().swap_remove(3);
    let run = simulate_link(&s, 0.5, 3, &SimOptions::default()).unwrap();
    let p = expected_rates(&s).unwrap();
    let r = find_coincidences(&run.idler, &run.signal, 1.25, 0).unwrap();
    // Noiseless and jitter-free: every surviving pair is counted once.
    assert!(r.count >= run.report.coincident_truth_pairs);
    let n_exp = p.true_coincidences * 0.5;
    within(
        label,
        "truth pairs",
        run.report.coincident_truth_pairs as f64,
        n_exp,
        n_exp.sqrt(),
        3.0,
    );
}

#[test]
fn sinusoid_fit_is_unbiased_on_poisson_counts() {
    let (v_true, phase_deg, c0, duration) = (0.93, 12.0f64, 2.0e4, 1.0);
    let angles: Vec<f64> = (0..12).map(|k| k as f64 * 15.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut vs = Vec::new();
    let mut errs = Vec::new();
    for _ in 0..200 {
        let counts: Vec<f64> = angles
            .iter()
            .map(|&a| {
                let mean =
                    c0 * duration * (1.0 + v_true * (2.0 * (a - phase_deg)).to_radians().cos());
                Poisson::new(mean).unwrap().sample(&mut rng)
            })
            .collect();
        let sig: Vec<f64> = counts.iter().map(|c| c.max(1.0).sqrt()).collect();
        let fit = fit_sinusoid(&angles, &counts, Some(&sig)).unwrap();
        vs.push(fit.visibility);
        errs.push(fit.visibility_err);
    }
    let n = vs.len() as f64;
    let mean = vs.iter().sum::<f64>() / n;
    let sd = (vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(
        (mean - v_true).abs() < 3.0 * sd / n.sqrt(),
        "mean {mean}, sd {sd}"
    );
    // Reported uncertainties agree with the observed scatter.
    let mean_err = errs.iter().sum::<f64>() / n;
    assert!(
        (mean_err / sd - 1.0).abs() < 0.2,
        "reported {mean_err}, observed {sd}"
    );
}

#[test]
fn simulated_scan_visibility_matches_analytic() {
    let s = LinkScenario {
        fiber: FiberParams::smf28(50.0),
        path_efficiency_signal: 0.9,
        ..scenarios()[1].1.clone()
    };
    let plan = ScanPlan::default();
    let analytic = entlink::analysis::measure_scenario(&s, &plan, &Mode::Analytic).unwrap();
    let sim = entlink::analysis::measure_scenario(
        &s,
        &plan,
        &Mode::Simulated {
            duration_s: 2.0,
            seed: 8,
            options: SimOptions::default(),
        },
    )
    .unwrap();
    within(
        "scan",
        "V_avg_raw",
        sim.v_avg_raw,
        analytic.v_avg_raw,
        sim.v_avg_raw_err,
        3.0,
    );
    within(
        "scan",
        "V_avg_corr",
        sim.v_avg_corr,
        analytic.v_avg_corr,
        sim.v_avg_corr_err,
        3.0,
    );
    within(
        "scan",
        "C",
        sim.pair_rate,
        analytic.pair_rate,
        sim.pair_rate_err,
        3.0,
    );
}
