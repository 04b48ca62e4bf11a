use wcp_qkd::detector::expected_matched_error_rates;
use wcp_qkd::protocol::PulseTrace;
use wcp_qkd::security::multiphoton_detect_prob;
use wcp_qkd::statistics::{chi_square_gof, poisson_classes, CountHistogram, GOF_CLASSES};
use wcp_qkd::{
    run_session, sift, verify, Attack, ChannelConfig, DetectorConfig, MeasuredBit, PulseClass,
    SessionConfig, SessionLog, SourceConfig,
};

fn run(
    mu: f64,
    eta: f64,
    channel_error: f64,
    detector: DetectorConfig,
    attack: Attack,
    n: u64,
    seed: u64,
) -> SessionLog {
    let config = SessionConfig::new(
        SourceConfig::new(mu, 0.5).unwrap(),
        ChannelConfig::new(eta, attack)
            .unwrap()
            .with_channel_error(channel_error)
            .unwrap(),
        detector,
        n,
        seed,
    )
    .unwrap();
    run_session(&config).unwrap()
}

fn within_sigmas(observed: f64, expected: f64, n: f64, sigmas: f64) -> bool {
    let sigma = (expected * (1.0 - expected) / n).sqrt();
    (observed - expected).abs() <= sigmas * sigma
}

#[test]
fn sifting_keeps_half_of_unambiguous_detections() {
    let log = run(
        0.1,
        0.2,
        0.0,
        DetectorConfig::default(),
        Attack::None,
        400_000,
        1,
    );
    let unambiguous = log
        .traces
        .iter()
        .filter(|t| {
            t.detection.resolved_count > 0 && t.detection.measured_bit != MeasuredBit::Ambiguous
        })
        .count();
    let sifted = sift(&log).len();
    assert!(within_sigmas(
        sifted as f64 / unambiguous as f64,
        0.5,
        unambiguous as f64,
        3.0
    ));
}

#[test]
fn clean_channel_without_dark_counts_has_zero_qber() {
    let log = run(
        0.3,
        0.3,
        0.0,
        DetectorConfig::new(16, 0.0).unwrap(),
        Attack::None,
        200_000,
        2,
    );
    let sifted = sift(&log);
    let report = verify(&sifted, &log).unwrap();
    assert_eq!(report.qber, 0.0);
    assert!(sifted.iter().all(|r| !r.error));
}

/// With a uniform channel error every per-click-count error rate sits at
/// the value the noise model predicts for that click count.
#[test]
fn per_click_count_error_rates_follow_a_uniform_channel() {
    let detector = DetectorConfig::new(64, 1e-5).unwrap();
    let log = run(0.3, 0.5, 0.04, detector.clone(), Attack::None, 1_000_000, 3);
    let report = verify(&sift(&log), &log).unwrap();
    assert!(report.qber_consistency, "{report}");
    for class in PulseClass::ALL {
        let c = report.class(class);
        let model =
            expected_matched_error_rates(c.mean_photons, 0.04, &detector, GOF_CLASSES).unwrap();
        for cell in c.qber_per_n.iter().filter(|q| q.events >= 200) {
            let m = model[cell.n as usize - 1].unwrap();
            let e = cell.rate().unwrap();
            assert!(
                within_sigmas(e, m, cell.events as f64, 3.0),
                "{class} n={}: {e} vs {m}",
                cell.n
            );
        }
    }
}

#[test]
fn unattacked_click_counts_are_poisson_with_a_fine_receiver() {
    // mu eta = 0.02
    let log = run(
        0.1,
        0.2,
        0.0,
        DetectorConfig::new(64, 0.0).unwrap(),
        Attack::None,
        1_000_000,
        4,
    );
    let hist = CountHistogram::from_values(
        log.class_traces(PulseClass::Signal)
            .map(|t| t.detection.resolved_count),
        GOF_CLASSES,
    );
    let gof = chi_square_gof(&hist, &poisson_classes(0.02, GOF_CLASSES).unwrap(), 0.01).unwrap();
    assert!(gof.pass, "{gof:?}");
}

#[test]
fn multiphoton_detections_near_first_order_rate() {
    let (mu, eta) = (0.2, 0.1);
    let log = run(
        mu,
        eta,
        0.0,
        DetectorConfig::default(),
        Attack::None,
        1_000_000,
        5,
    );
    let detected: Vec<&PulseTrace> = log
        .class_traces(PulseClass::Signal)
        .filter(|t| t.detection.resolved_count > 0)
        .collect();
    let multi = detected.iter().filter(|t| t.detection.multiphoton).count();
    let frac = multi as f64 / detected.len() as f64;
    let approx = multiphoton_detect_prob(mu, eta).unwrap().get();
    assert!((frac - approx).abs() <= 0.25 * approx, "{frac} vs {approx}");
}

#[test]
fn splitting_passes_verification_and_concedes_the_bound() {
    let log = run(
        0.1,
        0.1,
        0.0,
        DetectorConfig::default(),
        Attack::Pns,
        1_000_000,
        6,
    );
    let report = verify(&sift(&log), &log).unwrap();
    assert_eq!(report.verdict, wcp_qkd::Verdict::Secure, "{report}");
    assert!(report.delta_empirical.get() <= 0.1);
    assert!((report.delta_bound.get() - 0.09).abs() < 1e-15);
    assert!(report.delta_empirical.get() > 0.0);
}

#[test]
fn every_pulse_is_traced() {
    let log = run(
        0.1,
        0.1,
        0.0,
        DetectorConfig::default(),
        Attack::Cmp { alpha: 0.8 },
        30_000,
        7,
    );
    for (i, t) in log.traces.iter().enumerate() {
        assert_eq!(t.pulse.id, i as u64);
        assert!(t.outcome.forwarded() <= t.pulse.photon_count + u32::from(t.outcome.substituted));
        assert_eq!(
            t.detection.resolved_count as usize,
            t.detection.clicked_spds.len()
        );
        assert_eq!(
            t.detection.measured_bit == MeasuredBit::Ambiguous,
            t.detection.resolved_count == 0
                || t.detection
                    .click_bits()
                    .any(|b| Some(b) != t.detection.click_bits().next())
        );
    }
}
