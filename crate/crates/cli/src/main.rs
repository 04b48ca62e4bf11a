//! `bb84sim`: seeded BB84 sessions, security thresholds and plot data.
//!
//! Exit codes: 0 success or secure, 1 runtime failure, 2 usage error,
//! 3 eavesdropper detected, 4 inconclusive.

mod manifest;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::{RunManifest, MANIFEST_FILE};
use wcp_qkd::channel::solve_blocking_distribution;
use wcp_qkd::detector::check_dark_count_budget;
use wcp_qkd::io::fmt_sig9;
use wcp_qkd::protocol::{write_log_csv, write_report_csv};
use wcp_qkd::security::{info_ab, info_ae, security_threshold, write_sweep_csv, SecuritySummary};
use wcp_qkd::statistics::DEFAULT_N_MAX;
use wcp_qkd::{
    extract_raw_key, run_session, sift, verify, Attack, ChannelConfig, DetectorConfig, Error,
    SessionConfig, SourceConfig, SubstituteModel, Verdict,
};

#[derive(Parser, Debug)]
#[command(
    name = "bb84sim",
    version,
    about = "BB84 with weak coherent pulses: simulation and security analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a seeded session, verify it and extract the raw key.
    Simulate(SimulateArgs),
    /// Security threshold QBER for each signal intensity.
    Threshold(ThresholdArgs),
    /// Bob's and Eve's information against QBER.
    Fig2(Fig2Args),
    /// Eve's blocking and per-photon capture strategies.
    Solver(SolverArgs),
    /// Information rates and key rate over a (mu, e) grid.
    Sweep(SweepArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum AttackKind {
    None,
    Pns,
    Pnsr,
    Si,
    Cmp,
}

impl AttackKind {
    fn label(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Pns => "pns",
            AttackKind::Pnsr => "pnsr",
            AttackKind::Si => "si",
            AttackKind::Cmp => "cmp",
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Signal mean photon number.
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    /// Decoy mean photon number.
    #[arg(long, default_value_t = 0.5)]
    mu_prime: f64,
    /// Share of pulses sent at the signal intensity.
    #[arg(long, default_value_t = 0.5)]
    signal_fraction: f64,
    /// Channel transmittance, detector efficiency included.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Per-photon polarisation flip probability of the channel.
    #[arg(long, default_value_t = 0.0)]
    channel_error: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pulses: u64,
    /// Leaf ports of the beam-splitter tree (power of two).
    #[arg(long, default_value_t = 16)]
    ports: u32,
    /// Dark-click probability per detector per pulse.
    #[arg(long, default_value_t = 1e-5)]
    e_dark: f64,
    #[arg(long, value_enum, default_value_t = AttackKind::None)]
    attack: AttackKind,
    /// Substitute photon model for `--attack pnsr`.
    #[arg(long, default_value = "intercept-resend")]
    substitute: SubstituteModel,
    /// Error rate induced on single photons by `--attack si`.
    #[arg(long, default_value_t = 0.1)]
    si_qber: f64,
    /// Coupling parameter of `--attack cmp`.
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl SimulateArgs {
    fn attack(&self) -> Attack {
        match self.attack {
            AttackKind::None => Attack::None,
            AttackKind::Pns => Attack::Pns,
            AttackKind::Pnsr => Attack::Pnsr(self.substitute),
            AttackKind::Si => Attack::Si { qber: self.si_qber },
            AttackKind::Cmp => Attack::Cmp { alpha: self.alpha },
        }
    }

    fn params(&self) -> Vec<(String, String)> {
        params([
            ("mu", self.mu.to_string()),
            ("mu-prime", self.mu_prime.to_string()),
            ("signal-fraction", self.signal_fraction.to_string()),
            ("eta", self.eta.to_string()),
            ("channel-error", self.channel_error.to_string()),
            ("pulses", self.pulses.to_string()),
            ("ports", self.ports.to_string()),
            ("e-dark", self.e_dark.to_string()),
            ("attack", self.attack.label().to_string()),
            ("substitute", self.substitute.to_string()),
            ("si-qber", self.si_qber.to_string()),
            ("alpha", self.alpha.to_string()),
            ("seed", self.seed.to_string()),
        ])
    }
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    /// Comma-separated signal intensities.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    mu: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Output directory; the table goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Fig2Args {
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.1,0.2,0.3")]
    mu: Vec<f64>,
    /// Largest QBER on the grid.
    #[arg(long, default_value_t = 0.25)]
    e_max: f64,
    #[arg(long, default_value_t = 0.001)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    #[arg(long, default_value_t = 0.5)]
    mu_prime: f64,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Largest photon number tabulated.
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    n_max: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5")]
    mu: Vec<f64>,
    #[arg(long, default_value_t = 0.25)]
    e_max: f64,
    #[arg(long, default_value_t = 0.005)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for the reproduced outputs.
    #[arg(long)]
    out: PathBuf,
}

fn params<const N: usize>(pairs: [(&str, String); N]) -> Vec<(String, String)> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. }
            | Error::Config(_)
            | Error::DegenerateChannel(_)
            | Error::Bracketing { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

const EXIT_DETECTED: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

/// Where a command's tables go: files plus a manifest under a directory,
/// or stdout.
struct Sink {
    dir: Option<PathBuf>,
    manifest: RunManifest,
}

impl Sink {
    fn new(dir: Option<&Path>, manifest: RunManifest) -> Result<Self, Failure> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Sink {
            dir: dir.map(Path::to_path_buf),
            manifest,
        })
    }

    fn emit<F>(&mut self, file: &str, write: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), Failure>,
    {
        match &self.dir {
            Some(d) => {
                let mut w = BufWriter::new(File::create(d.join(file))?);
                write(&mut w)?;
                w.flush()?;
                self.manifest.outputs.push(file.to_string());
            }
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                write(&mut lock)?;
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<(), Failure> {
        if let Some(d) = &self.dir {
            fs::write(d.join(MANIFEST_FILE), self.manifest.render())?;
        }
        Ok(())
    }
}

fn simulate(args: &SimulateArgs) -> Outcome {
    let source =
        SourceConfig::new(args.mu, args.mu_prime)?.with_signal_fraction(args.signal_fraction)?;
    let channel =
        ChannelConfig::new(args.eta, args.attack())?.with_channel_error(args.channel_error)?;
    let detector = DetectorConfig::new(args.ports, args.e_dark)?;
    let config = SessionConfig::new(source, channel, detector, args.pulses, args.seed)?;

    let log = run_session(&config)?;
    let sifted = sift(&log);
    let report = verify(&sifted, &log)?;

    let mut summary = format!("{report}\n");
    let budget = check_dark_count_budget(&config.detector, args.mu, args.eta);
    summary += &format!(
        "dark-count budget: N e_dark = {} vs mu eta / 2 = {} ({})\n",
        fmt_sig9(budget.dark_load),
        fmt_sig9(budget.allowance),
        if budget.pass { "pass" } else { "fail" }
    );
    if report.qber <= 0.5 {
        let s = SecuritySummary::evaluate(report.qber, args.mu, args.mu_prime, args.eta)?;
        summary += &format!(
            "i_ab {} i_ae {} threshold {} gllp rate {} decoy bound {}\n",
            fmt_sig9(s.i_ab),
            fmt_sig9(s.i_ae),
            fmt_sig9(s.threshold_qber.get()),
            fmt_sig9(s.gllp_rate),
            fmt_sig9(s.delta_decoy_bound),
        );
    }

    let mut sink = Sink::new(Some(&args.out), RunManifest::new("simulate", args.params()))?;
    sink.emit("log.csv", |w| Ok(write_log_csv(&log, w)?))?;
    sink.emit("report.csv", |w| Ok(write_report_csv(&report, w)?))?;
    match extract_raw_key(&sifted, &report) {
        Ok(key) => {
            summary += &format!(
                "raw key: {} bits, {} mismatches\n",
                key.len(),
                key.mismatches()
            );
            sink.emit("key.csv", |w| {
                writeln!(w, "pulse_id,alice_bit,bob_bit")?;
                for ((id, a), b) in key.pulse_ids.iter().zip(&key.alice).zip(&key.bob) {
                    writeln!(w, "{id},{a},{b}")?;
                }
                Ok(())
            })?;
        }
        Err(e) => summary += &format!("{e}\n"),
    }
    sink.emit("summary.txt", |w| Ok(w.write_all(summary.as_bytes())?))?;
    sink.finish()?;
    print!("{summary}");

    Ok(match report.verdict {
        Verdict::Secure => ExitCode::SUCCESS,
        Verdict::EavesdropperDetected => ExitCode::from(EXIT_DETECTED),
        Verdict::Inconclusive => ExitCode::from(EXIT_INCONCLUSIVE),
    })
}

fn threshold(args: &ThresholdArgs) -> Outcome {
    let rows = args
        .mu
        .iter()
        .map(|&mu| security_threshold(mu, args.tol))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest::new(
        "threshold",
        params([("mu", join(&args.mu)), ("tol", args.tol.to_string())]),
    );
    let mut sink = Sink::new(args.out.as_deref(), manifest)?;
    sink.emit("threshold.csv", |w| {
        writeln!(w, "mu,threshold_qber,insecure_everywhere")?;
        for t in &rows {
            writeln!(
                w,
                "{},{},{}",
                fmt_sig9(t.mu),
                fmt_sig9(t.qber),
                t.insecure_everywhere
            )?;
        }
        Ok(())
    })?;
    sink.finish()?;
    Ok(ExitCode::SUCCESS)
}

fn qber_grid(e_max: f64, step: f64) -> Result<Vec<f64>, Failure> {
    if step.is_nan() || step <= 0.0 || !(0.0..=0.5).contains(&e_max) {
        return Err(Failure::Usage(format!(
            "need step > 0 and 0 <= e-max <= 0.5, got step {step}, e-max {e_max}"
        )));
    }
    let n = (e_max / step + 1e-9).floor() as u64;
    Ok((0..=n).map(|i| (i as f64 * step).min(0.5)).collect())
}

fn check_mus(mus: &[f64]) -> Result<(), Failure> {
    match mus.iter().find(|&&mu| !(0.0..=1.0).contains(&mu)) {
        Some(mu) => Err(Failure::Usage(format!("mu = {mu} is outside [0, 1]"))),
        None => Ok(()),
    }
}

fn fig2(args: &Fig2Args) -> Outcome {
    check_mus(&args.mu)?;
    let grid = qber_grid(args.e_max, args.step)?;
    let manifest = RunManifest::new(
        "fig2",
        params([
            ("mu", join(&args.mu)),
            ("e-max", args.e_max.to_string()),
            ("step", args.step.to_string()),
        ]),
    );
    let mut sink = Sink::new(args.out.as_deref(), manifest)?;
    sink.emit("fig2.csv", |w| {
        let mut header = vec!["e".to_string(), "i_ab".to_string()];
        header.extend(args.mu.iter().map(|mu| format!("i_ae_mu_{mu}")));
        writeln!(w, "{}", header.join(","))?;
        for &e in &grid {
            let mut row = vec![fmt_sig9(e), fmt_sig9(info_ab(e)?)];
            for &mu in &args.mu {
                row.push(fmt_sig9(info_ae(e, mu)?));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    sink.finish()?;
    Ok(ExitCode::SUCCESS)
}

fn solver(args: &SolverArgs) -> Outcome {
    let s = solve_blocking_distribution(args.mu, args.mu_prime, args.eta, args.n_max)?;
    let inf = &s.infeasibility;
    let report = format!(
        "P_Eve(1) exact {} first-order {}\n\
         P_Eve(2) chained {} first-order {}\n\
         blocking alone: p(2;mu)(1-2eta(1-eta)) = {} vs p(2;eta mu) = {}, gap {} ({})\n\
         one blocking law for both intensities: {}\n\
         per-photon capture law: {} (max residual {})\n",
        fmt_sig9(s.p_block1_exact),
        fmt_sig9(s.p_block1_first_order),
        fmt_sig9(s.p_block2_chained),
        fmt_sig9(s.p_block2_first_order),
        fmt_sig9(inf.lhs),
        fmt_sig9(inf.rhs),
        fmt_sig9(inf.gap),
        if inf.holds {
            "infeasible"
        } else {
            "not excluded"
        },
        if s.blocking_feasible {
            "feasible"
        } else {
            "infeasible"
        },
        if s.feasible { "feasible" } else { "infeasible" },
        fmt_sig9(s.residuals.iter().copied().fold(0.0, f64::max)),
    );
    let manifest = RunManifest::new(
        "solver",
        params([
            ("mu", args.mu.to_string()),
            ("mu-prime", args.mu_prime.to_string()),
            ("eta", args.eta.to_string()),
            ("n-max", args.n_max.to_string()),
        ]),
    );
    let mut sink = Sink::new(args.out.as_deref(), manifest)?;
    eprint!("{report}");
    sink.emit("solver.csv", |w| Ok(s.write_csv(w)?))?;
    if args.out.is_some() {
        sink.emit("solver.txt", |w| Ok(w.write_all(report.as_bytes())?))?;
    }
    sink.finish()?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: &SweepArgs) -> Outcome {
    check_mus(&args.mu)?;
    if args.mu.iter().any(|&mu| mu >= 1.0) {
        return Err(Failure::Usage("sweep needs mu < 1 for the key rate".into()));
    }
    let grid = qber_grid(args.e_max, args.step)?;
    let manifest = RunManifest::new(
        "sweep",
        params([
            ("mu", join(&args.mu)),
            ("e-max", args.e_max.to_string()),
            ("step", args.step.to_string()),
        ]),
    );
    let mut sink = Sink::new(args.out.as_deref(), manifest)?;
    sink.emit("sweep.csv", |w| Ok(write_sweep_csv(&args.mu, &grid, w)?))?;
    sink.finish()?;
    Ok(ExitCode::SUCCESS)
}

fn replay(args: &ReplayArgs) -> Outcome {
    let manifest = RunManifest::read(&args.manifest).map_err(Failure::Usage)?;
    if manifest.command == "replay" {
        return Err(Failure::Usage(
            "a replay manifest cannot be replayed".into(),
        ));
    }
    let cli = Cli::try_parse_from(manifest.to_args(&args.out))
        .map_err(|e| Failure::Usage(format!("manifest does not describe a valid run: {e}")))?;
    dispatch(&cli.command)
}

fn dispatch(command: &Command) -> Outcome {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Threshold(a) => threshold(a),
        Command::Fig2(a) => fig2(a),
        Command::Solver(a) => solver(a),
        Command::Sweep(a) => sweep(a),
        Command::Replay(a) => replay(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
