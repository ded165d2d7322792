//! `sphaera` command-line interface.
//!
//! Exit status: 0 on success, 1 when a verification fails, 2 when the
//! arguments or input files are invalid.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sphaera::evolution::{apply_semigroup, cov_space_time, cov_time, jump_kernel, CovarianceQuery};
use sphaera::fields::{estimate_spectrum, sample_field};
use sphaera::harmonics::synthesize;
use sphaera::io::{
    read_coefficients, write_coefficients, write_map, write_path, write_spectrum, RunHeader,
};
use sphaera::spectra::effective_spectrum;
use sphaera::sphere_walk::{mc_cov_space, mc_cov_time, replicate, sample_subordinate_path};
use sphaera::verify::{run_criterion, title, Report, CRITERIA};
use sphaera::{LaplaceExponent, PowerSpectrum, SphereGrid, SpherePoint, StreamFactory};

#[derive(Parser)]
#[command(name = "sphaera", version, about = "Random fields on the sphere under subordinate diffusion")]
struct Cli {
    /// Worker threads for parallel sections (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct FieldArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bandlimit.
    #[arg(long = "L", default_value_t = 16)]
    bandlimit: usize,
    /// `power:A=..,gamma=..` or `damped:A=..,theta=..,nu=..,c=..`
    #[arg(long, default_value = "power:A=1,gamma=3")]
    spectrum: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum CovMode {
    Space,
    Time,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a field; writes coefficients.csv and map.csv.
    Synth {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Apply the semigroup at time t; writes evolved coefficients and the effective spectrum.
    Evolve {
        /// Coefficients CSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "stable:alpha=0.5")]
        psi: String,
        #[arg(long)]
        t: f64,
        /// Base spectrum for the effective spectrum; the estimate from the
        /// input coefficients is used when absent.
        #[arg(long)]
        spectrum: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Estimate the power spectrum of a coefficients file.
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Evaluate the space-time covariance series.
    Cov {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value = "stable:alpha=0.5")]
        psi: String,
        #[arg(long, default_value_t = 0.0)]
        t1: f64,
        #[arg(long, default_value_t = 0.0)]
        t2: f64,
        #[arg(long, default_value_t = 0.5)]
        cos_angle: f64,
    },
    /// Compare a Monte-Carlo covariance estimate with its series.
    CovCheck {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value = "stable:alpha=0.5")]
        psi: String,
        #[arg(long, default_value_t = 0.5)]
        t1: f64,
        #[arg(long, default_value_t = 0.5)]
        t2: f64,
        /// Inner product of the two points (space mode only).
        #[arg(long, default_value_t = 0.5)]
        cos_angle: f64,
        #[arg(long = "N", default_value_t = 20_000)]
        replications: usize,
        #[arg(long, value_enum, default_value_t = CovMode::Space)]
        mode: CovMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a subordinate Brownian path; writes walk.csv.
    Walk {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "stable:alpha=0.5")]
        psi: String,
        /// Final time.
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Tabulate the jump kernel over angles in [0, π]; writes kernel.csv.
    Kernel {
        #[arg(long, default_value = "gamma")]
        psi: String,
        /// Truncation degree.
        #[arg(long = "L", default_value_t = 64)]
        bandlimit: usize,
        /// First summed degree; defaults to 1 when Ψ'(0) is infinite, else 0.
        #[arg(long)]
        l_min: Option<usize>,
        #[arg(long, default_value_t = 181)]
        points: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Monte-Carlo check of E exp(-μ D_t) = exp(-t Ψ(μ)).
    SubordTest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "stable:alpha=0.5")]
        psi: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long = "N", default_value_t = 100_000)]
        replications: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance criteria; writes report.json.
    VerifyAll {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated subset of criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

enum Outcome {
    Done,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_psi(text: &str) -> Result<LaplaceExponent> {
    text.parse().with_context(|| format!("invalid --psi '{text}'"))
}

fn parse_spectrum(text: &str, bandlimit: usize) -> Result<PowerSpectrum> {
    PowerSpectrum::parse(text, bandlimit).with_context(|| format!("invalid --spectrum '{text}'"))
}

fn time(name: &str, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        bail!("--{name} must be finite and >= 0, got {t}");
    }
    Ok(t)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn emit_json(value: &Value, out: Option<&Path>, name: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(dir) = out {
        let mut w = create(dir, name)?;
        writeln!(w, "{text}")?;
        w.flush()?;
    }
    Ok(())
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Synth { field, out } => {
            let s = parse_spectrum(&field.spectrum, field.bandlimit)?;
            let header = RunHeader::new("synth", Some(field.seed))
                .param("L", field.bandlimit)
                .param("spectrum", &field.spectrum);
            let c = sample_field(&s, &mut StreamFactory::new(field.seed).split("synth").stream(0));
            let map = synthesize(&c, &SphereGrid::new(field.bandlimit))?;
            let mut w = create(&out, "coefficients.csv")?;
            write_coefficients(&mut w, &c, &header)?;
            w.flush()?;
            let mut w = create(&out, "map.csv")?;
            write_map(&mut w, &map, &header)?;
            w.flush()?;
        }
        Command::Evolve { input, psi, t, spectrum, out } => {
            let psi_value = parse_psi(&psi)?;
            let t = time("t", t)?;
            let file = File::open(&input).with_context(|| format!("cannot read {}", input.display()))?;
            let c = read_coefficients(BufReader::new(file))?;
            let base = match &spectrum {
                Some(text) => parse_spectrum(text, c.bandlimit())?,
                None => estimate_spectrum(&c),
            };
            let header = RunHeader::new("evolve", None)
                .param("input", input.display())
                .param("psi", &psi)
                .param("t", t)
                .param("spectrum", spectrum.as_deref().unwrap_or("estimated"));
            let mut w = create(&out, "evolved_coefficients.csv")?;
            write_coefficients(&mut w, &apply_semigroup(&c, &psi_value, t)?, &header)?;
            w.flush()?;
            let mut w = create(&out, "effective_spectrum.csv")?;
            write_spectrum(&mut w, &effective_spectrum(&base, &psi_value, t)?, &header)?;
            w.flush()?;
        }
        Command::Spectrum { input, out } => {
            let file = File::open(&input).with_context(|| format!("cannot read {}", input.display()))?;
            let c = read_coefficients(BufReader::new(file))?;
            let header = RunHeader::new("spectrum", None).param("input", input.display());
            let mut w = create(&out, "spectrum.csv")?;
            write_spectrum(&mut w, &estimate_spectrum(&c), &header)?;
            w.flush()?;
        }
        Command::Cov { field, psi, t1, t2, cos_angle } => {
            let q = CovarianceQuery {
                spectrum: parse_spectrum(&field.spectrum, field.bandlimit)?,
                psi: parse_psi(&psi)?,
                t1: time("t1", t1)?,
                t2: time("t2", t2)?,
                cos_angle,
            };
            let v = cov_space_time(&q)?;
            emit_json(
                &json!({"t1": t1, "t2": t2, "cos_angle": cos_angle, "gamma": v.gamma, "tail_bound": v.tail_bound}),
                None,
                "",
            )?;
        }
        Command::CovCheck { field, psi, t1, t2, cos_angle, replications, mode, out } => {
            let psi_value = parse_psi(&psi)?;
            let s = parse_spectrum(&field.spectrum, field.bandlimit)?.band_limited();
            let (t1, t2) = (time("t1", t1)?, time("t2", t2)?);
            if !(-1.0..=1.0).contains(&cos_angle) {
                bail!("--cos-angle must lie in [-1, 1], got {cos_angle}");
            }
            let factory = StreamFactory::new(field.seed).split("cov-check");
            let x = SpherePoint::new(1.1, 0.4)?;
            let (oracle, est) = match mode {
                CovMode::Space => {
                    let y = x.offset_along_meridian(cos_angle.acos());
                    let q = CovarianceQuery { spectrum: s.clone(), psi: psi_value, t1, t2, cos_angle };
                    (cov_space_time(&q)?.gamma, mc_cov_space(&s, &psi_value, &x, &y, t1, t2, replications, &factory)?)
                }
                CovMode::Time => {
                    let q = CovarianceQuery { spectrum: s.clone(), psi: psi_value, t1, t2, cos_angle: 1.0 };
                    (cov_time(&q)?.gamma, mc_cov_time(&s, &psi_value, &x, t1, t2, replications, &factory)?)
                }
            };
            let z = est.z_score(oracle);
            let pass = z.abs() <= 4.0;
            let report = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "command": "cov-check",
                "seed": field.seed,
                "params": {
                    "L": field.bandlimit, "spectrum": field.spectrum, "psi": psi,
                    "t1": t1, "t2": t2, "cos_angle": cos_angle, "N": replications,
                    "mode": match mode { CovMode::Space => "space", CovMode::Time => "time" },
                },
                "oracle": oracle,
                "estimate": est.estimate,
                "se": est.standard_error,
                "z_score": z,
                "pass": pass,
            });
            emit_json(&report, out.as_deref(), "cov_check.json")?;
            if !pass {
                return Ok(Outcome::Failed);
            }
        }
        Command::Walk { seed, psi, t, steps, theta, phi, out } => {
            let psi_value = parse_psi(&psi)?;
            if !(t > 0.0 && t.is_finite()) {
                bail!("--t must be positive, got {t}");
            }
            if steps == 0 {
                bail!("--steps must be positive");
            }
            let start = SpherePoint::new(theta, phi)?;
            let times: Vec<f64> = (1..=steps).map(|i| t * i as f64 / steps as f64).collect();
            let mut rng = StreamFactory::new(seed).split("walk").stream(0);
            let path = sample_subordinate_path(&start, &psi_value, &times, &mut rng)?;
            let header = RunHeader::new("walk", Some(seed))
                .param("psi", &psi)
                .param("t", t)
                .param("steps", steps)
                .param("theta", theta)
                .param("phi", phi);
            let mut w = create(&out, "walk.csv")?;
            write_path(&mut w, &path, &header)?;
            w.flush()?;
        }
        Command::Kernel { psi, bandlimit, l_min, points, out } => {
            let psi_value = parse_psi(&psi)?;
            if points < 2 {
                bail!("--points must be at least 2");
            }
            let l_min = l_min.unwrap_or(if psi_value.psi_prime(0.0).is_ok() { 0 } else { 1 });
            let header = RunHeader::new("kernel", None)
                .param("psi", &psi)
                .param("L", bandlimit)
                .param("l_min", l_min)
                .param("points", points);
            let mut w = create(&out, "kernel.csv")?;
            writeln!(w, "# sphaera-kernel L={bandlimit} l_min={l_min}")?;
            writeln!(w, "{}", header.line())?;
            writeln!(w, "angle,cos_angle,value,last_term")?;
            for i in 0..points {
                let angle = PI * i as f64 / (points - 1) as f64;
                let k = jump_kernel(&psi_value, angle.cos(), bandlimit, l_min)?;
                writeln!(w, "{angle:.16e},{:.16e},{:.16e},{:.16e}", angle.cos(), k.value, k.last_term)?;
            }
            w.flush()?;
        }
        Command::SubordTest { seed, psi, t, replications, out } => {
            let psi_value = parse_psi(&psi)?;
            if !(t > 0.0 && t.is_finite()) {
                bail!("--t must be positive, got {t}");
            }
            if replications < 100 {
                bail!("--N must be at least 100");
            }
            let factory = StreamFactory::new(seed).split("subord-test");
            let mut rows = Vec::new();
            let mut all = true;
            for mu in [0.5, 1.0, 2.0] {
                let est = replicate(replications, &factory, |rng| (-mu * psi_value.sample(t, rng).value).exp());
                let oracle = (-t * psi_value.psi(mu)).exp();
                let z = est.z_score(oracle);
                all &= z.abs() <= 4.0;
                rows.push(json!({
                    "mu": mu, "oracle": oracle, "estimate": est.estimate,
                    "se": est.standard_error, "z_score": z, "pass": z.abs() <= 4.0,
                }));
            }
            let report = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "command": "subord-test",
                "seed": seed,
                "params": {"psi": psi, "t": t, "N": replications},
                "checks": rows,
                "pass": all,
            });
            emit_json(&report, out.as_deref(), "subord_test.json")?;
            if !all {
                return Ok(Outcome::Failed);
            }
        }
        Command::VerifyAll { seed, only, out } => {
            let ids: Vec<u8> = if only.is_empty() { CRITERIA.to_vec() } else { only };
            let mut criteria = Vec::new();
            for id in ids {
                let report = run_criterion(id, seed)?;
                println!("criterion {id:>2} {} {}", if report.pass { "PASS" } else { "FAIL" }, title(id));
                criteria.push(report);
            }
            let report = Report { seed, pass: criteria.iter().all(|c| c.pass), criteria };
            let value = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "command": "verify-all",
                "seed": seed,
                "report": report,
            });
            let mut w = create(&out, "report.json")?;
            writeln!(w, "{}", serde_json::to_string_pretty(&value)?)?;
            w.flush()?;
            if !report.pass {
                return Ok(Outcome::Failed);
            }
        }
    }
    Ok(Outcome::Done)
}
