use std::path::{Path, PathBuf};

use clap::Args;
use openext::extension::{fit_point_measure, kernel_eval, kernel_of_measure, minimal_extension, minimal_extension_of};
use openext::hamiltonian::{frozen_report, multiplicity_scan, LatticeSpec};
use openext::model::{validate_measure_raw, validate_open_raw, validate_system_raw, ValidationReport};
use openext::report::{canonical_report, channels_report, check_report, decompose_report, Envelope, LatticeReport};
use openext::schema::{self, matrix_from_json, Document, MeasureJson, SystemJson};
use openext::simulate::{equivalence_residual, propagate_conservative, propagate_open, uniform_grid, Forcing};
use openext::{CVector, ConservativeSystem, Error, OpenSystem, Result, ToleranceConfig};
use serde::Serialize;

use crate::io::{emit, resolve_tolerances, write_atomic, Input};
use crate::{Command, GlobalArgs};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    input: PathBuf,
    /// Forcing profile: a JSON file, or inline JSON such as
    /// '{"kind":"step","vector":[[1,0]]}'.
    #[arg(long)]
    forcing: String,
    #[arg(long)]
    dt: f64,
    #[arg(long = "T")]
    t_end: f64,
    /// Reduced dynamics on H₁ with the memory kernel.
    #[arg(long, group = "mode")]
    open: bool,
    /// Full conservative dynamics (default).
    #[arg(long, group = "mode")]
    full: bool,
    /// Both; writes the open trajectory and reports the equivalence residual.
    #[arg(long, group = "mode")]
    both: bool,
    /// Where to write the equivalence report with --both (default: stderr summary only).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LatticeArgs {
    #[arg(long)]
    d: usize,
    #[arg(long = "L")]
    l: usize,
    #[arg(long = "N")]
    n: usize,
    /// Number of coupling vectors; checked against --gammas when both are given.
    #[arg(long = "J")]
    j: Option<usize>,
    /// Coupling vectors as "g11,g12,…;g21,…". Defaults to the last J
    /// coordinate vectors.
    #[arg(long)]
    gammas: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    /// Comma-separated sizes; emits a multiplicity scan CSV instead.
    #[arg(long)]
    scan: Option<String>,
}

pub fn run(command: Command, global: &GlobalArgs) -> Result<u8> {
    let tol = resolve_tolerances(&global.overrides())?;
    let out = global.out.as_deref();
    match command {
        Command::Validate { input } => validate(&input, out, tol),
        Command::Extend { input } => {
            let text = Input::read(&input)?;
            let system = match schema::parse_document(text.text()?)? {
                Document::Measure(m) => minimal_extension(&m.to_measure(&tol)?, &tol)?,
                Document::Open(o) => minimal_extension_of(&o.to_open(&tol)?, &tol)?,
                Document::System(_) => {
                    return Err(Error::Validation("extend expects a measure or open-system document".into()))
                }
            };
            emit(out, &pretty(&SystemJson::from_system(&system)))?;
            Ok(0)
        }
        Command::Kernel { input, t0, t1, steps } => {
            if steps == 0 || !(t0.is_finite() && t1.is_finite()) {
                return Err(Error::Validation("need finite --t0, --t1 and --steps ≥ 1".into()));
            }
            let times: Vec<f64> = (0..=steps)
                .map(|k| t0 + (t1 - t0) * k as f64 / steps as f64)
                .collect();
            let text = Input::read(&input)?;
            let samples = match schema::parse_document(text.text()?)? {
                Document::System(s) => kernel_eval(&s.to_system(&tol)?, &times)?,
                Document::Measure(m) => kernel_of_measure(&m.to_measure_unchecked(&tol)?, &times)?,
                Document::Open(o) => kernel_of_measure(&o.kernel.to_measure_unchecked(&tol)?, &times)?,
            };
            emit(out, &schema::kernel_to_csv(&samples)?)?;
            Ok(0)
        }
        Command::Decompose { input } => {
            let (system, digest) = read_system(&input, &tol)?;
            envelope(out, "decompose", tol, digest, None, decompose_report(&system, &tol)?)
        }
        Command::Channels { input } => {
            let (system, digest) = read_system(&input, &tol)?;
            envelope(out, "channels", tol, digest, None, channels_report(&system, &tol)?)
        }
        Command::Canonical { input } => {
            let (system, digest) = read_system(&input, &tol)?;
            envelope(out, "canonical", tol, digest, None, canonical_report(&system, &tol)?)
        }
        Command::Check { input, trials, seed } => {
            let (system, digest) = read_system(&input, &tol)?;
            envelope(out, "check", tol, digest, Some(seed), check_report(&system, trials, seed, &tol)?)
        }
        Command::Simulate(args) => simulate(args, out, tol),
        Command::Lattice(args) => lattice(args, out, tol),
        Command::Fit { input, max_atoms } => {
            let text = Input::read(&input)?;
            let samples = schema::kernel_from_csv(text.text()?)?;
            let measure = fit_point_measure(&samples, max_atoms, &tol)?;
            emit(out, &pretty(&MeasureJson::from_measure(&measure)))?;
            Ok(0)
        }
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn envelope<T: Serialize>(
    out: Option<&Path>,
    command: &str,
    tol: ToleranceConfig,
    digest: String,
    seed: Option<u64>,
    result: T,
) -> Result<u8> {
    let mut env = Envelope::new(command, tol, Some(digest), result);
    if let Some(seed) = seed {
        env = env.with_seed(seed);
    }
    emit(out, &env.to_json())?;
    Ok(0)
}

fn read_system(path: &Path, tol: &ToleranceConfig) -> Result<(ConservativeSystem, String)> {
    let input = Input::read(path)?;
    let system = schema::parse_system(input.text()?, tol)?;
    Ok((system, input.digest()))
}

#[derive(Serialize)]
struct ValidateResult {
    kind: &'static str,
    valid: bool,
    #[serde(flatten)]
    report: ValidationReport,
}

fn validate(path: &Path, out: Option<&Path>, tol: ToleranceConfig) -> Result<u8> {
    let input = Input::read(path)?;
    let (kind, report) = match schema::parse_document(input.text()?)? {
        Document::System(s) => {
            let (n1, n2, omega) = s.raw()?;
            ("system", validate_system_raw(n1, n2, &omega, &tol))
        }
        Document::Measure(m) => ("measure", validate_measure_raw(m.dim, &m.raw()?, &tol)),
        Document::Open(o) => {
            let omega1 = matrix_from_json(&o.omega1, o.kernel.dim)?;
            ("open", validate_open_raw(&omega1, o.kernel.dim, &o.kernel.raw()?, &tol))
        }
    };
    for v in &report.violations {
        eprintln!("openext: {} [{}]", v.detail, v.kind);
    }
    let valid = report.is_valid();
    let result = ValidateResult { kind, valid, report };
    emit(out, &Envelope::new("validate", tol, Some(input.digest()), result).to_json())?;
    Ok(if valid { 0 } else { 1 })
}

fn parse_forcing(arg: &str) -> Result<Forcing> {
    let path = Path::new(arg);
    let text = if !arg.trim_start().starts_with('{') && path.exists() {
        std::fs::read_to_string(path)?
    } else {
        arg.to_string()
    };
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("forcing: {e}")))
}

#[derive(Serialize)]
struct EquivalenceJson {
    residual: f64,
    max_open_norm: f64,
    relative: f64,
    dt: f64,
    t_end: f64,
    conservative_norm_drift: f64,
}

fn simulate(args: SimulateArgs, out: Option<&Path>, tol: ToleranceConfig) -> Result<u8> {
    let input = Input::read(&args.input)?;
    let forcing = parse_forcing(&args.forcing)?;
    let grid = uniform_grid(args.dt, args.t_end)?;
    let samples = forcing.sample(&grid);
    let document = schema::parse_document(input.text()?)?;
    if args.open {
        let open = match document {
            Document::Open(o) => o.to_open(&tol)?,
            Document::System(s) => {
                let system = s.to_system(&tol)?;
                OpenSystem::new(system.omega1(), openext::extension::measure_of(&system, &tol)?)?
            }
            Document::Measure(_) => {
                return Err(Error::Validation("simulate expects a system or open-system document".into()))
            }
        };
        let traj = propagate_open(&open, &samples, &grid)?;
        emit(out, &schema::trajectory_to_csv(&traj)?)?;
        return Ok(0);
    }
    let system = match document {
        Document::System(s) => s.to_system(&tol)?,
        _ => {
            return Err(Error::Validation(
                "--full and --both need a conservative system document".into(),
            ))
        }
    };
    if args.both {
        let report = equivalence_residual(&system, &samples, &grid, &tol)?;
        emit(out, &schema::trajectory_to_csv(&report.open)?)?;
        let summary = EquivalenceJson {
            residual: report.residual,
            max_open_norm: report.max_open_norm,
            relative: report.relative(),
            dt: args.dt,
            t_end: args.t_end,
            conservative_norm_drift: report.conservative.norm_drift,
        };
        eprintln!(
            "openext: equivalence residual {:e} (relative {:e})",
            summary.residual, summary.relative
        );
        if let Some(path) = &args.report {
            let env = Envelope::new("simulate", tol, Some(input.digest()), summary);
            write_atomic(path, &env.to_json())?;
        }
        return Ok(0);
    }
    // Forcing on H₁ alone is padded with zeros on H₂.
    let full: Vec<CVector> = match forcing.dim() {
        d if d == system.dim() => samples,
        d if d == system.n1() => samples
            .iter()
            .map(|f| {
                let mut x = CVector::zeros(system.dim());
                x.rows_mut(0, d).copy_from(f);
                x
            })
            .collect(),
        d => {
            return Err(Error::Validation(format!(
                "forcing has dimension {d}, expected {} or {}",
                system.n1(),
                system.dim()
            )))
        }
    };
    let traj = propagate_conservative(&system, &CVector::zeros(system.dim()), &full, &grid)?;
    emit(out, &schema::trajectory_to_csv(&traj)?)?;
    Ok(0)
}

fn parse_gammas(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .filter(|row| !row.trim().is_empty())
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Validation(format!("bad number `{}` in --gammas", x.trim())))
                })
                .collect()
        })
        .collect()
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Error::Validation(format!("bad size `{}` in --scan", x.trim())))
        })
        .collect()
}

fn lattice(args: LatticeArgs, out: Option<&Path>, tol: ToleranceConfig) -> Result<u8> {
    let gammas = match (&args.gammas, args.j) {
        (Some(text), j) => {
            let g = parse_gammas(text)?;
            if let Some(j) = j {
                if j != g.len() {
                    return Err(Error::Validation(format!("--J is {j} but --gammas lists {} vectors", g.len())));
                }
            }
            g
        }
        (None, Some(j)) => {
            if j == 0 || j > args.n {
                return Err(Error::Validation(format!("need 1 ≤ J ≤ N, got J = {j}")));
            }
            (args.n - j..args.n)
                .map(|k| (0..args.n).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
                .collect()
        }
        (None, None) => return Err(Error::Validation("give --gammas or --J".into())),
    };
    let spec = LatticeSpec {
        d: args.d,
        l: args.l,
        n: args.n,
        m: args.m,
        xi: args.xi,
        gammas,
    };
    spec.validate()?;
    if let Some(sizes) = &args.scan {
        let rows = multiplicity_scan(&spec, &parse_sizes(sizes)?, &tol)?;
        emit(out, &schema::scan_to_csv(&rows)?)?;
        return Ok(0);
    }
    let digest = crate::io::digest(serde_json::to_string(&spec)?.as_bytes());
    let report = LatticeReport::new(&spec, &frozen_report(&spec, &tol)?);
    envelope(out, "lattice", tol, digest, None, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gammas_parse_rows() {
        assert_eq!(parse_gammas("0,0,1; 1,0.5,0").unwrap(), vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.5, 0.0]]);
        assert!(parse_gammas("1,x").is_err());
        assert_eq!(parse_sizes("1, 2,3").unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn inline_forcing() {
        let f = parse_forcing(r#"{"kind":"step","vector":[[1,0]]}"#).unwrap();
        assert_eq!(f.dim(), 1);
        assert!(parse_forcing("{").is_err());
    }
}
