//! Command-line front end: capacity sweeps, the cross-oracle validation
//! suite, microscopic ensemble runs, and separatrix curves.
//!
//! Every output file embeds the fully resolved run configuration and
//! the tool version, and re-running with the same configuration
//! reproduces the file byte for byte. Numeric CSV fields use scientific
//! notation with 9 significant digits.

use crate::capacity;
use crate::medium::{diffusion_averages, r_eff, MediumParams};
use crate::oracle::{self, CapacityKind, RngSpec};
use crate::phase;
use crate::quad;
use crate::wgsim::{self, LatticeSpec};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug)]
pub enum CliError {
    /// Invalid parameters or config; exits with code 2.
    Usage(String),
    /// A check, ensemble, or solver failed at runtime; exits with 1.
    Failure(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
    fn failure(msg: impl Into<String>) -> Self {
        CliError::Failure(msg.into())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ampwg",
    version,
    about = "Capacities of amplifying disordered waveguide channels: closed forms, oracles, lattice ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity sweeps: figure2 (C and C0 vs R_eff), figure3
    /// (amplification dependence), or a single parameter point
    Capacity(CapacityArgs),
    /// Cross-validate every closed form against Monte Carlo and
    /// quadrature oracles; exit 0 only if all tolerances hold
    Validate(ValidateArgs),
    /// Run microscopic lattice ensembles and export their statistics
    Simulate(SimulateArgs),
    /// Solve the phase-diagram separatrix over an l/L grid
    Separatrix(SeparatrixArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Plain key=value config file ('#' comments); explicit flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all sample streams
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Debug)]
struct CapacityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// figure2 | figure3 | point
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "grid-min")]
    grid_min: Option<f64>,
    #[arg(long = "grid-max")]
    grid_max: Option<f64>,
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    /// log | linear
    #[arg(long = "grid-scale")]
    grid_scale: Option<String>,
    /// P/(N P0), figure3 and point modes
    #[arg(long = "power-per-mode")]
    power_per_mode: Option<f64>,
    /// l/L values (repeat the flag for several curves)
    #[arg(long = "mfp")]
    mfp: Vec<f64>,
    #[arg(long = "n-modes")]
    n_modes: Option<u32>,
    /// L/l_a, point mode
    #[arg(long = "length-ratio")]
    length_ratio: Option<f64>,
    /// P/P0, point mode
    #[arg(long = "power-per-p0")]
    power_per_p0: Option<f64>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Monte Carlo samples per check
    #[arg(long)]
    samples: Option<usize>,
    /// Relative tolerance for closed-form vs quadrature checks
    #[arg(long)]
    tol: Option<f64>,
    /// Multiply closed forms by 1.001 (sensitivity self-test)
    #[arg(long = "inject-perturbation", hide = true)]
    inject_perturbation: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    /// On-site disorder half-width W (uniform in [-W/2, W/2])
    #[arg(long)]
    disorder: Option<f64>,
    /// Uniform imaginary potential (gain)
    #[arg(long)]
    gain: Option<f64>,
    /// Operating energy in hopping units
    #[arg(long)]
    energy: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Sender mode index (default: middle propagating mode)
    #[arg(long)]
    alpha: Option<usize>,
    /// Receiver mode index (default: middle propagating mode)
    #[arg(long)]
    beta: Option<usize>,
}

#[derive(Args, Debug)]
struct SeparatrixArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long = "grid-min")]
    grid_min: Option<f64>,
    #[arg(long = "grid-max")]
    grid_max: Option<f64>,
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    #[arg(long = "grid-scale")]
    grid_scale: Option<String>,
    /// Upper end of the log-power root scan
    #[arg(long = "scan-max-power")]
    scan_max_power: Option<f64>,
    /// Emit the small-power asymptote column for comparison
    #[arg(long)]
    asymptote: bool,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CHECK_FAILED
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Capacity(a) => cmd_capacity(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Separatrix(a) => cmd_separatrix(a),
    }
}

// ---------------------------------------------------------------------
// Config file handling and output plumbing
// ---------------------------------------------------------------------

/// Key=value pairs from an optional config file. Flags override these.
struct FileConfig {
    entries: Vec<(String, String)>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut entries = Vec::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {path:?}: {e}")))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(CliError::usage(format!(
                        "config {path:?} line {}: expected key=value, got {line:?}",
                        lineno + 1
                    )));
                };
                entries.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
        Ok(Self { entries })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.iter().rev().find(|(k, _)| k == key) {
            None => Ok(None),
            Some((_, v)) => v.parse::<T>().map(Some).map_err(|_| {
                CliError::usage(format!("config value {key}={v} cannot be parsed"))
            }),
        }
    }

    fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.entries.iter().rev().find(|(k, _)| k == key) {
            None => Ok(None),
            Some((_, v)) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map(Some)
                .map_err(|_| {
                    CliError::usage(format!("config value {key}={v} cannot be parsed"))
                }),
        }
    }
}

fn resolve<T: FromStr + Clone>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    Ok(file.get::<T>(key)?.unwrap_or(default))
}

/// The fully resolved configuration of one run, echoed into every
/// output so the file is a reproducibility record.
struct RunConfig {
    entries: Vec<(String, String)>,
}

impl RunConfig {
    fn new(subcommand: &str) -> Self {
        Self {
            entries: vec![("subcommand".into(), subcommand.into())],
        }
    }
    fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }
    fn header_lines(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# ampwg {}", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.entries {
            let _ = writeln!(s, "# {k}={v}");
        }
        s
    }
    fn json_value(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert(
            "version".into(),
            serde_json::Value::String(env!("CARGO_PKG_VERSION").into()),
        );
        for (k, v) in &self.entries {
            map.insert(k.clone(), serde_json::Value::String(v.clone()));
        }
        serde_json::Value::Object(map)
    }
}

/// Scientific notation, 9 significant digits.
fn fmt_num(x: f64) -> String {
    format!("{:.8e}", x)
}

/// RFC-4180-style quoting; numeric fields never need it, text fields
/// might.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_out(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::failure(format!("cannot write {p:?}: {e}"))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn make_grid(
    min: f64,
    max: f64,
    points: usize,
    scale: &str,
) -> Result<Vec<f64>, CliError> {
    if points == 0 {
        return Err(CliError::usage("empty grid: grid-points must be at least 1"));
    }
    if !(min.is_finite() && max.is_finite()) || min > max {
        return Err(CliError::usage(format!(
            "invalid grid: need grid-min <= grid-max, got [{min}, {max}]"
        )));
    }
    match scale {
        "linear" => Ok((0..points)
            .map(|i| {
                if points == 1 {
                    min
                } else {
                    min + (max - min) * i as f64 / (points - 1) as f64
                }
            })
            .collect()),
        "log" => {
            if min <= 0.0 {
                return Err(CliError::usage(
                    "invalid grid: log scale requires grid-min > 0",
                ));
            }
            Ok((0..points)
                .map(|i| {
                    if points == 1 {
                        min
                    } else {
                        min * (max / min).powf(i as f64 / (points - 1) as f64)
                    }
                })
                .collect())
        }
        other => Err(CliError::usage(format!(
            "invalid grid-scale {other:?}: expected log or linear"
        ))),
    }
}

// ---------------------------------------------------------------------
// capacity
// ---------------------------------------------------------------------

fn cmd_capacity(a: CapacityArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let mode = resolve(a.mode, &file, "mode", "figure2".to_string())?;
    let format = resolve(a.common.format.clone(), &file, "format", "csv".to_string())?;
    let usage = |e: capacity::CapacityError| CliError::usage(e.to_string());

    match mode.as_str() {
        "figure2" => {
            let min = resolve(a.grid_min, &file, "grid-min", 1e-2)?;
            let max = resolve(a.grid_max, &file, "grid-max", 1e4)?;
            let points = resolve(a.grid_points, &file, "grid-points", 121)?;
            let scale = resolve(a.grid_scale, &file, "grid-scale", "log".to_string())?;
            let grid = make_grid(min, max, points, &scale)?;
            let mut cfg = RunConfig::new("capacity");
            cfg.push("mode", "figure2");
            cfg.push("grid-min", min);
            cfg.push("grid-max", max);
            cfg.push("grid-points", points);
            cfg.push("grid-scale", &scale);
            cfg.push("format", &format);

            let mut rows = Vec::with_capacity(grid.len());
            for &r in &grid {
                let c = capacity::c_heterodyne_avg(r).map_err(usage)?.bits;
                let c0 = capacity::c0_reference(r).map_err(usage)?.bits;
                rows.push(vec![fmt_num(r), fmt_num(c), fmt_num(c0)]);
            }
            emit_table(&a.common, &cfg, &format, &["r_eff", "c_heterodyne", "c0"], &rows)
        }
        "figure3" => {
            let min = resolve(a.grid_min, &file, "grid-min", 0.0)?;
            let max = resolve(
                a.grid_max,
                &file,
                "grid-max",
                std::f64::consts::PI - 1e-5,
            )?;
            let points = resolve(a.grid_points, &file, "grid-points", 65)?;
            let scale = resolve(a.grid_scale, &file, "grid-scale", "linear".to_string())?;
            let power_per_mode = resolve(a.power_per_mode, &file, "power-per-mode", 1.0)?;
            let n_modes = resolve(a.n_modes, &file, "n-modes", 10)?;
            let mfps = if a.mfp.is_empty() {
                file.get_list("mfp")?.unwrap_or_else(|| vec![0.05, 0.14])
            } else {
                a.mfp.clone()
            };
            let grid = make_grid(min, max, points, &scale)?;
            let mut cfg = RunConfig::new("capacity");
            cfg.push("mode", "figure3");
            cfg.push("grid-min", min);
            cfg.push("grid-max", max);
            cfg.push("grid-points", points);
            cfg.push("grid-scale", &scale);
            cfg.push("power-per-mode", power_per_mode);
            cfg.push("n-modes", n_modes);
            cfg.push(
                "mfp",
                mfps.iter()
                    .map(|m| m.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            cfg.push("format", &format);

            let cinf = capacity::c_infinity(power_per_mode).map_err(usage)?.bits;
            let mut rows = Vec::new();
            for &mfp in &mfps {
                for &lr in &grid {
                    let p = MediumParams::new(
                        n_modes,
                        lr,
                        mfp,
                        power_per_mode * n_modes as f64,
                    )
                    .map_err(|e| CliError::usage(e.to_string()))?;
                    let het = capacity::c_heterodyne_avg(r_eff(&p)).map_err(usage)?.bits;
                    let hol = capacity::c_holevo_avg(&p).map_err(usage)?.bits;
                    rows.push(vec![
                        fmt_num(mfp),
                        fmt_num(lr),
                        fmt_num(het),
                        fmt_num(hol),
                        fmt_num(cinf),
                    ]);
                }
            }
            emit_table(
                &a.common,
                &cfg,
                &format,
                &[
                    "mfp_ratio",
                    "length_ratio",
                    "c_heterodyne",
                    "c_holevo",
                    "c_infinity",
                ],
                &rows,
            )
        }
        "point" => {
            let lr = resolve(a.length_ratio, &file, "length-ratio", f64::NAN)?;
            let mfp_list = if a.mfp.is_empty() {
                file.get_list("mfp")?.unwrap_or_default()
            } else {
                a.mfp.clone()
            };
            let n_modes = resolve(a.n_modes, &file, "n-modes", 10)?;
            let power = match resolve(a.power_per_p0, &file, "power-per-p0", f64::NAN)? {
                v if v.is_nan() => {
                    resolve(a.power_per_mode, &file, "power-per-mode", f64::NAN)?
                        * n_modes as f64
                }
                v => v,
            };
            if lr.is_nan() || power.is_nan() || mfp_list.len() != 1 {
                return Err(CliError::usage(
                    "point mode needs --length-ratio, one --mfp, and --power-per-p0 \
                     (or --power-per-mode)",
                ));
            }
            let p = MediumParams::new(n_modes, lr, mfp_list[0], power)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let mut cfg = RunConfig::new("capacity");
            cfg.push("mode", "point");
            cfg.push("length-ratio", lr);
            cfg.push("mfp", mfp_list[0]);
            cfg.push("n-modes", n_modes);
            cfg.push("power-per-p0", power);
            cfg.push("format", &format);

            let reff = r_eff(&p);
            let mut rows = vec![
                vec!["r_eff".into(), fmt_num(reff), fmt_num(0.0)],
                vec![
                    "diffusive_regime_advisory".into(),
                    (if p.outside_diffusive_regime() { "1" } else { "0" }).into(),
                    fmt_num(0.0),
                ],
            ];
            if let Ok(da) = diffusion_averages(&p) {
                rows.push(vec!["tau_bar".into(), fmt_num(da.tau_bar), fmt_num(0.0)]);
                rows.push(vec!["sigma_bar".into(), fmt_num(da.sigma_bar), fmt_num(0.0)]);
            }
            let c0 = capacity::c0_reference(reff).map_err(usage)?;
            let het = capacity::c_heterodyne_avg(reff).map_err(usage)?;
            let cinf = capacity::c_infinity(p.power_per_mode()).map_err(usage)?;
            rows.push(vec!["c0_reference".into(), fmt_num(c0.bits), fmt_num(0.0)]);
            rows.push(vec![
                "c_heterodyne_avg".into(),
                fmt_num(het.bits),
                fmt_num(het.err_estimate),
            ]);
            if let Ok(hol) = capacity::c_holevo_avg(&p) {
                rows.push(vec![
                    "c_holevo_avg".into(),
                    fmt_num(hol.bits),
                    fmt_num(hol.err_estimate),
                ]);
            }
            rows.push(vec!["c_infinity".into(), fmt_num(cinf.bits), fmt_num(0.0)]);
            emit_table(
                &a.common,
                &cfg,
                &format,
                &["quantity", "value", "err_estimate"],
                &rows,
            )
        }
        other => Err(CliError::usage(format!(
            "unknown capacity mode {other:?}: expected figure2, figure3 or point"
        ))),
    }
}

fn emit_table(
    common: &CommonArgs,
    cfg: &RunConfig,
    format: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let content = match format {
        "csv" => {
            let mut s = cfg.header_lines();
            s.push_str(&header.join(","));
            s.push('\n');
            for row in rows {
                let cells: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        "json" => {
            let data: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let mut m = serde_json::Map::new();
                    for (k, v) in header.iter().zip(row) {
                        m.insert(k.to_string(), serde_json::Value::String(v.clone()));
                    }
                    serde_json::Value::Object(m)
                })
                .collect();
            let out = serde_json::json!({ "config": cfg.json_value(), "rows": data });
            let mut s = serde_json::to_string_pretty(&out).expect("serializable");
            s.push('\n');
            s
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown format {other:?}: expected csv or json"
            )))
        }
    };
    write_out(common.out.as_deref(), &content)
}

// ---------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------

struct Check {
    name: String,
    value: f64,
    reference: f64,
    deviation: f64,
    tolerance: f64,
    pass: bool,
    note: &'static str,
}

fn cmd_validate(a: ValidateArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let seed = resolve(a.common.seed, &file, "seed", 0u64)?;
    let samples = resolve(a.samples, &file, "samples", 200_000usize)?;
    let rel_tol = resolve(a.tol, &file, "tol", 1e-8)?;
    let format = resolve(a.common.format.clone(), &file, "format", "csv".to_string())?;
    if samples == 0 {
        return Err(CliError::usage("samples must be at least 1"));
    }
    let low_power = samples < 10_000;
    let mc_band = if low_power { 6.0 } else { 4.0 };
    let mc_note = if low_power { "low-power" } else { "" };
    let perturb = if a.inject_perturbation { 1.001 } else { 1.0 };

    let mut cfg = RunConfig::new("validate");
    cfg.push("seed", seed);
    cfg.push("samples", samples);
    cfg.push("tol", rel_tol);
    cfg.push("inject-perturbation", a.inject_perturbation);
    cfg.push("format", &format);

    let mut checks: Vec<Check> = Vec::new();
    let fail = |e: oracle::OracleError| CliError::failure(e.to_string());

    // 1. heterodyne closed form vs quadrature over the full r_eff range
    {
        let mut worst_dev = 0.0f64;
        let mut worst_tol = f64::INFINITY;
        let mut worst = (0.0, 0.0, 0.0);
        for i in 0..200 {
            let r = 10f64.powf(-6.0 + 12.0 * i as f64 / 199.0);
            let closed = capacity::c_heterodyne_avg(r)
                .map_err(|e| CliError::failure(e.to_string()))?
                .bits
                * perturb;
            let q = quad::exp_weighted_integral(
                &mut |u| (r * u).ln_1p() / LN_2,
                1e-11,
            )
            .map_err(|e| CliError::failure(e.to_string()))?
            .value;
            let tol = (1e-8 * closed.abs()).max(1e-10);
            let dev = (closed - q).abs();
            if dev / tol > worst_dev / worst_tol {
                worst_dev = dev;
                worst_tol = tol;
                worst = (r, closed, q);
            }
        }
        checks.push(Check {
            name: format!("het_closed_vs_quad[worst r_eff={:.3e}]", worst.0),
            value: worst.1,
            reference: worst.2,
            deviation: worst_dev,
            tolerance: worst_tol,
            pass: worst_dev <= worst_tol,
            note: "",
        });
    }

    // 2. averaged Holevo closed form vs quadrature on the sigma/power grid
    for &sigma in &[1.01, 1.1, 2.0, 10.0, 100.0] {
        for &aa in &[0.01, 1.0, 100.0] {
            let closed = capacity::c_holevo_closed_from(aa, sigma - 1.0)
                .map_err(|e| CliError::failure(e.to_string()))?
                * perturb;
            let q = quad::exp_weighted_integral(
                &mut |u| capacity::holevo_integrand(aa, sigma - 1.0, u),
                1e-12,
            )
            .map_err(|e| CliError::failure(e.to_string()))?
            .value;
            let dev = (closed - q).abs() / closed.abs();
            checks.push(Check {
                name: format!("holevo_closed_vs_quad[sigma={sigma},a={aa}]"),
                value: closed,
                reference: q,
                deviation: dev,
                tolerance: rel_tol,
                pass: dev <= rel_tol,
                note: "",
            });
        }
    }

    // 3. Monte Carlo vs closed forms
    let mut stream = 0u64;
    for &lr in &[1.0, 2.5] {
        for &p_hat in &[1.0, 10.0] {
            let p = MediumParams::new(10, lr, 0.05, p_hat * 10.0)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let closed_het =
                capacity::c_heterodyne_avg(r_eff(&p)).map_err(|e| CliError::failure(e.to_string()))?;
            let closed_hol =
                capacity::c_holevo_avg(&p).map_err(|e| CliError::failure(e.to_string()))?;
            for (kind, closed) in [
                (CapacityKind::Heterodyne, closed_het.bits),
                (CapacityKind::Holevo, closed_hol.bits),
            ] {
                let est = oracle::mc_average_capacity(
                    kind,
                    &p,
                    samples,
                    RngSpec::new(seed, stream),
                )
                .map_err(fail)?;
                stream += 1;
                let closed = closed * perturb;
                let dev = (est.mean - closed).abs();
                let tol = mc_band * est.std_error;
                checks.push(Check {
                    name: format!(
                        "mc_{}[lr={lr},p={p_hat}]",
                        match kind {
                            CapacityKind::Heterodyne => "heterodyne",
                            CapacityKind::Holevo => "holevo",
                        }
                    ),
                    value: est.mean,
                    reference: closed,
                    deviation: dev,
                    tolerance: tol,
                    pass: dev <= tol,
                    note: mc_note,
                });
            }
        }
    }

    // 4. mutual information of the Gaussian channel vs log2(1+r)
    for &r in &[0.1, 1.0, 3.0, 10.0] {
        let est = oracle::mutual_info_gaussian(r, samples, RngSpec::new(seed, stream))
            .map_err(fail)?;
        stream += 1;
        let want = r.ln_1p() / LN_2 * perturb;
        let dev = (est.mean - want).abs();
        let tol = mc_band * est.std_error;
        checks.push(Check {
            name: format!("mutual_info[r={r}]"),
            value: est.mean,
            reference: want,
            deviation: dev,
            tolerance: tol,
            pass: dev <= tol,
            note: mc_note,
        });
    }

    let all_pass = checks.iter().all(|c| c.pass);
    let content = match format.as_str() {
        "csv" => {
            let mut s = cfg.header_lines();
            s.push_str("check,value,reference,deviation,tolerance,result,note\n");
            for c in &checks {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    csv_field(&c.name),
                    fmt_num(c.value),
                    fmt_num(c.reference),
                    fmt_num(c.deviation),
                    fmt_num(c.tolerance),
                    if c.pass { "PASS" } else { "FAIL" },
                    c.note
                );
            }
            let _ = writeln!(
                s,
                "# result: {} ({}/{} checks passed)",
                if all_pass { "PASS" } else { "FAIL" },
                checks.iter().filter(|c| c.pass).count(),
                checks.len()
            );
            s
        }
        "json" => {
            let rows: Vec<serde_json::Value> = checks
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "check": c.name,
                        "value": c.value,
                        "reference": c.reference,
                        "deviation": c.deviation,
                        "tolerance": c.tolerance,
                        "pass": c.pass,
                        "note": c.note,
                    })
                })
                .collect();
            let out = serde_json::json!({
                "config": cfg.json_value(),
                "checks": rows,
                "pass": all_pass,
            });
            let mut s = serde_json::to_string_pretty(&out).expect("serializable");
            s.push('\n');
            s
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown format {other:?}: expected csv or json"
            )))
        }
    };
    write_out(a.common.out.as_deref(), &content)?;
    if all_pass {
        Ok(())
    } else {
        Err(CliError::failure("validation checks failed".to_string()))
    }
}

// ---------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let width = resolve(a.width, &file, "width", 10usize)?;
    let length = resolve(a.length, &file, "length", 100usize)?;
    let disorder = resolve(a.disorder, &file, "disorder", 1.0)?;
    let gain = resolve(a.gain, &file, "gain", 0.0)?;
    let energy = resolve(a.energy, &file, "energy", 0.0)?;
    let samples = resolve(a.samples, &file, "samples", 100usize)?;
    let seed = resolve(a.common.seed, &file, "seed", 0u64)?;
    let format = resolve(a.common.format.clone(), &file, "format", "csv".to_string())?;

    let spec = LatticeSpec {
        width,
        length,
        disorder_strength: disorder,
        gain,
        energy,
        seed,
    };
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let np = wgsim::n_propagating(width, energy);
    if np == 0 {
        return Err(CliError::usage(format!(
            "no propagating modes at energy {energy} for width {width}"
        )));
    }
    let alpha = resolve(a.alpha, &file, "alpha", np / 2)?;
    let beta = resolve(a.beta, &file, "beta", np / 2)?;

    let mut cfg = RunConfig::new("simulate");
    cfg.push("width", width);
    cfg.push("length", length);
    cfg.push("disorder", disorder);
    cfg.push("gain", gain);
    cfg.push("energy", energy);
    cfg.push("samples", samples);
    cfg.push("alpha", alpha);
    cfg.push("beta", beta);
    cfg.push("seed", seed);
    cfg.push("format", &format);

    let stats = wgsim::run_ensemble(&spec, samples, alpha, beta).map_err(|e| match &e {
        wgsim::WgsimError::InvalidSpec { .. }
        | wgsim::WgsimError::ModeIndex { .. }
        | wgsim::WgsimError::NoPropagatingModes { .. } => CliError::usage(e.to_string()),
        _ => CliError::failure(e.to_string()),
    })?;
    let ks = oracle::ks_exponential(&stats.tau_samples, stats.tau_bar_hat);

    let mut summary = serde_json::Map::new();
    summary.insert("config".into(), cfg.json_value());
    summary.insert("n_propagating".into(), serde_json::json!(np));
    summary.insert("tau_bar_hat".into(), serde_json::json!(stats.tau_bar_hat));
    summary.insert(
        "sigma_bar_hat".into(),
        serde_json::json!(stats.sigma_bar_hat),
    );
    summary.insert(
        "min_eig_ssdagger".into(),
        serde_json::json!(stats.min_eig_ssdagger),
    );
    summary.insert("ks_statistic".into(), serde_json::json!(ks.statistic));
    summary.insert("ks_p_value".into(), serde_json::json!(ks.p_value));
    if gain == 0.0 {
        summary.insert(
            "unitarity_max_violation".into(),
            serde_json::json!(stats.max_unitarity_violation),
        );
    }

    let sample_rows = || {
        let mut s = String::new();
        s.push_str("sample_index,tau,sigma,min_eig,seed\n");
        for i in 0..stats.n_samples {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                i,
                fmt_num(stats.tau_samples[i]),
                fmt_num(stats.sigma_samples[i]),
                fmt_num(stats.min_eig_samples[i]),
                seed
            );
        }
        s
    };

    match format.as_str() {
        "csv" => {
            // per-sample CSV beside a JSON summary
            let csv = format!("{}{}", cfg.header_lines(), sample_rows());
            let json = {
                let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(summary))
                    .expect("serializable");
                s.push('\n');
                s
            };
            match a.common.out.as_deref() {
                Some(p) => {
                    let csv_path = with_extension(p, "csv");
                    let json_path = with_extension(p, "json");
                    write_out(Some(&csv_path), &csv)?;
                    write_out(Some(&json_path), &json)
                }
                None => {
                    print!("{csv}");
                    print!("{json}");
                    Ok(())
                }
            }
        }
        "json" => {
            summary.insert("tau_samples".into(), serde_json::json!(stats.tau_samples));
            summary.insert(
                "sigma_samples".into(),
                serde_json::json!(stats.sigma_samples),
            );
            summary.insert(
                "min_eig_samples".into(),
                serde_json::json!(stats.min_eig_samples),
            );
            let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(summary))
                .expect("serializable");
            s.push('\n');
            let path = a.common.out.as_deref().map(|p| with_extension(p, "json"));
            write_out(path.as_deref(), &s)
        }
        other => Err(CliError::usage(format!(
            "unknown format {other:?}: expected csv or json"
        ))),
    }
}

fn with_extension(p: &Path, ext: &str) -> PathBuf {
    let mut out = p.to_path_buf();
    out.set_extension(ext);
    out
}

// ---------------------------------------------------------------------
// separatrix
// ---------------------------------------------------------------------

fn cmd_separatrix(a: SeparatrixArgs) -> Result<(), CliError> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let min = resolve(a.grid_min, &file, "grid-min", 0.02)?;
    let max = resolve(a.grid_max, &file, "grid-max", 0.13)?;
    let points = resolve(a.grid_points, &file, "grid-points", 12usize)?;
    let scale = resolve(a.grid_scale, &file, "grid-scale", "linear".to_string())?;
    let scan_max = resolve(a.scan_max_power, &file, "scan-max-power", 1e6)?;
    let with_asym = a.asymptote || file.get::<bool>("asymptote")?.unwrap_or(false);
    let format = resolve(a.common.format.clone(), &file, "format", "csv".to_string())?;
    let grid = make_grid(min, max, points, &scale)?;

    let mut cfg = RunConfig::new("separatrix");
    cfg.push("grid-min", min);
    cfg.push("grid-max", max);
    cfg.push("grid-points", points);
    cfg.push("grid-scale", &scale);
    cfg.push("scan-max-power", scan_max);
    cfg.push("asymptote", with_asym);
    cfg.push("format", &format);

    let curve = phase::separatrix_curve(&grid, scan_max).map_err(|e| match e {
        phase::PhaseError::Domain { .. } => CliError::usage(e.to_string()),
        other => CliError::failure(other.to_string()),
    })?;

    match format.as_str() {
        "csv" => {
            let mut s = cfg.header_lines();
            s.push_str("mfp_ratio,power_per_mode,residual,branch_info");
            if with_asym {
                s.push_str(",asymptote");
            }
            s.push('\n');
            for cp in &curve {
                let asym_cell = if with_asym {
                    format!(",{}", fmt_num(phase::small_power_asymptote(cp.mfp_ratio)))
                } else {
                    String::new()
                };
                if cp.roots.is_empty() {
                    let _ = writeln!(s, "{},,,no-root{}", fmt_num(cp.mfp_ratio), asym_cell);
                } else {
                    for (k, root) in cp.roots.iter().enumerate() {
                        let _ = writeln!(
                            s,
                            "{},{},{},root-{}{}",
                            fmt_num(cp.mfp_ratio),
                            fmt_num(root.power_per_mode),
                            fmt_num(root.residual),
                            k + 1,
                            asym_cell
                        );
                    }
                }
            }
            write_out(a.common.out.as_deref(), &s)
        }
        "json" => {
            let rows: Vec<serde_json::Value> = curve
                .iter()
                .map(|cp| {
                    let mut m = serde_json::Map::new();
                    m.insert("mfp_ratio".into(), serde_json::json!(cp.mfp_ratio));
                    m.insert("roots".into(), serde_json::json!(cp.roots));
                    if with_asym {
                        m.insert(
                            "asymptote".into(),
                            serde_json::json!(phase::small_power_asymptote(cp.mfp_ratio)),
                        );
                    }
                    serde_json::Value::Object(m)
                })
                .collect();
            let out = serde_json::json!({ "config": cfg.json_value(), "curve": rows });
            let mut s = serde_json::to_string_pretty(&out).expect("serializable");
            s.push('\n');
            write_out(a.common.out.as_deref(), &s)
        }
        other => Err(CliError::usage(format!(
            "unknown format {other:?}: expected csv or json"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_construction() {
        assert!(make_grid(1.0, 10.0, 0, "log").is_err());
        assert!(make_grid(0.0, 10.0, 5, "log").is_err());
        assert!(make_grid(1.0, 10.0, 5, "cubic").is_err());
        let g = make_grid(1.0, 100.0, 3, "log").unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        let g = make_grid(0.0, 2.0, 5, "linear").unwrap();
        assert_eq!(g, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(1.0), "1.00000000e0");
        assert_eq!(fmt_num(0.860347382270886), "8.60347382e-1");
    }

    #[test]
    fn config_file_parsing() {
        let dir = std::env::temp_dir().join(format!("ampwg-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("test.cfg");
        std::fs::write(&path, "# comment\nseed=42\nmfp=0.05, 0.14\nformat=json\n").unwrap();
        let fc = FileConfig::load(Some(&path)).unwrap();
        assert_eq!(fc.get::<u64>("seed").unwrap(), Some(42));
        assert_eq!(fc.get_list("mfp").unwrap(), Some(vec![0.05, 0.14]));
        assert_eq!(fc.get::<String>("format").unwrap(), Some("json".into()));
        assert_eq!(fc.get::<u64>("missing").unwrap(), None);
        assert!(FileConfig::load(Some(&dir.join("absent.cfg"))).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
