//! `icp-lab`: reproducible runs of the ICP constructions, scans and checks.

mod output;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use icp_core::axioms::{axiom_suite, EntropyKind};
use icp_core::catalog;
use icp_core::constructions::{
    classical_bit_certificate, composite_gbit_extractable, hbit_violation, pgnst_violation, polygon_mismatch,
    polygon_violation, qubit_rac_construction, rac_recovery_optimal, rac_recovery_formula, sbit_violation,
    PgnstSearchConfig, ViolationCertificate,
};
use icp_core::ensemble::{evaluate_icp, ICPReport, ObservableAssignment};
use icp_core::gpt::NormExponent;
use icp_core::optimize::{qubit_rotation_sweep, OptimizerConfig};
use icp_core::schema::{load_ensemble, CertificateDoc, EnsembleDoc};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use output::{cell, emit, render_csv, render_json, resolve_timestamp, CliError, CliResult, Format, Kind, RunManifest, Table};

#[derive(Parser, Debug)]
#[command(name = "icp-lab", version, about = "Information content principle checks over generalized probabilistic theories")]
struct Cli {
    /// Output format; csv is available for scans and reports.
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,
    /// Write output to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, default_value_t = 42, global = true)]
    seed: u64,
    /// RFC 3339 timestamp recorded in the manifest (default: SOURCE_DATE_EPOCH, then now).
    #[arg(long, global = true)]
    timestamp: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the built-in theories.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Print the certificate of a named construction.
    Demo { name: DemoName },
    /// Evaluate a family of constructions over a parameter range.
    Scan(ScanArgs),
    /// Evaluate the ICP report of an ensemble file.
    Eval {
        /// Catalog id; must match the file's theory when both are given.
        #[arg(long)]
        theory: Option<String>,
        /// Ensemble, certificate or report JSON.
        #[arg(long)]
        ensemble: PathBuf,
        /// Comma-separated measurement names assigned to registers A, B, ...
        #[arg(long, value_delimiter = ',')]
        measurements: Option<Vec<String>>,
    },
}

#[derive(Subcommand, Debug)]
enum CatalogAction {
    List,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DemoName {
    Sbit,
    Hbit,
    Classical,
    QubitRac,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScanTarget {
    Pgnst,
    Polygon,
    Composite,
    Mismatch,
    Axioms,
    Sweep,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxiomKinds {
    Shannon,
    VonNeumann,
    Both,
}

#[derive(clap::Args, Debug)]
struct ScanArgs {
    target: ScanTarget,
    /// Integer range `a:b[:step]` (polygon, composite, mismatch).
    #[arg(long)]
    n: Option<String>,
    /// Norm exponents for pgnst: a comma list or `a:b[:step]`.
    #[arg(long)]
    p: Option<String>,
    /// Boundary grid points for pgnst.
    #[arg(long)]
    grid: Option<usize>,
    /// Random trials per entropy kind for axioms.
    #[arg(long)]
    trials: Option<usize>,
    /// Entropy kind for axioms.
    #[arg(long, value_enum, default_value = "both")]
    kind: AxiomKinds,
    /// Number of θ values in [0, π/2] for sweep.
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Optimizer evaluation budget for sweep.
    #[arg(long)]
    max_evals: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icp-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("ICP_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("ICP_LAB_THREADS `{v}` is not a non-negative integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

struct Ctx {
    format: Format,
    out: Option<PathBuf>,
    seed: u64,
    timestamp: String,
}

impl Ctx {
    fn manifest(&self, command: &str, parameters: BTreeMap<String, Value>) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            parameters,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: self.timestamp.clone(),
        }
    }

    /// Writes a non-tabular artifact; csv is rejected.
    fn json_only<T: Serialize>(&self, m: &RunManifest, kind: Kind, payload: &T) -> CliResult<()> {
        if self.format == Format::Csv {
            return Err(CliError::Input(format!("`{}` output is not tabular; use --format json", m.command)));
        }
        emit(&render_json(m, kind, payload)?, self.out.as_deref())
    }

    fn tabular<T: Serialize>(&self, m: &RunManifest, kind: Kind, payload: &T, table: Table) -> CliResult<()> {
        let text = match self.format {
            Format::Json => render_json(m, kind, payload)?,
            Format::Csv => render_csv(m, kind, &table)?,
        };
        emit(&text, self.out.as_deref())
    }
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let ctx = Ctx {
        format: cli.format,
        out: cli.out,
        seed: cli.seed,
        timestamp: resolve_timestamp(cli.timestamp.as_deref())?,
    };
    match cli.command {
        Command::Catalog { action: CatalogAction::List } => cmd_catalog(&ctx),
        Command::Demo { name } => cmd_demo(&ctx, name),
        Command::Scan(args) => cmd_scan(&ctx, &args),
        Command::Eval {
            theory,
            ensemble,
            measurements,
        } => cmd_eval(&ctx, theory.as_deref(), &ensemble, measurements),
    }
}

fn cmd_catalog(ctx: &Ctx) -> CliResult<()> {
    let rows = catalog::list()?
        .iter()
        .map(|e| e.summary())
        .collect::<icp_core::Result<Vec<_>>>()?;
    let m = ctx.manifest("catalog list", BTreeMap::new());
    ctx.json_only(&m, Kind::Ledger, &rows)
}

fn demo_name(n: DemoName) -> &'static str {
    match n {
        DemoName::Sbit => "sbit",
        DemoName::Hbit => "hbit",
        DemoName::Classical => "classical",
        DemoName::QubitRac => "qubit-rac",
    }
}

fn cmd_demo(ctx: &Ctx, name: DemoName) -> CliResult<()> {
    let cert: ViolationCertificate = match name {
        DemoName::Sbit => sbit_violation()?,
        DemoName::Hbit => hbit_violation()?,
        DemoName::Classical => classical_bit_certificate(&OptimizerConfig {
            seed: ctx.seed,
            ..OptimizerConfig::default()
        })?,
        DemoName::QubitRac => qubit_rac_construction()?,
    };
    let params = BTreeMap::from([("name".to_string(), json!(demo_name(name)))]);
    let m = ctx.manifest("demo", params);
    ctx.json_only(&m, Kind::Certificate, &CertificateDoc::from_certificate(&cert))
}

/// Payload of `eval`: the ensemble with its measurements and the report, so
/// the output loads back into `eval`.
#[derive(Serialize)]
struct ReportDoc {
    #[serde(flatten)]
    ensemble: EnsembleDoc,
    report: ICPReport,
}

fn report_table(r: &ICPReport) -> Table {
    let join = |v: &[String]| v.join(";");
    Table {
        name: "report".into(),
        header: vec![
            "measurements",
            "registers",
            "gains",
            "redundancy",
            "extractable",
            "observed_dim",
            "bound",
            "margin",
            "violated",
        ],
        rows: vec![vec![
            join(&r.measurements),
            join(&r.registers),
            r.gains.iter().map(|g| cell(*g)).collect::<Vec<_>>().join(";"),
            cell(r.redundancy),
            cell(r.extractable),
            r.observed_dim.to_string(),
            cell(r.bound),
            cell(r.margin),
            r.violated.to_string(),
        ]],
    }
}

fn cmd_eval(ctx: &Ctx, theory: Option<&str>, path: &Path, names: Option<Vec<String>>) -> CliResult<()> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let loaded = load_ensemble(&text).map_err(|e| CliError::Input(format!("{}:{}: {}", path.display(), e.line, e.message)))?;
    let ens = loaded.ensemble;
    if let Some(t) = theory {
        let wanted = catalog::lookup(t)?.theory;
        if wanted.id() != ens.theory().id() {
            return Err(CliError::Input(format!(
                "{}: file holds a `{}` ensemble but --theory is `{}`",
                path.display(),
                ens.theory().id(),
                wanted.id()
            )));
        }
    }
    let asg = match (&names, loaded.assignment) {
        (Some(n), _) => {
            let refs: Vec<&str> = n.iter().map(|s| s.trim()).collect();
            ObservableAssignment::from_names(ens.theory(), &refs)?
        }
        (None, Some(a)) => a,
        (None, None) => {
            return Err(CliError::Input(format!(
                "{}: no measurements stored in the file; pass --measurements",
                path.display()
            )))
        }
    };
    let report = evaluate_icp(&ens, &asg)?;
    let mut params = BTreeMap::from([
        ("ensemble".to_string(), json!(path.display().to_string())),
        ("theory".to_string(), json!(ens.theory().id())),
    ]);
    if let Some(n) = names {
        params.insert("measurements".into(), json!(n));
    }
    let m = ctx.manifest("eval", params);
    let doc = ReportDoc {
        ensemble: EnsembleDoc::from_ensemble(&ens, Some(&asg)),
        report: report.clone(),
    };
    ctx.tabular(&m, Kind::Report, &doc, report_table(&report))
}

/// Parses `a:b[:step]` into an inclusive integer range.
fn parse_int_range(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Input(format!("invalid range `{s}`; expected a:b[:step] with a <= b and step >= 1"));
    let parts: Vec<&str> = s.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let (a, b) = (num(parts[0])?, num(parts[1])?);
    let step = if parts.len() == 3 { num(parts[2])? } else { 1 };
    if a > b || step == 0 {
        return Err(bad());
    }
    Ok((a..=b).step_by(step).collect())
}

/// Parses a comma list of floats or `a:b[:step]` (inclusive, default step 1).
fn parse_float_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Input(format!("invalid grid `{s}`; expected x,y,... or a:b[:step]"));
    let num = |t: &str| match t.trim() {
        "inf" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|_| bad()),
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(bad());
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let step = if parts.len() == 3 { num(parts[2])? } else { 1.0 };
        if !(a.is_finite() && b.is_finite() && step.is_finite()) || a > b || step <= 0.0 {
            return Err(bad());
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        Ok((0..=count).map(|k| a + step * k as f64).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

#[derive(Serialize)]
struct PgnstRow {
    p: NormExponent,
    s_x: f64,
    s_z: f64,
    h_tilde: f64,
    gains: Vec<f64>,
    redundancy: f64,
    extractable: f64,
    bound: f64,
    margin: f64,
    violated: bool,
    rac_recovery_formula: f64,
    rac_recovery_optimal: f64,
}

#[derive(Serialize)]
struct PolygonRow {
    n: usize,
    p_z0_given_b0: f64,
    p_z1_given_b1: f64,
    gains: Vec<f64>,
    redundancy: f64,
    extractable: f64,
    observed_dim: usize,
    bound: f64,
    margin: f64,
    violated: bool,
}

#[derive(Serialize)]
struct AxiomRow {
    kind: EntropyKind,
    axiom: String,
    trials: usize,
    max_violation: f64,
    passed: bool,
    note: Option<String>,
}

fn gain_cells(g: &[f64]) -> [String; 2] {
    [cell(g[0]), cell(g[1])]
}

fn cmd_scan(ctx: &Ctx, a: &ScanArgs) -> CliResult<()> {
    let mut params = BTreeMap::new();
    let range = |default: &str, params: &mut BTreeMap<String, Value>| -> CliResult<Vec<usize>> {
        let s = a.n.clone().unwrap_or_else(|| default.to_string());
        params.insert("n".to_string(), json!(s));
        parse_int_range(&s)
    };
    match a.target {
        ScanTarget::Pgnst => {
            let s = a.p.clone().unwrap_or_else(|| "2,2.5,3,4,8".into());
            params.insert("p".into(), json!(s));
            let cfg = PgnstSearchConfig {
                points: a.grid.unwrap_or(PgnstSearchConfig::default().points),
                ..PgnstSearchConfig::default()
            };
            params.insert("grid".into(), json!(cfg.points));
            let ps = parse_float_grid(&s)?
                .into_iter()
                .map(NormExponent::new)
                .collect::<icp_core::Result<Vec<_>>>()?;
            let rows = ps
                .par_iter()
                .map(|&p| {
                    let c = pgnst_violation(p, &cfg)?;
                    let r = &c.report;
                    Ok(PgnstRow {
                        p,
                        s_x: c.computed["s_x"],
                        s_z: c.computed["s_z"],
                        h_tilde: c.computed["H_tilde"],
                        gains: r.gains.clone(),
                        redundancy: r.redundancy,
                        extractable: r.extractable,
                        bound: r.bound,
                        margin: r.margin,
                        violated: r.violated,
                        rac_recovery_formula: rac_recovery_formula(p),
                        rac_recovery_optimal: rac_recovery_optimal(p),
                    })
                })
                .collect::<icp_core::Result<Vec<_>>>()?;
            let table = Table {
                name: "pgnst".into(),
                header: vec![
                    "p", "s_x", "s_z", "h_tilde", "gain_x", "gain_z", "redundancy", "extractable", "bound", "margin",
                    "violated", "rac_recovery_formula", "rac_recovery_optimal",
                ],
                rows: rows
                    .iter()
                    .map(|r| {
                        let [gx, gz] = gain_cells(&r.gains);
                        vec![
                            r.p.to_string(),
                            cell(r.s_x),
                            cell(r.s_z),
                            cell(r.h_tilde),
                            gx,
                            gz,
                            cell(r.redundancy),
                            cell(r.extractable),
                            cell(r.bound),
                            cell(r.margin),
                            r.violated.to_string(),
                            cell(r.rac_recovery_formula),
                            cell(r.rac_recovery_optimal),
                        ]
                    })
                    .collect(),
            };
            ctx.tabular(&ctx.manifest("scan pgnst", params), Kind::Scan, &rows, table)
        }
        ScanTarget::Polygon => {
            let ns = range("4:50", &mut params)?;
            let rows = ns
                .par_iter()
                .map(|&n| {
                    let c = polygon_violation(n)?;
                    let r = &c.report;
                    Ok(PolygonRow {
                        n,
                        p_z0_given_b0: c.computed["p(Z=0|B=0)"],
                        p_z1_given_b1: c.computed["p(Z=1|B=1)"],
                        gains: r.gains.clone(),
                        redundancy: r.redundancy,
                        extractable: r.extractable,
                        observed_dim: r.observed_dim,
                        bound: r.bound,
                        margin: r.margin,
                        violated: r.violated,
                    })
                })
                .collect::<icp_core::Result<Vec<_>>>()?;
            let table = Table {
                name: "polygon".into(),
                header: vec![
                    "n", "p_z0_given_b0", "p_z1_given_b1", "gain_x", "gain_z", "redundancy", "extractable",
                    "observed_dim", "bound", "margin", "violated",
                ],
                rows: rows
                    .iter()
                    .map(|r| {
                        let [gx, gz] = gain_cells(&r.gains);
                        vec![
                            r.n.to_string(),
                            cell(r.p_z0_given_b0),
                            cell(r.p_z1_given_b1),
                            gx,
                            gz,
                            cell(r.redundancy),
                            cell(r.extractable),
                            r.observed_dim.to_string(),
                            cell(r.bound),
                            cell(r.margin),
                            r.violated.to_string(),
                        ]
                    })
                    .collect(),
            };
            ctx.tabular(&ctx.manifest("scan polygon", params), Kind::Scan, &rows, table)
        }
        ScanTarget::Composite => {
            let ns = range("1:8", &mut params)?;
            let rows = ns
                .par_iter()
                .map(|&n| composite_gbit_extractable(n))
                .collect::<icp_core::Result<Vec<_>>>()?;
            let table = Table {
                name: "composite".into(),
                header: vec!["n", "p_rec", "encoded_bits", "extractable", "bound", "violated"],
                rows: rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.n.to_string(),
                            cell(r.p_rec),
                            cell(r.encoded_bits),
                            cell(r.extractable),
                            cell(r.bound),
                            r.violated.to_string(),
                        ]
                    })
                    .collect(),
            };
            ctx.tabular(&ctx.manifest("scan composite", params), Kind::Scan, &rows, table)
        }
        ScanTarget::Mismatch => {
            let ns = range("4:13", &mut params)?;
            let rows = ns
                .par_iter()
                .map(|&n| polygon_mismatch(n))
                .collect::<icp_core::Result<Vec<_>>>()?;
            let table = Table {
                name: "mismatch".into(),
                header: vec!["n", "measurement_dimension", "information_dimension", "mismatch"],
                rows: rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.n.to_string(),
                            r.measurement_dimension.to_string(),
                            r.information_dimension.to_string(),
                            r.mismatch.to_string(),
                        ]
                    })
                    .collect(),
            };
            ctx.tabular(&ctx.manifest("scan mismatch", params), Kind::Scan, &rows, table)
        }
        ScanTarget::Axioms => {
            let kinds: Vec<(EntropyKind, usize)> = match a.kind {
                AxiomKinds::Shannon => vec![(EntropyKind::Shannon, a.trials.unwrap_or(10_000))],
                AxiomKinds::VonNeumann => vec![(EntropyKind::VonNeumann, a.trials.unwrap_or(1_000))],
                AxiomKinds::Both => vec![
                    (EntropyKind::Shannon, a.trials.unwrap_or(10_000)),
                    (EntropyKind::VonNeumann, a.trials.unwrap_or(1_000)),
                ],
            };
            params.insert(
                "trials".into(),
                json!(kinds.iter().map(|(k, t)| json!({"kind": k, "trials": t})).collect::<Vec<_>>()),
            );
            let mut rows = Vec::new();
            for (kind, trials) in kinds {
                for r in axiom_suite(kind, trials, ctx.seed)? {
                    rows.push(AxiomRow {
                        kind,
                        axiom: r.axiom,
                        trials: r.trials,
                        max_violation: r.max_violation,
                        passed: r.passed,
                        note: r.note,
                    });
                }
            }
            let table = Table {
                name: "axioms".into(),
                header: vec!["kind", "axiom", "trials", "max_violation", "passed", "note"],
                rows: rows
                    .iter()
                    .map(|r| {
                        vec![
                            json!(r.kind).as_str().unwrap_or_default().to_string(),
                            r.axiom.clone(),
                            r.trials.to_string(),
                            cell(r.max_violation),
                            r.passed.to_string(),
                            r.note.clone().unwrap_or_default(),
                        ]
                    })
                    .collect(),
            };
            ctx.tabular(&ctx.manifest("scan axioms", params), Kind::Scan, &rows, table)
        }
        ScanTarget::Sweep => {
            if a.points < 2 {
                return Err(CliError::Input("--points must be at least 2".into()));
            }
            let mut cfg = OptimizerConfig {
                seed: ctx.seed,
                ..OptimizerConfig::default()
            };
            if let Some(m) = a.max_evals {
                cfg.max_evals = m;
            }
            params.insert("points".into(), json!(a.points));
            params.insert("max_evals".into(), json!(cfg.max_evals));
            let grid: Vec<f64> = (0..a.points)
                .map(|k| FRAC_PI_2 * k as f64 / (a.points - 1) as f64)
                .collect();
            let rows = qubit_rotation_sweep(&grid, &cfg)?;
            let table = Table {
                name: "sweep".into(),
                header: vec!["theta", "gain_x", "gain_z", "total_gain", "redundancy", "extractable"],
                rows: rows
                    .iter()
                    .map(|r| {
                        let [gx, gz] = gain_cells(&r.gains);
                        vec![
                            cell(r.theta),
                            gx,
                            gz,
                            cell(r.total_gain),
                            cell(r.redundancy),
                            cell(r.extractable),
                        ]
                    })
                    .collect(),
            };
            ctx.tabular(&ctx.manifest("scan sweep", params), Kind::Scan, &rows, table)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_ranges() {
        assert_eq!(parse_int_range("4:8").unwrap(), vec![4, 5, 6, 7, 8]);
        assert_eq!(parse_int_range("1:8:3").unwrap(), vec![1, 4, 7]);
        assert!(parse_int_range("8:4").is_err());
        assert!(parse_int_range("1:4:0").is_err());
        assert!(parse_int_range("x:4").is_err());
        assert!(parse_int_range("4").is_err());
    }

    #[test]
    fn float_grids() {
        assert_eq!(parse_float_grid("2,2.5,inf").unwrap(), vec![2.0, 2.5, f64::INFINITY]);
        assert_eq!(parse_float_grid("2:3:0.5").unwrap(), vec![2.0, 2.5, 3.0]);
        assert!(parse_float_grid("3:2").is_err());
        assert!(parse_float_grid("2:inf").is_err());
    }
}
