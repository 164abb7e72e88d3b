//! The `pns` command-line tool.
//!
//! Exit codes: 0 success, 1 bad input or I/O failure, 2 incoherent data,
//! 3 method not applicable to the diagram, 4 validity violations found.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{compute, BoundsError, Estimand, EstimandSpec, Interval, Method};
use crate::oracle::{betting_scm, run_validity, write_validity_csv, Family};
use crate::problem::{bundled, Problem, BUNDLED};
use crate::sim::{emit_plot_data, run_simulation, summarize, write_plot_csv, write_records_csv, write_summary_csv, DrawDistribution, SimPreset};
use crate::tables::TableError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INCOHERENT: i32 = 2;
pub const EXIT_INELIGIBLE: i32 = 3;
pub const EXIT_VIOLATIONS: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "pns", version, about = "Bounds on probabilities of causation from data and causal diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bound PNS, PN or PS for a problem file (or a bundled problem name).
    Bounds {
        problem: String,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        estimand: Option<String>,
        /// Stratum label or value for population-specific bounds.
        #[arg(long)]
        stratum: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Random-CPT comparison of bounds with and without the diagram.
    Simulate {
        /// fig1a, fig1a-z1024, fig4 or fig5
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        /// Number of records in the plot subset.
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Back-door set, comma separated (defaults per preset).
        #[arg(long, value_delimiter = ',')]
        covariates: Option<Vec<String>>,
        /// Distribution of the raw CPT draws: exponential or uniform.
        #[arg(long, default_value = "exponential")]
        draw: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Check every bound against random structural models.
    Verify {
        /// fig1a, fig2, fig3 or fig4
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV file for the per-check report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a worked example: drug, inflammation, ancestry or cointoss.
    Example {
        name: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn bounds_exit_code(e: &BoundsError) -> i32 {
    match e {
        _ if e.is_incoherent() => EXIT_INCOHERENT,
        BoundsError::Ineligible { .. } => EXIT_INELIGIBLE,
        _ => EXIT_INPUT,
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<BoundsError> for Failure {
    fn from(e: BoundsError) -> Self {
        Failure { code: bounds_exit_code(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Bounds { problem, method, estimand, stratum, format } => cmd_bounds(&problem, method, estimand, stratum, format, out),
        Command::Simulate { preset, n, k, seed, out: dir, covariates, draw, format } => {
            cmd_simulate(&preset, n, k, seed, dir.as_deref(), covariates, &draw, format, out)
        }
        Command::Verify { preset, n, seed, out: file } => cmd_verify(&preset, n, seed, file.as_deref(), out),
        Command::Example { name, format } => cmd_example(&name, format, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Entry point used by the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn load_problem(arg: &str) -> Result<Problem, Failure> {
    let path = Path::new(arg);
    let parsed = if path.exists() {
        Problem::load(path)
    } else if let Some(text) = bundled(arg) {
        Problem::from_json(text)
    } else {
        return Err(Failure::input(format!("no such file `{arg}` (bundled problems: {})", BUNDLED.join(", "))));
    };
    parsed.map_err(|e| match e {
        crate::problem::ProblemError::Bounds(b) => Failure::from(b),
        other => Failure::input(other.to_string()),
    })
}

fn cmd_bounds(
    problem: &str,
    method: Option<String>,
    estimand: Option<String>,
    stratum: Option<String>,
    format: Format,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut p = load_problem(problem)?;
    if let Some(m) = method {
        p.spec.method = m.parse()?;
    }
    if let Some(e) = estimand {
        p.spec.estimand = e.parse()?;
    }
    if stratum.is_some() {
        p.spec.stratum = stratum;
        if p.spec.method == Method::Auto {
            p.spec.method = Method::Conditional;
        }
    }
    let report = p.solve()?;
    match format {
        Format::Json => writeln!(out, "{}", report.to_json())?,
        Format::Text => {
            write!(out, "{}", report.render_text())?;
            let c = report.eligibility.covariates.join(", ");
            if !c.is_empty() {
                writeln!(out, "eligibility of {{{c}}}:")?;
                for line in report.eligibility.summary().lines() {
                    writeln!(out, "  {line}")?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    preset: &str,
    n: usize,
    k: usize,
    seed: u64,
    dir: Option<&Path>,
    covariates: Option<Vec<String>>,
    draw: &str,
    format: Format,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let preset: SimPreset = preset.parse().map_err(|e: crate::sim::SimError| Failure::input(e.to_string()))?;
    let draw: DrawDistribution = draw.parse().map_err(Failure::input)?;
    let g = preset.graph();
    let z_owned = covariates.unwrap_or_else(|| preset.covariates().into_iter().map(String::from).collect());
    let z: Vec<&str> = z_owned.iter().map(String::as_str).collect();
    let sim_err = |e: crate::sim::SimError| Failure::input(e.to_string());
    let records = run_simulation(&g, &z, n, seed, draw).map_err(sim_err)?;
    let summary = summarize(&records).map_err(sim_err)?;
    let plot = emit_plot_data(&records, k.min(records.len()), seed).map_err(sim_err)?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
        let open = |name: String| -> Result<BufWriter<File>, Failure> {
            let path = dir.join(name);
            File::create(&path).map(BufWriter::new).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
        };
        write_records_csv(&records, open(format!("{preset}-records.csv"))?).map_err(sim_err)?;
        write_plot_csv(&plot, open(format!("{preset}-plot.csv"))?).map_err(sim_err)?;
        write_summary_csv(&summary, open(format!("{preset}-summary.csv"))?).map_err(sim_err)?;
    }
    match format {
        Format::Text => writeln!(out, "{preset} Z={{{}}} {summary}", z.join(","))?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&summary).expect("summary serializes"))?,
    }
    Ok(EXIT_OK)
}

fn cmd_verify(preset: &str, n: usize, seed: u64, file: Option<&Path>, out: &mut dyn Write) -> Result<i32, Failure> {
    let family: Family = preset.parse().map_err(Failure::input)?;
    let report = run_validity(family, n, seed).map_err(|e| Failure::input(e.to_string()))?;
    if let Some(path) = file {
        let f = File::create(path).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
        write_validity_csv(&report.rows, BufWriter::new(f)).map_err(|e| Failure::input(e.to_string()))?;
    }
    writeln!(out, "{}", report.summary())?;
    for (e, m, count) in report.methods() {
        let bad = report.rows.iter().filter(|r| r.estimand == e && r.method == m && r.violation).count();
        writeln!(out, "  {:<3} {:<12} {count} checks, {bad} violations", e.to_string(), m.as_str())?;
    }
    Ok(if report.violations == 0 && report.complier_failures == 0 { EXIT_OK } else { EXIT_VIOLATIONS })
}

/// A worked example: the intermediate quantities and every interval.
#[derive(Debug, Clone, Serialize)]
pub struct Transcript {
    pub name: String,
    pub quantities: Vec<(String, f64)>,
    pub intervals: Vec<(String, Interval)>,
}

impl Transcript {
    pub fn interval(&self, label: &str) -> Option<&Interval> {
        self.intervals.iter().find(|(l, _)| l == label).map(|(_, i)| i)
    }

    pub fn quantity(&self, label: &str) -> Option<f64> {
        self.quantities.iter().find(|(l, _)| l == label).map(|&(_, v)| v)
    }

    pub fn render_text(&self) -> String {
        let mut s = format!("== {} ==\n", self.name);
        for (label, v) in &self.quantities {
            s.push_str(&format!("{label}={v:.4}\n"));
        }
        for (label, iv) in &self.intervals {
            s.push_str(&format!("{label:<28} {iv}  ({} / {})\n", iv.binding_lower, iv.binding_upper));
        }
        s
    }
}

fn spec(estimand: Estimand, method: Method) -> EstimandSpec {
    EstimandSpec { estimand, method, stratum: None }
}

/// Build the transcript of a bundled example.
pub fn example_transcript(name: &str) -> Result<Transcript, BoundsError> {
    let text = bundled(name).ok_or_else(|| BoundsError::InvalidSpec(format!("unknown example `{name}` (expected {})", BUNDLED.join(", "))))?;
    let p = Problem::from_json(text).map_err(|e| BoundsError::InvalidSpec(e.to_string()))?;
    let (g, data) = (&p.graph, &p.data);
    let mut q: Vec<(String, f64)> = Vec::new();
    let mut iv: Vec<(String, Interval)> = Vec::new();
    let add = |label: &str, s: EstimandSpec, iv: &mut Vec<(String, Interval)>| -> Result<(), BoundsError> {
        iv.push((label.to_string(), compute(g, data, &s)?.interval()));
        Ok(())
    };
    match name {
        "drug" => {
            let obs = data.observational.as_ref().expect("drug has observational data");
            for z in 0..2 {
                q.push((format!("P(Z={z})"), obs.prob(&[("Z", z)])?));
                let c = obs.conditional(&["Y"], &[("X", 1), ("Z", z)])?;
                q.push((format!("P(y|x,Z={z})"), c.probabilities()[1]));
                let c = obs.conditional(&["Y"], &[("X", 0), ("Z", z)])?;
                q.push((format!("P(y|x',Z={z})"), c.probabilities()[1]));
            }
            let j = obs.joint_xy("X", "Y")?;
            q.push(("P(x,y)".into(), j.xy));
            q.push(("P(x,y')".into(), j.x_yprime));
            q.push(("P(x',y)".into(), j.xprime_y));
            q.push(("P(x',y')".into(), j.xprime_yprime));
            q.push(("P(y|x)".into(), j.y_given_x().unwrap_or(f64::NAN)));
            q.push(("P(y|x')".into(), j.y_given_xprime().unwrap_or(f64::NAN)));
            let adj = obs.adjustment_formula("X", "Y", &["Z"])?;
            q.push(("P(y_x)".into(), adj.p_y_do_x));
            q.push(("P(y_x')".into(), adj.p_y_do_xprime));
            add("PNS tian_pearl", spec(Estimand::Pns, Method::TianPearl), &mut iv)?;
            add("PNS thm2", spec(Estimand::Pns, Method::Thm2), &mut iv)?;
            add("PNS auto", spec(Estimand::Pns, Method::Auto), &mut iv)?;
            add("PN tian_pearl", spec(Estimand::Pn, Method::TianPearl), &mut iv)?;
            add("PS tian_pearl", spec(Estimand::Ps, Method::TianPearl), &mut iv)?;
        }
        "inflammation" => {
            let med = data.mediator.as_ref().expect("inflammation has mediator tables");
            q.push(("P(z|x)".into(), med.p_z_do_x[1]));
            q.push(("P(z|x')".into(), med.p_z_do_xprime[1]));
            let py = med.p_y_given_z.as_ref().expect("pooled outcome rates");
            q.push(("P(y|z)".into(), py[1]));
            q.push(("P(y|z')".into(), py[0]));
            let e = med.implied_effects().expect("pooled outcome rates");
            q.push(("P(y_x)".into(), e.p_y_do_x));
            q.push(("P(y_x')".into(), e.p_y_do_xprime));
            add("PNS tian_pearl", spec(Estimand::Pns, Method::TianPearl), &mut iv)?;
            add("PNS thm3", spec(Estimand::Pns, Method::Thm3), &mut iv)?;
            add("PNS thm4", spec(Estimand::Pns, Method::Thm4), &mut iv)?;
            add("PNS auto", spec(Estimand::Pns, Method::Auto), &mut iv)?;
        }
        "ancestry" | "cointoss" => {
            let exp = data.experimental.as_ref().expect("stratified experimental data");
            q.push(("P(y_x)".into(), exp.p_y_do_x));
            q.push(("P(y_x')".into(), exp.p_y_do_xprime));
            for s in &exp.strata {
                q.push((format!("P(Z={})", s.name()), s.p_z));
                q.push((format!("P(y_x|{})", s.name()), s.p_y_do_x));
                q.push((format!("P(y_x'|{})", s.name()), s.p_y_do_xprime));
            }
            add("PNS tian_pearl", spec(Estimand::Pns, Method::TianPearl), &mut iv)?;
            add("PNS thm1", spec(Estimand::Pns, Method::Thm1), &mut iv)?;
            for s in &exp.strata {
                let label = format!("PNS given Z={}", s.name());
                add(&label, spec(Estimand::Pns, Method::Conditional).with_stratum(s.name()), &mut iv)?;
            }
            if name == "cointoss" {
                let model = betting_scm(0.5).map_err(|e| BoundsError::InvalidSpec(e.to_string()))?;
                q.push(("true PNS (betting model)".into(), model.true_pns()));
            }
        }
        _ => unreachable!("bundled names are exhaustive"),
    }
    Ok(Transcript { name: name.to_string(), quantities: q, intervals: iv })
}

fn cmd_example(name: &str, format: Format, out: &mut dyn Write) -> Result<i32, Failure> {
    let t = example_transcript(name)?;
    match format {
        Format::Text => write!(out, "{}", t.render_text())?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&t).expect("transcript serializes"))?,
    }
    Ok(EXIT_OK)
}

impl From<TableError> for Failure {
    fn from(e: TableError) -> Self {
        BoundsError::from(e).into()
    }
}
