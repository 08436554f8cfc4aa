//! Command-line front end: flag parsing, dispatch and artifact writing.
//!
//! Flags are turned into dotted-key overrides of the configuration file, so
//! `--tol 1e-10` and `--set sim.tol=1e-10` mean the same thing and both
//! beat the file.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::backward::{backward_pass, condensate_mass_routes, quenched_limit};
use crate::condensation::{classify, criterion_expectation, empirical_condensate_probe, CondensateProbe};
use crate::config::{parse_value, ExperimentConfig, OutputFormat, ResolvedModel};
use crate::error::{Error, Result};
use crate::forward::{forward_final, forward_trajectory};
use crate::kingman::{equilibrium, equilibrium_mean_fitness, log_ratio_diagnostic};
use crate::law::{BetaStream, MutationLaw};
use crate::measure::DiscreteMeasure;
use crate::two_atom::{two_atom_classify, x_distribution, TwoAtomModel};
use crate::validation::run_suite;

#[derive(Debug, Parser)]
#[command(name = "kingman", version, about = "Kingman mutation-selection model with random mutation probabilities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Deterministic equilibrium for a constant law.
    Equilibrium,
    /// Forward trajectory from the initial population.
    Forward,
    /// Quenched backward limit at h.
    Backward,
    /// Condensation criterion estimate.
    Criterion,
    /// Condensation verdict, with a condensate probe when Q(h) = 0.
    Classify,
    /// Exact analysis of the mutant law δ_c.
    TwoAtom,
    /// Verdicts over the grid in [sweep].
    PhaseSweep,
    /// Property and statistical validation suite.
    Validate,
}

#[derive(Debug, Default, clap::Args)]
pub struct Flags {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// Mutant law as atoms, `X@W,X@W,...`.
    #[arg(long, global = true)]
    pub q: Option<String>,
    /// Mutant law δ_c.
    #[arg(long, global = true, conflicts_with = "q")]
    pub c: Option<f64>,
    /// `delta_h` or atoms `X@W,...`.
    #[arg(long, global = true)]
    pub p0: Option<String>,
    /// `constant:B`, `uniform:LO,HI`, `beta:A,G` or `discrete:B@P,...`.
    #[arg(long, global = true)]
    pub law: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub depth_cap: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub window: Option<usize>,
    #[arg(long, global = true)]
    pub burn_in: Option<usize>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub n_steps: Option<usize>,
    #[arg(long, global = true)]
    pub ergodic_depth: Option<usize>,
    #[arg(long, global = true)]
    pub batches: Option<usize>,
    #[arg(long, global = true)]
    pub mass_tol: Option<f64>,
    /// `json` or `csv`.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub record_measures: bool,
    /// Any configuration key, `KEY=VALUE` with a TOML value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn atoms_value(raw: &str) -> Result<toml::Value> {
    let atoms = raw
        .split(',')
        .map(|pair| {
            let (x, w) = pair
                .split_once('@')
                .ok_or_else(|| Error::Usage(format!("expected X@W, got {pair:?}")))?;
            let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Usage(format!("bad number {t:?}")));
            Ok(toml::Value::Array(vec![num(x)?.into(), num(w)?.into()]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = toml::Table::new();
    t.insert("atoms".into(), toml::Value::Array(atoms));
    Ok(toml::Value::Table(t))
}

impl Flags {
    /// Dotted-key overrides in application order.
    pub fn overrides(&self) -> Result<Vec<(String, toml::Value)>> {
        let mut out = Vec::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
            out.push((k.trim().to_string(), parse_value(v.trim())));
        }
        let mut put = |k: &str, v: toml::Value| out.push((k.to_string(), v));
        if let Some(h) = self.h {
            put("model.h", h.into());
        }
        if let Some(q) = &self.q {
            put("model.q", atoms_value(q)?);
        }
        if let Some(c) = self.c {
            put("model.q", atoms_value(&format!("{c}@1"))?);
        }
        if let Some(p0) = &self.p0 {
            let v = if p0 == "delta_h" { p0.as_str().into() } else { atoms_value(p0)? };
            put("model.p0", v);
        }
        if let Some(law) = &self.law {
            let law: MutationLaw = law.parse().map_err(|e: Error| Error::Usage(format!("--law: {e}")))?;
            put("law", toml::Value::try_from(&law).map_err(|e| Error::Usage(e.to_string()))?);
        }
        let ints = [
            ("sim.seed", self.seed.map(|s| s as usize)),
            ("sim.depth_cap", self.depth_cap),
            ("sim.window", self.window),
            ("sim.burn_in", self.burn_in),
            ("sim.replicas", self.replicas),
            ("sim.n_steps", self.n_steps),
            ("sim.ergodic_depth", self.ergodic_depth),
            ("sim.batches", self.batches),
        ];
        for (k, v) in ints {
            if let Some(v) = v {
                let v = i64::try_from(v).map_err(|_| Error::Usage(format!("{k} out of range")))?;
                put(k, v.into());
            }
        }
        if let Some(tol) = self.tol {
            put("sim.tol", tol.into());
        }
        if let Some(m) = self.mass_tol {
            put("sim.mass_tol", m.into());
        }
        if let Some(f) = &self.format {
            put("output.format", f.as_str().into());
        }
        if let Some(p) = &self.output {
            put("output.path", p.display().to_string().into());
        }
        if self.record_measures {
            put("output.record_measures", true.into());
        }
        Ok(out)
    }
}

/// A tidy table for CSV output.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    fn measure(mu: &DiscreteMeasure) -> Self {
        let mut t = Table::new(&["x", "w"]);
        for a in mu.atoms() {
            t.push([a.x.to_string(), a.w.to_string()]);
        }
        t
    }
}

/// What a subcommand produced.
#[derive(Debug)]
pub struct Report {
    pub json: Value,
    pub csv: Table,
    pub exit_code: i32,
}

impl Report {
    fn ok(json: Value, csv: Table) -> Self {
        Report { json, csv, exit_code: 0 }
    }

    /// The artifact in the configured format.
    pub fn render(&self, format: OutputFormat) -> Result<Vec<u8>> {
        match format {
            OutputFormat::Json => {
                let mut out = serde_json::to_vec_pretty(&self.json).map_err(|e| Error::Numeric(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.csv.header).map_err(|e| Error::Numeric(e.to_string()))?;
                for r in &self.csv.rows {
                    w.write_record(r).map_err(|e| Error::Numeric(e.to_string()))?;
                }
                w.into_inner().map_err(|e| Error::Numeric(e.to_string()))
            }
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialise to JSON")
}

fn constant_rate(law: &MutationLaw) -> Result<f64> {
    match law {
        MutationLaw::Constant(b) => Ok(*b),
        other => Err(Error::Usage(format!("equilibrium needs a constant law, got {other}"))),
    }
}

fn run_equilibrium(cfg: &ExperimentConfig, m: &ResolvedModel) -> Result<Report> {
    let b = constant_rate(&cfg.law)?;
    let eq = equilibrium(b, &m.q, m.h)?;
    let check = equilibrium_mean_fitness(&eq, b, m.h);
    let log_ratio = log_ratio_diagnostic(b, &m.q, m.h)?;
    let mut json = to_json(&eq);
    json["b"] = json!(b);
    json["h"] = json!(m.h);
    json["mean_fitness"] = to_json(&check);
    json["log_ratio"] = json!(log_ratio);
    Ok(Report::ok(json, Table::measure(&eq.measure)))
}

fn run_forward(cfg: &ExperimentConfig, m: &ResolvedModel) -> Result<Report> {
    let betas = cfg.law.sample_sequence(cfg.sim.seed_spec(), cfg.sim.n_steps);
    let step_beta = |i: usize| if i == 0 { String::new() } else { betas[i - 1].to_string() };
    if cfg.output.record_measures {
        let t = forward_trajectory(&m.p0, &betas, &m.q)?;
        let mut csv = Table::new(&["step", "beta", "mean_fitness", "x", "w"]);
        for (i, mu) in t.measures.iter().enumerate() {
            for a in mu.atoms() {
                csv.push([i.to_string(), step_beta(i), t.means[i].to_string(), a.x.to_string(), a.w.to_string()]);
            }
        }
        let json = json!({ "n_steps": betas.len(), "trajectory": t, "final": t.last() });
        Ok(Report::ok(json, csv))
    } else {
        let (last, means) = forward_final(&m.p0, &betas, &m.q)?;
        let mut csv = Table::new(&["step", "beta", "mean_fitness"]);
        for (i, mean) in means.iter().enumerate() {
            csv.push([i.to_string(), step_beta(i), mean.to_string()]);
        }
        let json = json!({ "n_steps": betas.len(), "betas": betas, "means": means, "final": last });
        Ok(Report::ok(json, csv))
    }
}

fn run_backward(cfg: &ExperimentConfig, m: &ResolvedModel) -> Result<Report> {
    let mut stream = BetaStream::new(&cfg.law, cfg.sim.seed_spec());
    let r = quenched_limit(&mut stream, &m.q, m.h, cfg.sim.rule())?;
    let betas = stream.prefix(r.depth_used)?;
    let pass = backward_pass(&DiscreteMeasure::dirac(m.h)?, betas, &m.q, m.h)?;
    let routes = condensate_mass_routes(&pass, &m.q);
    let csv = Table::measure(&r.limit);
    Ok(Report::ok(json!({ "h": m.h, "result": r, "routes": routes }), csv))
}

fn run_criterion(cfg: &ExperimentConfig, m: &ResolvedModel) -> Result<Report> {
    let est = criterion_expectation(&cfg.law, &m.q, m.h, &cfg.sim.criterion(), cfg.sim.seed_spec())?;
    let mut csv = Table::new(&["h", "point", "ci_low", "ci_high", "term_log_h1mb", "term_log_meanfit", "samples"]);
    csv.push([
        m.h.to_string(),
        est.point.to_string(),
        est.ci_low.to_string(),
        est.ci_high.to_string(),
        est.term_log_h1mb.to_string(),
        est.term_log_meanfit.to_string(),
        est.samples.to_string(),
    ]);
    Ok(Report::ok(to_json(&est), csv))
}

#[derive(Serialize)]
struct ClassifyReport {
    #[serde(flatten)]
    verdict: crate::condensation::CondensationVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe: Option<CondensateProbe>,
    /// Why the probe failed, typically non-convergence near the critical line.
    #[serde(skip_serializing_if = "Option::is_none")]
    probe_error: Option<String>,
}

fn classify_model(cfg: &ExperimentConfig, m: &ResolvedModel) -> Result<ClassifyReport> {
    let crit = cfg.sim.criterion();
    let seed = cfg.sim.seed_spec();
    let verdict = classify(&cfg.law, &m.q, m.h, &crit, seed)?;
    let (probe, probe_error) = if m.q.mass_at(m.h) > 0.0 {
        (None, None)
    } else {
        match empirical_condensate_probe(&cfg.law, &m.q, m.h, &crit, seed.fork(2)) {
            Ok(p) => (Some(p), None),
            Err(e @ Error::NonConvergence { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        }
    };
    Ok(ClassifyReport { verdict, probe, probe_error })
}

fn run_classify(cfg: &ExperimentConfig, m: &ResolvedModel) -> Result<Report> {
    let r = classify_model(cfg, m)?;
    let mut csv = Table::new(&["h", "verdict", "point", "ci_low", "ci_high", "boundary_case", "fraction_positive"]);
    let e = &r.verdict.estimate;
    csv.push([
        m.h.to_string(),
        format!("{:?}", r.verdict.verdict),
        e.point.to_string(),
        e.ci_low.to_string(),
        e.ci_high.to_string(),
        r.verdict.boundary_case.to_string(),
        r.probe.as_ref().map(|p| p.fraction_positive.to_string()).unwrap_or_default(),
    ]);
    Ok(Report::ok(to_json(&r), csv))
}

fn run_two_atom(cfg: &ExperimentConfig, m: &ResolvedModel) -> Result<Report> {
    let [atom] = m.q.atoms() else {
        return Err(Error::Config("two-atom analysis needs a single-atom mutant law (use --c)".into()));
    };
    let model = TwoAtomModel::new(atom.x, m.h, cfg.law.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let verdict = two_atom_classify(&model)?;
    let depth = cfg.sim.two_atom_depth;
    let xs = x_distribution(&model, cfg.sim.replicas, depth, cfg.sim.seed_spec())?;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut json = json!({
        "model": model,
        "verdict": verdict,
        "sample": {
            "replicas": xs.len(),
            "depth": depth,
            "mean": mean,
            "sd": sd,
            "min": sorted[0],
            "median": sorted[sorted.len() / 2],
            "max": sorted[sorted.len() - 1],
        },
    });
    if cfg.output.record_measures {
        json["sample"]["values"] = json!(xs);
    }
    let mut csv = Table::new(&["replica", "x"]);
    for (i, x) in xs.iter().enumerate() {
        csv.push([i.to_string(), x.to_string()]);
    }
    Ok(Report::ok(json, csv))
}

fn display_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn run_phase_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let sweep = cfg
        .sweep
        .as_ref()
        .filter(|s| !s.axes.is_empty())
        .ok_or_else(|| Error::Config("phase-sweep needs at least one [[sweep.axes]] entry".into()))?;
    let base = cfg.to_table()?;
    let mut header: Vec<&str> = sweep.axes.iter().map(|a| a.key.as_str()).collect();
    header.extend(["h", "point", "ci_low", "ci_high", "verdict", "error"]);
    let mut csv = Table::new(&header);
    let mut rows = Vec::new();

    let total: usize = sweep.axes.iter().map(|a| a.values.len()).product();
    for idx in 0..total {
        let mut rem = idx;
        let mut point = Vec::with_capacity(sweep.axes.len());
        for axis in sweep.axes.iter().rev() {
            point.push((axis.key.clone(), axis.values[rem % axis.values.len()].clone()));
            rem /= axis.values.len();
        }
        point.reverse();
        let outcome = ExperimentConfig::from_table(base.clone(), &point)
            .and_then(|c| c.resolve().map(|m| (c, m)))
            .and_then(|(c, m)| classify(&c.law, &m.q, m.h, &c.sim.criterion(), c.sim.seed_spec()).map(|v| (m.h, v)));
        let mut row: Vec<String> = point.iter().map(|(_, v)| display_value(v)).collect();
        let mut obj = serde_json::Map::new();
        for (k, v) in &point {
            obj.insert(k.clone(), to_json(v));
        }
        match outcome {
            Ok((h, v)) => {
                let e = &v.estimate;
                row.extend([
                    h.to_string(),
                    e.point.to_string(),
                    e.ci_low.to_string(),
                    e.ci_high.to_string(),
                    format!("{:?}", v.verdict),
                    String::new(),
                ]);
                obj.insert("h".into(), json!(h));
                obj.insert("verdict".into(), to_json(&v));
            }
            Err(err) => {
                row.extend(["", "", "", "", "Error"].map(String::from));
                row.push(err.to_string());
                obj.insert("error".into(), json!(err.to_string()));
            }
        }
        csv.push(row);
        rows.push(Value::Object(obj));
    }
    Ok(Report::ok(Value::Array(rows), csv))
}

fn run_validate(cfg: &ExperimentConfig, m: &ResolvedModel) -> Result<Report> {
    let report = run_suite(&cfg.law, &m.q, m.h, &cfg.sim.suite(), cfg.sim.seed_spec())?;
    let mut csv = Table::new(&["check_name", "pass", "statistic"]);
    for r in &report {
        csv.push([r.check_name.clone(), r.pass.to_string(), r.statistic.to_string()]);
    }
    let all_pass = report.iter().all(|r| r.pass);
    Ok(Report { json: to_json(&report), csv, exit_code: if all_pass { 0 } else { 2 } })
}

/// Runs one subcommand on a loaded configuration.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Report> {
    let m = cfg.resolve()?;
    match command {
        Command::Equilibrium => run_equilibrium(cfg, &m),
        Command::Forward => run_forward(cfg, &m),
        Command::Backward => run_backward(cfg, &m),
        Command::Criterion => run_criterion(cfg, &m),
        Command::Classify => run_classify(cfg, &m),
        Command::TwoAtom => run_two_atom(cfg, &m),
        Command::PhaseSweep => run_phase_sweep(cfg),
        Command::Validate => run_validate(cfg, &m),
    }
}

/// Loads the configuration, runs the subcommand, writes the artifact and
/// returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    let cfg = ExperimentConfig::load(cli.flags.config.as_deref(), &cli.flags.overrides()?)?;
    let report = execute(cli.command, &cfg)?;
    let bytes = report.render(cfg.output.format)?;
    match &cfg.output.path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(report.exit_code)
}

/// Entry point of the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
