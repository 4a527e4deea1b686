//! Command-line front end: load systems and relations from JSON documents,
//! run equivalence checks, reductions and simulations, and emit reports.
//!
//! Exit codes: 0 when the checked property holds, 1 when it fails (or is
//! undecided), 2 on malformed input or any other error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use stochbisim::equivalence::{
    check_bisim_nondegenerate, check_bisimulation, check_external_equivalence,
    check_linear_equivalence, check_same_realization, maximal_external_relation, CheckReport,
    Verdict,
};
use stochbisim::io::{
    load_document, load_relation, load_system, save_document, BoxesDocument, InputDocument,
    RelationDocument, SystemDocument, TransformDocument, SCHEMA_VERSION,
};
use stochbisim::montecarlo::{
    compare_output_laws, compare_state_box_laws, moment_deviations, max_support_deviation,
    simulate, SimulationConfig,
};
use stochbisim::reduction::{minimal_bisim, minimal_external};
use stochbisim::sysmodel::InputSequence;
use stochbisim::{Error, StochasticLinearSystem, Tolerance};

#[derive(Parser)]
#[command(name = "stochbisim", version, about = "Equivalence checking, reduction and \
simulation for discrete-time stochastic linear control systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    tolerances: ToleranceArgs,

    /// Report format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Clone, Copy)]
struct ToleranceArgs {
    /// Relative singular-value cutoff for rank decisions
    /// (env STOCHBISIM_RANK_TOL).
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    /// Absolute part of matrix-equality gates (env STOCHBISIM_EQ_ABS).
    #[arg(long, global = true)]
    eq_abs: Option<f64>,
    /// Relative part of matrix-equality gates (env STOCHBISIM_EQ_REL).
    #[arg(long, global = true)]
    eq_rel: Option<f64>,
}

impl ToleranceArgs {
    fn resolve(&self) -> Result<Tolerance, Error> {
        let defaults = Tolerance::default();
        let from_env = |name: &str| -> Result<Option<f64>, Error> {
            match std::env::var(name) {
                Ok(v) => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::Invalid(format!("env {name}: not a number: {v:?}"))),
                Err(_) => Ok(None),
            }
        };
        let rank_rel = match self.rank_tol {
            Some(v) => v,
            None => from_env("STOCHBISIM_RANK_TOL")?.unwrap_or(defaults.rank_rel),
        };
        let eq_abs = match self.eq_abs {
            Some(v) => v,
            None => from_env("STOCHBISIM_EQ_ABS")?.unwrap_or(defaults.eq_abs),
        };
        let eq_rel = match self.eq_rel {
            Some(v) => v,
            None => from_env("STOCHBISIM_EQ_REL")?.unwrap_or(defaults.eq_rel),
        };
        Tolerance::new(rank_rel, eq_abs, eq_rel)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    /// Linear equivalence through an explicit transformation (--transform).
    Lin,
    /// Equivalence of stochastic external behavior.
    Ext,
    /// Stochastic bisimulation through a relation (--relation).
    Bisim,
    /// Same stationary zero-mean output process.
    Realization,
}

#[derive(Clone, Copy, ValueEnum)]
enum MaximalKind {
    Ext,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReduceKind {
    Ext,
    Bisim,
}

#[derive(Subcommand)]
enum Command {
    /// Check an equivalence between two systems.
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
        sys1: PathBuf,
        sys2: PathBuf,
        /// Relation document (required for bisim, optional for ext).
        #[arg(long)]
        relation: Option<PathBuf>,
        /// Transformation document (required for lin).
        #[arg(long)]
        transform: Option<PathBuf>,
        /// Also write the report to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compute the largest relation ensuring equivalent external behavior.
    MaximalRelation {
        #[arg(value_enum)]
        kind: MaximalKind,
        sys1: PathBuf,
        sys2: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Reduce a system to a minimal equivalent one.
    Reduce {
        #[arg(value_enum)]
        kind: ReduceKind,
        sys: PathBuf,
        /// Reduced system document.
        #[arg(long, short)]
        output: PathBuf,
        /// Inducing relation document.
        #[arg(long)]
        relation_out: PathBuf,
        /// Certificate text file (also printed).
        #[arg(long)]
        certificate_out: Option<PathBuf>,
    },
    /// Sample a trajectory ensemble and write it as tabular text.
    Simulate {
        sys: PathBuf,
        /// Initial state as comma-separated numbers (defaults to zero).
        #[arg(long)]
        x0: Option<String>,
        /// Input sequence document (defaults to zero input).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trajectories: usize,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Empirically validate equivalence claims by simulation.
    Validate {
        sys1: PathBuf,
        sys2: PathBuf,
        #[arg(long)]
        relation: PathBuf,
        /// Initial state of the first system (defaults to zero).
        #[arg(long)]
        x0_1: Option<String>,
        /// Initial state of the second system (defaults to zero).
        #[arg(long)]
        x0_2: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        trajectories: usize,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        /// Box-test document for state-law comparisons.
        #[arg(long)]
        boxes: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ConditionDocument {
    id: String,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct ToleranceDocument {
    rank_tol: f64,
    eq_abs: f64,
    eq_rel: f64,
}

impl From<Tolerance> for ToleranceDocument {
    fn from(t: Tolerance) -> Self {
        Self {
            rank_tol: t.rank_rel,
            eq_abs: t.eq_abs,
            eq_rel: t.eq_rel,
        }
    }
}

#[derive(Serialize)]
struct ReportDocument {
    schema_version: String,
    command: String,
    kind: String,
    verdict: String,
    conditions: Vec<ConditionDocument>,
    tolerances: ToleranceDocument,
    notes: Vec<String>,
}

impl ReportDocument {
    fn from_report(command: &str, kind: &str, report: &CheckReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            kind: kind.to_string(),
            verdict: report.verdict.to_string(),
            conditions: report
                .conditions
                .iter()
                .map(|c| ConditionDocument {
                    id: c.id.to_string(),
                    passed: c.passed,
                    residual: c.residual.is_finite().then_some(c.residual),
                    note: c.note.clone(),
                })
                .collect(),
            tolerances: report.tolerance.into(),
            notes: report.notes.clone(),
        }
    }

    fn render_text(&self) -> String {
        let mut out = format!("{} {}: {}\n", self.command, self.kind, self.verdict);
        for c in &self.conditions {
            let status = if c.passed { "pass" } else { "FAIL" };
            let residual = c
                .residual
                .map(|r| format!("{r:.3e}"))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!("  {:<5} {:<4} residual={}", c.id, status, residual));
            if let Some(note) = &c.note {
                out.push_str(&format!("  ({note})"));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "  tolerances: rank_tol={:.1e} eq_abs={:.1e} eq_rel={:.1e}\n",
            self.tolerances.rank_tol, self.tolerances.eq_abs, self.tolerances.eq_rel
        ));
        for note in &self.notes {
            out.push_str(&format!("  note: {note}\n"));
        }
        out
    }
}

fn parse_vector(spec: &str) -> Result<DVector<f64>, Error> {
    let values = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("not a number in vector: {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DVector::from_column_slice(&values))
}

fn initial_state(spec: Option<&str>, dim: usize) -> Result<DVector<f64>, Error> {
    match spec {
        None => Ok(DVector::zeros(dim)),
        Some(s) => {
            let v = parse_vector(s)?;
            if v.len() != dim {
                return Err(Error::Invalid(format!(
                    "initial state has {} entries, expected {dim}",
                    v.len()
                )));
            }
            Ok(v)
        }
    }
}

fn load_input(
    path: Option<&Path>,
    sys: &StochasticLinearSystem,
    horizon: usize,
) -> Result<InputSequence, Error> {
    match path {
        None => Ok(InputSequence::zero(sys.input_dim(), horizon)),
        Some(p) => {
            let doc: InputDocument = load_document(p)?;
            let u = doc.into_input(sys.input_dim())?;
            if u.horizon() < horizon {
                return Err(Error::Invalid(format!(
                    "input document provides {} steps, need {horizon}",
                    u.horizon()
                )));
            }
            Ok(u)
        }
    }
}

fn emit_report(
    doc: &ReportDocument,
    format: Format,
    output: Option<&Path>,
) -> Result<(), Error> {
    match format {
        Format::Text => print!("{}", doc.render_text()),
        Format::Json => {
            let text = serde_json::to_string_pretty(doc)
                .map_err(|e| Error::Invalid(format!("report serialization failed: {e}")))?;
            println!("{text}");
        }
    }
    if let Some(path) = output {
        save_document(path, doc)?;
    }
    Ok(())
}

fn verdict_code(verdict: Verdict) -> u8 {
    if verdict.holds() {
        0
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let tol = cli.tolerances.resolve()?;
    match cli.command {
        Command::Check {
            kind,
            sys1,
            sys2,
            relation,
            transform,
            output,
        } => {
            let s1 = load_system(&sys1)?;
            let s2 = load_system(&sys2)?;
            let (kind_name, report) = match kind {
                CheckKind::Lin => {
                    let path = transform.ok_or_else(|| {
                        Error::Invalid("check lin requires --transform".into())
                    })?;
                    let t = load_document::<TransformDocument>(&path)?.into_matrix()?;
                    ("lin", check_linear_equivalence(&s1, &s2, &t, tol)?)
                }
                CheckKind::Ext => {
                    let rel = relation
                        .map(|p| load_relation(&p))
                        .transpose()?;
                    ("ext", check_external_equivalence(&s1, &s2, rel.as_ref(), tol)?)
                }
                CheckKind::Bisim => {
                    let rel = match relation {
                        Some(path) => load_relation(&path)?,
                        None if s1.is_nondegenerate(tol) && s2.is_nondegenerate(tol) => {
                            // Fully noise-excited pairs are decidable without
                            // a candidate relation.
                            let report = check_bisim_nondegenerate(&s1, &s2, tol)?;
                            let doc = ReportDocument::from_report("check", "bisim", &report);
                            emit_report(&doc, cli.format, output.as_deref())?;
                            return Ok(verdict_code(report.verdict));
                        }
                        None => {
                            return Err(Error::Invalid(
                                "check bisim requires --relation (the pair has degenerate \
                                 state noise, so no canonical relation exists)"
                                    .into(),
                            ))
                        }
                    };
                    ("bisim", check_bisimulation(&s1, &s2, &rel, tol)?)
                }
                CheckKind::Realization => {
                    ("realization", check_same_realization(&s1, &s2, tol)?)
                }
            };
            let doc = ReportDocument::from_report("check", kind_name, &report);
            emit_report(&doc, cli.format, output.as_deref())?;
            Ok(verdict_code(report.verdict))
        }

        Command::MaximalRelation {
            kind: MaximalKind::Ext,
            sys1,
            sys2,
            output,
        } => {
            let s1 = load_system(&sys1)?;
            let s2 = load_system(&sys2)?;
            let rel = maximal_external_relation(&s1, &s2)?;
            let doc = RelationDocument::from_relation(&rel, Some("maximal external".into()));
            save_document(&output, &doc)?;
            println!(
                "maximal-relation ext: wrote {} ({} rows, kernel dimension {})",
                output.display(),
                rel.rows(),
                rel.kernel_stack(tol).dim()
            );
            Ok(0)
        }

        Command::Reduce {
            kind,
            sys,
            output,
            relation_out,
            certificate_out,
        } => {
            let system = load_system(&sys)?;
            let (reduced, relation, certificate_text) = match kind {
                ReduceKind::Ext => {
                    let (reduced, relation, decomp) = minimal_external(&system, tol)?;
                    let text = format!(
                        "reduction: observability quotient\noriginal dimension: {}\n\
                         reduced dimension: {}\nkept block: orthogonal complement of the \
                         unobservable subspace",
                        system.state_dim(),
                        decomp.reduced_dim()
                    );
                    (reduced, relation, text)
                }
                ReduceKind::Bisim => {
                    let (reduced, relation, certificate, _) = minimal_bisim(&system, tol)?;
                    let text = format!(
                        "reduction: bisimulation quotient\noriginal dimension: {}\n\
                         reduced dimension: {}\n{}",
                        system.state_dim(),
                        reduced.state_dim(),
                        certificate.summary()
                    );
                    (reduced, relation, text)
                }
            };
            save_document(&output, &SystemDocument::from_system(&reduced, None))?;
            save_document(
                &relation_out,
                &RelationDocument::from_relation(&relation, Some("inducing relation".into())),
            )?;
            if let Some(path) = &certificate_out {
                std::fs::write(path, format!("{certificate_text}\n"))?;
            }
            println!("{certificate_text}");
            println!(
                "wrote {} and {}",
                output.display(),
                relation_out.display()
            );
            Ok(0)
        }

        Command::Simulate {
            sys,
            x0,
            input,
            seed,
            trajectories,
            horizon,
            output,
        } => {
            let system = load_system(&sys)?;
            let x0 = initial_state(x0.as_deref(), system.state_dim())?;
            let u = load_input(input.as_deref(), &system, horizon)?;
            let cfg = SimulationConfig::new(seed, trajectories, horizon)?;
            let ensemble = simulate(&system, &x0, &u, cfg)?;
            std::fs::write(&output, ensemble.to_table())?;

            println!(
                "simulate: {} trajectories, horizon {}, seed {}",
                trajectories, horizon, seed
            );
            if trajectories >= 2 {
                for d in moment_deviations(&system, &x0, &u, &ensemble)? {
                    println!(
                        "  {:?}: max mean deviation {:.3e}, max covariance deviation {:.3e}",
                        d.process, d.max_mean_deviation, d.max_cov_deviation
                    );
                }
            }
            let support_dev = max_support_deviation(&system, &x0, &u, &ensemble)?;
            println!(
                "  support deviation: {:.3e} (units of 1e-10 * scale; <= 1 confirms the \
                 degeneracy structure)",
                support_dev
            );
            println!("  wrote {}", output.display());
            Ok(0)
        }

        Command::Validate {
            sys1,
            sys2,
            relation,
            x0_1,
            x0_2,
            input,
            seed,
            trajectories,
            horizon,
            boxes,
        } => {
            let s1 = load_system(&sys1)?;
            let s2 = load_system(&sys2)?;
            let rel = load_relation(&relation)?;
            let x0_1 = initial_state(x0_1.as_deref(), s1.state_dim())?;
            let x0_2 = initial_state(x0_2.as_deref(), s2.state_dim())?;
            let u = load_input(input.as_deref(), &s1, horizon)?;
            let cfg = SimulationConfig::new(seed, trajectories, horizon)?;

            let mut all_passed = true;
            let laws = compare_output_laws(&s1, &s2, &x0_1, &x0_2, &u, cfg)?;
            println!(
                "output-law comparison ({} samples): {}",
                laws.sample_count,
                if laws.passed { "pass" } else { "FAIL" }
            );
            for check in laws.checks.iter().filter(|c| !c.passed) {
                println!(
                    "  t={} {}: deviation {:.2} standard errors",
                    check.time, check.kind, check.max_deviation
                );
            }
            all_passed &= laws.passed;

            if let Some(path) = &boxes {
                let doc: BoxesDocument = load_document(path)?;
                if doc.schema_version != SCHEMA_VERSION {
                    return Err(Error::Invalid(format!(
                        "boxes document: unsupported schema_version {:?}",
                        doc.schema_version
                    )));
                }
                for (i, entry) in doc.boxes.iter().enumerate() {
                    let boxset = entry.into_box()?;
                    let cmp = compare_state_box_laws(
                        &s1, &s2, &rel, &x0_1, &x0_2, &u, entry.t, &boxset, cfg, tol,
                    )?;
                    println!(
                        "box {i} at t={}: p1={:.5} p2={:.5} ({}): {}",
                        entry.t,
                        cmp.p1,
                        cmp.p2,
                        format_args!("se={:.2e}", cmp.standard_error),
                        if cmp.passed { "pass" } else { "FAIL" }
                    );
                    all_passed &= cmp.passed;
                }
            }
            Ok(if all_passed { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
