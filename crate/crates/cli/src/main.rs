//! `bsd-iso`: construct and verify holomorphic isometries between bounded
//! symmetric domains.
//!
//! Exit codes: 0 pass, 2 precondition or hypothesis violation, 3
//! verification failure, 4 I/O or format error.

use std::path::PathBuf;
use std::process::ExitCode;

use bsd_iso::construct::{self, GraphConstructionProblem};
use bsd_iso::degeneracy;
use bsd_iso::fibration::Fibration;
use bsd_iso::isometry::catalog;
use bsd_iso::report::{self, Entry, Format, ReportConfig};
use bsd_iso::sampling::Seeds;
use bsd_iso::sections::{self, LinearSubspace};
use bsd_iso::{linalg, Certificate, DomainSpec, Error, IsometryMap, Result, Tolerances, C64};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bsd-iso", version, about = "Holomorphic isometries between bounded symmetric domains")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every sampled check.
    #[arg(long, default_value_t = 7, global = true)]
    seed: u64,
    /// Sample count per sampled check.
    #[arg(long, default_value_t = 1000, global = true)]
    samples: usize,
    /// Tolerance override such as eps_fun=1e-9; repeatable.
    #[arg(long = "tolerance", value_name = "KEY=VAL", global = true)]
    tolerances: Vec<String>,
    /// Output format: json, csv or human.
    #[arg(long, default_value = "json", global = true)]
    format: String,
    /// Omit the timestamp so identical runs produce identical bytes.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph-form isometry into a rank-two target.
    Construct {
        #[arg(long)]
        target: String,
        /// `identity`, `phase:THETA`, a JSON matrix or a file holding one.
        #[arg(long, default_value = "identity")]
        unitary: String,
        #[arg(long, default_value_t = 10)]
        order: usize,
        /// Comma-separated output slots of the standard coordinates.
        #[arg(long)]
        permutation: Option<String>,
    },
    /// Functional equation, Jacobian identity and linear functional.
    Verify {
        /// Map JSON file, or `builtin:NAME`.
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 8)]
        order: usize,
    },
    /// Submersion, retraction, splitting and convexity checks.
    Fibration {
        #[arg(long)]
        map: String,
        /// A JSON point, or `{"points": [...]}`, inline or in a file.
        #[arg(long)]
        query: Option<String>,
        /// Run only the tangent splitting check.
        #[arg(long)]
        splitting: bool,
    },
    /// Subspace transfer and affine section preservation.
    Sections {
        #[arg(long)]
        map: String,
        /// `{"span": [...]}` or `{"kernel": [...]}`, inline or in a file.
        #[arg(long)]
        subspace: Option<String>,
        /// Offset point in the source, inline JSON or a file (default 0).
        #[arg(long)]
        offset: Option<String>,
    },
    /// Linear degeneracy and sufficient non-degeneracy certificates.
    Degeneracy {
        #[arg(long, required_unless_present = "example_delta2")]
        map: Option<String>,
        #[arg(long, default_value_t = degeneracy::DEFAULT_MAX_ORDER)]
        max_order: usize,
        /// Probe the fibers of the diagonal disc map into the bidisc.
        #[arg(long)]
        example_delta2: bool,
    },
    /// Every applicable check in one document.
    Report {
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 8)]
        order: usize,
        #[arg(long, default_value_t = degeneracy::DEFAULT_MAX_ORDER)]
        max_order: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("BSD_ISO_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // only fails when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("bsd-iso: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let c = &cli.common;
    let mut tol = Tolerances::default();
    for t in &c.tolerances {
        tol.set(t)?;
    }
    let format: Format = c.format.parse()?;
    match cli.command {
        Command::Construct { target, unitary, order, permutation } => {
            cmd_construct(c, &tol, format, &target, &unitary, order, permutation.as_deref())
        }
        Command::Verify { map, order } => {
            let f = load_map(&map)?;
            let cfg = config(c, &tol, order, degeneracy::DEFAULT_MAX_ORDER);
            emit(c, format, "verify", report::run_jobs(c.seed, report::verify_jobs(&f, &cfg)))
        }
        Command::Fibration { map, query, splitting } => cmd_fibration(c, &tol, format, &map, query.as_deref(), splitting),
        Command::Sections { map, subspace, offset } => {
            cmd_sections(c, &tol, format, &map, subspace.as_deref(), offset.as_deref())
        }
        Command::Degeneracy { map, max_order, example_delta2 } => {
            let entries = if example_delta2 {
                let mut rng = Seeds::new(c.seed).stream("degeneracy/example_fiber_probe");
                let cert = degeneracy::example_fiber_probe(c.samples, &mut rng, &tol);
                vec![Entry::from_result("degeneracy", "example_fiber_probe", Ok(cert))]
            } else {
                let f = load_map(map.as_deref().expect("clap requires --map"))?;
                let cfg = config(c, &tol, 8, max_order);
                report::run_jobs(c.seed, report::degeneracy_jobs(&f, &cfg))
            };
            emit(c, format, "degeneracy", entries)
        }
        Command::Report { map, order, max_order } => {
            let f = load_map(&map)?;
            let r = report::build_report(&f, &config(c, &tol, order, max_order))?;
            write_out(c, &r.render(format)?)?;
            report_failures(&r.entries);
            Ok(r.exit_code())
        }
    }
}

fn config(c: &Common, tol: &Tolerances, order: usize, k_max: usize) -> ReportConfig {
    ReportConfig { seed: c.seed, samples: c.samples, order, k_max, tol: *tol, deterministic: c.deterministic }
}

/// Inline JSON when the argument starts with `{` or `[`, otherwise a path.
fn read_json(arg: &str) -> Result<Value> {
    let t = arg.trim_start();
    let text = if t.starts_with('{') || t.starts_with('[') { arg.to_string() } else { std::fs::read_to_string(arg)? };
    Ok(serde_json::from_str(&text)?)
}

fn parse_builtin(name: &str) -> Result<IsometryMap> {
    let parts: Vec<&str> = name.split(':').collect();
    let num = |i: usize, default: Option<usize>| -> Result<usize> {
        match parts.get(i) {
            Some(s) => s.parse().map_err(|_| Error::Parse(format!("bad number in builtin map {name:?}"))),
            None => default.ok_or_else(|| Error::Parse(format!("builtin map {name:?} needs a dimension"))),
        }
    };
    match parts[0] {
        "identity" => Ok(catalog::identity(num(1, None)?)),
        "diagonal" => Ok(catalog::diagonal()),
        "typeIV-graph" => {
            let n = num(1, None)?;
            if n < 3 {
                return Err(Error::Hypothesis("typeIV-graph needs n >= 3".into()));
            }
            Ok(catalog::type_iv_graph(n, num(2, Some(12))?))
        }
        other => Err(Error::Parse(format!("unknown builtin map {other:?}"))),
    }
}

fn load_map(arg: &str) -> Result<IsometryMap> {
    match arg.strip_prefix("builtin:") {
        Some(name) => parse_builtin(name),
        None => IsometryMap::from_json(&read_json(arg)?),
    }
}

fn write_out(c: &Common, text: &str) -> Result<()> {
    match &c.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Names each failing check on stderr with its largest residual-like metric.
fn report_failures(entries: &[Entry]) {
    for e in entries.iter().filter(|e| e.exit_code != 0) {
        let worst = e
            .certificate
            .metrics
            .iter()
            .filter(|(k, _)| k.contains("residual") || k.contains("failures"))
            .max_by(|a, b| a.1.total_cmp(b.1));
        match worst {
            Some((k, v)) => eprintln!("failed: {}/{} ({k} = {v:e})", e.section, e.name),
            None => eprintln!("failed: {}/{} {}", e.section, e.name, e.certificate.notes.join("; ")),
        }
    }
}

fn emit(c: &Common, format: Format, command: &str, entries: Vec<Entry>) -> Result<i32> {
    let text = match format {
        Format::Json => {
            let doc = json!({
                "command": command,
                "seed": c.seed,
                "samples": c.samples,
                "checks": report::entries_json(&entries),
                "exit_code": report::exit_code(&entries),
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
        Format::Csv => report::entries_csv(&entries)?,
        Format::Human => report::entries_human(&entries),
    };
    write_out(c, &text)?;
    report_failures(&entries);
    Ok(report::exit_code(&entries))
}

fn cmd_construct(
    c: &Common,
    tol: &Tolerances,
    format: Format,
    target: &str,
    unitary: &str,
    order: usize,
    permutation: Option<&str>,
) -> Result<i32> {
    let target: DomainSpec = target.parse()?;
    let codim = target.n_prime().saturating_sub(target.dim());
    let u = construct::parse_unitary(unitary, codim)?;
    let perm = permutation
        .map(|p| {
            p.split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad permutation {p:?}"))))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let problem = GraphConstructionProblem::new(target, u, perm, order, tol)?;
    let (map, cert) = construct::solve_graph_isometry(&problem, tol)?;
    let code = if cert.passed() { 0 } else { 3 };
    let mut doc = map.to_json();
    doc["certificate"] = serde_json::to_value(&cert)?;
    let doc_text = serde_json::to_string_pretty(&doc)? + "\n";
    let entries = vec![Entry::from_result("construct", "functional_equation", Ok(cert))];
    match (&c.out, format) {
        (Some(p), _) => {
            std::fs::write(p, doc_text)?;
            let summary = match format {
                Format::Json => serde_json::to_string_pretty(&report::entries_json(&entries))? + "\n",
                Format::Csv => report::entries_csv(&entries)?,
                Format::Human => report::entries_human(&entries),
            };
            print!("{summary}");
        }
        (None, Format::Json) => print!("{doc_text}"),
        (None, Format::Csv) => print!("{}", report::entries_csv(&entries)?),
        (None, Format::Human) => print!("{}", report::entries_human(&entries)),
    }
    report_failures(&entries);
    Ok(code)
}

fn point_json(p: &[C64]) -> Value {
    linalg::vector_to_json(p)
}

fn cmd_fibration(c: &Common, tol: &Tolerances, format: Format, map: &str, query: Option<&str>, splitting: bool) -> Result<i32> {
    let f = load_map(map)?;
    let fib = Fibration::new(f, tol)?;
    if let Some(q) = query {
        let v = read_json(q)?;
        let points: Vec<Vec<C64>> = match v.get("points") {
            Some(list) => list
                .as_array()
                .ok_or_else(|| Error::Parse("\"points\" must be a list".into()))?
                .iter()
                .map(linalg::vector_from_json)
                .collect::<Result<_>>()?,
            None => vec![linalg::vector_from_json(&v)?],
        };
        let big_n = fib.map().target_dim();
        let mut out = Vec::new();
        for p in &points {
            if p.len() != big_n {
                return Err(Error::Dimension(format!("query point has {} coordinates, target has {big_n}", p.len())));
            }
            let m = fib.in_df(p)?;
            let (proj, retr) = if m.inside {
                (Some(point_json(&fib.project(p)?)), Some(point_json(&fib.retract(p)?)))
            } else {
                (None, None)
            };
            out.push(json!({
                "point": point_json(p),
                "in_df": m.inside,
                "margin": m.margin,
                "seminorm": fib.seminorm(p),
                "project": proj,
                "retract": retr,
            }));
        }
        write_out(c, &(serde_json::to_string_pretty(&json!({ "command": "fibration", "queries": out }))? + "\n"))?;
        return Ok(0);
    }
    let cfg = config(c, tol, 8, degeneracy::DEFAULT_MAX_ORDER);
    let mut jobs = report::fibration_jobs(&fib, &cfg);
    if splitting {
        jobs.retain(|j| j.1 == "splitting");
    }
    emit(c, format, "fibration", report::run_jobs(c.seed, jobs))
}

fn cmd_sections(
    c: &Common,
    tol: &Tolerances,
    format: Format,
    map: &str,
    subspace: Option<&str>,
    offset: Option<&str>,
) -> Result<i32> {
    let f = load_map(map)?;
    let cfg = config(c, tol, 8, degeneracy::DEFAULT_MAX_ORDER);
    let Some(sub) = subspace else {
        return emit(c, format, "sections", report::run_jobs(c.seed, report::section_jobs(&f, &cfg, 10)));
    };
    let v = LinearSubspace::from_json(&read_json(sub)?, tol.tau_rank)?;
    let point = match offset {
        Some(o) => linalg::vector_from_json(&read_json(o)?)?,
        None => vec![Complex::new(0.0, 0.0); f.source_dim()],
    };
    let transfer = sections::transfer(&f, &v, tol).map(|t| {
        Certificate::new("transfer")
            .metric("source_dim", v.dim() as f64)
            .metric("transfer_dim", t.subspace.dim() as f64)
            .metric("presentation_angle", t.angle)
            .tolerance("angle_agree", tol.angle_agree)
            .with_witness(t.subspace.witness())
            .pass_if(t.angle <= tol.angle_agree)
    });
    let mut rng = Seeds::new(c.seed).stream("sections/section_preservation");
    let check = sections::section_preservation_check(&f, &v, &point, c.samples, &mut rng, tol);
    let entries = vec![
        Entry::from_result("sections", "transfer", transfer),
        Entry::from_result("sections", "section_preservation", check),
    ];
    emit(c, format, "sections", entries)
}
