//! Composite report over every check applicable to one map.
//!
//! Each sub-check draws from its own named random stream, so adding or
//! reordering checks never changes the samples another check sees. Checks
//! run in parallel and are assembled in a fixed order.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::certificate::{Certificate, Status};
use crate::degeneracy;
use crate::error::{Error, Result};
use crate::fibration::Fibration;
use crate::isometry::{self, IsometryMap};
use crate::sampling::{self, Seeds};
use crate::sections::{self, LinearSubspace};
use crate::tolerances::Tolerances;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Human,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "human" => Ok(Format::Human),
            other => Err(Error::Parse(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReportConfig {
    pub seed: u64,
    pub samples: usize,
    /// Jet order for the functional equation.
    pub order: usize,
    pub k_max: usize,
    pub tol: Tolerances,
    pub deterministic: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            seed: 7,
            samples: 1000,
            order: 8,
            k_max: degeneracy::DEFAULT_MAX_ORDER,
            tol: Tolerances::default(),
            deterministic: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Entry {
    pub section: String,
    /// Job name, distinguishing repeated checks within a section.
    pub name: String,
    pub certificate: Certificate,
    pub exit_code: i32,
}

impl Entry {
    pub fn from_result(section: &str, check: &str, r: Result<Certificate>) -> Entry {
        match r {
            Ok(c) => {
                let exit_code = if c.status == Status::Fail { 3 } else { 0 };
                Entry { section: section.into(), name: check.into(), certificate: c, exit_code }
            }
            Err(e) => Entry {
                section: section.into(),
                name: check.into(),
                certificate: Certificate::new(check).with_status(Status::Fail).note(format!("error: {e}")),
                exit_code: e.exit_code(),
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub map: Value,
    pub config: ReportConfig,
    pub entries: Vec<Entry>,
    pub timestamp: Option<u64>,
}

pub type Job<'a> = (&'static str, String, Box<dyn Fn(&mut ChaCha8Rng) -> Result<Certificate> + Send + Sync + 'a>);

fn job<'a>(section: &'static str, name: impl Into<String>, f: impl Fn(&mut ChaCha8Rng) -> Result<Certificate> + Send + Sync + 'a) -> Job<'a> {
    (section, name.into(), Box::new(f))
}

/// Runs jobs in parallel, one named stream each, in submission order.
pub fn run_jobs(seed: u64, jobs: Vec<Job<'_>>) -> Vec<Entry> {
    let seeds = Seeds::new(seed);
    jobs.par_iter()
        .map(|(section, name, f)| {
            let mut rng = seeds.stream(&format!("{section}/{name}"));
            Entry::from_result(section, name, f(&mut rng))
        })
        .collect()
}

/// Functional equation (jets and points), Jacobian identity and the linear
/// functional.
pub fn verify_jobs<'a>(f: &'a IsometryMap, cfg: &'a ReportConfig) -> Vec<Job<'a>> {
    let tol = &cfg.tol;
    let n = f.source_dim();
    vec![
        job("verify", "functional_equation", move |_| isometry::verify_functional_equation(f, cfg.order, tol)),
        job("verify", "functional_equation_pointwise", move |rng| {
            let pairs = isometry::sample_pairs(n, cfg.samples, tol.r_sample, rng);
            isometry::verify_functional_equation_pointwise(f, &pairs, tol)
        }),
        job("verify", "jacobian_identity", move |_| isometry::jacobian_identity(f, tol)),
        job("verify", "linear_functional", move |rng| {
            let pts: Vec<Vec<C64>> = (0..cfg.samples).map(|_| sampling::ball(rng, n, tol.r_sample)).collect();
            isometry::verify_linear_functional(f, &pts, tol)
        }),
        job("verify", "m_identity", move |rng| {
            let pts: Vec<Vec<C64>> = (0..cfg.samples).map(|_| sampling::ball(rng, n, tol.r_sample)).collect();
            isometry::verify_m_identity(f, &pts, tol)
        }),
    ]
}

pub fn fibration_jobs<'a>(fib: &'a Fibration, cfg: &'a ReportConfig) -> Vec<Job<'a>> {
    let n = fib.map().source_dim();
    let s = cfg.samples;
    vec![
        job("fibration", "splitting", move |rng| {
            let pts: Vec<Vec<C64>> = (0..s.min(100)).map(|_| sampling::ball(rng, n, 0.7)).collect();
            fib.splitting_check(&pts)
        }),
        job("fibration", "retraction", move |rng| fib.retraction_suite(s, rng)),
        job("fibration", "balanced", move |rng| fib.balanced_check(s, rng)),
        job("fibration", "convexity", move |rng| fib.convexity_check(s, rng)),
        job("fibration", "ball_image_identity", move |rng| {
            let w0 = sampling::ball(rng, n, 0.3);
            fib.ball_image_identity(&w0, 0.4, s.min(200), rng)
        }),
    ]
}

/// Proper coordinate subspaces for small sources, coordinate lines and
/// hyperplanes otherwise.
pub fn coordinate_subspaces(n: usize) -> Vec<Vec<usize>> {
    if n <= 4 {
        (1..(1usize << n) - 1).map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect()).collect()
    } else {
        let lines = (0..n).map(|i| vec![i]);
        let hyper = (0..n).map(|i| (0..n).filter(|&j| j != i).collect());
        lines.chain(hyper).collect()
    }
}

pub fn section_jobs<'a>(f: &'a IsometryMap, cfg: &'a ReportConfig, random_pairs: usize) -> Vec<Job<'a>> {
    let n = f.source_dim();
    if n < 2 {
        return Vec::new();
    }
    let tol = &cfg.tol;
    let s = cfg.samples.min(200);
    let mut jobs = Vec::new();
    for axes in coordinate_subspaces(n) {
        let name = format!("coordinate{axes:?}");
        jobs.push(job("sections", name, move |rng| {
            let v = LinearSubspace::coordinate(n, &axes)?;
            let offset = sampling::ball(rng, n, 0.5);
            sections::section_preservation_check(f, &v, &offset, s, rng, tol)
        }));
    }
    for i in 0..random_pairs {
        jobs.push(job("sections", format!("random{i}"), move |rng| {
            let m = 1 + i % (n - 1);
            let v = sections::random_subspace(n, m, rng);
            let offset = sampling::ball(rng, n, 0.5);
            sections::section_preservation_check(f, &v, &offset, s, rng, tol)
        }));
    }
    jobs.push(job("sections", "transfer_injectivity", move |rng| sections::injectivity_check(f, 100, rng, tol)));
    jobs
}

pub fn degeneracy_jobs<'a>(f: &'a IsometryMap, cfg: &'a ReportConfig) -> Vec<Job<'a>> {
    let tol = &cfg.tol;
    let k = if f.jets().iter().all(|j| j.is_exact()) { cfg.k_max } else { cfg.k_max.min(f.order()) };
    vec![
        job("degeneracy", "linear_degeneracy", move |_| degeneracy::linear_degeneracy(f, k, tol)),
        job("degeneracy", "sufficient_nondegeneracy", move |_| degeneracy::sufficient_nondegeneracy(f, k, tol)),
    ]
}

pub fn map_summary(f: &IsometryMap) -> Value {
    json!({
        "source": f.source().to_string(),
        "target": f.target().to_string(),
        "k": f.k(),
        "order": if f.jets().iter().all(|j| j.is_exact()) { Value::Null } else { json!(f.order()) },
        "closed_form": f.closed_form().map(|c| c.kind.tag()),
    })
}

pub fn build_report(f: &IsometryMap, cfg: &ReportConfig) -> Result<Report> {
    let (fib, fib_error) = match Fibration::new(f.clone(), &cfg.tol) {
        Ok(fib) => (Some(fib), None),
        Err(e) => (None, Some(Entry::from_result("fibration", "fibration", Err(e)))),
    };
    let mut jobs = verify_jobs(f, cfg);
    if let Some(fib) = &fib {
        jobs.extend(fibration_jobs(fib, cfg));
    }
    jobs.extend(section_jobs(f, cfg, 10));
    jobs.extend(degeneracy_jobs(f, cfg));
    let mut entries = run_jobs(cfg.seed, jobs);
    entries.extend(fib_error);
    let timestamp = (!cfg.deterministic).then(|| {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    });
    Ok(Report { map: map_summary(f), config: cfg.clone(), entries, timestamp })
}

impl Report {
    /// Worst exit code over all entries.
    pub fn exit_code(&self) -> i32 {
        exit_code(&self.entries)
    }

    pub fn to_json(&self) -> Value {
        let checks = entries_json(&self.entries);
        let mut doc = json!({
            "map": self.map,
            "seed": self.config.seed,
            "samples": self.config.samples,
            "order": self.config.order,
            "k_max": self.config.k_max,
            "tolerances": self.config.tol,
            "checks": checks,
            "exit_code": self.exit_code(),
        });
        if let Some(t) = self.timestamp {
            doc["generated_at_unix"] = json!(t);
        }
        doc
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&self.to_json())? + "\n"),
            Format::Csv => entries_csv(&self.entries),
            Format::Human => Ok(entries_human(&self.entries)),
        }
    }
}

pub fn entries_json(entries: &[Entry]) -> Vec<Value> {
    entries
        .iter()
        .map(|e| {
            let mut v = serde_json::to_value(&e.certificate).expect("certificates serialize");
            v["section"] = json!(e.section);
            v["name"] = json!(e.name);
            v["exit_code"] = json!(e.exit_code);
            v
        })
        .collect()
}

pub fn exit_code(entries: &[Entry]) -> i32 {
    entries.iter().map(|e| e.exit_code).max().unwrap_or(0)
}

/// One row per sub-check.
pub fn entries_csv(entries: &[Entry]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["section", "name", "check", "status", "exit_code", "metrics", "notes"]).map_err(io)?;
    for e in entries {
        let c = &e.certificate;
        let metrics: Vec<String> = c.metrics.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let status = serde_json::to_value(c.status)?.as_str().unwrap_or_default().to_string();
        w.write_record([e.section.as_str(), &e.name, &c.check, &status, &e.exit_code.to_string(), &metrics.join(";"), &c.notes.join("; ")])
            .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn entries_human(entries: &[Entry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!("{:<32} {}\n", format!("{}/{}", e.section, e.name), e.certificate.summary()));
        for n in &e.certificate.notes {
            out.push_str(&format!("    {n}\n"));
        }
    }
    out
}
