//! Batch front end: domain admission, kernel builds and comparisons,
//! metric sweeps, completeness probes, peak verification and
//! machine-readable reports.
//!
//! Exit codes: 0 all verdicts pass, 1 verdict failure, 2 malformed
//! input, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use metricslab::bergman::{GramPlan, KernelEngine, NumericEngine};
use metricslab::domains::{self, DomainSpec};
use metricslab::expr::Expr;
use metricslab::metrics::{
    self, certified_family_for, completeness_probe, family_for, hahn_lu_check, homothety_escape,
};
use metricslab::peaks::{self, PeakCandidate, PeakCheckOptions};
use metricslab::Error;

#[derive(Parser)]
#[command(name = "metricslab", version, about = "invariant-metrics laboratory")]
struct Cli {
    /// worker threads (fallback: METRICSLAB_THREADS); results are
    /// bitwise identical for any setting
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum OutFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Structure checks for a domain spec (weighted homogeneity,
    /// pluriharmonic terms, bumping, nonnegativity record)
    CheckDomain {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t)]
        out: OutFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Kernel engine operations
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Full metric sweep: Caratheodory lower, Kobayashi upper, Bergman
    /// form and both verdicts per probe
    MetricSweep {
        #[arg(long)]
        domain: PathBuf,
        /// probes file: JSON array of { point, direction }
        #[arg(long)]
        probes: Option<PathBuf>,
        /// number of generated probes when no file is given
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        degree: u32,
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
        #[arg(long, default_value_t = 64)]
        strata: u32,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, value_enum, default_value_t)]
        out: OutFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Metric sweep plus a hard pass/fail gate on the comparison and
    /// ordering verdicts
    HahnLu {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        probes: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        degree: u32,
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
        #[arg(long, default_value_t = 64)]
        strata: u32,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, value_enum, default_value_t)]
        out: OutFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Caratheodory distance lower bounds along an escape sequence
    ProbeCompleteness {
        #[arg(long)]
        domain: PathBuf,
        /// base point as JSON [[re, im], ...]; defaults to the anchor
        #[arg(long)]
        base: Option<String>,
        /// homothety steps t = 2^1 .. 2^steps (WB graph domains)
        #[arg(long, default_value_t = 12)]
        steps: u32,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_enum, default_value_t)]
        out: OutFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Verify the peak-function conditions for an expression
    VerifyPeak {
        #[arg(long)]
        domain: PathBuf,
        /// expression JSON file
        #[arg(long)]
        expr: PathBuf,
        /// peak point as JSON [[re, im], ...]
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 4242)]
        seed: u64,
        #[arg(long, default_value_t = 5e-4)]
        margin: f64,
        #[arg(long, value_enum, default_value_t)]
        out: OutFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-emit a JSON report as CSV (or summarize verdicts)
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        out: OutFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KernelAction {
    /// Build a numeric engine and serialize it
    Build {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value_t = 8)]
        degree: u32,
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        strata: u32,
        /// use the exact diagonal Gram instead of Monte Carlo
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate K(p, p) of a serialized engine at probe points
    Eval {
        #[arg(long)]
        engine: PathBuf,
        #[arg(long)]
        probes: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        out: OutFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare a numeric engine against the closed-form kernel
    Compare {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value_t = 12)]
        degree: u32,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        strata: u32,
        #[arg(long, default_value_t = 20)]
        probes: usize,
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        #[arg(long, value_enum, default_value_t)]
        out: OutFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    domain: Option<String>,
    seed: Option<u64>,
    samples: Option<u64>,
    degree: Option<u32>,
    tolerance: Option<f64>,
    artifact_version: &'static str,
    /// excluded from the hash so equal manifests give byte-identical files
    wall_clock_ms: u128,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            domain: None,
            seed: None,
            samples: None,
            degree: None,
            tolerance: None,
            artifact_version: env!("CARGO_PKG_VERSION"),
            wall_clock_ms: 0,
        }
    }

    fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.command.as_bytes());
        hasher.update(self.domain.as_deref().unwrap_or("").as_bytes());
        for v in [
            self.seed.map(|s| s.to_string()),
            self.samples.map(|s| s.to_string()),
            self.degree.map(|d| d.to_string()),
            self.tolerance.map(|t| format!("{t:e}")),
            Some(self.artifact_version.to_string()),
        ]
        .into_iter()
        .flatten()
        {
            hasher.update(v.as_bytes());
        }
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

// ---------------------------------------------------------------------------
// output plumbing
// ---------------------------------------------------------------------------

fn emit(path: Option<&Path>, content: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn csv_from_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(vec![]);
    w.write_record(header).expect("csv header");
    for row in rows {
        w.write_record(row).expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
}

#[derive(Serialize)]
struct JsonReport<T: Serialize> {
    manifest_hash: String,
    manifest: RunManifest,
    pass: bool,
    rows: T,
}

fn json_report<T: Serialize>(manifest: RunManifest, pass: bool, rows: T) -> String {
    let mut out = serde_json::to_string_pretty(&JsonReport {
        manifest_hash: manifest.hash(),
        manifest,
        pass,
        rows,
    })
    .expect("report serializes");
    out.push('\n');
    out
}

fn point_str(p: &[(f64, f64)]) -> String {
    p.iter()
        .map(|(re, im)| format!("{re}{}{}i", if *im < 0.0 { "" } else { "+" }, im))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_point(text: &str) -> Result<Vec<Complex64>, Error> {
    let raw: Vec<[f64; 2]> = serde_json::from_str(text)?;
    Ok(raw.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeJson {
    point: Vec<[f64; 2]>,
    direction: Vec<[f64; 2]>,
}

fn load_probes(path: &Path) -> Result<Vec<(Vec<Complex64>, Vec<Complex64>)>, Error> {
    let text = fs::read_to_string(path)?;
    let raw: Vec<ProbeJson> = serde_json::from_str(&text)?;
    Ok(raw
        .into_iter()
        .map(|p| {
            (
                p.point.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
                p.direction
                    .iter()
                    .map(|&[re, im]| Complex64::new(re, im))
                    .collect(),
            )
        })
        .collect())
}

fn load_domain(path: &Path) -> Result<DomainSpec, Error> {
    let text = fs::read_to_string(path)?;
    DomainSpec::from_json(&text)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Json(_)
        | Error::Io(_)
        | Error::InvalidDomain(_)
        | Error::DimensionMismatch { .. }
        | Error::NoSamplingPlan
        | Error::EmptyFamily => 2,
        _ => 3,
    }
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

fn run_check_domain(
    domain: &Path,
    samples: usize,
    seed: u64,
    out: OutFormat,
    output: Option<&Path>,
) -> Result<bool, Error> {
    let spec = load_domain(domain)?;
    let mut manifest = RunManifest::new("check-domain");
    manifest.domain = Some(domain.display().to_string());
    manifest.seed = Some(seed);
    manifest.samples = Some(samples as u64);

    let started = Instant::now();
    let (pass, rows_json, rows_csv): (bool, serde_json::Value, Vec<Vec<String>>) = match &spec {
        DomainSpec::WbGraph { poly, weights, bump_s } => {
            let report = domains::admit_wb_graph(&spec, samples, seed)?;
            let bisected = domains::bisect_bumping_constant(poly, weights, samples, seed)?;
            let rows = vec![
                vec![
                    "weighted_homogeneity".to_string(),
                    report.homogeneity.ok.to_string(),
                    format!("spot_check_max_rel={}", report.homogeneity.spot_check_max_rel),
                ],
                vec![
                    "pluriharmonic_terms".to_string(),
                    report.pluriharmonic_terms.is_empty().to_string(),
                    format!("{:?}", report.pluriharmonic_terms),
                ],
                vec![
                    "bumping".to_string(),
                    report.bumping.ok.to_string(),
                    format!("s={bump_s} min_eig={}", report.bumping.min_eigenvalue),
                ],
                vec![
                    "bumping_bisected_s".to_string(),
                    (bisected > 0.0).to_string(),
                    format!("s_star={bisected}"),
                ],
                vec![
                    "nonnegativity_record".to_string(),
                    report.nonnegativity.ok.to_string(),
                    format!("min_margin={}", report.nonnegativity.min_margin),
                ],
            ];
            let json = serde_json::json!({
                "admission": report,
                "bisected_bumping_s": bisected,
            });
            (report.admitted, json, rows)
        }
        other => {
            other.validate()?;
            let anchor = other.anchor();
            let rho = other.defining_value(&anchor)?;
            let rows = vec![
                vec!["validate".to_string(), "true".to_string(), other.tag()],
                vec![
                    "anchor_interior".to_string(),
                    (rho < 0.0).to_string(),
                    format!("rho(anchor)={rho}"),
                ],
            ];
            (rho < 0.0, serde_json::json!({ "tag": other.tag(), "rho_anchor": rho }), rows)
        }
    };
    manifest.wall_clock_ms = started.elapsed().as_millis();
    let hash = manifest.hash();
    let text = match out {
        OutFormat::Json => json_report(manifest, pass, rows_json),
        OutFormat::Csv => {
            let rows: Vec<Vec<String>> = rows_csv
                .into_iter()
                .map(|mut r| {
                    r.push(hash.clone());
                    r
                })
                .collect();
            csv_from_rows(&["check", "ok", "detail", "manifest_hash"], &rows)
        }
    };
    emit(output, &text)?;
    Ok(pass)
}

fn build_engine(
    spec: &DomainSpec,
    degree: u32,
    samples: u64,
    seed: u64,
    strata: u32,
    exact: bool,
) -> Result<KernelEngine, Error> {
    let plan = if exact {
        GramPlan::Exact
    } else {
        GramPlan::MonteCarlo {
            count: samples,
            seed,
            strata,
        }
    };
    KernelEngine::numeric(spec, degree, plan)
}

fn run_kernel(action: &KernelAction) -> Result<bool, Error> {
    match action {
        KernelAction::Build {
            domain,
            degree,
            samples,
            seed,
            strata,
            exact,
            output,
        } => {
            let spec = load_domain(domain)?;
            let engine = build_engine(&spec, *degree, *samples, *seed, *strata, *exact)?;
            let KernelEngine::Numeric(num) = &engine else {
                unreachable!()
            };
            fs::write(output, num.to_json())?;
            eprintln!(
                "engine: {} degree {} condition {:.3e}",
                spec.tag(),
                degree,
                num.condition_estimate
            );
            Ok(true)
        }
        KernelAction::Eval {
            engine,
            probes,
            out,
            output,
        } => {
            let text = fs::read_to_string(engine)?;
            let num = NumericEngine::from_json(&text)?;
            let probe_list = load_probes(probes)?;
            let mut manifest = RunManifest::new("kernel-eval");
            manifest.degree = Some(num.degree);
            let hash = manifest.hash();
            let mut rows = Vec::new();
            let mut json_rows = Vec::new();
            for (p, _) in &probe_list {
                let k = num.kernel_diagonal(p);
                let rec: Vec<(f64, f64)> = p.iter().map(|z| (z.re, z.im)).collect();
                json_rows.push(serde_json::json!({ "point": rec, "kernel": k }));
                rows.push(vec![point_str(&rec), format!("{k}"), num.provenance(), hash.clone()]);
            }
            let text = match out {
                OutFormat::Json => json_report(manifest, true, json_rows),
                OutFormat::Csv => {
                    csv_from_rows(&["point", "kernel_diagonal", "provenance", "manifest_hash"], &rows)
                }
            };
            emit(output.as_deref(), &text)?;
            Ok(true)
        }
        KernelAction::Compare {
            domain,
            kappa,
            degree,
            samples,
            seed,
            strata,
            probes,
            tol,
            out,
            output,
        } => {
            let mut spec = load_domain(domain)?;
            if let (Some(k), DomainSpec::Egg { kappa }) = (kappa, &mut spec) {
                *kappa = *k;
            }
            let closed = KernelEngine::closed_form(&spec)?;
            let numeric = build_engine(&spec, *degree, *samples, *seed, *strata, false)?;
            let probe_points = metrics::default_probes(&spec, *probes, seed ^ 0xabc);
            let mut manifest = RunManifest::new("kernel-compare");
            manifest.domain = Some(domain.display().to_string());
            manifest.seed = Some(*seed);
            manifest.samples = Some(*samples);
            manifest.degree = Some(*degree);
            manifest.tolerance = Some(*tol);
            let hash = manifest.hash();
            let mut max_rel = 0.0f64;
            let mut rows = Vec::new();
            let mut json_rows = Vec::new();
            for (p, _) in &probe_points {
                let kc = closed.kernel_diagonal(p)?;
                let kn = numeric.kernel_diagonal(p)?;
                let rel = (kc - kn).abs() / kc.abs().max(1e-300);
                max_rel = max_rel.max(rel);
                let rec: Vec<(f64, f64)> = p.iter().map(|z| (z.re, z.im)).collect();
                json_rows.push(serde_json::json!({
                    "point": rec, "closed_form": kc, "numeric": kn, "rel_error": rel,
                }));
                rows.push(vec![
                    point_str(&rec),
                    format!("{kc}"),
                    format!("{kn}"),
                    format!("{rel}"),
                    hash.clone(),
                ]);
            }
            let pass = max_rel <= *tol;
            eprintln!("max relative error: {max_rel:.6e} (tol {tol})");
            let text = match out {
                OutFormat::Json => json_report(manifest, pass, json_rows),
                OutFormat::Csv => csv_from_rows(
                    &["point", "closed_form", "numeric", "rel_error", "manifest_hash"],
                    &rows,
                ),
            };
            emit(output.as_deref(), &text)?;
            Ok(pass)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    domain: &Path,
    probes: Option<&Path>,
    count: usize,
    seed: u64,
    degree: u32,
    samples: u64,
    strata: u32,
    tol: f64,
    out: OutFormat,
    output: Option<&Path>,
    gate: bool,
) -> Result<bool, Error> {
    let spec = load_domain(domain)?;
    let engine = match KernelEngine::closed_form(&spec) {
        Ok(e) => e,
        Err(_) => build_engine(&spec, degree, samples, seed ^ 0xe2, strata, false)?,
    };
    let family = certified_family_for(&spec);
    let probe_list = match probes {
        Some(path) => load_probes(path)?,
        None => metrics::default_probes(&spec, count, seed),
    };
    let mut manifest = RunManifest::new(if gate { "hahn-lu" } else { "metric-sweep" });
    manifest.domain = Some(domain.display().to_string());
    manifest.seed = Some(seed);
    manifest.samples = Some(samples);
    manifest.degree = Some(degree);
    manifest.tolerance = Some(tol);
    let hash = manifest.hash();

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut pass = true;
    for (p, v) in &probe_list {
        let report = hahn_lu_check(&spec, &engine, &family, p, v, tol)?;
        pass &= report.hahn_lu_ok && report.ordering_ok;
        rows.push(vec![
            report.domain.clone(),
            point_str(&report.point),
            point_str(&report.direction),
            format!("{}", report.c_lower),
            format!("{}", report.k_upper),
            format!("{}", report.bergman_value),
            report.hahn_lu_ok.to_string(),
            report.ordering_ok.to_string(),
            format!(
                "c:{};k:{};b:{}",
                report.c_provenance, report.k_provenance, report.b_provenance
            ),
            hash.clone(),
        ]);
        reports.push(report);
    }
    let text = match out {
        OutFormat::Json => json_report(manifest, pass, reports),
        OutFormat::Csv => csv_from_rows(
            &[
                "domain",
                "p",
                "v",
                "c_lower",
                "k_upper",
                "b",
                "hahn_lu_ok",
                "ordering_ok",
                "provenance",
                "manifest_hash",
            ],
            &rows,
        ),
    };
    emit(output, &text)?;
    Ok(!gate || pass)
}

fn run_completeness(
    domain: &Path,
    base: Option<&str>,
    steps: u32,
    threshold: Option<f64>,
    out: OutFormat,
    output: Option<&Path>,
) -> Result<bool, Error> {
    let spec = load_domain(domain)?;
    let base_point = match base {
        Some(text) => parse_point(text)?,
        None => spec.anchor(),
    };
    let family = family_for(&spec);
    let ts: Vec<f64> = (1..=steps).map(|v| 2f64.powi(v as i32)).collect();
    let escape = match &spec {
        DomainSpec::WbGraph { .. } => {
            let mut pts = vec![base_point.clone()];
            pts.extend(homothety_escape(&spec, &base_point, &ts)?);
            pts
        }
        _ => {
            return Err(Error::InvalidDomain(
                "probe-completeness auto-escape requires a WB graph domain".into(),
            ))
        }
    };
    let report = completeness_probe(&spec, &family, &escape, threshold)?;
    let mut manifest = RunManifest::new("probe-completeness");
    manifest.domain = Some(domain.display().to_string());
    let hash = manifest.hash();
    let pass = report.strictly_increasing && report.exceeded_threshold.unwrap_or(true);
    let text = match out {
        OutFormat::Json => json_report(manifest, pass, &report),
        OutFormat::Csv => {
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.index.to_string(),
                        point_str(&r.point),
                        format!("{}", r.lower_bound),
                        r.best_member.clone(),
                        hash.clone(),
                    ]
                })
                .collect();
            csv_from_rows(
                &["index", "point", "distance_lower_bound", "best_member", "manifest_hash"],
                &rows,
            )
        }
    };
    emit(output, &text)?;
    Ok(pass)
}

fn run_verify_peak(
    domain: &Path,
    expr_path: &Path,
    point: &str,
    samples: usize,
    seed: u64,
    margin: f64,
    out: OutFormat,
    output: Option<&Path>,
) -> Result<bool, Error> {
    let spec = load_domain(domain)?;
    let expr_text = fs::read_to_string(expr_path)?;
    let expr = Expr::from_json(&expr_text)?;
    expr.validate(spec.dimension())?;
    let peak_point = parse_point(point)?;
    let candidate = PeakCandidate {
        map: Arc::new(expr),
        peak_point,
        spec,
    };
    let opts = PeakCheckOptions {
        samples_per_shell: samples,
        seed,
        margin,
        ..PeakCheckOptions::default()
    };
    let report = peaks::verify_peak(&candidate, &opts)?;
    let mut manifest = RunManifest::new("verify-peak");
    manifest.domain = Some(domain.display().to_string());
    manifest.seed = Some(seed);
    manifest.samples = Some(samples as u64);
    let hash = manifest.hash();
    let pass = report.pass;
    let text = match out {
        OutFormat::Json => json_report(manifest, pass, &report),
        OutFormat::Csv => {
            let mut rows = vec![vec![
                "interior".to_string(),
                report.interior_ok.to_string(),
                String::new(),
                hash.clone(),
            ]];
            for s in &report.shells {
                rows.push(vec![
                    format!("shell(r={})", s.radius),
                    s.ok.to_string(),
                    format!("sup|f|={} margin={}", s.sup_abs, s.margin),
                    hash.clone(),
                ]);
            }
            rows.push(vec![
                "approach".to_string(),
                report.approach_ok.to_string(),
                format!("final |f-1| = {:?}", report.approach.last()),
                hash.clone(),
            ]);
            csv_from_rows(&["check", "ok", "detail", "manifest_hash"], &rows)
        }
    };
    emit(output, &text)?;
    Ok(pass)
}

fn run_report(input: &Path, out: OutFormat, output: Option<&Path>) -> Result<bool, Error> {
    let text = fs::read_to_string(input)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let pass = value
        .get("pass")
        .and_then(serde_json::Value::as_bool)
        .unwrap_or(false);
    let rendered = match out {
        OutFormat::Json => {
            let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
            s.push('\n');
            s
        }
        OutFormat::Csv => {
            let hash = value
                .get("manifest_hash")
                .and_then(serde_json::Value::as_str)
                .unwrap_or("")
                .to_string();
            let rows = value
                .get("rows")
                .and_then(serde_json::Value::as_array)
                .cloned()
                .unwrap_or_default();
            let mut out_rows = Vec::new();
            for row in rows {
                out_rows.push(vec![
                    serde_json::to_string(&row).expect("row serializes"),
                    hash.clone(),
                ]);
            }
            csv_from_rows(&["row", "manifest_hash"], &out_rows)
        }
    };
    emit(output, &rendered)?;
    Ok(pass)
}

fn dispatch(cli: &Cli) -> Result<bool, Error> {
    match &cli.command {
        Command::CheckDomain {
            domain,
            samples,
            seed,
            out,
            output,
        } => run_check_domain(domain, *samples, *seed, *out, output.as_deref()),
        Command::Kernel { action } => run_kernel(action),
        Command::MetricSweep {
            domain,
            probes,
            count,
            seed,
            degree,
            samples,
            strata,
            tol,
            out,
            output,
        } => run_sweep(
            domain,
            probes.as_deref(),
            *count,
            *seed,
            *degree,
            *samples,
            *strata,
            *tol,
            *out,
            output.as_deref(),
            false,
        ),
        Command::HahnLu {
            domain,
            probes,
            count,
            seed,
            degree,
            samples,
            strata,
            tol,
            out,
            output,
        } => run_sweep(
            domain,
            probes.as_deref(),
            *count,
            *seed,
            *degree,
            *samples,
            *strata,
            *tol,
            *out,
            output.as_deref(),
            true,
        ),
        Command::ProbeCompleteness {
            domain,
            base,
            steps,
            threshold,
            out,
            output,
        } => run_completeness(
            domain,
            base.as_deref(),
            *steps,
            *threshold,
            *out,
            output.as_deref(),
        ),
        Command::VerifyPeak {
            domain,
            expr,
            point,
            samples,
            seed,
            margin,
            out,
            output,
        } => run_verify_peak(
            domain,
            expr,
            point,
            *samples,
            *seed,
            *margin,
            *out,
            output.as_deref(),
        ),
        Command::Report { input, out, output } => run_report(input, *out, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("METRICSLAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("FAIL: one or more verdicts did not pass");
            ExitCode::from(1)
        }
        Err(err) => {
            let code = exit_code_for(&err);
            if let Error::Json(je) = &err {
                eprintln!("error: json at line {}, column {}: {je}", je.line(), je.column());
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::from(code)
        }
    }
}
