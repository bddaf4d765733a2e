//! Command-line front end.
//!
//! Subcommands:
//! * `analyze`     — dichotomy certificates, critical data, cocycle probe
//! * `solvability` — solvability reports per variant
//! * `torus`       — sample the invariant torus on a phase grid
//! * `verify`      — dynamic invariance check of a sampled torus
//! * `ramp`        — truncation ramp for the countable catalog system
//!
//! Every run prints a manifest with all resolved options to stderr (and
//! embeds it in JSON outputs) so results are reproducible. Exit codes:
//! 0 success, 1 usage/runtime error, 2 solvability verdict failed.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};

use crate::critical::{critical_data, CriticalData};
use crate::dichotomy::{resolve_projectors, verify_dichotomy};
use crate::flow::{cocycle_check, FundamentalMatrixOracle, Span, Tolerances};
use crate::green::{GreenEvaluator, QuadratureScheme, Variant, DEFAULT_TOL_SOLV};
use crate::system::{catalog, load_config, CatalogEntry, PhaseMode};
use crate::torus::{l2_ramp, sample_torus, uniform_grid, verify_invariance, GlueSpec};

type AnyError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Parser)]
#[command(
    name = "dtorus",
    about = "Invariant tori of linear skew-product systems, critical dichotomy case",
    long_about = "Constructs invariant tori of linear inhomogeneous skew-product systems \
whose variational equation is exponentially dichotomous on each semi-axis separately, \
via the generalized Green operator and its solvability conditions.\n\n\
Expression grammar: + - * / ^ with ^ binding tighter than unary minus \
(so -2^2 = -4), functions sin cos tan tanh sinh cosh exp log sqrt abs, \
phase variables phi1..phim (phi aliases phi1). No implicit multiplication."
)]
struct Cli {
    /// Worker threads (fallback: env DTORUS_JOBS, then logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct SystemOpts {
    /// Path to a JSON config, or catalog:NAME[?K=V,...]
    /// (catalog:paper-2d, catalog:paper-l2?N=6).
    #[arg(long)]
    system: String,
    /// Override a component of f, 1-based: --set-f 1=EXPR (repeatable).
    #[arg(long = "set-f", value_name = "I=EXPR")]
    set_f: Vec<String>,
}

#[derive(Args, Clone)]
struct NumericOpts {
    /// Quadrature truncation horizon.
    #[arg(long = "T", default_value_t = 40.0)]
    horizon: f64,
    /// Integrator absolute/relative tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Relative rank tolerance for the pseudoinverse.
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
}

#[derive(Subcommand, Clone)]
enum Cmd {
    /// Dichotomy certificates, critical data and a cocycle probe.
    Analyze {
        #[command(flatten)]
        system: SystemOpts,
        #[command(flatten)]
        numeric: NumericOpts,
        /// Base point (comma-separated phases).
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        phi: String,
        /// Certificate window length.
        #[arg(long, default_value_t = 10.0)]
        window: f64,
        /// Certificate grid step.
        #[arg(long, default_value_t = 0.5)]
        grid_step: f64,
        /// Seed for the random cocycle triples.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the solvability conditions.
    Solvability {
        #[command(flatten)]
        system: SystemOpts,
        #[command(flatten)]
        numeric: NumericOpts,
        /// one, two, or both.
        #[arg(long, default_value = "both")]
        variant: String,
        /// Base points, one per line of output: lo:hi:count or a single value.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        phi: String,
        /// Solvability tolerance.
        #[arg(long, default_value_t = DEFAULT_TOL_SOLV)]
        tol_solv: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the invariant torus over a phase grid.
    Torus {
        #[command(flatten)]
        system: SystemOpts,
        #[command(flatten)]
        numeric: NumericOpts,
        /// Grid lo:hi:count (default depends on phase mode).
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// auto, one, two, or a per-component list (one,two,...).
        #[arg(long, default_value = "auto")]
        glue: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Dynamic invariance check: integrate from the sampled torus.
    Verify {
        #[command(flatten)]
        system: SystemOpts,
        #[command(flatten)]
        numeric: NumericOpts,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long, default_value = "auto")]
        glue: String,
        /// Integration time for the check.
        #[arg(long = "t-star", default_value_t = 2.0, allow_hyphen_values = true)]
        t_star: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncation ramp for catalog:paper-l2.
    Ramp {
        #[command(flatten)]
        numeric: NumericOpts,
        /// Truncation dimensions, ascending.
        #[arg(long = "Ns", default_value = "3,5,10")]
        ns: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Run the CLI; returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let jobs = cli.jobs.or_else(|| {
        std::env::var("DTORUS_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(j) = jobs {
        // ignore failure when a pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global();
    }
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<i32, AnyError> {
    match cmd {
        Cmd::Analyze {
            system,
            numeric,
            phi,
            window,
            grid_step,
            seed,
            out,
        } => analyze(system, numeric, phi, window, grid_step, seed, out),
        Cmd::Solvability {
            system,
            numeric,
            variant,
            phi,
            tol_solv,
            out,
        } => solvability(system, numeric, variant, phi, tol_solv, out),
        Cmd::Torus {
            system,
            numeric,
            grid,
            glue,
            out,
            format,
        } => torus_cmd(system, numeric, grid, glue, out, format),
        Cmd::Verify {
            system,
            numeric,
            grid,
            glue,
            t_star,
            out,
        } => verify_cmd(system, numeric, grid, glue, t_star, out),
        Cmd::Ramp {
            numeric,
            ns,
            phi,
            out,
        } => ramp_cmd(numeric, ns, phi, out),
    }
}

fn resolve_system(opts: &SystemOpts) -> Result<CatalogEntry, AnyError> {
    let mut entry = if let Some(rest) = opts.system.strip_prefix("catalog:") {
        let (name, params) = match rest.split_once('?') {
            Some((name, q)) => {
                let mut map = HashMap::new();
                for pair in q.split(',') {
                    let (k, v) = pair
                        .split_once('=')
                        .ok_or_else(|| format!("bad catalog parameter `{pair}` (expected K=V)"))?;
                    map.insert(k.to_string(), v.to_string());
                }
                (name, map)
            }
            None => (rest, HashMap::new()),
        };
        catalog(name, &params)?
    } else {
        load_config(&opts.system)?
    };
    for spec in &opts.set_f {
        let (idx, expr) = spec
            .split_once('=')
            .ok_or_else(|| format!("bad --set-f `{spec}` (expected I=EXPR)"))?;
        let i: usize = idx.parse().map_err(|_| format!("bad --set-f index `{idx}`"))?;
        if i == 0 || i > entry.system.n {
            return Err(format!("--set-f index {i} out of range 1..={}", entry.system.n).into());
        }
        entry.system.f[i - 1] = crate::expr::Expression::parse(expr)?;
        // a closed-form torus no longer matches an overridden f
        entry.known_torus = None;
    }
    Ok(entry)
}

fn parse_phi(s: &str) -> Result<DVector<f64>, AnyError> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    Ok(DVector::from_vec(vals.map_err(|e| format!("bad --phi: {e}"))?))
}

/// Grid syntax `lo:hi:count`.
fn parse_grid(s: &str) -> Result<Vec<DVector<f64>>, AnyError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("bad grid `{s}` (expected lo:hi:count)").into());
    }
    let lo: f64 = parts[0].parse().map_err(|e| format!("bad grid lo: {e}"))?;
    let hi: f64 = parts[1].parse().map_err(|e| format!("bad grid hi: {e}"))?;
    let count: usize = parts[2].parse().map_err(|e| format!("bad grid count: {e}"))?;
    if count == 0 {
        return Err("grid count must be >= 1".into());
    }
    Ok(uniform_grid(lo, hi, count))
}

fn default_grid(mode: PhaseMode) -> &'static str {
    match mode {
        PhaseMode::Line => "-3:3:61",
        PhaseMode::Periodic => "0:6.283185307179586:61",
    }
}

fn tolerances(numeric: &NumericOpts) -> Tolerances {
    Tolerances {
        abs: numeric.tol,
        rel: numeric.tol,
    }
}

fn quad_scheme(numeric: &NumericOpts) -> QuadratureScheme {
    QuadratureScheme {
        horizon: numeric.horizon,
        ..Default::default()
    }
}

fn emit(out: Option<&PathBuf>, content: &str) -> Result<(), AnyError> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => {
            let stdout = std::io::stdout();
            let mut h = stdout.lock();
            h.write_all(content.as_bytes())?;
            if !content.ends_with('\n') {
                h.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn emit_manifest(manifest: &serde_json::Value) {
    eprintln!("manifest: {manifest}");
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[derive(serde::Serialize)]
struct CriticalReport {
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    #[serde(rename = "D_plus")]
    d_plus: Vec<Vec<f64>>,
    #[serde(rename = "P_ND")]
    p_nd: Vec<Vec<f64>>,
    #[serde(rename = "P_NDstar")]
    p_ndstar: Vec<Vec<f64>>,
    rank: usize,
    singular_values: Vec<f64>,
    rtol: f64,
}

impl CriticalReport {
    fn from(cd: &CriticalData) -> Self {
        CriticalReport {
            d: matrix_rows(&cd.d),
            d_plus: matrix_rows(&cd.d_plus),
            p_nd: matrix_rows(&cd.p_nd),
            p_ndstar: matrix_rows(&cd.p_ndstar),
            rank: cd.rank,
            singular_values: cd.singular_values.iter().copied().collect(),
            rtol: cd.rtol,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    system: SystemOpts,
    numeric: NumericOpts,
    phi: String,
    window: f64,
    grid_step: f64,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<i32, AnyError> {
    let entry = resolve_system(&system)?;
    let phi = parse_phi(&phi)?;
    let tol = tolerances(&numeric);
    let span = window.max(10.0);
    let oracle = FundamentalMatrixOracle::new(
        &entry.system,
        &phi,
        Span::symmetric(span),
        tol,
        1.0,
    )?;
    let (cp, cm) = resolve_projectors(entry.known_projectors.as_ref(), &oracle, &phi, span)?;
    let cert_plus = verify_dichotomy(&cp, &oracle, window, grid_step)?;
    let cert_minus = verify_dichotomy(&cm, &oracle, window, grid_step)?;
    let cd = critical_data(cp.base(), cm.base(), numeric.rtol)?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let triples: Vec<(f64, f64, f64)> = (0..20)
        .map(|_| {
            (
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            )
        })
        .collect();
    let cocycle_defect = cocycle_check(&entry.system, &oracle, &triples, tol)?;

    let manifest = serde_json::json!({
        "subcommand": "analyze",
        "system": system.system,
        "set_f": system.set_f,
        "phi": phi.as_slice(),
        "window": window,
        "grid_step": grid_step,
        "T": numeric.horizon,
        "tol": numeric.tol,
        "rtol": numeric.rtol,
        "seed": seed,
    });
    emit_manifest(&manifest);

    #[derive(serde::Serialize)]
    struct AnalyzeOut {
        manifest: serde_json::Value,
        certificate_plus: crate::dichotomy::DichotomyCertificate,
        certificate_minus: crate::dichotomy::DichotomyCertificate,
        projectors_estimated: bool,
        critical: CriticalReport,
        cocycle_samples: usize,
        cocycle_max_defect: f64,
    }
    let report = AnalyzeOut {
        manifest,
        certificate_plus: cert_plus,
        certificate_minus: cert_minus,
        projectors_estimated: cp.estimated,
        critical: CriticalReport::from(&cd),
        cocycle_samples: triples.len(),
        cocycle_max_defect: cocycle_defect,
    };
    emit(out.as_ref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(0)
}

fn solvability(
    system: SystemOpts,
    numeric: NumericOpts,
    variant: String,
    phi: String,
    tol_solv: f64,
    out: Option<PathBuf>,
) -> Result<i32, AnyError> {
    let entry = resolve_system(&system)?;
    let variants: Vec<Variant> = match variant.as_str() {
        "both" => vec![Variant::One, Variant::Two],
        v => vec![v.parse::<Variant>()?],
    };
    let points: Vec<DVector<f64>> = if phi.contains(':') {
        parse_grid(&phi)?
    } else {
        vec![parse_phi(&phi)?]
    };
    let tol = tolerances(&numeric);
    let quad = quad_scheme(&numeric);

    let manifest = serde_json::json!({
        "subcommand": "solvability",
        "system": system.system,
        "set_f": system.set_f,
        "variant": variant,
        "phi": phi,
        "T": numeric.horizon,
        "tol": numeric.tol,
        "rtol": numeric.rtol,
        "tol_solv": tol_solv,
    });
    emit_manifest(&manifest);

    #[derive(serde::Serialize)]
    struct PointOut {
        phi: Vec<f64>,
        reports: Vec<crate::green::SolvabilityReport>,
    }
    let mut all = Vec::new();
    let mut all_solvable = true;
    for phi_pt in &points {
        let oracle = FundamentalMatrixOracle::new(
            &entry.system,
            phi_pt,
            Span::symmetric(quad.horizon),
            tol,
            0.0,
        )?;
        let (cp, cm) = resolve_projectors(
            entry.known_projectors.as_ref(),
            &oracle,
            phi_pt,
            quad.horizon.min(20.0),
        )?;
        let cd = critical_data(cp.base(), cm.base(), numeric.rtol)?;
        let ev = GreenEvaluator::new(
            &entry.system,
            cp.base().clone(),
            cm.base().clone(),
            &cd,
            &oracle,
            quad,
        )?;
        let reports: Vec<_> = variants
            .iter()
            .map(|v| ev.solvability(*v, tol_solv))
            .collect::<Result<_, _>>()?;
        all_solvable &= reports.iter().all(|r| r.solvable);
        all.push(PointOut {
            phi: phi_pt.iter().copied().collect(),
            reports,
        });
    }

    #[derive(serde::Serialize)]
    struct SolvOut {
        manifest: serde_json::Value,
        points: Vec<PointOut>,
        all_solvable: bool,
    }
    let report = SolvOut {
        manifest,
        points: all,
        all_solvable,
    };
    emit(out.as_ref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(if all_solvable { 0 } else { 2 })
}

fn sig(v: f64) -> String {
    format!("{v:.16e}")
}

fn torus_cmd(
    system: SystemOpts,
    numeric: NumericOpts,
    grid: Option<String>,
    glue: String,
    out: Option<PathBuf>,
    format: String,
) -> Result<i32, AnyError> {
    let entry = resolve_system(&system)?;
    let grid_spec = grid.unwrap_or_else(|| default_grid(entry.system.phase_mode).to_string());
    let grid_pts = parse_grid(&grid_spec)?;
    let glue_spec: GlueSpec = glue.parse()?;
    let quad = quad_scheme(&numeric);
    let tol = tolerances(&numeric);
    let projectors = entry
        .known_projectors
        .as_ref()
        .ok_or("torus sampling needs projectors (catalog or config); run analyze first")?;

    let manifest = serde_json::json!({
        "subcommand": "torus",
        "system": system.system,
        "set_f": system.set_f,
        "grid": grid_spec,
        "glue": glue,
        "T": numeric.horizon,
        "tol": numeric.tol,
        "rtol": numeric.rtol,
        "format": format,
    });
    emit_manifest(&manifest);

    let sample = sample_torus(&entry.system, projectors, &grid_pts, &glue_spec, quad, tol)?;

    match format.as_str() {
        "csv" => {
            let m = entry.system.m;
            let n = entry.system.n;
            let mut csv = String::new();
            let mut header: Vec<String> = (1..=m).map(|i| format!("phi{i}")).collect();
            header.extend((1..=n).map(|i| format!("u_{i}")));
            header.extend(["residual_norm".into(), "T".into(), "tail_bound".into()]);
            csv.push_str(&header.join(","));
            csv.push('\n');
            for p in &sample.points {
                let mut row: Vec<String> = p.phi.iter().map(|v| sig(*v)).collect();
                row.extend(p.u.iter().map(|v| sig(*v)));
                row.push(sig(p.residual_norm));
                row.push(sig(sample.quad.horizon));
                row.push(sig(p.tail_bound));
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            emit(out.as_ref(), &csv)?;
        }
        "json" => {
            #[derive(serde::Serialize)]
            struct TorusOut {
                manifest: serde_json::Value,
                assignment: Vec<Variant>,
                points: Vec<crate::torus::TorusPoint>,
                elapsed_ms: u128,
            }
            let report = TorusOut {
                manifest,
                assignment: sample.assignment.clone(),
                points: sample.points.clone(),
                elapsed_ms: sample.elapsed.as_millis(),
            };
            emit(out.as_ref(), &serde_json::to_string_pretty(&report)?)?;
        }
        other => return Err(format!("unknown format `{other}` (expected csv|json)").into()),
    }
    Ok(if sample.points.iter().all(|p| p.solvable) {
        0
    } else {
        2
    })
}

fn verify_cmd(
    system: SystemOpts,
    numeric: NumericOpts,
    grid: Option<String>,
    glue: String,
    t_star: f64,
    out: Option<PathBuf>,
) -> Result<i32, AnyError> {
    let entry = resolve_system(&system)?;
    let grid_spec = grid.unwrap_or_else(|| default_grid(entry.system.phase_mode).to_string());
    let grid_pts = parse_grid(&grid_spec)?;
    let glue_spec: GlueSpec = glue.parse()?;
    let quad = quad_scheme(&numeric);
    let tol = tolerances(&numeric);
    let projectors = entry
        .known_projectors
        .as_ref()
        .ok_or("verification needs projectors (catalog or config)")?;

    let manifest = serde_json::json!({
        "subcommand": "verify",
        "system": system.system,
        "set_f": system.set_f,
        "grid": grid_spec,
        "glue": glue,
        "t_star": t_star,
        "T": numeric.horizon,
        "tol": numeric.tol,
        "rtol": numeric.rtol,
    });
    emit_manifest(&manifest);

    let sample = sample_torus(&entry.system, projectors, &grid_pts, &glue_spec, quad, tol)?;
    let defect = verify_invariance(&entry.system, projectors, &sample, t_star, tol)?;

    #[derive(serde::Serialize)]
    struct VerifyOut {
        manifest: serde_json::Value,
        t_star: f64,
        grid_points: usize,
        max_defect: f64,
    }
    let report = VerifyOut {
        manifest,
        t_star,
        grid_points: sample.points.len(),
        max_defect: defect,
    };
    emit(out.as_ref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(0)
}

fn ramp_cmd(
    numeric: NumericOpts,
    ns: String,
    phi: f64,
    out: Option<PathBuf>,
) -> Result<i32, AnyError> {
    let ns_list: Vec<usize> = ns
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad --Ns: {e}"))?;
    let quad = quad_scheme(&numeric);
    let tol = tolerances(&numeric);

    let manifest = serde_json::json!({
        "subcommand": "ramp",
        "Ns": ns_list,
        "phi": phi,
        "T": numeric.horizon,
        "tol": numeric.tol,
        "rtol": numeric.rtol,
    });
    emit_manifest(&manifest);

    let rows = l2_ramp(&ns_list, phi, quad, tol)?;

    #[derive(serde::Serialize)]
    struct RampOut {
        manifest: serde_json::Value,
        rows: Vec<crate::torus::RampRow>,
    }
    let report = RampOut {
        manifest,
        rows,
    };
    emit(out.as_ref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(0)
}
