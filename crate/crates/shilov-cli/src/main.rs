//! Command-line front end: model selection, JSON point and domain I/O,
//! verification suites, and CSV sweep data for plots.
//!
//! Exit codes: 0 success, 1 failed verification, 2 usage or parse error,
//! 3 precondition violation (points outside domains and similar). Output
//! is byte-identical for identical configuration and seed.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use shilov::causal::{self, Diamond, Domain};
use shilov::metrics::{self, Budget, DualSet};
use shilov::model::{Chart, ModelHandle, ModelKind, Point};
use shilov::photons::{self, Photon, ZIntersection};
use shilov::rigidity::{self, ConeOrientation};
use shilov::{sample, tol, CausalRelation, Error};

const SEED_ENV: &str = "SHILOV_SEED";

#[derive(Parser)]
#[command(
    name = "shilov",
    version,
    about = "Causal geometry of Shilov boundaries: pairings, metrics, verification suites"
)]
struct Cli {
    /// Model selector: `lag:R` (symmetric R x R charts) or `ein:N`
    /// (Minkowski R^{N-1,1} charts).
    #[arg(long, global = true, value_name = "KIND:SIZE")]
    model: Option<String>,

    /// Representation power N >= 1 used by the metric functionals.
    #[arg(long = "repN", global = true, value_name = "N")]
    rep_n: Option<usize>,

    /// Seed for all randomized routines (env SHILOV_SEED supplies the
    /// default when the flag and config are absent).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON config file; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Tolerance override `KEY=VAL`, repeatable; all values must be
    /// positive. Keys: affine, singleton, split, projection, levi,
    /// mobius, extremal.
    #[arg(long = "tol", global = true, value_name = "KEY=VAL")]
    tol: Vec<String>,

    /// Structured JSON output (the default for everything except sweep).
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,

    /// CSV output (only sweep emits CSV).
    #[arg(long, global = true)]
    csv: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Transversality, pairing value, and causal relation of two points.
    ///
    /// Points are chart JSON (nested rows for lag, a flat vector for ein)
    /// or the string "infinity".
    Pair { x: String, y: String },

    /// One-chain kernel, Caratheodory value, and Kobayashi bracket of a
    /// pair inside a domain.
    Dist {
        domain: String,
        x: String,
        y: String,
    },

    /// The photon through a base chart in a rank-one direction.
    Photon {
        base: String,
        dir: String,
        /// Reference point; reports the intersection of the photon with
        /// its incidence set.
        #[arg(long)]
        xi: Option<String>,
        /// Domain; reports the photon's chord through the base as a
        /// parameter interval.
        #[arg(long)]
        domain: Option<String>,
    },

    /// Run a named verification suite; exit 0 exactly when it passes.
    ///
    /// Suites: order, photon-affine, singleton, split,
    /// projection-identity, components, extremal, recover, levi, mobius,
    /// visual.
    Verify {
        suite: String,
        /// Trial count override (each suite has its own default).
        #[arg(long)]
        trials: Option<usize>,
    },

    /// Connected components of the space of points transverse to a pair.
    Components {
        /// First point (default: the zero chart).
        #[arg(long)]
        x: Option<String>,
        /// Second point (default: the point at infinity).
        #[arg(long)]
        y: Option<String>,
    },

    /// Strongly extremal points of a domain by cone-ray descent.
    Extremal {
        domain: String,
        #[arg(long, default_value = "plus")]
        orientation: String,
    },

    /// Diamond-recovery pipeline: endpoints, verdict, and certificates.
    Recover { domain: String },

    /// CSV families for plots: photon-k or bracket-budget.
    Sweep {
        kind: String,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Largest restart budget for bracket-budget.
        #[arg(long, value_name = "R")]
        max_restarts: Option<usize>,
    },
}

/// Exit discipline: usage and parse problems are 2, violated
/// preconditions on well-formed input are 3, failed verification is 1.
enum Failure {
    Usage(String),
    Assertion(String),
    Precondition(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Assertion(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Precondition(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Assertion(m) | Failure::Precondition(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Library errors on well-formed input are precondition violations;
/// budget and bracket blowups are failed assertions.
fn lib_err(e: Error) -> Failure {
    match e {
        Error::BudgetExceeded { .. } | Error::BracketViolation { .. } => {
            Failure::Assertion(e.to_string())
        }
        _ => Failure::Precondition(e.to_string()),
    }
}

#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<String>,
    #[serde(rename = "repN")]
    rep_n: Option<usize>,
    seed: Option<u64>,
    tolerances: Option<BTreeMap<String, f64>>,
    budget: Option<FileBudget>,
}

#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBudget {
    restarts: Option<usize>,
    iters: Option<usize>,
    samples: Option<usize>,
}

struct Config {
    model: ModelHandle,
    model_name: String,
    rep_n: usize,
    seed: u64,
    tolerances: BTreeMap<String, f64>,
    restarts: usize,
    iters: usize,
    samples: usize,
}

impl Config {
    /// Defaults, then the seed env var, then the config file, then flags.
    fn resolve(cli: &Cli) -> Result<Config, Failure> {
        let mut model_name = "lag:2".to_string();
        let mut rep_n = 1usize;
        let mut seed = 0u64;
        let mut tolerances = BTreeMap::new();
        let (mut restarts, mut iters, mut samples) = (3usize, 120usize, 120usize);

        if let Ok(raw) = std::env::var(SEED_ENV) {
            seed = raw.trim().parse().map_err(|_| {
                usage(format!("{SEED_ENV} must be an unsigned integer, got {raw:?}"))
            })?;
        }
        if let Some(path) = &cli.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            let file: FileConfig = serde_json::from_str(&text)
                .map_err(|e| usage(format!("bad config JSON: {e}")))?;
            if let Some(m) = file.model {
                model_name = m;
            }
            if let Some(n) = file.rep_n {
                rep_n = n;
            }
            if let Some(s) = file.seed {
                seed = s;
            }
            if let Some(t) = file.tolerances {
                tolerances.extend(t);
            }
            if let Some(b) = file.budget {
                if let Some(r) = b.restarts {
                    restarts = r;
                }
                if let Some(i) = b.iters {
                    iters = i;
                }
                if let Some(s) = b.samples {
                    samples = s;
                }
            }
        }
        if let Some(m) = &cli.model {
            model_name = m.clone();
        }
        if let Some(n) = cli.rep_n {
            rep_n = n;
        }
        if let Some(s) = cli.seed {
            seed = s;
        }
        for kv in &cli.tol {
            let (key, val) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("--tol needs KEY=VAL, got {kv:?}")))?;
            let parsed: f64 = val
                .parse()
                .map_err(|_| usage(format!("--tol {key}: {val:?} is not a number")))?;
            tolerances.insert(key.to_string(), parsed);
        }
        for (key, val) in &tolerances {
            if !(*val > 0.0 && val.is_finite()) {
                return Err(usage(format!("tolerance {key} must be positive, got {val}")));
            }
        }
        if rep_n == 0 {
            return Err(usage("representation power must be >= 1"));
        }
        if restarts == 0 || iters == 0 || samples == 0 {
            return Err(usage("budget fields must be >= 1"));
        }
        let model = parse_model(&model_name)?;
        Ok(Config {
            model,
            model_name,
            rep_n,
            seed,
            tolerances,
            restarts,
            iters,
            samples,
        })
    }

    fn tol(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }

    fn budget(&self) -> Budget {
        Budget {
            restarts: self.restarts,
            iters: self.iters,
        }
    }
}

fn parse_model(spec: &str) -> Result<ModelHandle, Failure> {
    let (kind, size) = spec
        .split_once(':')
        .ok_or_else(|| usage(format!("model must be lag:R or ein:N, got {spec:?}")))?;
    let size: usize = size
        .parse()
        .map_err(|_| usage(format!("model size {size:?} is not an integer")))?;
    let handle = match kind {
        "lag" => ModelHandle::lag(size),
        "ein" => ModelHandle::ein(size),
        other => {
            return Err(usage(format!(
                "unknown model kind {other:?} (expected lag or ein)"
            )))
        }
    };
    handle.map_err(|e| usage(e.to_string()))
}

fn parse_json(s: &str, what: &str) -> Result<Value, Failure> {
    serde_json::from_str(s).map_err(|e| usage(format!("bad {what} JSON: {e}")))
}

fn parse_chart(model: &ModelHandle, s: &str, what: &str) -> Result<Chart, Failure> {
    let v = parse_json(s, what)?;
    let chart: Chart =
        serde_json::from_value(v).map_err(|e| usage(format!("bad {what}: {e}")))?;
    model
        .validate_chart(&chart)
        .map_err(|e| usage(format!("bad {what}: {e}")))?;
    Ok(chart)
}

/// A point argument: a chart, or the string "infinity".
fn parse_point(model: &ModelHandle, s: &str, what: &str) -> Result<Point, Failure> {
    let v = parse_json(s, what)?;
    if v.as_str() == Some("infinity") {
        return Ok(model.infinity_point());
    }
    let chart: Chart =
        serde_json::from_value(v).map_err(|e| usage(format!("bad {what}: {e}")))?;
    model
        .chart_to_point(&chart)
        .map_err(|e| usage(format!("bad {what}: {e}")))
}

fn parse_domain(model: &ModelHandle, s: &str) -> Result<Domain, Failure> {
    let v = parse_json(s, "domain")?;
    Domain::from_json_value(model, &v).map_err(|e| usage(format!("bad domain: {e}")))
}

/// The unit chart: the identity matrix or the unit future timelike vector.
fn standard_unit(model: &ModelHandle) -> Chart {
    match model.kind() {
        ModelKind::Lag { r } => Chart::Sym(DMatrix::identity(r, r)),
        ModelKind::Ein { n } => {
            let mut v = DVector::zeros(n);
            v[n - 1] = 1.0;
            Chart::Mink(v)
        }
    }
}

/// The standard diamond around the zero chart.
fn standard_diamond(model: &ModelHandle) -> Result<Diamond, Failure> {
    let unit = standard_unit(model);
    Diamond::new(unit.scale(-1.0), unit).map_err(lib_err)
}

fn relation_name(rel: CausalRelation) -> &'static str {
    match rel {
        CausalRelation::StrictFuture => "StrictFuture",
        CausalRelation::FutureCone => "FutureCone",
        CausalRelation::StrictPast => "StrictPast",
        CausalRelation::PastCone => "PastCone",
        CausalRelation::Spacelike => "Spacelike",
        CausalRelation::Equal => "Equal",
    }
}

fn cmd_pair(cfg: &Config, x: &str, y: &str) -> Result<Value, Failure> {
    let px = parse_point(&cfg.model, x, "first point")?;
    let py = parse_point(&cfg.model, y, "second point")?;
    let pairing = cfg.model.pairing(&px, &py).map_err(lib_err)?;
    let transverse = pairing.abs() > tol::TRANSVERSE;
    // The causal order is a chart notion; a point at infinity has no row.
    let relation = match (cfg.model.point_to_chart(&px), cfg.model.point_to_chart(&py)) {
        (Ok(cx), Ok(cy)) => causal::causal_relation(&cx, &cy)
            .map(|r| json!(relation_name(r)))
            .unwrap_or(Value::Null),
        _ => Value::Null,
    };
    Ok(json!({
        "pairing": pairing,
        "relation": relation,
        "transverse": transverse,
    }))
}

fn cmd_dist(cfg: &Config, domain: &str, x: &str, y: &str) -> Result<Value, Failure> {
    let omega = parse_domain(&cfg.model, domain)?;
    let x = parse_chart(&cfg.model, x, "first point")?;
    let y = parse_chart(&cfg.model, y, "second point")?;
    if !omega.contains(&x) || !omega.contains(&y) {
        return Err(Failure::Precondition("point lies outside the domain".into()));
    }
    let k = if x.approx_eq(&y, 1e-14) {
        json!(0.0)
    } else if photons::are_conjugate(&omega, &x, &y) {
        json!(metrics::k_one_chain(&omega, &x, &y).map_err(lib_err)?)
    } else {
        Value::Null
    };
    let dual = DualSet::for_domain(&cfg.model, &omega, cfg.samples, cfg.seed).map_err(lib_err)?;
    let caratheodory =
        metrics::caratheodory(&omega, &dual, &x, &y, cfg.rep_n).map_err(lib_err)?;
    let bracket = metrics::kobayashi(
        &omega,
        &dual,
        &x,
        &y,
        cfg.rep_n,
        &cfg.budget(),
        cfg.seed,
        None,
    )
    .map_err(lib_err)?;
    Ok(json!({
        "caratheodory": caratheodory,
        "k": k,
        "kobayashi": bracket.to_json_value(),
    }))
}

fn cmd_photon(
    cfg: &Config,
    base: &str,
    dir: &str,
    xi: &Option<String>,
    domain: &Option<String>,
) -> Result<Value, Failure> {
    let base = parse_chart(&cfg.model, base, "base")?;
    let dir = parse_chart(&cfg.model, dir, "direction")?;
    let photon = Photon::new(base, dir).map_err(lib_err)?;
    let mut out = serde_json::Map::new();
    out.insert("photon".into(), photon.to_json_value());
    if let Some(xi) = xi {
        let xi = parse_point(&cfg.model, xi, "xi")?;
        let hit = match photons::intersect_z(&photon, &xi).map_err(lib_err)? {
            ZIntersection::OnPhoton => json!({"kind": "on-photon"}),
            ZIntersection::At(s) if s.is_infinity() => json!({"kind": "at", "t": "infinity"}),
            ZIntersection::At(s) => json!({"kind": "at", "t": s.value()}),
        };
        out.insert("intersection".into(), hit);
    }
    if let Some(domain) = domain {
        let omega = parse_domain(&cfg.model, domain)?;
        if !omega.contains(photon.base()) {
            return Err(Failure::Precondition(
                "photon base lies outside the domain".into(),
            ));
        }
        let backward = photon.dir().scale(-1.0);
        let param = |boundary: Option<Chart>| -> Value {
            boundary
                .and_then(|c| photon.param_of(&c).ok())
                .map(|t| json!(t))
                .unwrap_or(Value::Null)
        };
        let exit = param(omega.ray_boundary(photon.base(), photon.dir(), 1e3));
        let enter = param(omega.ray_boundary(photon.base(), &backward, 1e3));
        out.insert("chord".into(), json!({"enter": enter, "exit": exit}));
    }
    Ok(Value::Object(out))
}

fn suite_report(
    suite: &str,
    trials: usize,
    failures: usize,
    max_residual: f64,
    seed: u64,
    pass: bool,
    extra: Value,
) -> Value {
    let mut v = json!({
        "suite": suite,
        "trials": trials,
        "failures": failures,
        "max_residual": max_residual,
        "seed": seed,
        "pass": pass,
    });
    if let (Some(obj), Some(add)) = (v.as_object_mut(), extra.as_object()) {
        for (k, val) in add {
            obj.insert(k.clone(), val.clone());
        }
    }
    v
}

fn expected_components(model: &ModelHandle) -> usize {
    match model.kind() {
        ModelKind::Lag { r } => r + 1,
        ModelKind::Ein { .. } => 3,
    }
}

fn rel_err(a: &Chart, b: &Chart) -> f64 {
    match a.sub(b) {
        Ok(d) => causal::chart_norm(&d) / (1.0 + causal::chart_norm(b)),
        Err(_) => f64::INFINITY,
    }
}

/// For a reference point off the photon the incidence set meets the line
/// exactly once. The curvature residual of the affine fit certifies there
/// is no second finite root; the true pairing is additionally scanned for
/// stray zeros away from the located one.
fn singleton_suite(cfg: &Config, trials: usize) -> Result<(Value, bool), Failure> {
    let mut rng = sample::rng(cfg.seed);
    let tol_s = cfg.tol("singleton", 1e-9);
    let mut failures = 0usize;
    let mut max_residual = 0.0f64;
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < trials && attempts < 80 * trials {
        attempts += 1;
        let base = sample::random_chart(&cfg.model, 0.7, &mut rng);
        let dir = sample::random_photon_direction(&cfg.model, &mut rng);
        let Ok(photon) = Photon::new(base, dir) else {
            continue;
        };
        let xi = sample::random_point(&cfg.model, 1.1, &mut rng);
        if photon.passes_through(&xi) {
            continue;
        }
        let Ok((c0, c1, curvature)) = photons::affine_fit(&photon, &xi) else {
            continue;
        };
        done += 1;
        let mut failed = false;
        let scale = 1.0 + c0.abs().max(c1.abs());
        let root = match photons::intersect_z(&photon, &xi) {
            Ok(ZIntersection::At(s)) => Some(s),
            _ => {
                failed = true;
                None
            }
        };
        let mut residual = curvature;
        if let Some(root) = &root {
            if !root.is_infinity() {
                if let Ok(v) = photons::pairing_at(&photon, &xi, root.value()) {
                    residual = residual.max(v.abs() / scale);
                }
            }
            for k in 0..41 {
                let t = -2.0 + 0.1 * k as f64;
                if !root.is_infinity()
                    && (t - root.value()).abs() <= 0.1 * (1.0 + root.value().abs())
                {
                    continue;
                }
                if let Ok(v) = photons::pairing_at(&photon, &xi, t) {
                    if v.abs() <= 1e-12 * scale {
                        failed = true;
                        break;
                    }
                }
            }
        }
        failed |= residual > tol_s;
        max_residual = max_residual.max(residual);
        failures += usize::from(failed);
    }
    let pass = failures == 0 && done == trials;
    Ok((
        suite_report("singleton", done, failures, max_residual, cfg.seed, pass, json!({})),
        pass,
    ))
}

fn components_suite(cfg: &Config, trials: Option<usize>) -> Result<(Value, bool), Failure> {
    let samples = trials.unwrap_or(1200);
    let p = cfg
        .model
        .chart_to_point(&cfg.model.chart_zero())
        .map_err(lib_err)?;
    let q = cfg.model.infinity_point();
    let count =
        rigidity::count_components(&cfg.model, &p, &q, samples, cfg.seed).map_err(lib_err)?;
    let expected = expected_components(&cfg.model);
    let pass = count == expected;
    Ok((
        suite_report(
            "components",
            samples,
            usize::from(!pass),
            0.0,
            cfg.seed,
            pass,
            json!({"count": count, "expected": expected}),
        ),
        pass,
    ))
}

/// Random diamonds: descent must land on the future endpoint for the plus
/// orientation and the past endpoint for the minus one.
fn extremal_suite(cfg: &Config, trials: usize) -> Result<(Value, bool), Failure> {
    let mut rng = sample::rng(cfg.seed);
    let tol_e = cfg.tol("extremal", 1e-5);
    let mut failures = 0usize;
    let mut max_err = 0.0f64;
    for k in 0..trials {
        let (p, q) = sample::random_causal_pair(&cfg.model, 0.8, &mut rng);
        let omega = Domain::diamond(p.clone(), q.clone()).map_err(lib_err)?;
        let seed_k = cfg.seed.wrapping_add(101 * k as u64 + 1);
        let mut failed = false;
        for (orientation, target) in [(ConeOrientation::Plus, &q), (ConeOrientation::Minus, &p)] {
            match rigidity::strongly_extremal(&omega, orientation, seed_k) {
                Ok(rep) => {
                    let err = rel_err(&rep.candidates[0], target);
                    max_err = max_err.max(err);
                    failed |= err > tol_e || rep.candidates.len() != 1;
                }
                Err(_) => failed = true,
            }
        }
        failures += usize::from(failed);
    }
    let pass = failures == 0;
    Ok((
        suite_report("extremal", trials, failures, max_err, cfg.seed, pass, json!({})),
        pass,
    ))
}

/// Random affine images of diamonds must come back with verdict true and
/// accurate endpoints; the round ball is the negative control.
fn recover_suite(cfg: &Config, trials: usize) -> Result<(Value, bool), Failure> {
    let mut rng = sample::rng(cfg.seed);
    let tol_e = cfg.tol("extremal", 1e-5);
    let mut failures = 0usize;
    let mut max_err = 0.0f64;
    for k in 0..trials {
        let (p, q) = sample::random_causal_pair(&cfg.model, 0.7, &mut rng);
        let g = sample::random_affine(&cfg.model, &mut rng);
        let d = Diamond::new(p.clone(), q.clone()).map_err(lib_err)?;
        let seed_k = cfg.seed.wrapping_add(977 * k as u64 + 3);
        let omega = Domain::diamond_image(d, g.clone(), seed_k).map_err(lib_err)?;
        let failed = match (
            rigidity::recover_diamond(&omega, seed_k),
            g.act_chart(&p),
            g.act_chart(&q),
        ) {
            (Ok(rep), Ok(ip), Ok(iq)) => {
                let err = rel_err(&rep.p, &ip).max(rel_err(&rep.q, &iq));
                max_err = max_err.max(err);
                !rep.verdict || err > tol_e
            }
            _ => true,
        };
        failures += usize::from(failed);
    }
    let ball = Domain::ball(cfg.model.chart_zero(), 0.8).map_err(lib_err)?;
    let ball_verdict = match rigidity::recover_diamond(&ball, cfg.seed.wrapping_add(17)) {
        Ok(rep) => rep.verdict,
        Err(_) => false,
    };
    failures += usize::from(ball_verdict);
    let pass = failures == 0;
    Ok((
        suite_report(
            "recover",
            trials + 1,
            failures,
            max_err,
            cfg.seed,
            pass,
            json!({"ball_verdict": ball_verdict}),
        ),
        pass,
    ))
}

/// The probe must contract at an endpoint of the standard diamond and must
/// not contract at a face point.
fn visual_suite(cfg: &Config, trials: usize) -> Result<(Value, bool), Failure> {
    let d = standard_diamond(&cfg.model)?;
    let endpoint = rigidity::visual_probe(&d, d.q(), 1.0, trials, cfg.seed).map_err(lib_err)?;
    let omega = Domain::Diamond(d.clone());
    let face = omega
        .ray_boundary(
            &d.midpoint(),
            &photons::standard_direction(&cfg.model),
            1e3,
        )
        .ok_or_else(|| Failure::Assertion("no face exit found".into()))?;
    let face_rep =
        rigidity::visual_probe(&d, &face, 1.0, trials, cfg.seed.wrapping_add(1)).map_err(lib_err)?;
    let failures = usize::from(!endpoint.converged) + usize::from(face_rep.converged);
    let pass = failures == 0;
    let ratio = if endpoint.initial_gap > 0.0 {
        endpoint.late_gap / endpoint.initial_gap
    } else {
        0.0
    };
    let extra = json!({
        "endpoint": endpoint.to_json_value(),
        "face": face_rep.to_json_value(),
    });
    Ok((
        suite_report("visual", 2 * trials, failures, ratio, cfg.seed, pass, extra),
        pass,
    ))
}

fn cmd_verify(cfg: &Config, suite: &str, trials: Option<usize>) -> Result<(Value, bool), Failure> {
    match suite {
        "order" => {
            let t = trials.unwrap_or(cfg.samples);
            let rep = causal::order_axioms_check(&cfg.model, t, cfg.seed);
            let failures = rep.transitivity_failures
                + rep.antisymmetry_failures
                + rep.mirror_failures;
            let pass = rep.pass();
            let extra = json!({
                "transitivity_failures": rep.transitivity_failures,
                "antisymmetry_failures": rep.antisymmetry_failures,
                "mirror_failures": rep.mirror_failures,
            });
            Ok((
                suite_report("order", rep.trials, failures, 0.0, cfg.seed, pass, extra),
                pass,
            ))
        }
        "photon-affine" => {
            let t = trials.unwrap_or(1000);
            let rep = photons::photon_affine_suite(&cfg.model, t, cfg.seed).map_err(lib_err)?;
            let pass = rep.pass() && rep.max_residual <= cfg.tol("affine", 1e-9);
            Ok((
                suite_report(
                    "photon-affine",
                    rep.trials,
                    rep.failures,
                    rep.max_residual,
                    cfg.seed,
                    pass,
                    json!({}),
                ),
                pass,
            ))
        }
        "singleton" => singleton_suite(cfg, trials.unwrap_or(1000)),
        "split" => {
            let t = trials.unwrap_or(1000);
            let rep = photons::splitness_suite(
                &cfg.model,
                t,
                &[1, 2],
                cfg.tol("split", 1e-7),
                cfg.seed,
            )
            .map_err(lib_err)?;
            let pass = rep.pass();
            Ok((
                suite_report(
                    "split",
                    rep.trials,
                    rep.failures,
                    rep.max_residual,
                    cfg.seed,
                    pass,
                    json!({}),
                ),
                pass,
            ))
        }
        "projection-identity" => {
            let t = trials.unwrap_or(1000);
            let rep = metrics::projection_identity_suite(&cfg.model, t, &[1, 2], cfg.seed)
                .map_err(lib_err)?;
            let pass = rep.pass() && rep.max_residual <= cfg.tol("projection", 1e-7);
            Ok((
                suite_report(
                    "projection-identity",
                    rep.trials,
                    rep.failures,
                    rep.max_residual,
                    cfg.seed,
                    pass,
                    json!({}),
                ),
                pass,
            ))
        }
        "components" => components_suite(cfg, trials),
        "extremal" => extremal_suite(cfg, trials.unwrap_or(2)),
        "recover" => recover_suite(cfg, trials.unwrap_or(1)),
        "levi" => {
            let t = trials.unwrap_or(60);
            let rep = rigidity::levi_transitivity_check(&cfg.model, t, cfg.seed).map_err(lib_err)?;
            let pass = rep.pass() && rep.max_residual <= cfg.tol("levi", 1e-8);
            Ok((
                suite_report(
                    "levi",
                    rep.trials,
                    rep.failures,
                    rep.max_residual,
                    cfg.seed,
                    pass,
                    json!({}),
                ),
                pass,
            ))
        }
        "mobius" => {
            let t = trials.unwrap_or(100);
            let rep = photons::mobius_uplus_check(&cfg.model, t, cfg.seed).map_err(lib_err)?;
            let pass = rep.max_residual <= cfg.tol("mobius", 1e-8);
            Ok((
                suite_report(
                    "mobius",
                    rep.trials,
                    usize::from(!pass),
                    rep.max_residual,
                    cfg.seed,
                    pass,
                    json!({"lambda": rep.last_lambda}),
                ),
                pass,
            ))
        }
        "visual" => visual_suite(cfg, trials.unwrap_or(6)),
        other => Err(usage(format!("unknown suite {other:?}"))),
    }
}

/// A deterministic strictly-causal (hence non-conjugate for rank > 1)
/// pair inside the standard diamond.
fn sweep_pair(model: &ModelHandle) -> (Chart, Chart) {
    let unit = standard_unit(model);
    let x = unit.scale(-0.25);
    let y = match unit.scale(0.3) {
        Chart::Sym(mut m) => {
            // a small shear keeps the pair off every common photon
            let r = m.nrows();
            m[(0, r - 1)] += 0.05;
            m[(r - 1, 0)] = m[(0, r - 1)];
            Chart::Sym(m)
        }
        Chart::Mink(mut v) => {
            v[0] += 0.07;
            Chart::Mink(v)
        }
    };
    (x, y)
}

fn cmd_sweep(
    cfg: &Config,
    kind: &str,
    from: Option<f64>,
    to: Option<f64>,
    step: Option<f64>,
    max_restarts: Option<usize>,
) -> Result<String, Failure> {
    match kind {
        "photon-k" => {
            let from = from.unwrap_or(0.0);
            let to = to.unwrap_or(0.45);
            let step = step.unwrap_or(0.05);
            if !(step > 0.0 && step.is_finite()) {
                return Err(usage("--step must be positive"));
            }
            let d = standard_diamond(&cfg.model)?;
            let omega = Domain::Diamond(d);
            let photon = Photon::standard(&cfg.model);
            let base = cfg.model.chart_zero();
            let mut csv = String::from("t,k\n");
            let mut i = 0usize;
            loop {
                let t = from + step * i as f64;
                if t > to + 1e-12 {
                    break;
                }
                let y = photon.chart_point(t);
                let k = if t.abs() < 1e-15 {
                    0.0
                } else {
                    metrics::k_one_chain(&omega, &base, &y).map_err(lib_err)?
                };
                csv.push_str(&format!("{t},{k}\n"));
                i += 1;
            }
            Ok(csv)
        }
        "bracket-budget" => {
            let rmax = max_restarts.unwrap_or(cfg.restarts.max(4));
            let d = standard_diamond(&cfg.model)?;
            let omega = Domain::Diamond(d);
            let (x, y) = sweep_pair(&cfg.model);
            let dual =
                DualSet::for_domain(&cfg.model, &omega, cfg.samples, cfg.seed).map_err(lib_err)?;
            let mut csv = String::from("restarts,lower,upper,gap\n");
            for r in 1..=rmax {
                let budget = Budget {
                    restarts: r,
                    iters: cfg.iters,
                };
                let b = metrics::kobayashi(
                    &omega, &dual, &x, &y, cfg.rep_n, &budget, cfg.seed, None,
                )
                .map_err(lib_err)?;
                let gap = b.upper - b.lower;
                csv.push_str(&format!("{r},{},{},{gap}\n", b.lower, b.upper));
            }
            Ok(csv)
        }
        other => Err(usage(format!(
            "unknown sweep kind {other:?} (expected photon-k or bracket-budget)"
        ))),
    }
}

struct Outcome {
    stdout: String,
    pass: bool,
}

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    let cfg = Config::resolve(cli)?;
    let is_sweep = matches!(cli.cmd, Cmd::Sweep { .. });
    if cli.csv && !is_sweep {
        return Err(usage("--csv applies only to sweep"));
    }
    if cli.json && is_sweep {
        return Err(usage("sweep emits CSV; --json applies to the other commands"));
    }
    let json_line = |v: Value| format!("{v}\n");
    match &cli.cmd {
        Cmd::Pair { x, y } => Ok(Outcome {
            stdout: json_line(cmd_pair(&cfg, x, y)?),
            pass: true,
        }),
        Cmd::Dist { domain, x, y } => Ok(Outcome {
            stdout: json_line(cmd_dist(&cfg, domain, x, y)?),
            pass: true,
        }),
        Cmd::Photon {
            base,
            dir,
            xi,
            domain,
        } => Ok(Outcome {
            stdout: json_line(cmd_photon(&cfg, base, dir, xi, domain)?),
            pass: true,
        }),
        Cmd::Verify { suite, trials } => {
            let (v, pass) = cmd_verify(&cfg, suite, *trials)?;
            Ok(Outcome {
                stdout: json_line(v),
                pass,
            })
        }
        Cmd::Components { x, y } => {
            let px = match x {
                Some(s) => parse_point(&cfg.model, s, "first point")?,
                None => cfg
                    .model
                    .chart_to_point(&cfg.model.chart_zero())
                    .map_err(lib_err)?,
            };
            let py = match y {
                Some(s) => parse_point(&cfg.model, s, "second point")?,
                None => cfg.model.infinity_point(),
            };
            let count =
                rigidity::count_components(&cfg.model, &px, &py, cfg.samples.max(1200), cfg.seed)
                    .map_err(lib_err)?;
            let v = json!({
                "count": count,
                "expected": expected_components(&cfg.model),
                "model": cfg.model_name,
            });
            Ok(Outcome {
                stdout: json_line(v),
                pass: true,
            })
        }
        Cmd::Extremal {
            domain,
            orientation,
        } => {
            let omega = parse_domain(&cfg.model, domain)?;
            let orientation = match orientation.as_str() {
                "plus" => ConeOrientation::Plus,
                "minus" => ConeOrientation::Minus,
                other => {
                    return Err(usage(format!(
                        "orientation must be plus or minus, got {other:?}"
                    )))
                }
            };
            let rep = rigidity::strongly_extremal(&omega, orientation, cfg.seed).map_err(lib_err)?;
            Ok(Outcome {
                stdout: json_line(rep.to_json_value()),
                pass: true,
            })
        }
        Cmd::Recover { domain } => {
            let omega = parse_domain(&cfg.model, domain)?;
            let rep = rigidity::recover_diamond(&omega, cfg.seed).map_err(lib_err)?;
            Ok(Outcome {
                stdout: json_line(rep.to_json_value()),
                pass: true,
            })
        }
        Cmd::Sweep {
            kind,
            from,
            to,
            step,
            max_restarts,
        } => Ok(Outcome {
            stdout: cmd_sweep(&cfg, kind, *from, *to, *step, *max_restarts)?,
            pass: true,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
