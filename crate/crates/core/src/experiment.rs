//! Batch experiments: each plan reads a model file, runs over a range of
//! seeds and writes CSV (plus SVG for sweeps) and a `manifest.json` into the
//! output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, DProcess, RescaledTrace, SpontaneousTrace};
use crate::cftp::{CftpError, PerfectSampler, DEFAULT_MAX_BACK};
use crate::dsl::{parse_model, ParseError};
use crate::model::{ContextTreeModel, LengthFunction, ModelError, RuleKey, Symbol};
use crate::oracle::{self, OracleError};
use crate::random::IndexedUniformSource;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cftp(#[from] CftpError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid plan: {0}")]
    Plan(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanKind {
    Sample,
    ThetaDistribution,
    EpsilonSweep,
    RegenerationReport,
    OracleCompare,
    AuxiliaryTrace,
}

impl PlanKind {
    fn stem(self) -> &'static str {
        match self {
            PlanKind::Sample => "sample",
            PlanKind::ThetaDistribution => "theta_dist",
            PlanKind::EpsilonSweep => "eps_sweep",
            PlanKind::RegenerationReport => "regen",
            PlanKind::OracleCompare => "oracle_compare",
            PlanKind::AuxiliaryTrace => "aux_trace",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    pub model_path: PathBuf,
    /// First seed; run s uses seed + s.
    pub seed: u64,
    pub iterations: u64,
    pub window: (i64, i64),
    pub horizon: u64,
    pub max_back: u64,
    pub out: PathBuf,
    /// Saved sample for regeneration reports: symbols in time order.
    pub sample_path: Option<PathBuf>,
    pub eps_grid: Vec<f64>,
}

impl ExperimentPlan {
    pub fn new(kind: PlanKind, model_path: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        ExperimentPlan {
            kind,
            model_path: model_path.into(),
            seed: 0,
            iterations: 1,
            window: (0, 0),
            horizon: 50,
            max_back: DEFAULT_MAX_BACK,
            out: out.into(),
            sample_path: None,
            eps_grid: (2..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub total: u64,
    pub aborted: u64,
    pub files: Vec<PathBuf>,
    pub results: Value,
}

impl RunSummary {
    /// More than half of the runs hit the search limit.
    pub fn aborted_dominated(&self) -> bool {
        self.total > 0 && 2 * self.aborted > self.total
    }
}

pub fn load_model(path: &Path) -> Result<(ContextTreeModel, String), ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })?;
    let model = parse_model(&text).map_err(|source| ExperimentError::Parse { path: path.to_path_buf(), source })?;
    Ok((model, text))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// One CFTP run per seed; aborted runs come back as `None`.
fn run_seeds<T: Send>(
    seeds: std::ops::Range<u64>,
    f: impl Fn(&IndexedUniformSource) -> Result<T, CftpError> + Sync,
) -> Result<Vec<(u64, Option<T>)>, CftpError> {
    seeds
        .into_par_iter()
        .map(|s| match f(&IndexedUniformSource::counter(s)) {
            Ok(v) => Ok((s, Some(v))),
            Err(CftpError::Aborted { .. }) => Ok((s, None)),
            Err(e) => Err(e),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub runs: u64,
    pub aborted: u64,
    pub mean_abs_theta: f64,
    pub stderr: f64,
    pub mean_steps: f64,
    pub sum_abs_theta: u64,
    pub sum_steps: u64,
}

/// For each ε, sets p(w_1 | v) = ε for every context and records |θ[0,0]|
/// and the step count of the explicit algorithm over `iterations` seeds.
pub fn run_epsilon_sweep(
    template: &ContextTreeModel,
    grid: &[f64],
    iterations: u64,
    seed_base: u64,
    max_back: u64,
) -> Result<Vec<SweepRow>, ExperimentError> {
    if iterations == 0 {
        return Err(ExperimentError::Plan("iterations must be positive".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &eps in grid {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(ExperimentError::Plan(format!("ε = {eps} outside (0, 1]")));
        }
        let model = template.with_reference_probability(eps)?;
        let sampler = PerfectSampler::new(&model)?.with_max_back(max_back);
        let runs = run_seeds(seed_base..seed_base + iterations, |src| {
            let r = sampler.algorithm2(src, 0, 0)?;
            Ok((r.theta.unsigned_abs(), r.steps))
        })?;
        let done: Vec<(u64, u64)> = runs.iter().filter_map(|(_, r)| *r).collect();
        let n = done.len() as u64;
        let sum_abs_theta: u64 = done.iter().map(|r| r.0).sum();
        let sum_steps: u64 = done.iter().map(|r| r.1).sum();
        let (mean, stderr) = if n == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let mean = sum_abs_theta as f64 / n as f64;
            let var = if n > 1 {
                done.iter().map(|r| (r.0 as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            (mean, (var / n as f64).sqrt())
        };
        rows.push(SweepRow {
            epsilon: eps,
            runs: n,
            aborted: iterations - n,
            mean_abs_theta: mean,
            stderr,
            mean_steps: sum_steps as f64 / n as f64,
            sum_abs_theta,
            sum_steps,
        });
    }
    Ok(rows)
}

/// Minimal SVG line chart with markers and axis labels.
pub fn svg_line_chart(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let (w, h, pad) = (480.0, 320.0, 48.0);
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let (x0, x1) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let y1 = finite.iter().fold(0.0f64, |a, p| a.max(p.1));
    let sx = |x: f64| pad + if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.5 } * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - if y1 > 0.0 { y / y1 } else { 0.0 } * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        t = pad,
        b = h - pad,
        r = w - pad
    );
    let path: Vec<String> = finite.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#, path.join(" "));
    for &(x, y) in &finite {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(x), sy(y));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{x}</text>"#, sx(x), h - pad + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.3}</text>"#, pad - 4.0, pad + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, w / 2.0, h - 8.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#,
        h / 2.0,
        h / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn is_renewal_geometric(model: &ContextTreeModel, window: (i64, i64)) -> bool {
    window == (0, 0)
        && model.reference().len() == 1
        && *model.ell() == LengthFunction::Zero
        && model.alphabet().regular_count() == 1
        && model.reference()[0] == Symbol(0)
}

/// Context length bound for an exact finite-memory comparison, if the model
/// has no distance rules.
fn finite_order(model: &ContextTreeModel, len: usize) -> Option<usize> {
    let mut order = len;
    for r in model.rules().rules() {
        match &r.key {
            RuleKey::Context(k) => order = order.max(k.len()),
            RuleKey::Distance(_) => return None,
            RuleKey::Default => {}
        }
    }
    (model.alphabet().len().checked_pow(order as u32)? <= 1 << 16).then_some(order)
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn csv(&mut self, name: &str) -> Result<csv::Writer<fs::File>, ExperimentError> {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        Ok(csv::Writer::from_writer(file))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        self.files.push(path);
        Ok(())
    }
}

fn read_sample(path: &Path, model: &ContextTreeModel) -> Result<Vec<Symbol>, ExperimentError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    Ok(model.alphabet().parse_time_order(&cleaned)?)
}

/// Runs a plan and writes its artifacts; aborted runs are counted, not fatal.
pub fn run_plan(plan: &ExperimentPlan) -> Result<RunSummary, ExperimentError> {
    let (model, text) = load_model(&plan.model_path)?;
    if plan.window.0 > plan.window.1 {
        return Err(ExperimentError::Plan(format!("window [{}, {}] is empty", plan.window.0, plan.window.1)));
    }
    fs::create_dir_all(&plan.out).map_err(io_err(&plan.out))?;
    let mut out = Output { dir: plan.out.clone(), files: Vec::new() };
    let (m, n) = plan.window;
    let seeds = plan.seed..plan.seed + plan.iterations.max(1);
    let total = seeds.end - seeds.start;
    let sampler = PerfectSampler::new(&model)?.with_max_back(plan.max_back);
    let a = model.alphabet();
    let stem = plan.kind.stem();

    let (aborted, results) = match plan.kind {
        PlanKind::Sample => {
            let runs = run_seeds(seeds, |src| sampler.algorithm2(src, m, n))?;
            let mut w = out.csv(&format!("{stem}.csv"))?;
            w.write_record(["seed", "theta", "steps", "window"])?;
            let mut aborted = 0;
            for (s, r) in &runs {
                match r {
                    Some(r) => w.write_record([s.to_string(), r.theta.to_string(), r.steps.to_string(), a.render(r.window())])?,
                    None => {
                        aborted += 1;
                        w.write_record([s.to_string(), "ABORTED".into(), String::new(), String::new()])?
                    }
                }
            }
            w.flush().map_err(io_err(&plan.out))?;
            (aborted, json!({}))
        }
        PlanKind::ThetaDistribution => {
            let runs = run_seeds(seeds, |src| Ok(sampler.algorithm2(src, m, n)?.theta))?;
            let depths: Vec<u64> = runs.iter().filter_map(|(_, t)| t.map(|t| (m - t) as u64)).collect();
            let aborted = total - depths.len() as u64;
            let mut hist = BTreeMap::new();
            for &d in &depths {
                *hist.entry(d).or_insert(0u64) += 1;
            }
            let mut w = out.csv(&format!("{stem}.csv"))?;
            w.write_record(["depth", "count"])?;
            for (d, c) in &hist {
                w.write_record([d.to_string(), c.to_string()])?;
            }
            w.flush().map_err(io_err(&plan.out))?;
            let mean = depths.iter().sum::<u64>() as f64 / depths.len().max(1) as f64;
            let test = if is_renewal_geometric(&model, plan.window) && !depths.is_empty() {
                let r = oracle::geometric_test(&depths, model.epsilon(), 0.99)?;
                json!({ "reference": "geometric", "parameter": model.epsilon(), "statistic": r.statistic,
                        "dof": r.dof, "critical": r.critical, "p_value": r.p_value, "pass": r.pass })
            } else {
                Value::Null
            };
            (aborted, json!({ "mean_depth": mean, "chi_square": test }))
        }
        PlanKind::EpsilonSweep => {
            let rows = run_epsilon_sweep(&model, &plan.eps_grid, total, plan.seed, plan.max_back)?;
            let mut w = out.csv(&format!("{stem}.csv"))?;
            w.write_record(["epsilon", "mean_abs_theta", "stderr", "mean_steps", "runs", "aborted"])?;
            for r in &rows {
                w.write_record([
                    r.epsilon.to_string(),
                    r.mean_abs_theta.to_string(),
                    r.stderr.to_string(),
                    r.mean_steps.to_string(),
                    r.runs.to_string(),
                    r.aborted.to_string(),
                ])?;
            }
            w.flush().map_err(io_err(&plan.out))?;
            let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon, r.mean_abs_theta)).collect();
            out.text(&format!("{stem}.svg"), &svg_line_chart(&points, "epsilon", "mean |theta[0]|"))?;
            let aborted = rows.iter().map(|r| r.aborted).sum();
            (aborted, serde_json::to_value(&rows)?)
        }
        PlanKind::RegenerationReport => {
            let (sample, start) = match &plan.sample_path {
                Some(p) => (read_sample(p, &model)?, m),
                None => {
                    let src = IndexedUniformSource::counter(plan.seed);
                    let r = sampler.algorithm2(&src, m, n)?;
                    (r.window().to_vec(), m)
                }
            };
            let v = analysis::visible_regeneration(&sample, start, start + sample.len() as i64 - 1, &model)?;
            let mut w = out.csv(&format!("{stem}.csv"))?;
            w.write_record(["anchor", "block_start", "block_len", "block"])?;
            for b in &v.blocks {
                let anchor = v.anchors.contains(&b.start);
                w.write_record([anchor.to_string(), b.start.to_string(), b.symbols.len().to_string(), a.render(&b.symbols)])?;
            }
            w.flush().map_err(io_err(&plan.out))?;
            (0, json!({ "sigma": v.sigma, "theta_x": v.theta_x, "anchors": v.anchors.len() }))
        }
        PlanKind::AuxiliaryTrace => {
            let src = IndexedUniformSource::counter(plan.seed);
            let h = plan.horizon as i64;
            let wl = model.reference().len() as i64;
            let z = SpontaneousTrace::new(&src, &model, 1, h * wl)?;
            let zbar = RescaledTrace::new(&src, &model, 1, h)?;
            let d = DProcess::from_trace(&zbar, 0, h);
            let mut w = out.csv(&format!("{stem}.csv"))?;
            w.write_record(["block", "sites", "z", "zbar", "lbar", "d"])?;
            for b in 1..=h {
                let sites: String = ((b - 1) * wl + 1..=b * wl)
                    .map(|i| z.z_at(i).map_or('*', |s| a.char_of(s)))
                    .collect();
                w.write_record([
                    b.to_string(),
                    format!("{}..{}", (b - 1) * wl + 1, b * wl),
                    sites,
                    if zbar.zbar_at(b) { "1".into() } else { "*".into() },
                    zbar.lbar_at(b).map_or_else(|| "inf".into(), |l| l.to_string()),
                    d.at(b).to_string(),
                ])?;
            }
            w.flush().map_err(io_err(&plan.out))?;
            let theta_bar = match analysis::theta_bar(&src, 0, &model, plan.max_back) {
                Ok(t) => Some(t),
                Err(AnalysisError::Aborted { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            (0, json!({ "theta_bar": theta_bar, "first_return": d.first_return() }))
        }
        PlanKind::OracleCompare => {
            let len = (n - m + 1) as usize;
            let law = oracle::brute_force_window_law(&model, len, plan.horizon as usize, 1e-8)?;
            let counts = oracle::empirical_window_law(&model, len, total, plan.seed, plan.max_back)?;
            let tv = oracle::total_variation(&counts, &law);
            let exact = finite_order(&model, len).map(|k| oracle::finite_memory_window_law(&model, k, len)).transpose()?;
            let mut words: Vec<&Vec<Symbol>> = counts.keys().chain(law.law.keys()).collect();
            words.sort();
            words.dedup();
            let mut w = out.csv(&format!("{stem}.csv"))?;
            w.write_record(["word", "empirical", "enumerated", "finite_memory"])?;
            for word in words {
                w.write_record([
                    a.render(word),
                    (counts.get(word).copied().unwrap_or(0) as f64 / tv.runs as f64).to_string(),
                    law.probability(word).to_string(),
                    exact.as_ref().map_or_else(String::new, |e| e.get(word).copied().unwrap_or(0.0).to_string()),
                ])?;
            }
            w.flush().map_err(io_err(&plan.out))?;
            let renewal = oracle::RenewalSpec::from_model(&model)
                .ok()
                .and_then(|s| oracle::renewal_stationary_marginal(&s, 10_000).ok());
            (0, json!({ "tv": tv, "within_4_stderr": tv.within(4.0), "renewal_marginal": renewal }))
        }
    };

    let digest = Sha256::digest(text.as_bytes());
    let model_sha256: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let manifest = json!({
        "plan": plan,
        "model_sha256": model_sha256,
        "crate": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "total": total,
        "aborted": aborted,
        "results": results,
    });
    out.text("manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunSummary { total, aborted, files: out.files, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(eps: f64) -> ContextTreeModel {
        parse_model(&format!(
            "alphabet = 2 1\nregular = 2\nepsilon = {eps}\nw = \"2\"\nell = identity\ndefault = [{eps}, {}]\n",
            1.0 - eps
        ))
        .unwrap()
    }

    #[test]
    fn sweep_endpoints() {
        let rows = run_epsilon_sweep(&identity(0.5), &[0.5, 1.0], 200, 7, 1_000_000).unwrap();
        assert_eq!(rows[1].mean_abs_theta, 0.0);
        for r in &rows {
            assert_eq!(r.sum_steps, r.runs + 2 * r.sum_abs_theta);
        }
        assert!(rows[0].mean_abs_theta > 0.0);
    }

    #[test]
    fn svg_is_well_formed() {
        let s = svg_line_chart(&[(0.2, 3.0), (0.6, 1.0), (1.0, 0.0)], "x", "y");
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 3);
    }
}
