use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{CampaignConfig, Functional, RunConfig};
use super::run::run_deterministic;
use super::AppError;
use crate::uq::{
    fit_pce, latin_hypercube, normalized_rms_error, response_surface, smolyak_nodes, write_samples_csv, InputDistribution, PceModel,
    ResponseSurface, SobolIndices, SparseGrid,
};

/// Computes the requested outputs for one sample: the run configuration
/// and the physical input values it was built from.
pub type Evaluator<'a> = dyn Fn(&RunConfig, &[f64]) -> Result<Vec<f64>, AppError> + Sync + 'a;

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub grid: SparseGrid,
    pub dist: InputDistribution,
    pub outputs: Vec<Functional>,
    /// `values[node][output]`.
    pub values: Vec<Vec<f64>>,
    pub models: Vec<PceModel>,
    /// `None` for outputs without variance.
    pub sobol: Vec<Option<SobolIndices>>,
    /// Surface over the two most influential inputs, per output.
    pub surfaces: Vec<Option<ResponseSurface>>,
    /// Normalized RMS gap between expansion and direct runs at the
    /// Latin-hypercube test points, per output.
    pub validation: Option<Vec<f64>>,
    /// Samples evaluated in this call, the rest came from the cache.
    pub evaluated: usize,
}

/// Runs the deterministic solver at every sparse-grid node and fits one
/// expansion per output.
pub fn run_campaign(cfg: &CampaignConfig, workers: usize, out: &Path) -> Result<CampaignResult, AppError> {
    let outputs = cfg.outputs.clone();
    run_campaign_with(cfg, workers, out, &move |run: &RunConfig, _: &[f64]| {
        let r = run_deterministic(run, None)?;
        Ok(outputs.iter().map(|&f| r.functional(f)).collect())
    })
}

/// [`run_campaign`] with the per-sample computation supplied by the
/// caller.
///
/// Results are cached under `out/cache`, keyed by the sample index and
/// checked against the sample's inputs, so an interrupted campaign only
/// evaluates what is missing. Samples are spread over `workers` threads;
/// the reduction runs serially in node order, so the outcome does not
/// depend on the worker count.
pub fn run_campaign_with(cfg: &CampaignConfig, workers: usize, out: &Path, eval: &Evaluator) -> Result<CampaignResult, AppError> {
    let cache = out.join("cache");
    fs::create_dir_all(&cache).map_err(|e| AppError::Io(cache.clone(), e))?;
    let dist = InputDistribution::new(cfg.inputs.iter().map(|i| i.mean).collect(), cfg.inputs.iter().map(|i| i.sd).collect())?;
    let grid = smolyak_nodes(dist.dims(), cfg.level)?;
    let order = cfg.pce_order();

    let nodes: Vec<Vec<f64>> = grid.nodes.iter().map(|xi| dist.physical(xi)).collect();
    let (values, mut evaluated) = evaluate_all(cfg, workers, out, "node", &nodes, eval)?;
    let test_xi = latin_hypercube(cfg.test_points, dist.dims(), cfg.seed);
    let test_x: Vec<Vec<f64>> = test_xi.iter().map(|xi| dist.physical(xi)).collect();
    let (test_values, n) = evaluate_all(cfg, workers, out, "test", &test_x, eval)?;
    evaluated += n;

    let mut models = Vec::new();
    let mut sobol = Vec::new();
    let mut surfaces = Vec::new();
    for (k, f) in cfg.outputs.iter().enumerate() {
        let y: Vec<f64> = values.iter().map(|v| v[k]).collect();
        if let Some(node) = y.iter().position(|v| !v.is_finite()) {
            return Err(AppError::NonFinite { output: f.name().to_string(), sample: node });
        }
        let model = fit_pce(&grid.nodes, &y, order, &dist)?;
        let s = model.sobol_indices().ok();
        let surface = match &s {
            Some(s) if dist.dims() >= 2 => {
                let mut rank: Vec<usize> = (0..dist.dims()).collect();
                rank.sort_by(|&a, &b| s.total[b].total_cmp(&s.total[a]));
                Some(response_surface(&model, (rank[0], rank[1]), cfg.surface_resolution))
            }
            _ => None,
        };
        models.push(model);
        sobol.push(s);
        surfaces.push(surface);
    }
    let validation = (cfg.test_points > 0).then(|| {
        (0..cfg.outputs.len())
            .map(|k| normalized_rms_error(&models[k], &test_xi, &test_values.iter().map(|v| v[k]).collect::<Vec<_>>()))
            .collect::<Vec<f64>>()
    });

    let result = CampaignResult { grid, dist, outputs: cfg.outputs.clone(), values, models, sobol, surfaces, validation, evaluated };
    write_campaign(cfg, &result, out)?;
    Ok(result)
}

fn cache_path(out: &Path, kind: &str, i: usize) -> PathBuf {
    out.join("cache").join(format!("{kind}_{i:05}.txt"))
}

/// Cached outputs of a sample, if the file exists and was computed for
/// the same inputs and outputs.
fn read_cache(path: &Path, x: &[f64], n_out: usize) -> Option<Vec<f64>> {
    let text = fs::read_to_string(path).ok()?;
    let mut lines = text.lines();
    let inputs: Vec<f64> = lines.next()?.strip_prefix("inputs ")?.split_whitespace().map(|s| s.parse().ok()).collect::<Option<_>>()?;
    let outputs: Vec<f64> = lines.next()?.strip_prefix("outputs ")?.split_whitespace().map(|s| s.parse().ok()).collect::<Option<_>>()?;
    (inputs == x && outputs.len() == n_out).then_some(outputs)
}

fn write_cache(path: &Path, x: &[f64], y: &[f64]) -> Result<(), AppError> {
    let join = |v: &[f64]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ");
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, format!("inputs {}\noutputs {}\n", join(x), join(y))).map_err(|e| AppError::Io(tmp.clone(), e))?;
    // Rename so that an interrupted write never leaves a partial entry.
    fs::rename(&tmp, path).map_err(|e| AppError::Io(path.to_path_buf(), e))
}

fn evaluate_all(
    cfg: &CampaignConfig,
    workers: usize,
    out: &Path,
    kind: &str,
    points: &[Vec<f64>],
    eval: &Evaluator,
) -> Result<(Vec<Vec<f64>>, usize), AppError> {
    let n_out = cfg.outputs.len();
    let mut results: Vec<Option<Vec<f64>>> = points.iter().enumerate().map(|(i, x)| read_cache(&cache_path(out, kind, i), x, n_out)).collect();
    let pending: Vec<usize> = (0..points.len()).filter(|&i| results[i].is_none()).collect();

    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let computed: Mutex<Vec<(usize, Result<Vec<f64>, AppError>)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(pending.len().max(1)) {
            s.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                if j >= pending.len() || failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = pending[j];
                let r = cfg.run_config(&points[i]).map_err(AppError::Config).and_then(|run| eval(&run, &points[i])).and_then(|y| {
                    if y.len() != n_out {
                        return Err(AppError::FieldLength { name: format!("{kind} {i} outputs"), expected: n_out, got: y.len() });
                    }
                    write_cache(&cache_path(out, kind, i), &points[i], &y)?;
                    Ok(y)
                });
                if r.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                computed.lock().expect("worker panicked").push((i, r));
            });
        }
    });

    let mut computed = computed.into_inner().expect("worker panicked");
    computed.sort_by_key(|(i, _)| *i);
    let evaluated = computed.len();
    for (i, r) in computed {
        match r {
            Ok(y) => results[i] = Some(y),
            Err(source) => {
                let snapshot = out.join(format!("failed_{kind}_{i:05}.toml"));
                let text = toml::to_string(&cfg.sample_table(&points[i])).unwrap_or_default();
                fs::write(&snapshot, text).map_err(|e| AppError::Io(snapshot.clone(), e))?;
                return Err(AppError::Sample { kind: kind.to_string(), index: i, snapshot, source: Box::new(source) });
            }
        }
    }
    Ok((results.into_iter().map(|r| r.expect("every sample evaluated")).collect(), evaluated))
}

fn write_campaign(cfg: &CampaignConfig, r: &CampaignResult, out: &Path) -> Result<(), AppError> {
    let io = |p: PathBuf| move |e: std::io::Error| AppError::Io(p, e);
    let path = out.join("samples.csv");
    let file = fs::File::create(&path).map_err(io(path.clone()))?;
    write_samples_csv(file, &r.grid.nodes, &r.dist)?;

    let names: Vec<&str> = cfg.inputs.iter().map(|i| i.name.as_str()).collect();
    let mut outputs = format!("node,{}\n", r.outputs.iter().map(|f| f.name()).collect::<Vec<_>>().join(","));
    for (i, v) in r.values.iter().enumerate() {
        outputs.push_str(&format!("{i},{}\n", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")));
    }
    let path = out.join("outputs.csv");
    fs::write(&path, outputs).map_err(io(path.clone()))?;

    let mut sobol = String::from("output,input,first_order,total\n");
    for (k, f) in r.outputs.iter().enumerate() {
        let path = out.join(format!("pce_{}.txt", f.name()));
        let file = fs::File::create(&path).map_err(io(path.clone()))?;
        r.models[k].write_text(std::io::BufWriter::new(file)).map_err(io(path.clone()))?;
        match &r.sobol[k] {
            Some(s) => {
                for (d, name) in names.iter().enumerate() {
                    sobol.push_str(&format!("{},{},{},{}\n", f.name(), name, s.first[d], s.total[d]));
                }
            }
            None => {
                for name in &names {
                    sobol.push_str(&format!("{},{},undefined,undefined\n", f.name(), name));
                }
            }
        }
        if let Some(surface) = &r.surfaces[k] {
            let path = out.join(format!("surface_{}.csv", f.name()));
            let file = fs::File::create(&path).map_err(io(path.clone()))?;
            surface.write_csv(file, names[surface.dims.0], names[surface.dims.1])?;
        }
    }
    let path = out.join("sobol.csv");
    fs::write(&path, sobol).map_err(io(path.clone()))?;

    if let Some(errors) = &r.validation {
        let mut text = String::from("output,normalized_rms_error\n");
        for (f, e) in r.outputs.iter().zip(errors) {
            text.push_str(&format!("{},{}\n", f.name(), e));
        }
        let path = out.join("validation.csv");
        fs::write(&path, text).map_err(io(path.clone()))?;
    }
    Ok(())
}
