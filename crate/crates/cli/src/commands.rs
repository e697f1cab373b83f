use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fmsos::io::{
    load_covariates_csv, load_pairs_csv, parse_hurdat2 as parse_tracks, read_state, read_trace, tracks_to_regression_pairs,
    write_pairs_csv, write_state, write_trace, write_vectors_csv, Provenance,
};
use fmsos::mcmc::{fit_chain, AcceptanceStats, ChainTrace, SamplerConfig, SamplerMode};
use fmsos::metrics::{held_out_log_likelihood_states, posterior_distance_summary, posterior_mean_direction};
use fmsos::model::{sample_truth, simulate_dataset, Dataset, ModelState};
use fmsos::ot::ReferenceCloud;
use fmsos::sphere::{sample_uniform_sphere, UnitVector};
use fmsos::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Most posterior draws used for distance-to-truth summaries.
const MAX_DISTANCE_DRAWS: usize = 200;

/// Independent stream `stream` of the run seed.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn cloud_for(cfg: &RunConfig, seed: u64) -> ReferenceCloud<f64> {
    ReferenceCloud::sample(cfg.sampler.prior.p, cfg.sampler.prior.cloud_size, stream_rng(seed, 0).random())
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::config(format!("no {what} given (flag or config key)")))
}

fn check_dim(data: &Dataset<f64>, cfg: &RunConfig) -> Result<()> {
    match data.dim() {
        Some(d) if d != cfg.sampler.prior.p + 1 => Err(CliError {
            code: 3,
            message: format!("data has ambient dimension {d}, config p = {} needs {}", cfg.sampler.prior.p, cfg.sampler.prior.p + 1),
        }),
        _ => Ok(()),
    }
}

/// `key = value` report, written after the provenance prologue and echoed
/// to stdout.
struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    fn new() -> Self {
        Self { lines: Vec::new() }
    }

    fn add(&mut self, key: impl Into<String>, value: impl ToString) {
        self.lines.push((key.into(), value.to_string()));
    }

    fn write(&self, path: &Path, provenance: &Provenance) -> Result<()> {
        let mut text = String::new();
        for (k, v) in provenance {
            let _ = writeln!(text, "# {k} = {v}");
        }
        for (k, v) in &self.lines {
            let _ = writeln!(text, "{k} = {v}");
            println!("{k} = {v}");
        }
        std::fs::write(path, text).map_err(|e| CliError { code: 3, message: format!("{}: {e}", path.display()) })
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

fn probes(cfg: &RunConfig, seed: u64) -> Vec<UnitVector<f64>> {
    let mut rng = stream_rng(seed, u64::MAX);
    (0..cfg.distance_points).map(|_| sample_uniform_sphere(cfg.sampler.prior.p, &mut rng)).collect()
}

/// Evenly spaced subset of at most `MAX_DISTANCE_DRAWS` draws.
fn thinned(states: &[ModelState<f64>]) -> Vec<ModelState<f64>> {
    let step = states.len().div_ceil(MAX_DISTANCE_DRAWS).max(1);
    states.iter().step_by(step).cloned().collect()
}

fn add_rates(report: &mut Report, stats: &AcceptanceStats) {
    for (name, c) in [
        ("atom", stats.atom),
        ("psi", stats.psi),
        ("birth", stats.birth),
        ("death", stats.death),
        ("rotation", stats.rotation),
        ("kappa", stats.kappa),
    ] {
        report.add(format!("acceptance_{name}"), format!("{:.4} ({}/{})", c.rate(), c.accepted, c.proposed));
    }
}

fn pooled_stats(traces: &[ChainTrace<f64>]) -> AcceptanceStats {
    let mut s = AcceptanceStats::default();
    for t in traces {
        for (dst, src) in [
            (&mut s.atom, t.stats.atom),
            (&mut s.psi, t.stats.psi),
            (&mut s.birth, t.stats.birth),
            (&mut s.death, t.stats.death),
            (&mut s.rotation, t.stats.rotation),
            (&mut s.kappa, t.stats.kappa),
        ] {
            dst.proposed += src.proposed;
            dst.accepted += src.accepted;
        }
    }
    s
}

fn pooled_states(traces: &[ChainTrace<f64>]) -> Result<Vec<ModelState<f64>>> {
    let mut out = Vec::new();
    for t in traces {
        out.extend(t.states()?);
    }
    Ok(out)
}

fn add_posterior(report: &mut Report, states: &[ModelState<f64>]) {
    report.add("draws", states.len());
    if states.is_empty() {
        return;
    }
    let (km, ks) = mean_sd(&states.iter().map(|s| s.k() as f64).collect::<Vec<_>>());
    let (cm, cs) = mean_sd(&states.iter().map(|s| s.kappa).collect::<Vec<_>>());
    report.add("k_mean", format!("{km:.4}"));
    report.add("k_sd", format!("{ks:.4}"));
    report.add("kappa_mean", format!("{cm:.4}"));
    report.add("kappa_sd", format!("{cs:.4}"));
}

fn add_truth_distance(report: &mut Report, cfg: &RunConfig, states: &[ModelState<f64>]) -> Result<()> {
    if let Some(path) = &cfg.truth {
        let (truth, _) = read_state::<f64>(path)?;
        if !states.is_empty() {
            let (m, s) = posterior_distance_summary(&thinned(states), &truth, &probes(cfg, cfg.sampler.seed));
            report.add("distance_to_truth_mean", format!("{m:.6}"));
            report.add("distance_to_truth_sd", format!("{s:.6}"));
        }
    }
    Ok(())
}

fn add_held_out(report: &mut Report, cfg: &RunConfig, states: &[ModelState<f64>]) -> Result<()> {
    if let Some(path) = &cfg.test_data {
        let test = load_pairs_csv::<f64>(path, cfg.data_format)?;
        let (m, se) = held_out_log_likelihood_states(states, &test)?;
        report.add("held_out_log_likelihood", format!("{m:.6}"));
        report.add("held_out_log_likelihood_se", format!("{se:.6}"));
    }
    Ok(())
}

/// Runs `cfg.chains` chains in parallel on independent streams.
fn run_chains(
    cfg: &RunConfig,
    data: &Dataset<f64>,
    cloud: &ReferenceCloud<f64>,
    mode: SamplerMode,
) -> Result<Vec<(ChainTrace<f64>, SamplerConfig<f64>)>> {
    let sampler = SamplerConfig { mode, ..cfg.sampler.clone() };
    (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(cfg.sampler.seed, 1 + c as u64);
            fit_chain(data, cloud, &sampler, cfg.auto_scale, &mut rng).map_err(CliError::from)
        })
        .collect()
}

fn chain_provenance(cfg: &RunConfig, used: &SamplerConfig<f64>, chain: usize) -> Provenance {
    let mut p = cfg.to_provenance();
    p.insert("chain".into(), chain.to_string());
    p.insert("sampled_sigma_eps".into(), used.sigma_eps.to_string());
    p.insert("sampled_sigma_kappa".into(), used.sigma_kappa.to_string());
    p.insert("sampled_kappa_vmf_atom".into(), used.kappa_vmf_atom.to_string());
    p
}

fn save_traces(cfg: &RunConfig, prefix: &str, runs: &[(ChainTrace<f64>, SamplerConfig<f64>)]) -> Result<()> {
    for (i, (trace, used)) in runs.iter().enumerate() {
        write_trace(&cfg.out.join(format!("{prefix}_{i}.jsonl")), trace, &chain_provenance(cfg, used, i))?;
    }
    Ok(())
}

fn load_traces(cfg: &RunConfig, paths: &[PathBuf]) -> Result<Vec<ChainTrace<f64>>> {
    let paths: Vec<PathBuf> = if paths.is_empty() {
        let mut found: Vec<PathBuf> = std::fs::read_dir(&cfg.out)
            .map_err(|e| CliError { code: 3, message: format!("{}: {e}", cfg.out.display()) })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("chain_") && n.ends_with(".jsonl")))
            .collect();
        found.sort();
        found
    } else {
        paths.to_vec()
    };
    if paths.is_empty() {
        return Err(CliError { code: 3, message: format!("no traces given and none found in {}", cfg.out.display()) });
    }
    paths.iter().map(|p| Ok(read_trace::<f64>(p)?.0)).collect()
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.sampler.seed;
    let cloud = cloud_for(cfg, seed);
    let mut rng = stream_rng(seed, 1);
    let truth = sample_truth(cfg.k, cfg.kappa, &cloud, cfg.sampler.prior.rejection_budget, &mut rng)?;
    let all = simulate_dataset(&truth, cfg.n + cfg.n_test, &mut rng);
    let (train, test) = all.split_at(cfg.n);
    let prov = cfg.to_provenance();
    let data_path = cfg.out.join("data.csv");
    write_pairs_csv(&data_path, &train, &prov)?;
    if cfg.n_test > 0 {
        write_pairs_csv(&cfg.out.join("test.csv"), &test, &prov)?;
    }
    write_state(&cfg.out.join("truth.json"), &truth, &prov)?;
    let mut report = Report::new();
    report.add("data", data_path.display());
    report.add("rows", train.len());
    report.add("test_rows", test.len());
    report.add("truth", cfg.out.join("truth.json").display());
    report.write(&cfg.out.join("simulate.txt"), &prov)
}

pub fn fit(cfg: &RunConfig) -> Result<()> {
    let data = load_pairs_csv::<f64>(required(&cfg.data, "data")?, cfg.data_format)?;
    check_dim(&data, cfg)?;
    let cloud = cloud_for(cfg, cfg.sampler.seed);
    let started = Instant::now();
    let runs = run_chains(cfg, &data, &cloud, SamplerMode::Fmsos)?;
    save_traces(cfg, "chain", &runs)?;
    let traces: Vec<ChainTrace<f64>> = runs.into_iter().map(|(t, _)| t).collect();
    let states = pooled_states(&traces)?;
    let mut report = Report::new();
    report.add("n", data.len());
    report.add("chains", cfg.chains);
    report.add("mode", if data.is_empty() { "prior" } else { "posterior" });
    report.add("runtime_seconds", format!("{:.2}", started.elapsed().as_secs_f64()));
    add_rates(&mut report, &pooled_stats(&traces));
    add_posterior(&mut report, &states);
    if data.is_empty() {
        let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
        states.iter().for_each(|s| *freq.entry(s.k()).or_default() += 1);
        for (k, c) in freq {
            report.add(format!("k_frequency_{k}"), format!("{:.4}", c as f64 / states.len() as f64));
        }
    } else {
        add_truth_distance(&mut report, cfg, &states)?;
        add_held_out(&mut report, cfg, &states)?;
    }
    report.write(&cfg.out.join("summary.txt"), &cfg.to_provenance())
}

pub fn predict(cfg: &RunConfig, trace_paths: &[PathBuf]) -> Result<()> {
    let states = pooled_states(&load_traces(cfg, trace_paths)?)?;
    let xs = load_covariates_csv::<f64>(required(&cfg.data, "covariates")?)?;
    let dim = xs.first().map_or(cfg.sampler.prior.p + 1, |x| x.dim());
    let rows = xs
        .iter()
        .map(|x| {
            let y = posterior_mean_direction(&states, x).ok_or_else(|| CliError { code: 4, message: "no posterior draws".into() })?;
            Ok(x.as_slice().iter().chain(y.as_slice()).copied().collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).chain((1..=dim).map(|i| format!("y{i}"))).collect();
    let path = cfg.out.join("predictions.csv");
    write_vectors_csv(&path, &header, rows, &cfg.to_provenance())?;
    println!("predictions = {} ({} rows)", path.display(), xs.len());
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, trace_paths: &[PathBuf]) -> Result<()> {
    let states = pooled_states(&load_traces(cfg, trace_paths)?)?;
    let mut report = Report::new();
    add_posterior(&mut report, &states);
    let mut scored = cfg.clone();
    if scored.test_data.is_none() {
        scored.test_data = cfg.data.clone();
    }
    add_held_out(&mut report, &scored, &states)?;
    add_truth_distance(&mut report, cfg, &states)?;
    report.write(&cfg.out.join("evaluation.txt"), &cfg.to_provenance())
}

pub fn baseline_rotation(cfg: &RunConfig) -> Result<()> {
    let data = load_pairs_csv::<f64>(required(&cfg.data, "training data")?, cfg.data_format)?;
    check_dim(&data, cfg)?;
    required(&cfg.test_data, "test data (--test or config test_data)")?;
    let cloud = cloud_for(cfg, cfg.sampler.seed);
    let runs = run_chains(cfg, &data, &cloud, SamplerMode::RotationOnly)?;
    save_traces(cfg, "baseline_chain", &runs)?;
    let traces: Vec<ChainTrace<f64>> = runs.into_iter().map(|(t, _)| t).collect();
    let states = pooled_states(&traces)?;
    let mut report = Report::new();
    report.add("model", "rotation_only");
    report.add("n", data.len());
    add_rates(&mut report, &pooled_stats(&traces));
    add_posterior(&mut report, &states);
    add_held_out(&mut report, cfg, &states)?;
    report.write(&cfg.out.join("baseline.txt"), &cfg.to_provenance())
}

struct Cell {
    k: usize,
    kappa: f64,
    n: usize,
    outcome: std::result::Result<CellResult, String>,
    runtime: f64,
}

struct CellResult {
    d_mean: f64,
    d_sd: f64,
    k_mean: f64,
    kappa_mean: f64,
}

fn run_cell(cfg: &RunConfig, cloud: &ReferenceCloud<f64>, truth: &ModelState<f64>, data: &Dataset<f64>, stream: u64) -> fmsos::Result<CellResult> {
    let mut rng = stream_rng(cfg.sampler.seed, stream);
    let (trace, _) = fit_chain(data, cloud, &cfg.sampler, cfg.auto_scale, &mut rng)?;
    let states = trace.states()?;
    let (d_mean, d_sd) = posterior_distance_summary(&thinned(&states), truth, &probes(cfg, cfg.sampler.seed));
    let k_mean = states.iter().map(|s| s.k() as f64).sum::<f64>() / states.len() as f64;
    let kappa_mean = states.iter().map(|s| s.kappa).sum::<f64>() / states.len() as f64;
    Ok(CellResult { d_mean, d_sd, k_mean, kappa_mean })
}

/// One truth per `(k, κ)`, shared by every `n` in the grid; the data for a
/// smaller `n` is a prefix of the data for a larger one.
pub fn sim_study(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.sampler.seed;
    let cloud = cloud_for(cfg, seed);
    let n_max = cfg.grid_n.iter().copied().max().unwrap_or(0);
    let mut setups = Vec::new();
    for (ik, &k) in cfg.grid_k.iter().enumerate() {
        for (ic, &kappa) in cfg.grid_kappa.iter().enumerate() {
            let mut rng = stream_rng(seed, 1 + (ik * cfg.grid_kappa.len() + ic) as u64);
            let setup = sample_truth(k, kappa, &cloud, cfg.sampler.prior.rejection_budget, &mut rng)
                .map(|truth| {
                    let data = simulate_dataset(&truth, n_max, &mut rng);
                    (truth, data)
                })
                .map_err(|e| e.to_string());
            setups.push((k, kappa, setup));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..setups.len()).flat_map(|s| (0..cfg.grid_n.len()).map(move |i| (s, i))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError { code: 4, message: e.to_string() })?;
    let cells: Vec<Cell> = pool.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(idx, &(s, i))| {
                let (k, kappa, setup) = &setups[s];
                let n = cfg.grid_n[i];
                let started = Instant::now();
                let outcome = match setup {
                    Ok((truth, data)) => {
                        let (train, _) = data.split_at(n);
                        run_cell(cfg, &cloud, truth, &train, 1_000_000 + idx as u64).map_err(|e| e.to_string())
                    }
                    Err(e) => Err(e.clone()),
                };
                eprintln!("cell k={k} kappa={kappa} n={n} done in {:.1}s", started.elapsed().as_secs_f64());
                Cell { k: *k, kappa: *kappa, n, outcome, runtime: started.elapsed().as_secs_f64() }
            })
            .collect()
    });
    let prov = cfg.to_provenance();
    let prologue: String = prov.iter().map(|(k, v)| format!("# {k} = {v}\n")).collect();
    let mut long = prologue.clone() + "k,kappa,n,d_mean,d_sd,k_mean,kappa_mean,runtime_seconds,status\n";
    let mut curves = prologue.clone() + "series,k,kappa,n,d_mean,d_lower,d_upper\n";
    for c in &cells {
        match &c.outcome {
            Ok(r) => {
                let _ = writeln!(
                    long,
                    "{},{},{},{:.6},{:.6},{:.4},{:.4},{:.2},ok",
                    c.k, c.kappa, c.n, r.d_mean, r.d_sd, r.k_mean, r.kappa_mean, c.runtime
                );
                let _ = writeln!(
                    curves,
                    "k={} kappa={},{},{},{},{:.6},{:.6},{:.6}",
                    c.k, c.kappa, c.k, c.kappa, c.n, r.d_mean, r.d_mean - r.d_sd, r.d_mean + r.d_sd
                );
            }
            Err(e) => {
                let _ = writeln!(long, "{},{},{},,,,,{:.2},\"failed: {}\"", c.k, c.kappa, c.n, c.runtime, e.replace('"', "'"));
            }
        }
    }
    let mut table = prologue + "n";
    for (k, kappa, _) in &setups {
        let _ = write!(table, ",k={k} kappa={kappa}");
    }
    table.push('\n');
    for (i, n) in cfg.grid_n.iter().enumerate() {
        let _ = write!(table, "{n}");
        for s in 0..setups.len() {
            let c = &cells[s * cfg.grid_n.len() + i];
            match &c.outcome {
                Ok(r) => {
                    let _ = write!(table, ",{:.3} ({:.3})", r.d_mean, r.d_sd);
                }
                Err(_) => table.push_str(",failed"),
            }
        }
        table.push('\n');
    }
    for (name, body) in [("sim_study.csv", &long), ("sim_study_table.csv", &table), ("sim_study_curves.csv", &curves)] {
        let path = cfg.out.join(name);
        std::fs::write(&path, body).map_err(|e| CliError { code: 3, message: format!("{}: {e}", path.display()) })?;
    }
    print!("{}", table.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect::<String>());
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see sim_study.csv", cells.len());
    }
    Ok(())
}

pub fn parse_hurdat2(cfg: &RunConfig) -> Result<()> {
    let path = required(&cfg.data, "HURDAT2 file (--data)")?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError { code: 3, message: format!("{}: {e}", path.display()) })?;
    let tracks = parse_tracks(&text)?;
    let (pairs, skipped) = tracks_to_regression_pairs::<f64>(&tracks);
    let prov = cfg.to_provenance();
    let out = cfg.out.join("pairs.csv");
    write_pairs_csv(&out, &pairs, &prov)?;
    let mut report = Report::new();
    report.add("storms", tracks.len());
    report.add("fixes", tracks.iter().map(|t| t.fixes.len()).sum::<usize>());
    report.add("pairs", pairs.len());
    report.add("skipped_single_fix", skipped);
    report.add("pairs_file", out.display());
    report.write(&cfg.out.join("hurdat2.txt"), &prov)
}
