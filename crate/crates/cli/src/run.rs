use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rpflow_core::characteristics::{
    build_grid, subordination_check, track_flow_events, upsilon, EventOptions, FlowOptions, SpectralPath,
};
use rpflow_core::density::Density;
use rpflow_core::ensemble::{assemble_snapshot, DysonPath, ModelParams, Potential};
use rpflow_core::localization::{bulk_window, localization_realization, scaling_table, Exponents, LocalizationConfig};
use rpflow_core::regularity::{concentration_experiment, verify_assumption, VerifyOptions};
use rpflow_core::seed::derive_seed;
use rpflow_core::spectral::{eigendecompose, UpperHalfPoint};
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{ensure_dir, float, sha256_hex, write_atomic, OutputFile, Table};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizationSeeds {
    pub n: usize,
    pub index: u64,
    pub potential: u64,
    pub path: Option<u64>,
    pub subsample: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub n: usize,
    pub index: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

/// Everything needed to regenerate a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub command: String,
    pub config: ExperimentConfig,
    /// SHA-256 of the effective config serialized as TOML with `output_dir` cleared.
    pub config_hash: String,
    /// Seeds are `derive_seed(size_seed, index, tag)` with
    /// `size_seed = derive_seed(master_seed, N, "size")`.
    pub realizations: Vec<RealizationSeeds>,
    pub failures: Vec<Failure>,
    pub phases: Vec<Phase>,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug)]
pub enum RunError {
    /// Malformed command line.
    Usage(String),
    Validation(Vec<String>),
    /// Every realization failed.
    Numerical(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) | RunError::Validation(_) => 1,
            RunError::Numerical(_) => 2,
            RunError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(errs) => {
                writeln!(f, "invalid configuration:")?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            RunError::Usage(e) => write!(f, "{e}"),
            RunError::Numerical(e) => write!(f, "all realizations failed: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = PathBuf::new();
    sha256_hex(c.to_toml().as_bytes())
}

pub fn size_seed(cfg: &ExperimentConfig, n: usize) -> u64 {
    derive_seed(cfg.master_seed, n as u64, "size")
}

#[derive(Default)]
struct Collected {
    tables: Vec<Table>,
    seeds: Vec<RealizationSeeds>,
    failures: Vec<Failure>,
    attempted: usize,
}

impl Collected {
    fn fail(&mut self, n: usize, index: u64, e: impl std::fmt::Display) {
        log::warn!("N = {n}, realization {index} failed: {e}");
        self.failures.push(Failure {
            n,
            index,
            error: e.to_string(),
        });
    }
}

fn density(cfg: &ExperimentConfig) -> Density {
    cfg.density().expect("validated density")
}

fn localization_config(cfg: &ExperimentConfig, n: usize) -> LocalizationConfig {
    LocalizationConfig {
        n,
        delta: cfg.delta,
        exponents: Exponents {
            kappa: cfg.kappa,
            theta: cfg.theta,
            gamma: cfg.gamma,
        },
        window: cfg.window(),
        bulk_fraction: cfg.bulk_fraction,
        density: density(cfg),
        ensemble: cfg.ensemble,
        master_seed: size_seed(cfg, n),
        horizon_override: None,
    }
}

fn localization(cfg: &ExperimentConfig, sizes: &[usize], sweep: bool) -> Collected {
    let mut out = Collected::default();
    let mut table = Table::new(
        "localization.csv",
        &["run_id", "N", "delta", "kappa", "theta", "lambda", "X_size", "mass_outside", "sup_norm_sq", "ipr"],
    );
    let mut per_n = Vec::new();
    for &n in sizes {
        let lc = localization_config(cfg, n);
        let results: Vec<_> = (0..cfg.ensemble as u64)
            .into_par_iter()
            .map(|r| localization_realization::<f64>(&lc, r))
            .collect();
        let mut reports = Vec::new();
        for (r, res) in results.into_iter().enumerate() {
            let r = r as u64;
            out.attempted += 1;
            out.seeds.push(RealizationSeeds {
                n,
                index: r,
                potential: derive_seed(lc.master_seed, r, "potential"),
                path: Some(derive_seed(lc.master_seed, r, "path")),
                subsample: None,
            });
            match res {
                Ok(o) => {
                    if o.empty_window {
                        log::warn!("N = {n}, realization {r}: no eigenvalues in the bulk window");
                    }
                    for rep in &o.reports {
                        table.push(vec![
                            r.to_string(),
                            n.to_string(),
                            float(cfg.delta),
                            float(rep.kappa),
                            float(rep.theta),
                            float(rep.lambda),
                            rep.x_size.to_string(),
                            float(rep.mass_outside),
                            float(rep.sup_norm_sq),
                            float(rep.ipr),
                        ]);
                    }
                    reports.extend(o.reports);
                }
                Err(e) => out.fail(n, r, e),
            }
        }
        per_n.push((n, cfg.ensemble, reports));
    }
    out.tables.push(table);
    if sweep {
        if let Ok(st) = scaling_table(&per_n) {
            let mut rows = Table::new(
                "scaling.csv",
                &["N", "realizations", "eigenvectors", "median_ipr", "median_sup_norm_sq", "median_mass_outside"],
            );
            for r in &st.rows {
                rows.push(vec![
                    r.n.to_string(),
                    r.realizations.to_string(),
                    r.eigenvectors.to_string(),
                    float(r.median_ipr),
                    float(r.median_sup_norm_sq),
                    float(r.median_mass_outside),
                ]);
            }
            let mut fits = Table::new("fits.csv", &["delta", "quantity", "slope", "slope_se", "ci_lo", "ci_hi", "intercept"]);
            for (q, f) in [("ipr", st.ipr_fit), ("sup_norm_sq", st.sup_norm_fit), ("mass_outside", st.mass_outside_fit)] {
                fits.push(vec![
                    float(cfg.delta),
                    q.to_string(),
                    float(f.slope),
                    float(f.slope_se),
                    float(f.slope_ci95.0),
                    float(f.slope_ci95.1),
                    float(f.intercept),
                ]);
            }
            out.tables.push(rows);
            out.tables.push(fits);
        }
    }
    out
}

struct FlowSetup {
    params: ModelParams<f64>,
    v: Potential<f64>,
    drift: SpectralPath<f64>,
    seeds: RealizationSeeds,
}

fn flow_setup(cfg: &ExperimentConfig, n: usize, r: u64) -> (RealizationSeeds, rpflow_core::Result<FlowSetup>) {
    let m = size_seed(cfg, n);
    let seeds = RealizationSeeds {
        n,
        index: r,
        potential: derive_seed(m, r, "potential"),
        path: Some(derive_seed(m, r, "path")),
        subsample: Some(derive_seed(m, r, "subsample")),
    };
    let build = || -> rpflow_core::Result<FlowSetup> {
        let params = ModelParams::<f64>::new(n, cfg.delta, cfg.alpha)?;
        let v = Potential::<f64>::sample(n, density(cfg), seeds.potential);
        let path = DysonPath::new(n, params.t, cfg.path_steps, seeds.path.unwrap())?;
        let sites: Vec<usize> = (0..cfg.tracked_sites).collect();
        let drift = SpectralPath::build(&v, &path, &sites)?;
        Ok(FlowSetup {
            params,
            v,
            drift,
            seeds: seeds.clone(),
        })
    };
    let res = build();
    (seeds, res)
}

type FlowRows = (Vec<Vec<String>>, Vec<Vec<String>>, Vec<Vec<String>>);

fn flow_events(cfg: &ExperimentConfig) -> Collected {
    let mut out = Collected::default();
    let mut events = Table::new("events.csv", &["run_id", "statistic_name", "value", "threshold", "occurred", "N"]);
    let mut points = Table::new(
        "flow_points.csv",
        &[
            "run_id",
            "z_re",
            "z_im",
            "in_domain",
            "s_deviation",
            "s_deviation_all_steps",
            "g_ratio",
            "stopped",
            "tau",
            "inverse_square_integral",
            "N",
        ],
    );
    let mut trajs = Table::new(
        "trajectories.csv",
        &["run_id", "z0_re", "z0_im", "t", "xi_re", "xi_im", "S_re", "S_im", "stopped", "N"],
    );
    for n in cfg.size_list() {
        let results: Vec<(RealizationSeeds, rpflow_core::Result<FlowRows>)> = (0..cfg.ensemble as u64)
            .into_par_iter()
            .map(|r| {
                let (seeds, setup) = flow_setup(cfg, n, r);
                let rows = setup.and_then(|s| {
                    let grid = build_grid(&s.params, &s.v, cfg.window(), cfg.theta, cfg.gamma, cfg.grid_budget.map_or(u128::MAX, u128::from))?;
                    let flow = FlowOptions::new(s.params.eta);
                    let opts = EventOptions {
                        ell: cfg.ell,
                        beta: cfg.beta,
                        subsample: cfg.subsample,
                        seed: s.seeds.subsample.unwrap(),
                        keep_trajectories: true,
                        ..EventOptions::default()
                    };
                    let ev = track_flow_events(&s.drift, &s.v, &grid, &flow, &opts)?;
                    let id = r.to_string();
                    let ns = n.to_string();
                    let e = vec![
                        vec![id.clone(), "A_S".into(), float(ev.a_s_statistic), float(ev.a_s_threshold), ev.a_s_occurred.to_string(), ns.clone()],
                        vec![id.clone(), "A_G".into(), float(ev.a_g_statistic), float(ev.a_g_threshold), ev.a_g_occurred.to_string(), ns.clone()],
                    ];
                    let p = ev
                        .points
                        .iter()
                        .map(|p| {
                            vec![
                                id.clone(),
                                float(p.point.z.re),
                                float(p.point.z.im),
                                p.point.in_domain.to_string(),
                                float(p.s_deviation),
                                float(p.s_deviation_all_steps),
                                float(p.g_ratio),
                                p.stopped.to_string(),
                                p.tau.map(float).unwrap_or_default(),
                                float(p.inverse_square_integral),
                                ns.clone(),
                            ]
                        })
                        .collect();
                    let mut t = Vec::new();
                    for tr in ev.trajectories.iter().take(cfg.trajectory_dump) {
                        for smp in &tr.samples {
                            t.push(vec![
                                id.clone(),
                                float(tr.z0.re),
                                float(tr.z0.im),
                                float(smp.t),
                                float(smp.xi.re),
                                float(smp.xi.im),
                                float(smp.s.re),
                                float(smp.s.im),
                                tr.stopped.to_string(),
                                ns.clone(),
                            ]);
                        }
                    }
                    Ok((e, p, t))
                });
                (seeds, rows)
            })
            .collect();
        for (seeds, res) in results {
            out.attempted += 1;
            let idx = seeds.index;
            out.seeds.push(seeds);
            match res {
                Ok((e, p, t)) => {
                    e.into_iter().for_each(|r| events.push(r));
                    p.into_iter().for_each(|r| points.push(r));
                    t.into_iter().for_each(|r| trajs.push(r));
                }
                Err(e) => out.fail(n, idx, e),
            }
        }
    }
    out.tables = vec![events, points, trajs];
    out
}

/// Spectral parameters on `Im z = η`, evenly spread over the bulk of `W`.
pub fn bulk_points(cfg: &ExperimentConfig, eta: f64) -> Vec<UpperHalfPoint<f64>> {
    let (lo, hi) = bulk_window(cfg.window(), cfg.bulk_fraction);
    (0..cfg.points)
        .map(|i| UpperHalfPoint::new(lo + (hi - lo) * (i as f64 + 0.5) / cfg.points as f64, eta).expect("positive eta"))
        .collect()
}

fn subordination(cfg: &ExperimentConfig) -> Collected {
    let mut out = Collected::default();
    let mut table = Table::new(
        "subordination.csv",
        &[
            "run_id",
            "z_re",
            "z_im",
            "w_re",
            "w_im",
            "residual",
            "displacement",
            "upsilon",
            "horizon",
            "site",
            "v_x",
            "g_t_re",
            "g_t_im",
            "g_0_re",
            "g_0_im",
            "rel_error",
            "N",
        ],
    );
    for n in cfg.size_list() {
        let results: Vec<(RealizationSeeds, rpflow_core::Result<Vec<Vec<String>>>)> = (0..cfg.ensemble as u64)
            .into_par_iter()
            .map(|r| {
                let (seeds, setup) = flow_setup(cfg, n, r);
                let rows = setup.and_then(|s| {
                    let ups = upsilon(&s.params, &s.v);
                    let flow = FlowOptions::new(s.params.eta);
                    let mut rows = Vec::new();
                    for z in bulk_points(cfg, s.params.eta) {
                        let chk = subordination_check(&s.drift, &s.v, z, &flow)?;
                        let w = chk.preimage.w;
                        let disp = (w.z() - z.z()).norm();
                        for (i, &x) in chk.sites.iter().enumerate() {
                            rows.push(vec![
                                r.to_string(),
                                float(z.re),
                                float(z.im),
                                float(w.re),
                                float(w.im),
                                float(chk.preimage.residual),
                                float(disp),
                                float(ups),
                                float(s.params.t),
                                x.to_string(),
                                float(s.v.values()[x]),
                                float(chk.g_t[i].re),
                                float(chk.g_t[i].im),
                                float(chk.g_0[i].re),
                                float(chk.g_0[i].im),
                                float(chk.relative_errors[i]),
                                n.to_string(),
                            ]);
                        }
                    }
                    Ok(rows)
                });
                (seeds, rows)
            })
            .collect();
        for (seeds, res) in results {
            out.attempted += 1;
            let idx = seeds.index;
            out.seeds.push(RealizationSeeds { subsample: None, ..seeds });
            match res {
                Ok(rows) => rows.into_iter().for_each(|r| table.push(r)),
                Err(e) => out.fail(n, idx, e),
            }
        }
    }
    out.tables.push(table);
    out
}

fn concentration(cfg: &ExperimentConfig) -> Collected {
    let mut out = Collected::default();
    let mut table = Table::new("concentration.csv", &["density", "N", "zeta", "mu", "tail_prob", "ensemble", "seed"]);
    let mut reference = Table::new("concentration_reference.csv", &["N", "z_re", "z_im", "e_im_s0"]);
    let mut sups = Table::new("concentration_sups.csv", &["N", "draw", "sup_deviation"]);
    for n in cfg.size_list() {
        let seed = derive_seed(size_seed(cfg, n), 0, "concentration");
        let zeta = cfg.zeta.unwrap_or_else(|| (n as f64).powf(-0.5));
        out.attempted += 1;
        out.seeds.push(RealizationSeeds {
            n,
            index: 0,
            potential: seed,
            path: None,
            subsample: None,
        });
        match concentration_experiment(density(cfg), n, cfg.window(), zeta, &cfg.mu_grid, cfg.ensemble, seed, Default::default()) {
            Ok(est) => {
                for (mu, p) in est.mu_grid.iter().zip(&est.tail_prob) {
                    table.push(vec![
                        cfg.density.clone(),
                        n.to_string(),
                        float(zeta),
                        float(*mu),
                        float(*p),
                        cfg.ensemble.to_string(),
                        seed.to_string(),
                    ]);
                }
                for (z, e) in &est.reference {
                    reference.push(vec![n.to_string(), float(z.re), float(z.im), float(*e)]);
                }
                for (i, s) in est.sups.iter().enumerate() {
                    sups.push(vec![n.to_string(), i.to_string(), float(*s)]);
                }
            }
            Err(e) => out.fail(n, 0, e),
        }
    }
    out.tables = vec![table, reference, sups];
    out
}

fn regularity(cfg: &ExperimentConfig) -> Collected {
    let mut out = Collected::default();
    let mut table = Table::new(
        "regularity.csv",
        &[
            "run_id",
            "N",
            "eta",
            "epsilon",
            "sup_abs_s0",
            "K_m_fit",
            "K_m_log_eta",
            "K_l_fit",
            "passes_m",
            "passes_l",
            "sup_probe_spacing",
            "inf_relative_spacing",
        ],
    );
    for n in cfg.size_list() {
        let m = size_seed(cfg, n);
        let params = match ModelParams::<f64>::new(n, cfg.delta, cfg.alpha) {
            Ok(p) => p,
            Err(e) => {
                out.fail(n, 0, e);
                continue;
            }
        };
        let rows: Vec<Vec<String>> = (0..cfg.ensemble as u64)
            .into_par_iter()
            .map(|r| {
                let v = Potential::<f64>::sample(n, density(cfg), derive_seed(m, r, "potential"));
                let vd = verify_assumption(&v, &params, cfg.window(), cfg.epsilon, &VerifyOptions::default());
                vec![
                    r.to_string(),
                    n.to_string(),
                    float(params.eta),
                    float(cfg.epsilon),
                    float(vd.sup_abs_s0),
                    float(vd.k_m_fit),
                    float(vd.k_m_log_eta),
                    float(vd.k_l_fit),
                    vd.passes.0.to_string(),
                    vd.passes.1.to_string(),
                    float(vd.sup_probe_spacing),
                    float(vd.inf_relative_spacing),
                ]
            })
            .collect();
        for r in 0..cfg.ensemble as u64 {
            out.attempted += 1;
            out.seeds.push(RealizationSeeds {
                n,
                index: r,
                potential: derive_seed(m, r, "potential"),
                path: None,
                subsample: None,
            });
        }
        rows.into_iter().for_each(|r| table.push(r));
    }
    out.tables.push(table);
    out
}

fn sample(cfg: &ExperimentConfig) -> Collected {
    let mut out = Collected::default();
    let mut pot = Table::new("potential.csv", &["run_id", "N", "site", "v"]);
    let mut spec = Table::new("spectrum.csv", &["run_id", "N", "k", "lambda"]);
    for n in cfg.size_list() {
        let m = size_seed(cfg, n);
        for r in 0..cfg.ensemble as u64 {
            out.attempted += 1;
            let seeds = RealizationSeeds {
                n,
                index: r,
                potential: derive_seed(m, r, "potential"),
                path: Some(derive_seed(m, r, "path")),
                subsample: None,
            };
            let v = Potential::<f64>::sample(n, density(cfg), seeds.potential);
            let res = (|| -> rpflow_core::Result<Vec<f64>> {
                let horizon = ModelParams::<f64>::scale(n, cfg.delta);
                let path = DysonPath::new(n, horizon, 1, seeds.path.unwrap())?;
                Ok(eigendecompose(&assemble_snapshot(&v, &path, 1)?)?.eigenvalues)
            })();
            for (x, val) in v.values().iter().enumerate() {
                pot.push(vec![r.to_string(), n.to_string(), x.to_string(), float(*val)]);
            }
            match res {
                Ok(ev) => {
                    for (k, l) in ev.iter().enumerate() {
                        spec.push(vec![r.to_string(), n.to_string(), k.to_string(), float(*l)]);
                    }
                }
                Err(e) => out.fail(n, r, e),
            }
            out.seeds.push(seeds);
        }
    }
    out.tables = vec![pot, spec];
    out
}

/// Which subcommand produced the directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sample,
}

/// Runs `cfg`, writes its CSV files atomically into `out_dir` and the manifest last.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path, command: Command) -> Result<RunManifest, RunError> {
    cfg.validate().map_err(RunError::Validation)?;
    let mut phases = Vec::new();
    let t0 = Instant::now();
    let collected = match command {
        Command::Sample => sample(cfg),
        Command::Run => match cfg.experiment {
            Experiment::Localization => localization(cfg, &cfg.size_list(), false),
            Experiment::ScalingSweep => localization(cfg, &cfg.sizes, true),
            Experiment::FlowEvents => flow_events(cfg),
            Experiment::Subordination => subordination(cfg),
            Experiment::Concentration => concentration(cfg),
            Experiment::Regularity => regularity(cfg),
        },
    };
    phases.push(Phase {
        name: "realizations".into(),
        seconds: t0.elapsed().as_secs_f64(),
    });
    let t1 = Instant::now();
    ensure_dir(out_dir)?;
    let mut outputs = Vec::new();
    for t in &collected.tables {
        outputs.push(t.write(out_dir)?);
    }
    phases.push(Phase {
        name: "write".into(),
        seconds: t1.elapsed().as_secs_f64(),
    });
    let manifest = RunManifest {
        software: format!("rpflow {}", env!("CARGO_PKG_VERSION")),
        command: match command {
            Command::Run => "run".into(),
            Command::Sample => "sample".into(),
        },
        config: cfg.clone(),
        config_hash: config_hash(cfg),
        realizations: collected.seeds,
        failures: collected.failures.clone(),
        phases,
        outputs,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| RunError::Io(e.to_string()))?;
    write_atomic(&out_dir.join(MANIFEST), &json)?;
    if collected.attempted > 0 && collected.failures.len() == collected.attempted {
        return Err(RunError::Numerical(collected.failures[0].error.clone()));
    }
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest, RunError> {
    let text = std::fs::read_to_string(dir.join(MANIFEST)).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
    serde_json::from_str(&text).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))
}
