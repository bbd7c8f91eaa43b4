use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rpflow_core::stats::{linear_fit, log_log_fit, mean, median, LinearFit};

use crate::config::Experiment;
use crate::output::{ensure_dir, float, read_table, Table};
use crate::plot::{line_plot, Series};
use crate::run::{load_manifest, RunError, RunManifest};

/// Fields that may differ between runs aggregated into one report.
const VARYING: [&str; 9] = ["n", "sizes", "delta", "alpha", "kappa", "theta", "gamma", "master_seed", "output_dir"];

/// Lines describing every field that differs across manifests outside
/// [`VARYING`]; empty when the runs can be combined.
pub fn incompatibilities(runs: &[(PathBuf, RunManifest)]) -> Vec<String> {
    let tables: Vec<toml::Table> = runs
        .iter()
        .map(|(_, m)| {
            let mut t: toml::Table = toml::from_str(&m.config.to_toml()).expect("config round-trips");
            t.insert("command".into(), toml::Value::String(m.command.clone()));
            t
        })
        .collect();
    let keys: BTreeSet<&String> = tables.iter().flat_map(|t| t.keys()).collect();
    let mut diff = Vec::new();
    for k in keys {
        if VARYING.contains(&k.as_str()) {
            continue;
        }
        let vals: Vec<String> = tables.iter().map(|t| t.get(k).map(|v| v.to_string()).unwrap_or_else(|| "<absent>".into())).collect();
        if vals.iter().any(|v| v != &vals[0]) {
            let parts: Vec<String> = runs.iter().zip(&vals).map(|((d, _), v)| format!("{} = {v}", d.display())).collect();
            diff.push(format!("{k}: {}", parts.join("; ")));
        }
    }
    diff
}

fn col(row: &std::collections::HashMap<String, String>, k: &str) -> f64 {
    row.get(k).and_then(|s| s.parse().ok()).unwrap_or(f64::NAN)
}

fn fit_row(t: &mut Table, key: String, quantity: &str, f: &LinearFit, points: usize) {
    t.push(vec![
        key,
        quantity.to_string(),
        float(f.slope),
        float(f.slope_se),
        float(f.slope_ci95.0),
        float(f.slope_ci95.1),
        points.to_string(),
    ]);
}

const FIT_HEADER: [&str; 7] = ["series", "quantity", "slope", "slope_se", "ci_lo", "ci_hi", "points"];

fn localization_report(runs: &[(PathBuf, RunManifest)], out: &Path, files: &mut Vec<PathBuf>) -> Result<(), RunError> {
    // delta -> N -> (ipr, sup, mass)
    let mut groups: BTreeMap<String, BTreeMap<usize, [Vec<f64>; 3]>> = BTreeMap::new();
    for (dir, m) in runs {
        let key = format!("{}", m.config.delta);
        for row in read_table(&dir.join("localization.csv"))? {
            let n = col(&row, "N") as usize;
            let e = groups.entry(key.clone()).or_default().entry(n).or_default();
            e[0].push(col(&row, "ipr"));
            e[1].push(col(&row, "sup_norm_sq"));
            e[2].push(col(&row, "mass_outside"));
        }
    }
    let mut medians = Table::new(
        "scaling_medians.csv",
        &["delta", "N", "eigenvectors", "median_ipr", "median_sup_norm_sq", "median_mass_outside"],
    );
    let mut fits = Table::new("scaling_fits.csv", &FIT_HEADER);
    let mut series = Vec::new();
    for (delta, per_n) in &groups {
        let mut ns = Vec::new();
        let mut meds: [Vec<f64>; 3] = Default::default();
        for (n, cols) in per_n {
            medians.push(vec![
                delta.clone(),
                n.to_string(),
                cols[0].len().to_string(),
                float(median(&cols[0])),
                float(median(&cols[1])),
                float(median(&cols[2])),
            ]);
            ns.push(*n as f64);
            for q in 0..3 {
                meds[q].push(median(&cols[q]));
            }
        }
        let mut label = format!("δ = {delta}");
        if ns.len() >= 2 {
            for (q, name) in ["ipr", "sup_norm_sq", "mass_outside"].iter().enumerate() {
                let f = log_log_fit(&ns, &meds[q]);
                fit_row(&mut fits, delta.clone(), name, &f, ns.len());
                if q == 0 {
                    label = format!("δ = {delta}: slope {:.3} [{:.3}, {:.3}]", f.slope, f.slope_ci95.0, f.slope_ci95.1);
                }
            }
        }
        series.push(Series {
            label,
            points: ns.iter().zip(&meds[0]).map(|(n, y)| (n.log10(), y.log10())).collect(),
            markers: true,
        });
    }
    medians.write(out)?;
    fits.write(out)?;
    files.push(out.join("scaling_medians.csv"));
    files.push(out.join("scaling_fits.csv"));
    let svg = out.join("scaling.svg");
    line_plot(&svg, "median IPR of bulk eigenvectors", "log10 N", "log10 median IPR", &series)?;
    files.push(svg);
    Ok(())
}

fn flow_report(runs: &[(PathBuf, RunManifest)], out: &Path, files: &mut Vec<PathBuf>) -> Result<(), RunError> {
    // (alpha, N) -> (A_S flags, A_G flags, per-run mean deviation)
    type Acc = (Vec<bool>, Vec<bool>, Vec<f64>);
    let mut groups: BTreeMap<(String, usize), Acc> = BTreeMap::new();
    let mut alpha_of = BTreeMap::new();
    for (dir, m) in runs {
        let a = format!("{}", m.config.alpha);
        alpha_of.insert(a.clone(), m.config.alpha);
        for row in read_table(&dir.join("events.csv"))? {
            let g = groups.entry((a.clone(), col(&row, "N") as usize)).or_default();
            let occurred = row["occurred"] == "true";
            match row["statistic_name"].as_str() {
                "A_S" => g.0.push(occurred),
                "A_G" => g.1.push(occurred),
                _ => {}
            }
        }
        let mut per_run: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
        for row in read_table(&dir.join("flow_points.csv"))? {
            per_run
                .entry((col(&row, "N") as usize, row["run_id"].clone()))
                .or_default()
                .push(col(&row, "s_deviation"));
        }
        for ((n, _), devs) in per_run {
            groups.entry((a.clone(), n)).or_default().2.push(mean(&devs));
        }
    }
    let freq = |v: &[bool]| v.iter().filter(|b| **b).count() as f64 / v.len().max(1) as f64;
    let mut summary = Table::new(
        "events_summary.csv",
        &["alpha", "N", "n_eta", "runs", "a_s_frequency", "a_g_frequency", "mean_s_deviation"],
    );
    let mut by_alpha: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((a, n), (s, g, dev)) in &groups {
        let n_eta = (*n as f64).powf(alpha_of[a]);
        let md = mean(dev);
        summary.push(vec![
            a.clone(),
            n.to_string(),
            float(n_eta),
            s.len().to_string(),
            float(freq(s)),
            float(freq(g)),
            float(md),
        ]);
        let e = by_alpha.entry(a.clone()).or_default();
        e.0.push(n_eta);
        e.1.push(md);
    }
    summary.write(out)?;
    files.push(out.join("events_summary.csv"));
    let mut fits = Table::new("events_fit.csv", &FIT_HEADER);
    for (a, (x, y)) in &by_alpha {
        if x.len() >= 2 {
            fit_row(&mut fits, a.clone(), "mean_s_deviation_vs_n_eta", &log_log_fit(x, y), x.len());
        }
    }
    fits.write(out)?;
    files.push(out.join("events_fit.csv"));

    let (dir, m) = &runs[0];
    let eta = (m.config.size_list()[0] as f64).powf(-1.0 + m.config.alpha);
    let mut curves: BTreeMap<(String, String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for row in read_table(&dir.join("trajectories.csv"))? {
        if col(&row, "N") as usize != m.config.size_list()[0] {
            continue;
        }
        let key = (row["run_id"].clone(), row["z0_re"].clone(), row["z0_im"].clone());
        curves.entry(key).or_default().push((col(&row, "t"), col(&row, "xi_im")));
    }
    let mut series: Vec<Series> = curves
        .into_iter()
        .take(12)
        .map(|((r, re, im), pts)| Series {
            label: format!("run {r}, z0 = {:.3} + {:.3}i", re.parse::<f64>().unwrap_or(f64::NAN), im.parse::<f64>().unwrap_or(f64::NAN)),
            points: pts,
            markers: false,
        })
        .collect();
    let horizon = (m.config.size_list()[0] as f64).powf(-1.0 + m.config.delta);
    series.push(Series {
        label: "η/2".into(),
        points: vec![(0.0, eta / 2.0), (horizon, eta / 2.0)],
        markers: false,
    });
    let svg = out.join("trajectories.svg");
    line_plot(&svg, "characteristics: Im ξ_t", "t", "Im ξ_t", &series)?;
    files.push(svg);
    Ok(())
}

fn concentration_report(runs: &[(PathBuf, RunManifest)], out: &Path, files: &mut Vec<PathBuf>) -> Result<(), RunError> {
    let mut by_n: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    let mut t = Table::new("concentration_summary.csv", &["N", "zeta", "mu", "tail_prob", "log_tail"]);
    for (dir, _) in runs {
        for row in read_table(&dir.join("concentration.csv"))? {
            let (n, mu, p) = (col(&row, "N") as usize, col(&row, "mu"), col(&row, "tail_prob"));
            t.push(vec![n.to_string(), row["zeta"].clone(), float(mu), float(p), float(p.ln())]);
            by_n.entry(n).or_default().push((mu, p.ln()));
        }
    }
    t.write(out)?;
    files.push(out.join("concentration_summary.csv"));
    let mut fits = Table::new("concentration_fits.csv", &FIT_HEADER);
    let mut series = Vec::new();
    for (n, pts) in by_n {
        let finite: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.1.is_finite()).collect();
        if finite.len() >= 2 {
            let (x, y): (Vec<f64>, Vec<f64>) = finite.iter().copied().unzip();
            fit_row(&mut fits, n.to_string(), "log_tail_vs_mu", &linear_fit(&x, &y), finite.len());
        }
        series.push(Series {
            label: format!("N = {n}"),
            points: finite,
            markers: true,
        });
    }
    fits.write(out)?;
    files.push(out.join("concentration_fits.csv"));
    let svg = out.join("tails.svg");
    line_plot(&svg, "tail of sup |Im S_0 - E Im S_0|", "μ", "log P(sup > μ)", &series)?;
    files.push(svg);
    Ok(())
}

fn subordination_report(runs: &[(PathBuf, RunManifest)], out: &Path, files: &mut Vec<PathBuf>) -> Result<(), RunError> {
    let mut by_n: BTreeMap<usize, (Vec<f64>, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (dir, _) in runs {
        for row in read_table(&dir.join("subordination.csv"))? {
            let e = by_n.entry(col(&row, "N") as usize).or_default();
            let horizon = col(&row, "horizon");
            e.0.push(col(&row, "rel_error"));
            e.1.push(col(&row, "displacement") / (col(&row, "upsilon") * horizon));
            e.2.push(col(&row, "w_im") / horizon);
        }
    }
    let mut t = Table::new(
        "subordination_summary.csv",
        &["N", "comparisons", "median_rel_error", "max_displacement_over_upsilon_t", "min_im_w_over_t"],
    );
    for (n, (e, d, w)) in by_n {
        t.push(vec![
            n.to_string(),
            e.len().to_string(),
            float(median(&e)),
            float(d.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            float(w.iter().copied().fold(f64::INFINITY, f64::min)),
        ]);
    }
    t.write(out)?;
    files.push(out.join("subordination_summary.csv"));
    Ok(())
}

fn regularity_report(runs: &[(PathBuf, RunManifest)], out: &Path, files: &mut Vec<PathBuf>) -> Result<(), RunError> {
    let mut by_n: BTreeMap<usize, [Vec<f64>; 3]> = BTreeMap::new();
    for (dir, _) in runs {
        for row in read_table(&dir.join("regularity.csv"))? {
            let e = by_n.entry(col(&row, "N") as usize).or_default();
            e[0].push(col(&row, "K_m_fit"));
            e[1].push(col(&row, "K_m_log_eta"));
            e[2].push(col(&row, "K_l_fit"));
        }
    }
    let mut t = Table::new(
        "regularity_summary.csv",
        &["N", "runs", "median_K_m_fit", "median_K_m_log_eta", "min_K_l_fit"],
    );
    for (n, c) in by_n {
        t.push(vec![
            n.to_string(),
            c[0].len().to_string(),
            float(median(&c[0])),
            float(median(&c[1])),
            float(c[2].iter().copied().fold(f64::INFINITY, f64::min)),
        ]);
    }
    t.write(out)?;
    files.push(out.join("regularity_summary.csv"));
    Ok(())
}

/// Aggregates run directories into summary tables and SVG plots under `out`.
pub fn report(dirs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>, RunError> {
    if dirs.is_empty() {
        return Err(RunError::Usage("report needs at least one run directory".into()));
    }
    let runs: Vec<(PathBuf, RunManifest)> = dirs
        .iter()
        .map(|d| load_manifest(d).map(|m| (d.clone(), m)))
        .collect::<Result<_, _>>()?;
    let diff = incompatibilities(&runs);
    if !diff.is_empty() {
        let mut msg = vec!["runs have incompatible configurations:".to_string()];
        msg.extend(diff);
        return Err(RunError::Validation(msg));
    }
    ensure_dir(out)?;
    let mut files = Vec::new();
    if runs[0].1.command == "sample" {
        return Ok(files);
    }
    match runs[0].1.config.experiment {
        Experiment::Localization | Experiment::ScalingSweep => localization_report(&runs, out, &mut files)?,
        Experiment::FlowEvents => flow_report(&runs, out, &mut files)?,
        Experiment::Concentration => concentration_report(&runs, out, &mut files)?,
        Experiment::Subordination => subordination_report(&runs, out, &mut files)?,
        Experiment::Regularity => regularity_report(&runs, out, &mut files)?,
    }
    Ok(files)
}
