use rayon::prelude::*;
use serde::Serialize;

use scoremix_core::dynamics::{self, EnsembleMode, InitialSampler};
use scoremix_core::geometry::{self, EnumerationConfig, SearchBox};
use scoremix_core::measures::DEFAULT_TIE_TOL;
use scoremix_core::{Classification, MixedScoreModel, Trajectory};

use super::{classify, runtime, usage, CmdResult, OutputDir};
use crate::config::{InputRecord, SimMode, SimulateConfig, StartSpec};
use crate::io::{self, MeasureFormat};

/// Grids larger than this are refused.
const MAX_GRID_STARTS: usize = 1_000_000;

fn starts(
    spec: &StartSpec,
    model: &MixedScoreModel,
    seed: u64,
    inputs: &mut Vec<InputRecord>,
) -> anyhow::Result<Vec<Vec<f64>>> {
    let d = model.dim();
    let mut out = spec.x0.clone();
    if let Some(path) = &spec.file {
        let bytes = std::fs::read(path)?;
        let m = io::load_measure(path, MeasureFormat::from_path(path))?;
        inputs.push(InputRecord {
            role: "starts".into(),
            source: path.display().to_string(),
            sha256: io::content_hash(&bytes),
        });
        out.extend(m.points().map(<[f64]>::to_vec));
    }
    if let Some(n) = spec.z0_grid {
        if n == 0 || n.checked_pow(d as u32).is_none_or(|t| t > MAX_GRID_STARTS) {
            anyhow::bail!("z0_grid = {n} gives an empty or oversized grid in d = {d}");
        }
        out.extend(SearchBox::around(model, 0.25).grid(n));
    }
    if let Some(n) = spec.gaussian {
        let mean = spec.mean.clone().unwrap_or_else(|| vec![0.0; d]);
        let std = spec.std.unwrap_or((2.0 * model.horizon()).sqrt());
        let sampler = InitialSampler::Gaussian { mean, std: vec![std; d] };
        out.extend(dynamics::initial_states(&sampler, d, n, seed)?);
    } else if spec.mean.is_some() || spec.std.is_some() {
        anyhow::bail!("mean/std given without a Gaussian start count");
    }
    if out.is_empty() {
        anyhow::bail!("no starting points: give x0, a start file, z0_grid or gaussian");
    }
    for (i, x) in out.iter().enumerate() {
        if x.len() != d {
            anyhow::bail!("start {i} has {} coordinates, the data live in d = {d}", x.len());
        }
    }
    Ok(out)
}

fn terminals_csv(starts: &[Vec<f64>], trajs: &[Trajectory]) -> String {
    let d = starts.first().map_or(0, Vec::len);
    let mut header = vec![String::from("path")];
    header.extend((0..d).map(|j| format!("start{j}")));
    header.extend((0..d).map(|j| format!("end{j}")));
    let rows: Vec<Vec<f64>> = starts
        .iter()
        .zip(trajs)
        .enumerate()
        .map(|(i, (s, tr))| {
            let mut r = vec![i as f64];
            r.extend_from_slice(s);
            r.extend_from_slice(tr.terminal());
            r
        })
        .collect();
    io::table_csv(&header, &rows)
}

#[derive(Serialize)]
struct NearestCritical {
    x_star: Vec<f64>,
    classification: Classification,
    distance: f64,
}

#[derive(Serialize)]
struct Cluster {
    center: Vec<f64>,
    count: usize,
    members: Vec<usize>,
    phi: f64,
    in_nd1: bool,
    in_nd2: bool,
    nearest_critical: Option<NearestCritical>,
}

#[derive(Serialize)]
struct LimitSummary {
    cluster_radius: f64,
    clusters: Vec<Cluster>,
    critical_points_found: usize,
}

/// Groups terminal states by the enumerated critical point within `radius`,
/// falling back to greedy grouping in path order for the rest.
fn limit_summary(model: &MixedScoreModel, trajs: &[Trajectory], radius: f64, out: &mut OutputDir) -> LimitSummary {
    let critical = match geometry::enumerate_critical_points(model, &EnumerationConfig::default()) {
        Ok(set) => {
            out.warnings.extend(set.warnings.iter().cloned());
            set.records
        }
        Err(e) => {
            out.warnings.push(format!("critical point enumeration failed: {e}"));
            Vec::new()
        }
    };
    let nearest = |z: &[f64]| {
        critical
            .iter()
            .map(|r| (r, dist(&r.x_star, z)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    };
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for (i, tr) in trajs.iter().enumerate() {
        let z = tr.terminal();
        let center = match nearest(z) {
            Some((r, d)) if d <= radius => r.x_star.clone(),
            _ => z.to_vec(),
        };
        match groups.iter_mut().find(|(c, _)| dist(c, z) <= radius) {
            Some((_, m)) => m.push(i),
            None => groups.push((center, vec![i])),
        }
    }
    let clusters = groups
        .into_iter()
        .map(|(center, members)| {
            let nd = geometry::nd_indicator(model, &center, DEFAULT_TIE_TOL).ok();
            let nearest_critical = nearest(&center).map(|(r, distance)| NearestCritical {
                x_star: r.x_star.clone(),
                classification: r.classification,
                distance,
            });
            Cluster {
                phi: geometry::phi(model, &center).unwrap_or(f64::NAN),
                in_nd1: nd.is_some_and(|n| n.in_nd1),
                in_nd2: nd.is_some_and(|n| n.in_nd2),
                count: members.len(),
                center,
                members,
                nearest_critical,
            }
        })
        .collect();
    LimitSummary { cluster_radius: radius, clusters, critical_points_found: critical.len() }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn run(cfg: &SimulateConfig) -> CmdResult {
    let (model, mut inputs) = cfg.model.build().map_err(usage)?;
    let icfg = cfg.integrator.resolve(model.horizon()).map_err(usage)?;
    let x0s = starts(&cfg.starts, &model, icfg.seed, &mut inputs).map_err(usage)?;
    if !(cfg.cluster_radius >= 0.0) {
        return Err(usage(anyhow::anyhow!("cluster_radius must be nonnegative")));
    }
    let mode = match cfg.mode {
        SimMode::Ode => EnsembleMode::SimilarityOde,
        SimMode::Sde => EnsembleMode::SimilaritySde,
        SimMode::Physical => EnsembleMode::PhysicalOde,
        SimMode::Limit => EnsembleMode::LimitInclusion,
    };
    let trajs = x0s
        .par_iter()
        .enumerate()
        .map(|(i, x0)| dynamics::simulate_path(&model, mode, x0, &icfg, i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(classify)?;

    let mut out = OutputDir::create(&cfg.out).map_err(runtime)?;
    for (i, tr) in trajs.iter().enumerate() {
        out.write_text(&format!("traj_{i:04}.csv"), &io::trajectory_csv(tr)).map_err(runtime)?;
        out.warnings.extend(tr.warnings.iter().map(|w| format!("path {i}: {w}")));
    }
    out.write_text("terminals.csv", &terminals_csv(&x0s, &trajs)).map_err(runtime)?;
    if cfg.mode == SimMode::Limit {
        let summary = limit_summary(&model, &trajs, cfg.cluster_radius, &mut out);
        out.write_json("limits.json", &summary).map_err(runtime)?;
    }
    out.finish("simulate", cfg, &inputs).map_err(runtime)?;
    Ok(true)
}
