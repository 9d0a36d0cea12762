use rayon::prelude::*;
use serde::Serialize;

use scoremix_core::analysis;
use scoremix_core::geometry::{self, SearchBox};
use scoremix_core::{Error, MixedScoreModel};

use super::{classify, runtime, usage, CmdResult, OutputDir};
use crate::config::PotentialConfig;
use crate::io;

#[derive(Serialize)]
struct GapSummary {
    t: f64,
    /// `max |Φ_λ - F_λ(·, t)|` over the grid.
    max_abs_gap: f64,
    argmax: Vec<f64>,
    /// Value-gap bound verdict, for `t ≤ 1`.
    bound_pass: Option<bool>,
    bound_worst_violation: Option<f64>,
}

/// `-¼` times the min-norm Clarke element, or the outer hull's where only that exists.
fn field(model: &MixedScoreModel, x: &[f64], tie_tol: f64) -> scoremix_core::Result<Vec<f64>> {
    let set = match geometry::clarke_subdifferential_tol(model, x, tie_tol) {
        Err(Error::OnlyOuterHullAvailable) => geometry::outer_clarke_subdifferential(model, x, tie_tol)?,
        other => other?,
    };
    Ok(set.min_norm()?.into_iter().map(|g| -0.25 * g).collect())
}

fn row(model: &MixedScoreModel, x: &[f64], ts: &[f64], tie_tol: f64) -> scoremix_core::Result<Vec<f64>> {
    let nd = geometry::nd_indicator(model, x, tie_tol)?;
    let mut r = x.to_vec();
    r.push(geometry::phi(model, x)?);
    r.push(f64::from(u8::from(nd.in_nd1)));
    r.push(f64::from(u8::from(nd.in_nd2)));
    r.extend(field(model, x, tie_tol)?);
    for &t in ts {
        r.push(model.rescaled_potential(x, t)?);
    }
    Ok(r)
}

pub fn run(cfg: &PotentialConfig) -> CmdResult {
    let (model, inputs) = cfg.model.build().map_err(usage)?;
    let d = model.dim();
    if d > 2 {
        return Err(usage(anyhow::anyhow!("grid output needs d <= 2, the data live in d = {d}")));
    }
    if cfg.grid_n < 2 {
        return Err(usage(anyhow::anyhow!("grid_n must be at least 2")));
    }
    if cfg.ts.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(usage(anyhow::anyhow!("times must be finite and positive")));
    }
    let bx = match &cfg.bounds {
        Some(b) => {
            let b = SearchBox::new(b.lo.clone(), b.hi.clone()).map_err(classify)?;
            if b.dim() != d {
                return Err(usage(anyhow::anyhow!("bounds have dimension {}, data {d}", b.dim())));
            }
            b
        }
        None => SearchBox::around(&model, 0.25),
    };
    let grid = bx.grid(cfg.grid_n);
    let rows = grid
        .par_iter()
        .map(|x| row(&model, x, &cfg.ts, cfg.tie_tol))
        .collect::<Result<Vec<_>, _>>()
        .map_err(classify)?;

    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.extend(["phi", "nd1", "nd2"].map(String::from));
    header.extend((0..d).map(|j| format!("field{j}")));
    header.extend(cfg.ts.iter().map(|t| format!("F_t={t}")));

    let phi_col = d;
    let first_f = 2 * d + 3;
    let mut summary = Vec::with_capacity(cfg.ts.len());
    for (k, &t) in cfg.ts.iter().enumerate() {
        let (i, gap) = rows
            .iter()
            .map(|r| (r[phi_col] - r[first_f + k]).abs())
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, g)| if g > best.1 { (i, g) } else { best });
        let report = if t <= 1.0 { Some(analysis::varadhan_value_gap(&model, &grid, &[t]).map_err(classify)?) } else { None };
        summary.push(GapSummary {
            t,
            max_abs_gap: gap,
            argmax: grid[i].clone(),
            bound_pass: report.as_ref().map(|r| r.pass),
            bound_worst_violation: report.as_ref().map(|r| r.worst_violation),
        });
    }

    let mut out = OutputDir::create(&cfg.out).map_err(runtime)?;
    out.write_text("grid.csv", &io::table_csv(&header, &rows)).map_err(runtime)?;
    out.write_json("potential_summary.json", &summary).map_err(runtime)?;
    out.finish("potential", cfg, &inputs).map_err(runtime)?;
    Ok(true)
}
