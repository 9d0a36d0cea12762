use rayon::prelude::*;
use serde::Serialize;

use scoremix_core::geometry::{self, CriticalPointSet};

use super::{classify, runtime, usage, CmdResult, OutputDir};
use crate::config::MinimizersConfig;

#[derive(Serialize)]
struct LambdaResult {
    lambda: f64,
    #[serde(flatten)]
    set: CriticalPointSet,
}

/// `lambda,rank,x0..,phi,residual,classification,n_active1,n_active2` for local minimizers.
fn sweep_csv(results: &[LambdaResult], d: usize) -> String {
    let mut s = String::from("lambda,rank");
    for j in 0..d {
        s.push_str(&format!(",x{j}"));
    }
    s.push_str(",phi,residual,classification,n_active1,n_active2\n");
    for r in results {
        for (rank, m) in r.set.local_minimizers().enumerate() {
            s.push_str(&format!("{},{rank}", r.lambda));
            for v in &m.x_star {
                s.push_str(&format!(",{v}"));
            }
            s.push_str(&format!(
                ",{},{},{},{},{}\n",
                m.phi_value,
                m.residual,
                m.classification.as_str(),
                m.active1.len(),
                m.active2.len()
            ));
        }
    }
    s
}

pub fn run(cfg: &MinimizersConfig) -> CmdResult {
    let (model, inputs) = cfg.model.build().map_err(usage)?;
    let mut lambdas = cfg.lambdas.clone();
    if let Some(sw) = &cfg.sweep {
        if sw.steps == 0 {
            return Err(usage(anyhow::anyhow!("sweep needs at least one step")));
        }
        lambdas.extend(sw.values());
    }
    if lambdas.is_empty() {
        lambdas.push(model.lambda());
    }
    let models = lambdas
        .iter()
        .map(|&l| model.with_lambda(l))
        .collect::<Result<Vec<_>, _>>()
        .map_err(classify)?;
    let results = models
        .par_iter()
        .zip(&lambdas)
        .map(|(m, &lambda)| {
            geometry::enumerate_critical_points(m, &cfg.enumeration).map(|set| LambdaResult { lambda, set })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(classify)?;

    let mut out = OutputDir::create(&cfg.out).map_err(runtime)?;
    out.write_json("minimizers.json", &results).map_err(runtime)?;
    out.write_text("sweep.csv", &sweep_csv(&results, model.dim())).map_err(runtime)?;
    for r in &results {
        out.warnings.extend(r.set.warnings.iter().map(|w| format!("lambda {}: {w}", r.lambda)));
    }
    out.finish("minimizers", cfg, &inputs).map_err(runtime)?;
    Ok(true)
}
