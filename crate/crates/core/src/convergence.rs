//! Convergence sweeps in the time step or the grid size, with observed orders
//! p = ln(e_{i−1}/e_i) / |ln(v_{i−1}/v_i)| from errors against the finest run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actions::AdvectedState;
use crate::algebra::AlgElem;
use crate::dynamics::integrate;
use crate::error::{EpError, Result};
use crate::systems::{build_system, SystemBundle, SystemName, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Dt,
    N,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub error: f64,
    pub p: Option<f64>,
}

/// Observed orders between successive entries; `None` where either error vanishes
/// or the parameter does not change.
pub fn observed_orders(values: &[f64], errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; values.len()];
    for i in 1..values.len() {
        let (e0, e1) = (errors[i - 1], errors[i]);
        let ratio = (values[i - 1] / values[i]).ln().abs();
        if e0 > 0.0 && e1 > 0.0 && ratio > 0.0 && e0.is_finite() && e1.is_finite() {
            out[i] = Some((e0 / e1).ln() / ratio);
        }
    }
    out
}

fn validate(param: SweepParam, values: &[f64]) -> Result<()> {
    if values.len() < 3 {
        return Err(EpError::InvalidParameter(format!("a sweep needs at least 3 values, got {}", values.len())));
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(EpError::InvalidParameter("sweep values must be positive".into()));
    }
    let up = values.windows(2).all(|w| w[1] >= w[0]);
    let down = values.windows(2).all(|w| w[1] <= w[0]);
    if !(up || down) {
        return Err(EpError::InvalidParameter("sweep values must be monotone".into()));
    }
    if param == SweepParam::N && values.iter().any(|v| v.fract() != 0.0) {
        return Err(EpError::InvalidParameter("grid sizes must be integers".into()));
    }
    Ok(())
}

/// Final state (ξ, a) of one run, restricted to every `stride`-th lattice site.
fn final_state(system: &SystemBundle, init: &(AlgElem, AdvectedState), t_end: f64, dt: f64, stride: usize) -> Result<Vec<f64>> {
    let traj = integrate(system, &init.0, &init.1, t_end, dt)?;
    let xi = traj.xi.last().unwrap().coords().to_vec();
    let a = traj.last().a.value().to_vec();
    let per_site = match system.grid() {
        Some(g) => xi.len() / g.n(),
        None => return Ok(xi.into_iter().chain(a).collect()),
    };
    let pick = |v: &[f64]| -> Vec<f64> {
        v.chunks_exact(per_site).step_by(stride).flatten().copied().collect()
    };
    let mut out = pick(&xi);
    if !a.is_empty() {
        out.extend(pick(&a));
    }
    Ok(out)
}

/// Repeats a run for each value and reports sup-norm errors against the finest
/// run (smallest dt, or largest N compared on the coarsest grid's points).
/// `init` builds the initial state for a given bundle.
pub fn sweep<F>(
    name: SystemName,
    params: &SystemParams,
    init: F,
    t_end: f64,
    dt: f64,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepRow>>
where
    F: Fn(&SystemBundle) -> Result<(AlgElem, AdvectedState)> + Sync,
{
    validate(param, values)?;
    let finest = match param {
        SweepParam::Dt => values.iter().copied().fold(f64::INFINITY, f64::min),
        SweepParam::N => values.iter().copied().fold(0.0, f64::max),
    };
    let coarsest_n = values.iter().copied().fold(f64::INFINITY, f64::min) as usize;
    let runs: Vec<Vec<f64>> = values
        .par_iter()
        .map(|&v| {
            let (p, step) = match param {
                SweepParam::Dt => (params.clone(), v),
                SweepParam::N => (SystemParams { n: v as usize, ..params.clone() }, dt),
            };
            let system = build_system(name, &p)?;
            let stride = match param {
                SweepParam::N => {
                    let n = v as usize;
                    if n % coarsest_n != 0 {
                        return Err(EpError::InvalidParameter(format!("grid size {n} is not a multiple of {coarsest_n}")));
                    }
                    n / coarsest_n
                }
                SweepParam::Dt => 1,
            };
            final_state(&system, &init(&system)?, t_end, step, stride)
        })
        .collect::<Result<_>>()?;
    let reference = &runs[values.iter().position(|v| *v == finest).unwrap()];
    let errors: Vec<f64> = runs
        .iter()
        .map(|r| r.iter().zip(reference).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
        .collect();
    let orders = observed_orders(values, &errors);
    Ok(values
        .iter()
        .zip(errors)
        .zip(orders)
        .map(|((&value, error), p)| SweepRow { value, error, p })
        .collect())
}
