use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use super::{ideal_initial_states, simulate, LeaderSignal, SimulationError, SimulationTrace};
use crate::config::EnvelopeOptions;
use crate::levels::LevelDecomposition;
use crate::model::FormationSpec;
use crate::serde_util;
use crate::synthesis::ControllerSet;

/// The three runs the envelope is fitted from. By linearity of the edge
/// error dynamics, `full = free + forced` edge by edge.
#[derive(Debug, Clone)]
pub struct EnvelopeRuns {
    /// Given initial states and leader inputs.
    pub full: SimulationTrace,
    /// Same initial states, zero leader inputs.
    pub free: SimulationTrace,
    /// Ideal initial states `x_{0i} = −D_i` (zero initial error), same inputs.
    pub forced: SimulationTrace,
}

impl EnvelopeRuns {
    /// For a trace without leader inputs the free run is the trace itself
    /// and the forced run is identically zero.
    pub fn unforced(trace: SimulationTrace) -> Self {
        let mut forced = trace.clone();
        for row in forced.errors.iter_mut() {
            for z in row.iter_mut() {
                z.fill(0.0);
            }
        }
        EnvelopeRuns {
            full: trace.clone(),
            free: trace,
            forced,
        }
    }
}

/// Runs the full, free and forced simulations on a common grid.
#[allow(clippy::too_many_arguments)]
pub fn envelope_runs(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    ctrl: &ControllerSet,
    x0: &[DVector<f64>],
    signals: &[LeaderSignal],
    horizon: f64,
    dt: Option<f64>,
) -> Result<EnvelopeRuns, SimulationError> {
    let full = simulate(spec, decomp, ctrl, x0, signals, horizon, dt)?;
    let zero: Vec<LeaderSignal> = signals.iter().map(|_| LeaderSignal::Zero).collect();
    let dt = Some(full.metadata.dt);
    let free = simulate(spec, decomp, ctrl, x0, &zero, horizon, dt)?;
    let ideal = ideal_initial_states(decomp, &DVector::zeros(spec.n));
    let forced = simulate(spec, decomp, ctrl, &ideal, signals, horizon, dt)?;
    Ok(EnvelopeRuns { full, free, forced })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeEnvelope {
    #[serde(with = "serde_util::one_based")]
    pub from: usize,
    #[serde(with = "serde_util::one_based")]
    pub to: usize,
    pub c: f64,
    /// `None` when the free response never rises above the noise floor.
    pub alpha: Option<f64>,
    pub beta: f64,
}

/// Fitted `‖z_ij(t)‖ ≤ C e^{−α t} ‖z(0)‖ + β Σ_s sup_{[0,t]} ‖u_s‖`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub edges: Vec<EdgeEnvelope>,
    pub pass: bool,
    /// `max_t (‖z_ij(t)‖ − bound_ij(t))`, negative when the bound holds with room.
    pub max_violation: f64,
    pub tolerance: f64,
    pub initial_error: f64,
    /// Zero initial error and zero inputs: nothing to fit.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("runs do not share a time grid and edge list")]
    MismatchedRuns,
}

/// Slope of the least-squares line through `(t, ln y)`, negated.
fn decay_rate(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, y) in points {
        sxy += (t - mt) * (y.ln() - my);
        sxx += (t - mt) * (t - mt);
    }
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

const MIN_LATE_POINTS: usize = 8;

fn fit_alpha(times: &[f64], norms: &[f64], late_fraction: f64) -> Option<f64> {
    let peak = norms.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    let floor = 1e-10 * peak;
    let above: Vec<(f64, f64)> = times.iter().copied().zip(norms.iter().copied()).filter(|p| p.1 > floor).collect();
    let horizon = *times.last().expect("nonempty");
    let start = times[0] + (1.0 - late_fraction) * (horizon - times[0]);
    let late: Vec<(f64, f64)> = above.iter().copied().filter(|p| p.0 >= start).collect();
    if late.len() >= MIN_LATE_POINTS {
        decay_rate(&late)
    } else {
        // The response sank below the floor early; use the last half of
        // what is still measurable.
        decay_rate(&above[above.len() / 2..])
    }
}

/// Fits per-edge constants and checks the envelope on the full run.
///
/// `α` comes from a log-linear fit on the late free response, `C` is the
/// smallest constant making the exponential dominate the free response,
/// `β` is the smallest gain bounding the forced response by the exact input
/// supremum. The check itself is on `runs.full` with
/// `tol = 1e−6 (1 + ‖z(0)‖)`.
pub fn fit_envelope(
    runs: &EnvelopeRuns,
    _decomp: &LevelDecomposition,
    options: &EnvelopeOptions,
) -> Result<EnvelopeFit, EnvelopeError> {
    let (full, free, forced) = (&runs.full, &runs.free, &runs.forced);
    if full.is_empty() {
        return Err(EnvelopeError::EmptyTrace);
    }
    if free.times != full.times || forced.times != full.times || free.edges != full.edges || forced.edges != full.edges
    {
        return Err(EnvelopeError::MismatchedRuns);
    }
    let times = &full.times;
    let initial_error = full.error_norm(0);
    let tolerance = 1e-6 * (1.0 + initial_error);
    let u = &full.input_sup;
    let degenerate = initial_error == 0.0 && u.iter().all(|&x| x == 0.0);

    let mut edges = Vec::with_capacity(full.edges.len());
    let mut max_violation = f64::NEG_INFINITY;
    let mut rates_ok = true;
    for (e, &(from, to)) in full.edges.iter().enumerate() {
        let free_norms: Vec<f64> = free.errors.iter().map(|row| row[e].norm()).collect();
        let alpha = if initial_error > 0.0 {
            fit_alpha(times, &free_norms, options.late_fraction)
        } else {
            None
        };
        if let Some(a) = alpha {
            rates_ok &= a > 0.0;
        }

        let rate = alpha.unwrap_or(0.0);
        let c = if initial_error > 0.0 {
            times
                .iter()
                .zip(&free_norms)
                .filter(|(_, &z)| z > 0.5 * tolerance)
                .map(|(&t, &z)| z * (rate * t).exp() / initial_error)
                .fold(0.0, f64::max)
        } else {
            0.0
        };

        let beta = forced
            .errors
            .iter()
            .zip(u)
            .filter(|(_, &ut)| ut > 0.0)
            .map(|(row, &ut)| row[e].norm() / ut)
            .fold(0.0, f64::max);

        for (k, &t) in times.iter().enumerate() {
            let bound = c * (-rate * t).exp() * initial_error + beta * u[k];
            max_violation = max_violation.max(full.errors[k][e].norm() - bound);
        }
        edges.push(EdgeEnvelope {
            from,
            to,
            c,
            alpha,
            beta,
        });
    }
    if full.edges.is_empty() {
        max_violation = 0.0;
    }
    let pass = degenerate || (rates_ok && max_violation <= tolerance);
    Ok(EnvelopeFit {
        edges,
        pass,
        max_violation,
        tolerance,
        initial_error,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::corpus;
    use crate::criterion::check;
    use crate::levels::decompose;
    use crate::synthesis::{synthesize, SplitStrategy};

    fn chain() -> (FormationSpec, LevelDecomposition, ControllerSet) {
        let spec = corpus::example2();
        let d = decompose(&spec).unwrap();
        let r = check(&spec, &d, &Tolerances::default()).unwrap();
        let c = synthesize(&spec, &d, &r, &SplitStrategy::ParentOnly, &Tolerances::default()).unwrap();
        (spec, d, c)
    }

    fn x0() -> Vec<DVector<f64>> {
        vec![
            DVector::from_column_slice(&[0.4, -0.2]),
            DVector::from_column_slice(&[1.5, 0.7]),
            DVector::from_column_slice(&[-2.0, 0.9]),
        ]
    }

    #[test]
    fn decay_rate_of_exact_exponential() {
        let pts: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.1, 3.0 * (-0.7 * k as f64 * 0.1).exp())).collect();
        assert!((decay_rate(&pts).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(decay_rate(&pts[..1]), None);
    }

    #[test]
    fn chain_free_response_passes() {
        let (spec, d, c) = chain();
        let tr = simulate(&spec, &d, &c, &x0(), &[LeaderSignal::Zero], 20.0, None).unwrap();
        let fit = fit_envelope(&EnvelopeRuns::unforced(tr), &d, &EnvelopeOptions::default()).unwrap();
        assert!(fit.pass, "{fit:?}");
        assert!(fit.edges.iter().all(|e| e.alpha.unwrap() > 0.0));
    }

    #[test]
    fn zero_trace_is_vacuous() {
        let (spec, d, c) = chain();
        let ideal = ideal_initial_states(&d, &DVector::zeros(2));
        let tr = simulate(&spec, &d, &c, &ideal, &[LeaderSignal::Zero], 2.0, None).unwrap();
        let fit = fit_envelope(&EnvelopeRuns::unforced(tr), &d, &EnvelopeOptions::default()).unwrap();
        assert!(fit.pass && fit.degenerate);
        assert!(fit.edges.iter().all(|e| e.alpha.is_none()));
    }

    #[test]
    fn destabilized_controller_fails() {
        let (spec, d, mut c) = chain();
        for f in &mut c.followers {
            f.s = -&f.s;
        }
        let tr = simulate(&spec, &d, &c, &x0(), &[LeaderSignal::Zero], 10.0, Some(1e-3)).unwrap();
        let fit = fit_envelope(&EnvelopeRuns::unforced(tr), &d, &EnvelopeOptions::default()).unwrap();
        assert!(!fit.pass);
    }

    #[test]
    fn forced_triangle_with_sinusoid() {
        let spec = corpus::triangle();
        let d = decompose(&spec).unwrap();
        let tol = Tolerances::default();
        let r = check(&spec, &d, &tol).unwrap();
        let c = synthesize(&spec, &d, &r, &SplitStrategy::ParentOnly, &tol).unwrap();
        // B_1 = 0 in this instance, so give the leader an input channel.
        let mut spec = spec;
        spec.agents[0].b = nalgebra::DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let sig: LeaderSignal = "sin:0.8:1.5".parse().unwrap();
        let runs = envelope_runs(&spec, &d, &c, &x0(), &[sig], 20.0, None).unwrap();
        let fit = fit_envelope(&runs, &d, &EnvelopeOptions::default()).unwrap();
        assert!(fit.pass, "{fit:?}");
        assert!(fit.edges.iter().any(|e| e.beta > 0.0));
    }
}
