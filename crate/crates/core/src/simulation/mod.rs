//! Closed-loop simulation with fixed-step RK4, the error envelope check and
//! algebraic identities evaluated on trajectories.
//!
//! The integrator works in leader-relative coordinates: leaders carry their
//! own state `x_L`, followers carry `e_i = x_i + D_i − x_{l_i}`. The map is
//! linear and invertible, so this is the same closed loop, but the edge
//! errors no longer inherit the rounding of a possibly exponentially growing
//! leader state.

mod envelope;
mod export;
mod identities;
mod signals;

pub use envelope::{envelope_runs, fit_envelope, EdgeEnvelope, EnvelopeError, EnvelopeFit, EnvelopeRuns};
pub use export::{write_csv, write_svg};
pub use identities::{chain_residual, error_dynamics_check, IdentityError};
pub use signals::LeaderSignal;

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};
use serde::Serialize;
use thiserror::Error;

use crate::criterion::{check_controller_shape, VerifyError};
use crate::levels::LevelDecomposition;
use crate::model::FormationSpec;
use crate::synthesis::ControllerSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("step {dt} exceeds the stability cap: dt · max ‖Ã_i‖_F = {product} > 1")]
    StepTooLarge { dt: f64, product: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("initial state: {0}")]
    InitialState(String),
    #[error("leader signals: {0}")]
    Signals(String),
    #[error(transparent)]
    Controller(#[from] VerifyError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMetadata {
    pub integrator: &'static str,
    pub coordinates: &'static str,
    /// Nominal step; steps next to signal breakpoints are shorter.
    pub dt: f64,
    pub horizon: f64,
    pub steps: usize,
    /// Signal discontinuities that are grid points.
    pub breakpoints: Vec<f64>,
}

/// Sampled closed-loop trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    /// `states[k][i] = x_i(t_k)`.
    pub states: Vec<Vec<DVector<f64>>>,
    /// `relative[k][i]`: `x_i` for leaders, `x_i + D_i − x_{l_i}` for followers.
    pub relative: Vec<Vec<DVector<f64>>>,
    /// Edges `(i, j)` in output order (renumbered `i`, then renumbered `j`).
    pub edges: Vec<(usize, usize)>,
    /// `d_ij` per entry of `edges`.
    pub displacements: Vec<DVector<f64>>,
    /// `errors[k][e] = z_ij(t_k)` for `edges[e] = (i, j)`.
    pub errors: Vec<Vec<DVector<f64>>>,
    /// `inputs[k][i] = u_i(t_k)` for every agent.
    pub inputs: Vec<Vec<DVector<f64>>>,
    /// `Σ_leaders sup_{[0, t_k]} ‖u_s‖`, exact from the signal description.
    pub input_sup: Vec<f64>,
    pub metadata: TraceMetadata,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn edge_index(&self, from: usize, to: usize) -> Option<usize> {
        self.edges.iter().position(|&e| e == (from, to))
    }

    /// `‖z(t_k)‖_F` over all edges.
    pub fn error_norm(&self, k: usize) -> f64 {
        self.errors[k].iter().map(|z| z.norm_squared()).sum::<f64>().sqrt()
    }

    /// `max_k ‖z(t_k)‖_F`.
    pub fn max_error_norm(&self) -> f64 {
        (0..self.len()).map(|k| self.error_norm(k)).fold(0.0, f64::max)
    }

    /// Largest `‖z_ij − (x_i − x_j + d_ij)‖ / (1 + ‖x_i‖ + ‖x_j‖)` on the grid.
    pub fn recompute_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            for (e, &(i, j)) in self.edges.iter().enumerate() {
                let (xi, xj) = (&self.states[k][i], &self.states[k][j]);
                let direct = xi - xj + &self.displacements[e];
                let rel = (&self.errors[k][e] - direct).norm() / (1.0 + xi.norm() + xj.norm());
                worst = worst.max(rel);
            }
        }
        worst
    }
}

/// `A_i + B_i S_i` for followers, `A_i` for leaders.
pub fn closed_loop_matrices(spec: &FormationSpec, ctrl: &ControllerSet) -> Vec<DMatrix<f64>> {
    spec.agents
        .iter()
        .enumerate()
        .map(|(i, agent)| match ctrl.follower(i) {
            Some(f) => &agent.a + &agent.b * &f.s,
            None => agent.a.clone(),
        })
        .collect()
}

fn max_closed_loop_norm(spec: &FormationSpec, ctrl: &ControllerSet) -> f64 {
    closed_loop_matrices(spec, ctrl)
        .iter()
        .map(|m| m.norm())
        .fold(0.0, f64::max)
}

/// `min(1e-2, 0.1 / (1 + max ‖Ã_i‖_F))`.
pub fn default_step(spec: &FormationSpec, ctrl: &ControllerSet) -> f64 {
    (0.1 / (1.0 + max_closed_loop_norm(spec, ctrl))).min(1e-2)
}

/// Initial states `x_{0i} = x₀ − D_i`, for which every edge error starts at zero.
pub fn ideal_initial_states(decomp: &LevelDecomposition, x0: &DVector<f64>) -> Vec<DVector<f64>> {
    decomp.cumulative_offset.iter().map(|d| x0 - d).collect()
}

struct FollowerBlock {
    node: usize,
    leader: usize,
    /// `A_i + B_i(S_i + Σ K_is) − A_{l_i}`; `None` when exactly zero.
    leader_gain: Option<DMatrix<f64>>,
    a_tilde: DMatrix<f64>,
    /// `(s, B_i K_is)` for follower parents.
    couplings: Vec<(usize, DMatrix<f64>)>,
    /// `(l_s, B_i K_is)` for parents reaching another leader.
    cross: Vec<(usize, DMatrix<f64>)>,
    forcing: DVector<f64>,
    // For reconstructing the input u_i.
    total_gain: DMatrix<f64>,
    s: DMatrix<f64>,
    parent_gains: Vec<(usize, usize, DMatrix<f64>)>,
    input_offset: DVector<f64>,
}

/// Closed loop in leader-relative coordinates.
struct RelativeSystem {
    n: usize,
    m: usize,
    /// Block offset of each agent in the stacked state (renumbered position · n).
    offset: Vec<usize>,
    leaders: Vec<usize>,
    leader_a: Vec<DMatrix<f64>>,
    leader_b: Vec<DMatrix<f64>>,
    /// Position of each agent in `leaders`, if it is one.
    leader_slot: Vec<Option<usize>>,
    followers: Vec<FollowerBlock>,
}

impl RelativeSystem {
    fn new(spec: &FormationSpec, decomp: &LevelDecomposition, ctrl: &ControllerSet) -> Self {
        let n = spec.n;
        let offset: Vec<usize> = decomp.rank.iter().map(|&r| r * n).collect();
        let leaders = decomp.leaders.clone();
        let mut leader_slot = vec![None; spec.len()];
        for (k, &l) in leaders.iter().enumerate() {
            leader_slot[l] = Some(k);
        }
        let (big_m, small_m) = crate::criterion::closed_loop_terms(spec, decomp, ctrl);

        let mut followers = Vec::new();
        for i in decomp.followers() {
            let agent = &spec.agents[i];
            let leader = decomp.leader_reach[i];
            let (s, gains, offset_k) = match ctrl.follower(i) {
                Some(f) => (
                    f.s.clone(),
                    f.parent_gains.iter().map(|g| (g.parent, g.gain.clone())).collect::<Vec<_>>(),
                    f.offset.clone(),
                ),
                None => (DMatrix::zeros(spec.m, n), Vec::new(), DVector::zeros(spec.m)),
            };
            let mut total_gain = s.clone();
            for (_, g) in &gains {
                total_gain += g;
            }
            let g = &big_m[i] - &spec.agents[leader].a;
            let mut couplings = Vec::new();
            let mut cross = Vec::new();
            let mut parent_gains = Vec::new();
            let mut input_offset = &offset_k - &s * &decomp.cumulative_offset[i];
            for (p, k) in &gains {
                let bk = &agent.b * k;
                if !decomp.is_leader(*p) {
                    couplings.push((*p, bk.clone()));
                }
                let lp = decomp.leader_reach[*p];
                if lp != leader {
                    cross.push((lp, bk));
                }
                input_offset -= k * &decomp.cumulative_offset[*p];
                parent_gains.push((*p, lp, k.clone()));
            }
            followers.push(FollowerBlock {
                node: i,
                leader,
                leader_gain: if g.iter().all(|&x| x == 0.0) { None } else { Some(g) },
                a_tilde: &agent.a + &agent.b * &s,
                couplings,
                cross,
                forcing: small_m[i].clone(),
                total_gain,
                s,
                parent_gains,
                input_offset,
            });
        }
        RelativeSystem {
            n,
            m: spec.m,
            offset,
            leader_a: leaders.iter().map(|&l| spec.agents[l].a.clone()).collect(),
            leader_b: leaders.iter().map(|&l| spec.agents[l].b.clone()).collect(),
            leaders,
            leader_slot,
            followers,
        }
    }

    fn block<'a>(&self, y: &'a DVector<f64>, i: usize) -> DVectorView<'a, f64> {
        y.rows(self.offset[i], self.n)
    }

    fn block_mut<'a>(&self, y: &'a mut DVector<f64>, i: usize) -> DVectorViewMut<'a, f64> {
        y.rows_mut(self.offset[i], self.n)
    }

    /// `dy` for stacked state `y` and leader inputs already multiplied by `B_L`.
    fn derivative(&self, y: &DVector<f64>, leader_push: &[DVector<f64>], dy: &mut DVector<f64>) {
        for (k, &l) in self.leaders.iter().enumerate() {
            let yl = self.block(y, l).into_owned();
            let mut out = self.block_mut(dy, l);
            out.gemv(1.0, &self.leader_a[k], &yl, 0.0);
            out += &leader_push[k];
        }
        for f in &self.followers {
            let slot = self.leader_slot[f.leader].expect("leader reach is a leader");
            let yl = self.block(y, f.leader).into_owned();
            let yi = self.block(y, f.node).into_owned();
            let mut acc = &f.forcing - &leader_push[slot];
            acc.gemv(1.0, &f.a_tilde, &yi, 1.0);
            if let Some(g) = &f.leader_gain {
                acc.gemv(1.0, g, &yl, 1.0);
            }
            for (s, bk) in &f.couplings {
                acc.gemv(1.0, bk, &self.block(y, *s), 1.0);
            }
            for (ls, bk) in &f.cross {
                let diff = self.block(y, *ls) - &yl;
                acc.gemv(1.0, bk, &diff, 1.0);
            }
            self.block_mut(dy, f.node).copy_from(&acc);
        }
    }
}

fn build_grid(horizon: f64, dt: f64, breakpoints: &[f64]) -> Vec<f64> {
    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let mut grid: Vec<f64> = (0..=steps).map(|k| if k == steps { horizon } else { k as f64 * h }).collect();
    grid.extend_from_slice(breakpoints);
    grid.sort_by(f64::total_cmp);
    // Merge points closer than a tiny fraction of a step; a breakpoint wins.
    let mut out: Vec<f64> = Vec::with_capacity(grid.len());
    for t in grid {
        match out.last_mut() {
            Some(last) if (t - *last).abs() <= 1e-9 * h => {
                if breakpoints.contains(&t) && *last != 0.0 {
                    *last = t;
                }
            }
            _ => out.push(t),
        }
    }
    if let Some(last) = out.last_mut() {
        *last = horizon;
    }
    out
}

/// Integrates the closed loop with classic RK4.
///
/// `x0` holds one initial state per agent (node order); `signals` holds one
/// signal per leader in ascending leader order. With `dt = None` the default
/// step is used. Steps are aligned to signal breakpoints.
pub fn simulate(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    ctrl: &ControllerSet,
    x0: &[DVector<f64>],
    signals: &[LeaderSignal],
    horizon: f64,
    dt: Option<f64>,
) -> Result<SimulationTrace, SimulationError> {
    check_controller_shape(spec, decomp, ctrl)?;
    let (n, m, l) = (spec.n, spec.m, spec.len());
    if x0.len() != l || x0.iter().any(|x| x.len() != n) {
        return Err(SimulationError::InitialState(format!("expected {l} vectors of length {n}")));
    }
    if x0.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(SimulationError::InitialState("non-finite entry".into()));
    }
    if signals.len() != decomp.l0() {
        return Err(SimulationError::Signals(format!(
            "{} signals given for {} leaders",
            signals.len(),
            decomp.l0()
        )));
    }
    for s in signals {
        s.validate(m).map_err(SimulationError::Signals)?;
    }
    let dt = dt.unwrap_or_else(|| default_step(spec, ctrl));
    if !(horizon > 0.0 && horizon.is_finite()) || dt.is_nan() || dt <= 0.0 || dt > horizon {
        return Err(SimulationError::InvalidGrid(format!("need T > dt > 0, got T = {horizon}, dt = {dt}")));
    }
    let product = dt * max_closed_loop_norm(spec, ctrl);
    if product > 1.0 {
        return Err(SimulationError::StepTooLarge { dt, product });
    }

    let mut breakpoints: Vec<f64> = signals.iter().flat_map(|s| s.breakpoints(horizon)).collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    let grid = build_grid(horizon, dt, &breakpoints);

    let sys = RelativeSystem::new(spec, decomp, ctrl);
    let mut y = DVector::zeros(n * l);
    for i in 0..l {
        let value = if decomp.is_leader(i) {
            x0[i].clone()
        } else {
            &x0[i] + &decomp.cumulative_offset[i] - &x0[decomp.leader_reach[i]]
        };
        sys.block_mut(&mut y, i).copy_from(&value);
    }

    let edges = output_edges(spec, decomp);
    let displacements: Vec<DVector<f64>> = edges
        .iter()
        .map(|&(i, j)| spec.edge(i, j).expect("edge exists").d.clone())
        .collect();
    // d_ij − D_i + D_j: zero on consistent edges.
    let edge_bias: Vec<DVector<f64>> = edges
        .iter()
        .zip(&displacements)
        .map(|(&(i, j), d)| d - &decomp.cumulative_offset[i] + &decomp.cumulative_offset[j])
        .collect();

    let mut trace = SimulationTrace {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        relative: Vec::with_capacity(grid.len()),
        edges,
        displacements,
        errors: Vec::with_capacity(grid.len()),
        inputs: Vec::with_capacity(grid.len()),
        input_sup: Vec::with_capacity(grid.len()),
        metadata: TraceMetadata {
            integrator: "rk4",
            coordinates: "leader-relative",
            dt,
            horizon,
            steps: grid.len() - 1,
            breakpoints: breakpoints.clone(),
        },
    };

    let push = |t: f64, mid: f64| -> Vec<DVector<f64>> {
        signals
            .iter()
            .zip(&sys.leader_b)
            .map(|(s, b)| {
                let at = if s.is_piecewise() { mid } else { t };
                b * s.value(at, m)
            })
            .collect()
    };

    record(&mut trace, &sys, decomp, signals, &edge_bias, grid[0], &y);
    let mut k1 = DVector::zeros(n * l);
    let mut k2 = DVector::zeros(n * l);
    let mut k3 = DVector::zeros(n * l);
    let mut k4 = DVector::zeros(n * l);
    for w in grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let h = t1 - t0;
        let tm = t0 + 0.5 * h;
        let (p0, pm, p1) = (push(t0, tm), push(tm, tm), push(t1, tm));
        sys.derivative(&y, &p0, &mut k1);
        sys.derivative(&(&y + &k1 * (0.5 * h)), &pm, &mut k2);
        sys.derivative(&(&y + &k2 * (0.5 * h)), &pm, &mut k3);
        sys.derivative(&(&y + &k3 * h), &p1, &mut k4);
        y += (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SimulationError::NonFiniteState { t: t1 });
        }
        record(&mut trace, &sys, decomp, signals, &edge_bias, t1, &y);
    }
    Ok(trace)
}

/// Edges ordered by the renumbered position of `i`, then of `j`.
pub fn output_edges(spec: &FormationSpec, decomp: &LevelDecomposition) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = spec.edges.iter().map(|e| (e.from, e.to)).collect();
    edges.sort_by_key(|&(i, j)| (decomp.rank[i], decomp.rank[j]));
    edges
}

fn record(
    trace: &mut SimulationTrace,
    sys: &RelativeSystem,
    decomp: &LevelDecomposition,
    signals: &[LeaderSignal],
    edge_bias: &[DVector<f64>],
    t: f64,
    y: &DVector<f64>,
) {
    let l = decomp.len();
    let relative: Vec<DVector<f64>> = (0..l).map(|i| sys.block(y, i).into_owned()).collect();
    let states: Vec<DVector<f64>> = (0..l)
        .map(|i| {
            if decomp.is_leader(i) {
                relative[i].clone()
            } else {
                &relative[decomp.leader_reach[i]] - &decomp.cumulative_offset[i] + &relative[i]
            }
        })
        .collect();

    let errors = trace
        .edges
        .iter()
        .zip(edge_bias)
        .map(|(&(i, j), bias)| {
            let (li, lj) = (decomp.leader_reach[i], decomp.leader_reach[j]);
            let ei = if decomp.is_leader(i) { None } else { Some(&relative[i]) };
            let ej = if decomp.is_leader(j) { None } else { Some(&relative[j]) };
            let mut z = bias.clone();
            if li != lj {
                z += &relative[li] - &relative[lj];
            }
            if let Some(e) = ei {
                z += e;
            }
            if let Some(e) = ej {
                z -= e;
            }
            z
        })
        .collect();

    let mut inputs = vec![DVector::zeros(sys.m); l];
    for (k, &leader) in sys.leaders.iter().enumerate() {
        inputs[leader] = signals[k].value(t, sys.m);
    }
    for f in &sys.followers {
        let xl = &relative[f.leader];
        let mut u = &f.total_gain * xl + &f.s * &relative[f.node] + &f.input_offset;
        for (p, lp, k) in &f.parent_gains {
            if *lp != f.leader {
                u += k * (&relative[*lp] - xl);
            }
            if !decomp.is_leader(*p) {
                u += k * &relative[*p];
            }
        }
        inputs[f.node] = u;
    }

    trace.times.push(t);
    trace.input_sup.push(signals.iter().map(|s| s.sup_norm(t)).sum());
    trace.states.push(states);
    trace.relative.push(relative);
    trace.errors.push(errors);
    trace.inputs.push(inputs);
}
