//! Optimal control of the flow by a distributed force: finite control bases,
//! admissible coefficient sets with projections, the quadratic tracking cost,
//! a finite-difference reduced gradient, and a projected-gradient optimizer
//! with a simplex fallback.

use crate::calculus::norm_v_noslip;
use crate::error::Error;
use crate::field::VelocityField;
use crate::grid::Grid;
use crate::solver::{solve_flow, FlowProblem, SolveReport, SolverConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub const MAX_BASIS: usize = 64;

/// Orthonormal (in L2) family of force shapes; controls are coefficient
/// vectors against this basis.
#[derive(Debug, Clone)]
pub struct ControlBasis {
    grid: Grid,
    modes: Vec<VelocityField>,
}

impl ControlBasis {
    /// Orthonormalize the given shapes by modified Gram-Schmidt. Fails on
    /// (numerically) dependent shapes or more than `MAX_BASIS` of them.
    pub fn new(grid: &Grid, shapes: Vec<VelocityField>) -> Result<Self, Error> {
        if shapes.is_empty() || shapes.len() > MAX_BASIS {
            return Err(Error::Control(format!(
                "control basis needs 1..={MAX_BASIS} shapes, got {}",
                shapes.len()
            )));
        }
        let mut modes: Vec<VelocityField> = Vec::with_capacity(shapes.len());
        for (k, shape) in shapes.into_iter().enumerate() {
            if shape.grid() != grid {
                return Err(Error::GridMismatch);
            }
            let mut w = shape;
            for m in &modes {
                let c = w.l2_inner(m);
                w.axpy(-c, m);
            }
            let n = w.l2_norm();
            if n < 1e-12 {
                return Err(Error::Control(format!(
                    "control shape {k} is linearly dependent on the previous ones"
                )));
            }
            w.scale(1.0 / n);
            modes.push(w);
        }
        let basis = ControlBasis {
            grid: grid.clone(),
            modes,
        };
        let err = basis.gram_defect();
        if err > 1e-12 {
            return Err(Error::Control(format!(
                "orthonormalization defect {err} exceeds 1e-12"
            )));
        }
        Ok(basis)
    }

    /// Smooth default family: streamwise force shapes `cos(k pi y / L)` and
    /// `sin` pairs across the first wall axis.
    pub fn harmonic(grid: &Grid, count: usize) -> Result<Self, Error> {
        use std::f64::consts::PI;
        let wall_axis = (0..grid.dim())
            .find(|&a| grid.bc(a) == crate::grid::BoundaryKind::Wall)
            .ok_or_else(|| Error::Control("harmonic basis needs a wall axis".into()))?;
        let force_axis = if wall_axis == 0 { 1 } else { 0 };
        let ly = grid.extent(wall_axis);
        let mut shapes = Vec::with_capacity(count);
        for k in 0..count {
            let mode = k / 2;
            let odd = k % 2 == 1;
            shapes.push(VelocityField::sample(grid, |c, x| {
                if c != force_axis {
                    return 0.0;
                }
                let t = PI * x[wall_axis] / ly;
                let freq = mode as f64 + 1.0;
                if odd {
                    (freq * t).sin()
                } else {
                    (freq * t).cos()
                }
            }));
        }
        Self::new(grid, shapes)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mode(&self, k: usize) -> &VelocityField {
        &self.modes[k]
    }

    /// `u = sum_k a_k b_k` on faces.
    pub fn expand(&self, coeffs: &[f64]) -> Result<VelocityField, Error> {
        if coeffs.len() != self.modes.len() {
            return Err(Error::Control(format!(
                "expected {} coefficients, got {}",
                self.modes.len(),
                coeffs.len()
            )));
        }
        let mut u = VelocityField::zeros(&self.grid);
        for (a, m) in coeffs.iter().zip(&self.modes) {
            u.axpy(*a, m);
        }
        Ok(u)
    }

    /// Coefficients of the L2 projection of a field onto the basis span.
    pub fn coefficients(&self, u: &VelocityField) -> Vec<f64> {
        self.modes.iter().map(|m| u.l2_inner(m)).collect()
    }

    /// Worst deviation of the Gram matrix from the identity.
    pub fn gram_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.modes.len() {
            for j in 0..self.modes.len() {
                let g = self.modes[i].l2_inner(&self.modes[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// Admissible coefficient sets (all closed, convex except `Finite`).
#[derive(Debug, Clone)]
pub enum AdmissibleSet {
    /// Euclidean ball of the given radius (equals the L2 ball for controls
    /// thanks to orthonormality).
    Ball { radius: f64 },
    /// Componentwise bounds.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Explicit finite list of admissible coefficient vectors.
    Finite { points: Vec<Vec<f64>> },
}

impl AdmissibleSet {
    pub fn validate(&self, dim: usize) -> Result<(), Error> {
        match self {
            AdmissibleSet::Ball { radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::Control(format!(
                        "ball radius must be positive, got {radius}"
                    )));
                }
            }
            AdmissibleSet::Box { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(Error::Control("box bounds must match basis size".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(Error::Control("box bounds must satisfy lo <= hi".into()));
                }
            }
            AdmissibleSet::Finite { points } => {
                if points.is_empty() || points.iter().any(|p| p.len() != dim) {
                    return Err(Error::Control(
                        "finite admissible set needs nonempty points of basis size".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Euclidean projection (nearest point for `Finite`).
    pub fn project(&self, a: &[f64]) -> Vec<f64> {
        match self {
            AdmissibleSet::Ball { radius } => {
                let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n <= *radius {
                    a.to_vec()
                } else {
                    a.iter().map(|x| x * radius / n).collect()
                }
            }
            AdmissibleSet::Box { lo, hi } => a
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(x, (l, h))| x.clamp(*l, *h))
                .collect(),
            AdmissibleSet::Finite { points } => points
                .iter()
                .min_by(|p, q| {
                    dist2(p, a)
                        .partial_cmp(&dist2(q, a))
                        .expect("finite coefficients")
                })
                .expect("nonempty")
                .clone(),
        }
    }

    pub fn contains(&self, a: &[f64], tol: f64) -> bool {
        let p = self.project(a);
        dist2(&p, a).sqrt() <= tol
    }
}

fn dist2(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Quadratic tracking cost
/// `J(a) = lambda1 ||v(a) - v_target||_V^2 + lambda2 |a - a_target|^2`
/// (the control mismatch is an L2 norm via orthonormality of the basis).
#[derive(Debug, Clone)]
pub struct CostFunctional {
    pub lambda1: f64,
    pub lambda2: f64,
    pub v_target: VelocityField,
    pub a_target: Vec<f64>,
}

impl CostFunctional {
    pub fn validate(&self, dim: usize) -> Result<(), Error> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 || self.lambda1 + self.lambda2 <= 0.0 {
            return Err(Error::Control(
                "cost weights must be nonnegative, not both zero".into(),
            ));
        }
        if self.a_target.len() != dim {
            return Err(Error::Control("target coefficients must match basis".into()));
        }
        Ok(())
    }
}

/// The reduced (control-to-cost) problem: template flow problem whose control
/// is replaced by basis expansions.
pub struct ReducedProblem<'a> {
    pub template: &'a FlowProblem,
    pub basis: &'a ControlBasis,
    pub cost: &'a CostFunctional,
    pub solver: &'a SolverConfig,
}

impl ReducedProblem<'_> {
    pub fn flow_for(&self, coeffs: &[f64]) -> Result<FlowProblem, Error> {
        let mut p = self.template.clone();
        p.u = self.basis.expand(coeffs)?;
        Ok(p)
    }

    /// One forward solve and the cost it incurs.
    pub fn evaluate(&self, coeffs: &[f64]) -> Result<(f64, SolveReport), Error> {
        let p = self.flow_for(coeffs)?;
        let report = solve_flow(&p, self.solver)?;
        let mut diff = report.v.clone();
        diff.axpy(-1.0, &self.cost.v_target);
        let track = norm_v_noslip(&diff);
        let ctrl = dist2(coeffs, &self.cost.a_target);
        Ok((
            self.cost.lambda1 * track * track + self.cost.lambda2 * ctrl,
            report,
        ))
    }

    /// Central-difference reduced gradient; `2 K` forward solves.
    pub fn reduced_gradient(&self, coeffs: &[f64], step: f64) -> Result<Vec<f64>, Error> {
        let mut grad = Vec::with_capacity(coeffs.len());
        for k in 0..coeffs.len() {
            let mut plus = coeffs.to_vec();
            plus[k] += step;
            let mut minus = coeffs.to_vec();
            minus[k] -= step;
            let (jp, _) = self.evaluate(&plus)?;
            let (jm, _) = self.evaluate(&minus)?;
            grad.push((jp - jm) / (2.0 * step));
        }
        Ok(grad)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub initial_step: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub fd_step: f64,
    /// Stop when the projected step no longer moves the coefficients.
    pub tol_step: f64,
    /// Stop when the cost falls below this absolute floor.
    pub tol_cost: f64,
    pub seed: u64,
    pub multi_start: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 500,
            initial_step: 1.0,
            backtrack: 0.5,
            max_backtracks: 40,
            fd_step: 1e-5,
            tol_step: 1e-10,
            tol_cost: 0.0,
            seed: 0,
            multi_start: true,
        }
    }
}

/// Result of an optimization run: the best control found, its flow, and the
/// (nonincreasing) history of accepted cost values.
pub struct OptimalPair {
    pub coeffs: Vec<f64>,
    pub u: VelocityField,
    pub report: SolveReport,
    pub cost: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// For finite admissible sets: the cost of every candidate, in input order.
    pub candidates: Option<Vec<f64>>,
}

/// Minimize the reduced cost over the admissible set: enumeration for finite
/// sets, the closed-form answer when only the control term is active,
/// projected gradient with Armijo backtracking otherwise, and a Nelder-Mead
/// polish for small bases when the gradient stalls early.
pub fn optimize(
    reduced: &ReducedProblem,
    admissible: &AdmissibleSet,
    config: &OptimizerConfig,
) -> Result<OptimalPair, Error> {
    let dim = reduced.basis.len();
    admissible.validate(dim)?;
    reduced.cost.validate(dim)?;

    if let AdmissibleSet::Finite { points } = admissible {
        return enumerate_finite(reduced, points, config);
    }

    if reduced.cost.lambda1 == 0.0 {
        // pure control tracking: the projection of the target is optimal
        let coeffs = admissible.project(&reduced.cost.a_target);
        let (cost, report) = reduced.evaluate(&coeffs)?;
        let u = reduced.basis.expand(&coeffs)?;
        return Ok(OptimalPair {
            coeffs,
            u,
            report,
            cost,
            history: vec![cost],
            iterations: 1,
            evaluations: 1,
            candidates: None,
        });
    }

    let mut starts: Vec<Vec<f64>> = vec![admissible.project(&vec![0.0; dim])];
    if config.multi_start {
        starts.push(admissible.project(&reduced.cost.a_target));
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let random: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        starts.push(admissible.project(&random));
    }

    let mut best: Option<OptimalPair> = None;
    let mut budget = config.max_iterations;
    for start in starts {
        if budget == 0 {
            break;
        }
        let run = projected_gradient(reduced, admissible, &start, budget, config)?;
        budget = budget.saturating_sub(run.iterations);
        let better = best
            .as_ref()
            .map(|b| run.cost < b.cost)
            .unwrap_or(true);
        if better {
            best = Some(run);
        }
        if best.as_ref().map(|b| b.cost <= config.tol_cost).unwrap_or(false) {
            break;
        }
    }
    let mut best = best.expect("at least one start");

    // simplex polish for small problems if gradient descent left slack
    if dim <= 16 && budget > 0 && best.cost > config.tol_cost {
        if let Some(polished) = nelder_mead(reduced, admissible, &best.coeffs, budget, config)? {
            if polished.cost < best.cost {
                let mut history = best.history.clone();
                for &c in &polished.history {
                    if c < *history.last().unwrap_or(&f64::INFINITY) {
                        history.push(c);
                    }
                }
                best = OptimalPair { history, ..polished };
            }
        }
    }
    Ok(best)
}

fn enumerate_finite(
    reduced: &ReducedProblem,
    points: &[Vec<f64>],
    _config: &OptimizerConfig,
) -> Result<OptimalPair, Error> {
    let mut best: Option<(f64, Vec<f64>, SolveReport)> = None;
    let mut history = Vec::new();
    let mut candidates = Vec::with_capacity(points.len());
    for p in points {
        let (cost, report) = reduced.evaluate(p)?;
        candidates.push(cost);
        if best.as_ref().map(|b| cost < b.0).unwrap_or(true) {
            history.push(cost);
            best = Some((cost, p.clone(), report));
        }
    }
    let (cost, coeffs, report) = best.expect("nonempty set");
    let u = reduced.basis.expand(&coeffs)?;
    Ok(OptimalPair {
        coeffs,
        u,
        report,
        cost,
        history,
        iterations: points.len(),
        evaluations: candidates.len(),
        candidates: Some(candidates),
    })
}

fn projected_gradient(
    reduced: &ReducedProblem,
    admissible: &AdmissibleSet,
    start: &[f64],
    max_iterations: usize,
    config: &OptimizerConfig,
) -> Result<OptimalPair, Error> {
    let mut a = admissible.project(start);
    let (mut cost, mut report) = reduced.evaluate(&a)?;
    let mut evaluations = 1;
    let mut history = vec![cost];
    let mut step = config.initial_step;
    let mut iterations = 0;

    while iterations < max_iterations {
        iterations += 1;
        if cost <= config.tol_cost {
            break;
        }
        let scale = 1.0 + a.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let grad = reduced.reduced_gradient(&a, config.fd_step * scale)?;
        evaluations += 2 * a.len();
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            break;
        }
        let mut accepted = false;
        let mut t = step;
        for _ in 0..config.max_backtracks {
            let trial: Vec<f64> = a
                .iter()
                .zip(&grad)
                .map(|(x, g)| x - t * g)
                .collect();
            let trial = admissible.project(&trial);
            let d = dist2(&trial, &a).sqrt();
            if d <= config.tol_step * (1.0 + scale) {
                break;
            }
            let (jc, rep) = reduced.evaluate(&trial)?;
            evaluations += 1;
            // Armijo: sufficient decrease against the projected step length
            if jc <= cost - 1e-4 * d * d / t.max(1e-30) {
                a = trial;
                cost = jc;
                report = rep;
                history.push(cost);
                accepted = true;
                step = (t * 2.0).min(config.initial_step * 1e3);
                break;
            }
            t *= config.backtrack;
        }
        if !accepted {
            break;
        }
    }

    let u = reduced.basis.expand(&a)?;
    Ok(OptimalPair {
        coeffs: a,
        u,
        report,
        cost,
        history,
        iterations,
        evaluations,
        candidates: None,
    })
}

/// Standard Nelder-Mead on the projected coefficients; every vertex is kept
/// admissible by projection. Returns `None` for oversized problems.
fn nelder_mead(
    reduced: &ReducedProblem,
    admissible: &AdmissibleSet,
    start: &[f64],
    max_iterations: usize,
    config: &OptimizerConfig,
) -> Result<Option<OptimalPair>, Error> {
    let dim = start.len();
    if dim > 16 {
        return Ok(None);
    }
    let spread = 0.1 * (1.0 + start.iter().map(|x| x.abs()).fold(0.0, f64::max));
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(dim + 1);
    let mut evaluations = 0;
    let eval = |a: &[f64], evals: &mut usize| -> Result<f64, Error> {
        *evals += 1;
        Ok(reduced.evaluate(a)?.0)
    };
    let p0 = admissible.project(start);
    let j0 = eval(&p0, &mut evaluations)?;
    simplex.push((j0, p0));
    for k in 0..dim {
        let mut p = start.to_vec();
        p[k] += spread;
        let p = admissible.project(&p);
        let j = eval(&p, &mut evaluations)?;
        simplex.push((j, p));
    }

    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        simplex.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite costs"));
        history.push(simplex[0].0);
        if simplex[0].0 <= config.tol_cost {
            break;
        }
        let spread_now = simplex[dim].0 - simplex[0].0;
        if spread_now <= 1e-14 * (1.0 + simplex[0].0.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(_, p)| p[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst.1)
            .map(|(c, w)| c + (c - w))
            .collect();
        let reflect = admissible.project(&reflect);
        let jr = eval(&reflect, &mut evaluations)?;
        if jr < simplex[0].0 {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&worst.1)
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let expand = admissible.project(&expand);
            let je = eval(&expand, &mut evaluations)?;
            simplex[dim] = if je < jr { (je, expand) } else { (jr, reflect) };
        } else if jr < simplex[dim - 1].0 {
            simplex[dim] = (jr, reflect);
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&worst.1)
                .map(|(c, w)| c + 0.5 * (w - c))
                .collect();
            let contract = admissible.project(&contract);
            let jc = eval(&contract, &mut evaluations)?;
            if jc < worst.0 {
                simplex[dim] = (jc, contract);
            } else {
                let bestp = simplex[0].1.clone();
                for v in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = bestp
                        .iter()
                        .zip(&v.1)
                        .map(|(b, p)| b + 0.5 * (p - b))
                        .collect();
                    let shrunk = admissible.project(&shrunk);
                    let js = eval(&shrunk, &mut evaluations)?;
                    *v = (js, shrunk);
                }
            }
        }
    }
    simplex.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite costs"));
    let coeffs = simplex[0].1.clone();
    let (cost, report) = reduced.evaluate(&coeffs)?;
    let u = reduced.basis.expand(&coeffs)?;
    Ok(Some(OptimalPair {
        coeffs,
        u,
        report,
        cost,
        history,
        iterations,
        evaluations,
        candidates: None,
    }))
}

/// Twin experiment: pick true coefficients, record the flow they generate as
/// the tracking target, and check that optimization recovers a cost far below
/// the uncontrolled one.
pub struct TwinExperiment {
    pub truth: Vec<f64>,
    pub optimal: OptimalPair,
    pub baseline_cost: f64,
}

pub fn twin_experiment(
    template: &FlowProblem,
    basis: &ControlBasis,
    truth: &[f64],
    lambda1: f64,
    lambda2: f64,
    admissible: &AdmissibleSet,
    solver: &SolverConfig,
    config: &OptimizerConfig,
) -> Result<TwinExperiment, Error> {
    let mut true_problem = template.clone();
    true_problem.u = basis.expand(truth)?;
    let true_report = solve_flow(&true_problem, solver)?;
    let cost = CostFunctional {
        lambda1,
        lambda2,
        v_target: true_report.v,
        a_target: truth.to_vec(),
    };
    let reduced = ReducedProblem {
        template,
        basis,
        cost: &cost,
        solver,
    };
    let (baseline_cost, _) = reduced.evaluate(&vec![0.0; basis.len()])?;
    let mut cfg = config.clone();
    cfg.tol_cost = cfg.tol_cost.max(1e-8 * baseline_cost);
    let optimal = optimize(&reduced, admissible, &cfg)?;
    Ok(TwinExperiment {
        truth: truth.to_vec(),
        optimal,
        baseline_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template() -> FlowProblem {
        FlowProblem::channel(4, 16, 1.0, 1.0, 0.05, 1.0, 1e-6).unwrap()
    }

    #[test]
    fn basis_is_orthonormal() {
        let p = template();
        let basis = ControlBasis::harmonic(&p.grid, 4).unwrap();
        assert_eq!(basis.len(), 4);
        assert!(basis.gram_defect() <= 1e-12);
        // round trip: coefficients of an expansion reproduce themselves
        let a = [0.3, -1.2, 0.7, 0.01];
        let u = basis.expand(&a).unwrap();
        let b = basis.coefficients(&u);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn projections_are_nonexpansive() {
        let sets = [
            AdmissibleSet::Ball { radius: 0.8 },
            AdmissibleSet::Box {
                lo: vec![-1.0, -0.5, 0.0],
                hi: vec![1.0, 0.5, 0.2],
            },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for set in &sets {
            for _ in 0..200 {
                let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let pa = set.project(&a);
                let pb = set.project(&b);
                assert!(dist2(&pa, &pb) <= dist2(&a, &b) * (1.0 + 1e-12));
                // idempotent
                assert!(dist2(&set.project(&pa), &pa) < 1e-24);
            }
        }
    }

    #[test]
    fn finite_set_projection_picks_nearest() {
        let set = AdmissibleSet::Finite {
            points: vec![vec![0.0, 0.0], vec![1.0, 1.0]],
        };
        assert_eq!(set.project(&[0.9, 0.8]), vec![1.0, 1.0]);
        assert_eq!(set.project(&[0.1, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn lambda1_zero_shortcut() {
        let p = template();
        let basis = ControlBasis::harmonic(&p.grid, 2).unwrap();
        let cost = CostFunctional {
            lambda1: 0.0,
            lambda2: 1.0,
            v_target: VelocityField::zeros(&p.grid),
            a_target: vec![3.0, 0.0],
        };
        let solver = SolverConfig::default();
        let reduced = ReducedProblem {
            template: &p,
            basis: &basis,
            cost: &cost,
            solver: &solver,
        };
        let set = AdmissibleSet::Ball { radius: 1.0 };
        let out = optimize(&reduced, &set, &OptimizerConfig::default()).unwrap();
        assert!(out.iterations <= 2);
        assert!((out.coeffs[0] - 1.0).abs() < 1e-12);
        assert!((out.cost - 4.0).abs() < 1e-10);
    }

    #[test]
    fn history_is_nonincreasing_in_twin_run() {
        let p = template();
        let basis = ControlBasis::harmonic(&p.grid, 2).unwrap();
        let set = AdmissibleSet::Ball { radius: 2.0 };
        let twin = twin_experiment(
            &p,
            &basis,
            &[0.4, -0.2],
            1.0,
            0.1,
            &set,
            &SolverConfig::default(),
            &OptimizerConfig {
                max_iterations: 60,
                ..OptimizerConfig::default()
            },
        )
        .unwrap();
        for w in twin.optimal.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        assert!(
            twin.optimal.cost <= 1e-6 * twin.baseline_cost,
            "cost {} baseline {}",
            twin.optimal.cost,
            twin.baseline_cost
        );
    }
}
