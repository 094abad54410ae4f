//! Numerical certificates for a computed flow: the variational-inequality
//! residual sampled over a pool of admissible test fields, the a-priori
//! velocity bound through the embedding constant, and the blocking criterion
//! for flows that should be completely rigid.

use crate::calculus::{apply_viscous, convection_form, divergence, phi_g_noslip, strain_magnitude_noslip};
use crate::error::Error;
use crate::field::{ScalarField, VelocityField};
use crate::grid::Grid;
use crate::linalg::{estimate_embedding_constant, random_solenoidal, smooth_solenoidal_modes};
use crate::rheology::FluidModel;
use crate::solver::{FlowProblem, SolveReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_POOL_SIZE: usize = 64;
const SMOOTH_MODES: usize = 8;

/// Divergence-free test fields for sampling the variational inequality:
/// zero, the solution itself, two rescalings of it, a few smooth analytic
/// modes, and seeded random solenoidal fields.
pub fn test_pool(
    grid: &Grid,
    v: &VelocityField,
    size: usize,
    seed: u64,
    tol_div: f64,
) -> Result<Vec<VelocityField>, Error> {
    let mut pool = Vec::with_capacity(size);
    pool.push(VelocityField::zeros(grid));
    pool.push(v.clone());
    let mut twice = v.clone();
    twice.scale(2.0);
    pool.push(twice);
    let mut half = v.clone();
    half.scale(0.5);
    pool.push(half);
    for mode in smooth_solenoidal_modes(grid, SMOOTH_MODES.min(size.saturating_sub(pool.len())))? {
        pool.push(mode);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while pool.len() < size {
        pool.push(random_solenoidal(grid, &mut rng)?);
    }
    for (i, w) in pool.iter().enumerate() {
        let d = divergence(w).max_abs();
        if d > tol_div.max(1e-10) {
            return Err(Error::PoolField(format!(
                "test field {i} has divergence {d}"
            )));
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone)]
pub struct ViResidualReport {
    /// Smallest residual over the pool; nonnegative up to O(eps) means the
    /// inequality holds at all sampled directions.
    pub min_residual: f64,
    pub argmin: usize,
    pub pool_size: usize,
    /// Residual at `w = v` (identically zero by construction).
    pub at_solution: f64,
}

/// Residual of the flow variational inequality at test field `w`:
/// `a(v; v, w - v) + [c(v, v, w - v)] + phi_g(w) - phi_g(v) - (f + u, w - v)`.
/// For the exact solution this is nonnegative for every admissible `w`; the
/// regularized solution can undershoot by O(eps * ||g||_L1).
pub fn vi_residual_at(problem: &FlowProblem, v: &VelocityField, w: &VelocityField) -> f64 {
    let s = strain_magnitude_noslip(v);
    let mut mu_s = s.clone();
    for (c, x) in mu_s.data_mut().iter_mut().enumerate() {
        *x = problem.model.viscosity.eval(s.data()[c]);
    }
    let av = apply_viscous(&mu_s, v);
    let mut diff = w.clone();
    diff.axpy(-1.0, v);
    let g_field = problem.model.yield_stress.field();
    let mut r = av.l2_inner(&diff) + phi_g_noslip(w, g_field) - phi_g_noslip(v, g_field)
        - problem.total_force().l2_inner(&diff);
    if problem.convection {
        r += convection_form(v, v, &diff).expect("same grid");
    }
    r
}

/// Sample the variational inequality over a pool of `size` divergence-free
/// fields and report the worst (smallest) residual.
pub fn vi_residual(
    problem: &FlowProblem,
    v: &VelocityField,
    size: usize,
    seed: u64,
    tol_div: f64,
) -> Result<ViResidualReport, Error> {
    let pool = test_pool(&problem.grid, v, size, seed, tol_div)?;
    let mut min_residual = f64::INFINITY;
    let mut argmin = 0;
    for (i, w) in pool.iter().enumerate() {
        let r = vi_residual_at(problem, v, w);
        if r < min_residual {
            min_residual = r;
            argmin = i;
        }
    }
    Ok(ViResidualReport {
        min_residual,
        argmin,
        pool_size: pool.len(),
        at_solution: vi_residual_at(problem, v, v),
    })
}

/// Lower bound on admissible VI residuals for the regularized solution:
/// the smoothing can make residuals negative by at most about
/// `eps * integral g`.
pub fn vi_residual_floor(model: &FluidModel) -> f64 {
    let g_l1 = model.yield_stress.field().integral();
    -(model.epsilon * g_l1).max(1e-12)
}

#[derive(Debug, Clone)]
pub struct AprioriReport {
    pub norm_v: f64,
    pub bound: f64,
    pub embedding_constant: f64,
    pub satisfied: bool,
}

/// Check `||v||_V <= (C_h / mu_min) ||f + u||_L2`, the discrete version of
/// the energy a-priori estimate, with a tiny rounding allowance.
pub fn apriori_bound_check(
    problem: &FlowProblem,
    report: &SolveReport,
    seed: u64,
) -> Result<AprioriReport, Error> {
    let est = estimate_embedding_constant(&problem.grid, seed, 500)?;
    let bound = est.c_h / problem.model.viscosity.mu_min() * problem.total_force().l2_norm();
    Ok(AprioriReport {
        norm_v: report.norm_v,
        bound,
        embedding_constant: est.c_h,
        satisfied: report.norm_v <= bound * (1.0 + 1e-10),
    })
}

#[derive(Debug, Clone)]
pub struct BlockingReport {
    pub max_velocity: f64,
    /// Velocity threshold below which the flow counts as blocked.
    pub threshold: f64,
    pub blocked: bool,
    /// Largest value of `(f + u, w) - phi_g(w)` over the test pool; if no
    /// admissible direction makes this positive, rest is energetically
    /// optimal.
    pub max_drive: f64,
    pub drive_nonpositive: bool,
}

/// Decide whether a computed flow is (numerically) blocked: the velocity must
/// be below `100 * eps * velocity_scale`, and the sampled sufficient
/// condition `(f + u, w) <= phi_g(w)` must hold over the pool.
pub fn blocking_test(
    problem: &FlowProblem,
    report: &SolveReport,
    pool_size: usize,
    seed: u64,
    tol_div: f64,
) -> Result<BlockingReport, Error> {
    let est = estimate_embedding_constant(&problem.grid, seed, 500)?;
    let force = problem.total_force();
    let velocity_scale =
        est.c_h * est.c_h * force.l2_norm() / problem.model.viscosity.mu_min();
    let threshold = 100.0 * problem.model.epsilon * velocity_scale.max(1.0);
    let pool = test_pool(&problem.grid, &report.v, pool_size, seed, tol_div)?;
    let g_field = problem.model.yield_stress.field();
    let mut max_drive = f64::NEG_INFINITY;
    for w in &pool {
        let d = force.l2_inner(w) - phi_g_noslip(w, g_field);
        max_drive = max_drive.max(d);
    }
    let slack = 1e-10 * (force.l2_norm() * velocity_scale).max(1.0);
    Ok(BlockingReport {
        max_velocity: report.v.linf_norm(),
        threshold,
        blocked: report.v.linf_norm() <= threshold,
        max_drive,
        drive_nonpositive: max_drive <= slack,
    })
}

/// Convenience: the yield field as a scalar field reference for callers that
/// only have a problem.
pub fn yield_field(problem: &FlowProblem) -> &ScalarField {
    problem.model.yield_stress.field()
}
