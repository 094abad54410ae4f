//! Constitutive behavior: shear-dependent viscosity models with bounds,
//! spatially varying yield stress, the regularized viscoplastic law, and the
//! closed-form plane-channel profile used as a test oracle.

use crate::error::Error;
use crate::field::{ScalarField, TensorField};
use crate::grid::Grid;

/// Number of sample points used to validate viscosity bounds/monotonicity at
/// construction.
const VALIDATION_SAMPLES: usize = 4096;

#[derive(Debug, Clone)]
pub enum ViscosityKind {
    Constant(f64),
    /// `mu(s) = atan(s) + base`, bounded and nondecreasing.
    ArcTan { base: f64 },
    /// Piecewise-linear nondecreasing table, constant beyond the last knot.
    Tabulated { s: Vec<f64>, mu: Vec<f64> },
}

/// Viscosity function together with its certified bounds
/// `0 < mu_min < mu(s) < mu_max`.
#[derive(Debug, Clone)]
pub struct ViscosityModel {
    kind: ViscosityKind,
    mu_min: f64,
    mu_max: f64,
}

impl ViscosityModel {
    pub fn new(kind: ViscosityKind, mu_min: f64, mu_max: f64, s_max: f64) -> Result<Self, Error> {
        if !(mu_min > 0.0) {
            return Err(Error::Model(format!(
                "lower viscosity bound must be positive, got {mu_min}"
            )));
        }
        if !(mu_max > mu_min) {
            return Err(Error::Model(format!(
                "viscosity bounds must satisfy 0 < {mu_min} < {mu_max}"
            )));
        }
        let m = ViscosityModel {
            kind,
            mu_min,
            mu_max,
        };
        // Dense sampling: bounds are strict, and the function must be
        // nondecreasing (a sufficient condition for operator monotonicity).
        let mut prev = -f64::INFINITY;
        for i in 0..=VALIDATION_SAMPLES {
            let s = s_max * i as f64 / VALIDATION_SAMPLES as f64;
            let mu = m.eval(s);
            if !(mu > mu_min && mu < mu_max) {
                return Err(Error::Model(format!(
                    "viscosity {mu} at rate {s} violates strict bounds ({mu_min}, {mu_max})"
                )));
            }
            if mu < prev - 1e-12 * mu.abs() {
                return Err(Error::Model(format!(
                    "viscosity decreases near rate {s}; nondecreasing profile required"
                )));
            }
            prev = mu;
        }
        Ok(m)
    }

    /// Constant viscosity with tight certified bounds.
    pub fn constant(mu: f64) -> Result<Self, Error> {
        if !(mu > 0.0) {
            return Err(Error::Model(format!("viscosity must be positive, got {mu}")));
        }
        Self::new(
            ViscosityKind::Constant(mu),
            mu * (1.0 - 1e-9),
            mu * (1.0 + 1e-9),
            1.0,
        )
    }

    /// `mu(s) = atan(s) + base`.
    pub fn arctan(base: f64) -> Result<Self, Error> {
        if !(base > 0.0) {
            return Err(Error::Model(format!(
                "arctan viscosity offset must be positive, got {base}"
            )));
        }
        Self::new(
            ViscosityKind::ArcTan { base },
            base * (1.0 - 1e-9),
            base + std::f64::consts::FRAC_PI_2,
            1e4,
        )
    }

    pub fn tabulated(s: Vec<f64>, mu: Vec<f64>) -> Result<Self, Error> {
        if s.len() != mu.len() || s.len() < 2 {
            return Err(Error::Model("table needs matching knots, at least two".into()));
        }
        if !s.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Model("table abscissae must be increasing".into()));
        }
        let lo = mu.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s_max = *s.last().unwrap();
        Self::new(
            ViscosityKind::Tabulated { s, mu },
            lo * (1.0 - 1e-9),
            hi * (1.0 + 1e-9),
            s_max,
        )
    }

    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            ViscosityKind::Constant(c) => *c,
            ViscosityKind::ArcTan { base } => s.atan() + base,
            ViscosityKind::Tabulated { s: xs, mu } => {
                if s <= xs[0] {
                    mu[0]
                } else if s >= *xs.last().unwrap() {
                    *mu.last().unwrap()
                } else {
                    let k = xs.partition_point(|&x| x <= s) - 1;
                    let t = (s - xs[k]) / (xs[k + 1] - xs[k]);
                    mu[k] + t * (mu[k + 1] - mu[k])
                }
            }
        }
    }

    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max
    }
}

/// Cellwise yield-stress field `g(x) >= 0`.
#[derive(Debug, Clone)]
pub struct YieldField {
    field: ScalarField,
    strictly_positive: bool,
}

impl YieldField {
    pub fn new(field: ScalarField, strictly_positive: bool) -> Result<Self, Error> {
        for (i, &g) in field.data().iter().enumerate() {
            if !g.is_finite() || g < 0.0 {
                return Err(Error::Model(format!(
                    "yield stress must be finite and nonnegative (cell {i}: {g})"
                )));
            }
            if strictly_positive && g <= 0.0 {
                return Err(Error::Model(format!(
                    "yield stress flagged strictly positive but vanishes at cell {i}"
                )));
            }
        }
        Ok(YieldField {
            field,
            strictly_positive,
        })
    }

    pub fn constant(grid: &Grid, g: f64) -> Result<Self, Error> {
        Self::new(ScalarField::from_fn(grid, |_| g), g > 0.0)
    }

    /// Piecewise-constant blocks: `value(x)` chosen per cell center.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Result<Self, Error> {
        let field = ScalarField::from_fn(grid, &f);
        let strict = field.data().iter().all(|&g| g > 0.0);
        Self::new(field, strict)
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    pub fn l2_norm(&self) -> f64 {
        (self
            .field
            .data()
            .iter()
            .map(|g| g * g)
            .sum::<f64>()
            * self.field.grid().cell_volume())
        .sqrt()
    }
}

/// Complete regularized viscoplastic model: viscosity, yield field, and the
/// smoothing parameter for the nonsmooth term.
#[derive(Debug, Clone)]
pub struct FluidModel {
    pub viscosity: ViscosityModel,
    pub yield_stress: YieldField,
    pub epsilon: f64,
}

impl FluidModel {
    pub fn new(
        viscosity: ViscosityModel,
        yield_stress: YieldField,
        epsilon: f64,
    ) -> Result<Self, Error> {
        if !(epsilon > 0.0) {
            return Err(Error::Model(format!(
                "regularization must be positive, got {epsilon}"
            )));
        }
        Ok(FluidModel {
            viscosity,
            yield_stress,
            epsilon,
        })
    }

    /// Default smoothing: 1e-6 times a reference strain rate.
    pub fn default_epsilon(reference_strain_rate: f64) -> f64 {
        1e-6 * reference_strain_rate
    }

    /// Regularized effective viscosity `mu(s) + g / sqrt(s^2 + eps^2)` at one
    /// cell.
    pub fn mu_eff(&self, cell: usize, s: f64) -> f64 {
        let g = self.yield_stress.field().data()[cell];
        self.viscosity.eval(s) + g / (s * s + self.epsilon * self.epsilon).sqrt()
    }
}

/// `mu_eff` over a whole strain-magnitude field.
pub fn effective_viscosity(model: &FluidModel, s: &ScalarField) -> ScalarField {
    let mut out = s.clone();
    for (cell, x) in out.data_mut().iter_mut().enumerate() {
        *x = model.mu_eff(cell, s.data()[cell]);
    }
    out
}

/// Regularized deviatoric stress `sigma = mu_eff(|E|) E`.
pub fn stress_deviator(model: &FluidModel, e: &TensorField) -> TensorField {
    let grid = e.grid();
    let mut out = e.clone();
    let d = grid.dim();
    for cell in 0..grid.num_cells() {
        let mag = e.magnitude(cell);
        let mu = model.mu_eff(cell, mag);
        for i in 0..d {
            for j in i..d {
                out.set(cell, i, j, mu * e.get(cell, i, j));
            }
        }
    }
    out
}

/// Small dense symmetric matrix used by the randomized monotonicity sweep.
#[derive(Debug, Clone, Copy)]
pub struct SymMat {
    pub dim: usize,
    pub m: [[f64; 3]; 3],
}

impl SymMat {
    pub fn new(dim: usize) -> Self {
        SymMat {
            dim,
            m: [[0.0; 3]; 3],
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] = v;
        self.m[j][i] = v;
    }

    pub fn frob(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * self.m[i][j];
            }
        }
        s.sqrt()
    }

    pub fn dot(&self, other: &SymMat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * other.m[i][j];
            }
        }
        s
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] -= other.m[i][j];
            }
        }
        out
    }

    pub fn scaled(&self, a: f64) -> SymMat {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] *= a;
            }
        }
        out
    }
}

/// Value of `(mu(|X|) X - mu(|Y|) Y) : (X - Y)`; nonnegative (up to rounding)
/// for any nondecreasing viscosity.
pub fn monotonicity_check(model: &ViscosityModel, x: &SymMat, y: &SymMat) -> f64 {
    let mx = model.eval(x.frob());
    let my = model.eval(y.frob());
    let lhs = x.scaled(mx).sub(&y.scaled(my));
    lhs.dot(&x.sub(y))
}

/// Closed-form velocity of steady plane-channel flow of a Bingham material
/// driven by a uniform force `g_force` across a gap of half-width `h`:
/// shear stress `tau = mu v' + tau_y sign(v')`, no slip at `|y| = h`.
/// Fully blocked (`v = 0`) when `tau_y >= g_force * h`.
pub fn poiseuille_oracle(tau_y: f64, mu: f64, g_force: f64, h: f64, y: f64) -> Result<f64, Error> {
    if !(tau_y >= 0.0) || !(mu > 0.0) || !(g_force > 0.0) || !(h > 0.0) {
        return Err(Error::Model(
            "oracle requires tau_y >= 0, mu > 0, force > 0, h > 0".into(),
        ));
    }
    if y.abs() > h * (1.0 + 1e-12) {
        return Err(Error::Model(format!("|y| = {} outside the gap", y.abs())));
    }
    if tau_y >= g_force * h {
        return Ok(0.0);
    }
    let y0 = (tau_y / g_force).min(h);
    let ya = y.abs().min(h);
    if ya <= y0 {
        Ok(g_force / (2.0 * mu) * (h - y0) * (h - y0))
    } else {
        Ok((g_force * (h * h - ya * ya) / 2.0 - tau_y * (h - ya)) / mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryKind;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(
            2,
            &[4, 8],
            &[1.0, 1.0],
            &[BoundaryKind::Periodic, BoundaryKind::Wall],
        )
        .unwrap()
    }

    fn model(mu: f64, g: f64, eps: f64) -> FluidModel {
        FluidModel::new(
            ViscosityModel::constant(mu).unwrap(),
            YieldField::constant(&grid(), g).unwrap(),
            eps,
        )
        .unwrap()
    }

    #[test]
    fn viscosity_bounds_are_enforced() {
        assert!(ViscosityModel::constant(-1.0).is_err());
        assert!(ViscosityModel::new(ViscosityKind::Constant(5.0), 1.0, 2.0, 10.0).is_err());
        assert!(ViscosityModel::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 2.0]).is_err());
        let ok = ViscosityModel::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 1.5, 2.0]).unwrap();
        assert!((ok.eval(0.5) - 1.25).abs() < 1e-14);
    }

    #[test]
    fn effective_viscosity_examples() {
        // s = 0, g = 1, eps = 1e-6, mu = 1 -> mu_eff = 1 + 1e6
        let m = model(1.0, 1.0, 1e-6);
        assert!((m.mu_eff(0, 0.0) - (1.0 + 1e6)).abs() < 1e-3);
        // g = 0 -> Newtonian limit
        let m0 = model(3.0, 0.0, 1e-6);
        assert_eq!(m0.mu_eff(0, 7.0), 3.0);
        // s = 1, g = 1, mu = 1, eps small -> about 2
        let m1 = model(1.0, 1.0, 1e-8);
        assert!((m1.mu_eff(0, 1.0) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn stress_deviator_examples() {
        let g = grid();
        let m = model(1.0, 1.0, 1e-6);
        // E = 0 -> sigma = 0 (and |sigma| <= g trivially)
        let e = TensorField::zeros(&g);
        let s = stress_deviator(&m, &e);
        assert_eq!(s.magnitude(0), 0.0);
        // pure shear E12 = 1/2, |E| = 1/sqrt(2): |sigma| = 1/sqrt(2) + 1
        let mut e = TensorField::zeros(&g);
        for c in 0..g.num_cells() {
            e.set(c, 0, 1, 0.5);
        }
        let s = stress_deviator(&m, &e);
        let expect = 1.0 / 2f64.sqrt() + 1.0;
        assert!((s.magnitude(0) - expect).abs() < 1e-4);
        // g = 0, mu const -> sigma = mu E exactly
        let m0 = model(2.0, 0.0, 1e-6);
        let s0 = stress_deviator(&m0, &e);
        assert_eq!(s0.get(0, 0, 1), 1.0);
    }

    #[test]
    fn stress_deviator_is_odd() {
        let g = grid();
        let m = model(1.5, 0.7, 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut e = TensorField::zeros(&g);
        let mut eneg = TensorField::zeros(&g);
        for c in 0..g.num_cells() {
            for i in 0..2 {
                for j in i..2 {
                    let v = rng.gen_range(-2.0..2.0);
                    e.set(c, i, j, v);
                    eneg.set(c, i, j, -v);
                }
            }
        }
        let s = stress_deviator(&m, &e);
        let sn = stress_deviator(&m, &eneg);
        for c in 0..g.num_cells() {
            for i in 0..2 {
                for j in i..2 {
                    assert_eq!(s.get(c, i, j), -sn.get(c, i, j));
                }
            }
        }
    }

    #[test]
    fn monotonicity_identity_and_randoms() {
        let d = 3;
        let cmodel = ViscosityModel::constant(1.0).unwrap();
        let amodel = ViscosityModel::arctan(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let random = |rng: &mut ChaCha8Rng| {
            let mut m = SymMat::new(d);
            for i in 0..d {
                for j in i..d {
                    m.set(i, j, rng.gen_range(-10.0..10.0));
                }
            }
            m
        };
        for _ in 0..1000 {
            let x = random(&mut rng);
            let y = random(&mut rng);
            // X = Y -> exactly 0
            assert_eq!(monotonicity_check(&amodel, &x, &x), 0.0);
            // constant mu: equals |X - Y|^2
            let v = monotonicity_check(&cmodel, &x, &y);
            let diff = x.sub(&y).frob();
            assert!((v - diff * diff).abs() < 1e-10 * (diff * diff).max(1.0));
            // arctan model: nonnegative up to rounding
            let scale = x.frob().max(y.frob()).powi(2).max(1.0);
            let va = monotonicity_check(&amodel, &x, &y);
            assert!(va >= -1e-12 * scale, "monotonicity violated: {va}");
        }
    }

    #[test]
    fn poiseuille_oracle_values() {
        // Newtonian parabola apex
        assert!((poiseuille_oracle(0.0, 1.0, 1.0, 1.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
        // Bingham plug velocity
        let plug = poiseuille_oracle(0.25, 1.0, 1.0, 1.0, 0.1).unwrap();
        assert!((plug - 0.28125).abs() < 1e-15);
        // blocked channel
        assert_eq!(poiseuille_oracle(1.0, 1.0, 0.5, 1.0, 0.3).unwrap(), 0.0);
        // continuity at the plug boundary
        let y0 = 0.25;
        let inner = poiseuille_oracle(0.25, 1.0, 1.0, 1.0, y0 - 1e-13).unwrap();
        let outer = poiseuille_oracle(0.25, 1.0, 1.0, 1.0, y0 + 1e-13).unwrap();
        assert!((inner - outer).abs() < 1e-12);
        // continuity at the blocking threshold
        let just_below = poiseuille_oracle(0.5 - 1e-10, 1.0, 0.5, 1.0, 0.0).unwrap();
        assert!(just_below < 1e-9);
        // domain violations
        assert!(poiseuille_oracle(0.1, 1.0, 1.0, 1.0, 1.5).is_err());
        assert!(poiseuille_oracle(0.1, -1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn oracle_matches_numerical_integration() {
        // independent check: integrate v'(y) = -(G y - tau_y)/mu from the wall
        let (tau_y, mu, gf, h) = (0.25, 1.3, 1.0, 1.0);
        let n = 20_000;
        let dy = h / n as f64;
        let mut v = 0.0;
        let mut y = h;
        let y0 = tau_y / gf;
        for _ in 0..n {
            let ym = y - 0.5 * dy;
            let slope = if ym.abs() > y0 {
                -(gf * ym - tau_y * ym.signum()) / mu
            } else {
                0.0
            };
            v -= slope * dy;
            y -= dy;
            let expect = poiseuille_oracle(tau_y, mu, gf, h, y).unwrap();
            assert!((v - expect).abs() < 1e-6, "y={y}: {v} vs {expect}");
        }
    }
}
