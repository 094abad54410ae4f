//! Discrete differential operators and inner products on MAC grids.
//!
//! Two boundary treatments coexist. Field-intrinsic operators
//! (`strain_rate`, `inner_v`, `phi_g`) use one-sided differences at walls and
//! measure a field exactly as stored. The constrained-space variants
//! (`*_noslip`) reflect tangential values oddly about walls, which is the
//! strain of the field extended by zero on the boundary; the flow solver and
//! all solver diagnostics are built on those so that discrete identities hold
//! to machine precision.

use crate::error::Error;
use crate::field::{ScalarField, TensorField, VelocityField, WallTreatment};
use crate::grid::Grid;

/// Flux divergence at cell centers; exactly the constraint the projection
/// enforces.
pub fn divergence(v: &VelocityField) -> ScalarField {
    let g = v.grid();
    let mut out = ScalarField::zeros(g);
    for idx in 0..g.num_cells() {
        let [i, j, k] = g.cell_coords(idx);
        let cell = [i as isize, j as isize, k as isize];
        let mut d = 0.0;
        for a in 0..g.dim() {
            let mut hi = cell;
            hi[a] += 1;
            d += (v.value(a, hi, WallTreatment::NoSlip) - v.value(a, cell, WallTreatment::NoSlip))
                / g.h(a);
        }
        out.data_mut()[idx] = d;
    }
    out
}

/// Diagonal strain component `E_aa` at a cell (exact central difference of the
/// face values).
pub fn diag_strain(v: &VelocityField, a: usize, cell: [isize; 3]) -> f64 {
    let g = v.grid();
    let mut hi = cell;
    hi[a] += 1;
    (v.value(a, hi, WallTreatment::NoSlip) - v.value(a, cell, WallTreatment::NoSlip)) / g.h(a)
}

/// Off-diagonal strain `E_ab` at the node with face-plane indices `pa`, `pb`
/// and cell indices elsewhere.
pub fn node_strain(
    v: &VelocityField,
    a: usize,
    b: usize,
    node: [isize; 3],
    wt: WallTreatment,
) -> f64 {
    let g = v.grid();
    // d v_a / d x_b: v_a has face-plane index along a (node[a]) and cell
    // indices along b (node[b] and node[b]-1).
    let mut up = node;
    let mut dn = node;
    dn[b] -= 1;
    let dva_dxb = (v.value(a, up, wt) - v.value(a, dn, wt)) / g.h(b);
    up = node;
    dn = node;
    dn[a] -= 1;
    let dvb_dxa = (v.value(b, up, wt) - v.value(b, dn, wt)) / g.h(a);
    0.5 * (dva_dxb + dvb_dxa)
}

/// Cellwise contraction `E(v):E(w)` with the full double sum: diagonal terms
/// at the center, off-diagonal products formed at the four surrounding nodes
/// and averaged. Averaging products (not values) keeps the associated
/// quadratic form positive on every nonzero constrained field.
pub fn cell_strain_product(
    v: &VelocityField,
    w: &VelocityField,
    cell: [isize; 3],
    wt: WallTreatment,
) -> f64 {
    let g = v.grid();
    let mut acc = 0.0;
    for a in 0..g.dim() {
        acc += diag_strain(v, a, cell) * diag_strain(w, a, cell);
    }
    for a in 0..g.dim() {
        for b in (a + 1)..g.dim() {
            let mut s = 0.0;
            for da in 0..2isize {
                for db in 0..2isize {
                    let mut node = cell;
                    node[a] += da;
                    node[b] += db;
                    s += node_strain(v, a, b, node, wt) * node_strain(w, a, b, node, wt);
                }
            }
            acc += 2.0 * s / 4.0;
        }
    }
    acc
}

/// Cell-centered strain-rate tensor; off-diagonal entries are node values
/// averaged to the center. Uses one-sided differences at walls so a field is
/// measured exactly as given.
pub fn strain_rate(v: &VelocityField) -> TensorField {
    let g = v.grid();
    let mut out = TensorField::zeros(g);
    for idx in 0..g.num_cells() {
        let [i, j, k] = g.cell_coords(idx);
        let cell = [i as isize, j as isize, k as isize];
        for a in 0..g.dim() {
            out.set(idx, a, a, diag_strain(v, a, cell));
        }
        for a in 0..g.dim() {
            for b in (a + 1)..g.dim() {
                let mut s = 0.0;
                for da in 0..2isize {
                    for db in 0..2isize {
                        let mut node = cell;
                        node[a] += da;
                        node[b] += db;
                        s += node_strain(v, a, b, node, WallTreatment::Extrapolate);
                    }
                }
                out.set(idx, a, b, s / 4.0);
            }
        }
    }
    out
}

/// Pointwise magnitude `|E| = sqrt(sum_ij E_ij^2)` of a tensor field.
pub fn second_invariant(e: &TensorField) -> ScalarField {
    let mut out = ScalarField::zeros(e.grid());
    for idx in 0..e.grid().num_cells() {
        out.data_mut()[idx] = e.magnitude(idx);
    }
    out
}

fn inner_v_with(v: &VelocityField, w: &VelocityField, wt: WallTreatment) -> Result<f64, Error> {
    v.same_grid(w)?;
    let g = v.grid();
    let vol = g.cell_volume();
    let mut acc = 0.0;
    for idx in 0..g.num_cells() {
        let [i, j, k] = g.cell_coords(idx);
        let cell = [i as isize, j as isize, k as isize];
        acc += cell_strain_product(v, w, cell, wt);
    }
    Ok(acc * vol)
}

/// The strain inner product `(v,w)_V = integral of E(v):E(w)`, measuring the
/// fields as given (one-sided at walls).
pub fn inner_v(v: &VelocityField, w: &VelocityField) -> Result<f64, Error> {
    inner_v_with(v, w, WallTreatment::Extrapolate)
}

/// The strain inner product of the constrained (no-slip) space; this is the
/// quadrature the flow solver and its diagnostics use.
pub fn inner_v_noslip(v: &VelocityField, w: &VelocityField) -> Result<f64, Error> {
    inner_v_with(v, w, WallTreatment::NoSlip)
}

pub fn norm_v_noslip(v: &VelocityField) -> f64 {
    inner_v_noslip(v, v).expect("same grid").max(0.0).sqrt()
}

/// Cellwise strain magnitude `sqrt(E(v):E(v))` in the solver quadrature.
pub fn strain_magnitude_noslip(v: &VelocityField) -> ScalarField {
    let g = v.grid();
    let mut out = ScalarField::zeros(g);
    for idx in 0..g.num_cells() {
        let [i, j, k] = g.cell_coords(idx);
        let cell = [i as isize, j as isize, k as isize];
        out.data_mut()[idx] = cell_strain_product(v, v, cell, WallTreatment::NoSlip)
            .max(0.0)
            .sqrt();
    }
    out
}

/// Plastic dissipation functional `phi_g(v) = integral of g |E(v)|`,
/// field-intrinsic quadrature.
pub fn phi_g(v: &VelocityField, g_field: &ScalarField) -> f64 {
    phi_g_with(v, g_field, WallTreatment::Extrapolate)
}

/// `phi_g` in the constrained-space quadrature used by the solver and the
/// variational-inequality diagnostics.
pub fn phi_g_noslip(v: &VelocityField, g_field: &ScalarField) -> f64 {
    phi_g_with(v, g_field, WallTreatment::NoSlip)
}

fn phi_g_with(v: &VelocityField, g_field: &ScalarField, wt: WallTreatment) -> f64 {
    let g = v.grid();
    let vol = g.cell_volume();
    let mut acc = 0.0;
    for idx in 0..g.num_cells() {
        let [i, j, k] = g.cell_coords(idx);
        let cell = [i as isize, j as isize, k as isize];
        let mag = cell_strain_product(v, v, cell, wt).max(0.0).sqrt();
        acc += g_field.data()[idx] * mag;
    }
    acc * vol
}

/// Weighted viscous application: returns `A v` with
/// `<A v, w>_L2 = sum_cells coef_c (E(v):E(w))_c vol` for every constrained `w`.
/// Wall-pinned faces of the output are zero.
pub fn apply_viscous(coef: &ScalarField, v: &VelocityField) -> VelocityField {
    let g = v.grid();
    let mut out = VelocityField::zeros(g);
    let scatter = |out: &mut VelocityField, c: usize, idx: [isize; 3], lambda: f64| {
        for (lin, coeff) in v.value_coeffs(c, idx) {
            out.comp_data_mut(c)[lin] += lambda * coeff;
        }
    };
    for idx in 0..g.num_cells() {
        let [i, j, k] = g.cell_coords(idx);
        let cell = [i as isize, j as isize, k as isize];
        let mu = coef.data()[idx];
        if mu == 0.0 {
            continue;
        }
        for a in 0..g.dim() {
            let lam = mu * diag_strain(v, a, cell) / g.h(a);
            let mut hi = cell;
            hi[a] += 1;
            scatter(&mut out, a, hi, lam);
            scatter(&mut out, a, cell, -lam);
        }
        for a in 0..g.dim() {
            for b in (a + 1)..g.dim() {
                for da in 0..2isize {
                    for db in 0..2isize {
                        let mut node = cell;
                        node[a] += da;
                        node[b] += db;
                        let e = node_strain(v, a, b, node, WallTreatment::NoSlip);
                        // weight: 2 (double sum) * 1/4 (node average) * mu
                        let w = 0.5 * mu * e;
                        // dE_ab/dw: 1/2 * (difference stencils)
                        let lam_b = w * 0.5 / g.h(b);
                        let mut up = node;
                        let mut dn = node;
                        dn[b] -= 1;
                        scatter(&mut out, a, up, lam_b);
                        scatter(&mut out, a, dn, -lam_b);
                        let lam_a = w * 0.5 / g.h(a);
                        up = node;
                        dn = node;
                        dn[a] -= 1;
                        scatter(&mut out, b, up, lam_a);
                        scatter(&mut out, b, dn, -lam_a);
                    }
                }
            }
        }
    }
    out.zero_wall_normal_faces();
    out
}

/// Stencil entry: (component, linear face index, coefficient).
type Stencil = Vec<(usize, usize, f64)>;

fn push_merged(st: &mut Stencil, comp: usize, lin: usize, coeff: f64) {
    for e in st.iter_mut() {
        if e.0 == comp && e.1 == lin {
            e.2 += coeff;
            return;
        }
    }
    st.push((comp, lin, coeff));
}

/// The node strain `E_ab` as a merged linear map of the stored face values
/// (no-slip treatment, ghost references folded onto their interior faces).
fn node_strain_stencil(probe: &VelocityField, a: usize, b: usize, node: [isize; 3]) -> Stencil {
    let g = probe.grid();
    let mut st = Stencil::new();
    let mut up = node;
    let mut dn = node;
    dn[b] -= 1;
    for (lin, c) in probe.value_coeffs(a, up) {
        push_merged(&mut st, a, lin, 0.5 * c / g.h(b));
    }
    for (lin, c) in probe.value_coeffs(a, dn) {
        push_merged(&mut st, a, lin, -0.5 * c / g.h(b));
    }
    up = node;
    dn = node;
    dn[a] -= 1;
    for (lin, c) in probe.value_coeffs(b, up) {
        push_merged(&mut st, b, lin, 0.5 * c / g.h(a));
    }
    for (lin, c) in probe.value_coeffs(b, dn) {
        push_merged(&mut st, b, lin, -0.5 * c / g.h(a));
    }
    st
}

/// Diagonal of the weighted viscous operator in the same (mass) sense as
/// `apply_viscous`; used for Jacobi preconditioning.
pub fn viscous_diagonal(coef: &ScalarField, grid: &Grid) -> VelocityField {
    let probe = VelocityField::zeros(grid);
    let mut diag = VelocityField::zeros(grid);
    for idx in 0..grid.num_cells() {
        let [i, j, k] = grid.cell_coords(idx);
        let cell = [i as isize, j as isize, k as isize];
        let mu = coef.data()[idx];
        for a in 0..grid.dim() {
            let mut st = Stencil::new();
            let mut hi = cell;
            hi[a] += 1;
            for (lin, c) in probe.value_coeffs(a, hi) {
                push_merged(&mut st, a, lin, c / grid.h(a));
            }
            for (lin, c) in probe.value_coeffs(a, cell) {
                push_merged(&mut st, a, lin, -c / grid.h(a));
            }
            for (comp, lin, c) in st {
                diag.comp_data_mut(comp)[lin] += mu * c * c;
            }
        }
        for a in 0..grid.dim() {
            for b in (a + 1)..grid.dim() {
                for da in 0..2isize {
                    for db in 0..2isize {
                        let mut node = cell;
                        node[a] += da;
                        node[b] += db;
                        for (comp, lin, c) in node_strain_stencil(&probe, a, b, node) {
                            diag.comp_data_mut(comp)[lin] += 0.5 * mu * c * c;
                        }
                    }
                }
            }
        }
    }
    diag
}

/// Discrete advective trilinear form `t(a,b,c) = integral of (a . grad b) . c`
/// with centered differences and four-point interpolation of the advecting
/// velocity.
pub fn advective_form(a: &VelocityField, b: &VelocityField, c: &VelocityField) -> f64 {
    let g = a.grid();
    let vol = g.cell_volume();
    let mut acc = 0.0;
    for comp in 0..g.dim() {
        c.for_each_face(comp, |idx| {
            if g.is_wall_plane(comp, idx[comp]) {
                return;
            }
            let cv = c.get(comp, idx);
            if cv == 0.0 {
                return;
            }
            acc += advect_at_face(a, b, comp, idx) * cv;
        });
    }
    acc * vol
}

/// `(a . grad b_comp)` at a face of component `comp`.
fn advect_at_face(a: &VelocityField, b: &VelocityField, comp: usize, idx: [usize; 3]) -> f64 {
    let g = a.grid();
    let s = [idx[0] as isize, idx[1] as isize, idx[2] as isize];
    let mut adv = 0.0;
    for i in 0..g.dim() {
        let ai = if i == comp {
            a.get(i, idx)
        } else {
            // average the four neighbouring faces of component i
            let mut sum = 0.0;
            for di in 0..2isize {
                for dj in [-1isize, 0] {
                    let mut p = s;
                    p[i] += di;
                    p[comp] += dj;
                    sum += a.value(i, p, WallTreatment::NoSlip);
                }
            }
            sum / 4.0
        };
        let mut up = s;
        let mut dn = s;
        up[i] += 1;
        dn[i] -= 1;
        let db = (b.value(comp, up, WallTreatment::NoSlip) - b.value(comp, dn, WallTreatment::NoSlip))
            / (2.0 * g.h(i));
        adv += ai * db;
    }
    adv
}

/// Skew-symmetrized convection form: `c(a,b,c) = (t(a,b,c) - t(a,c,b)) / 2`.
/// By construction `c(a,b,b) = 0` to rounding, the discrete analogue of the
/// vanishing self-advection integral for solenoidal fields.
pub fn convection_form(
    a: &VelocityField,
    b: &VelocityField,
    c: &VelocityField,
) -> Result<f64, Error> {
    a.same_grid(b)?;
    a.same_grid(c)?;
    Ok(0.5 * (advective_form(a, b, c) - advective_form(a, c, b)))
}

/// Assemble `N(a)` with `<N(a), w>_L2 = convection_form(a, a, w)` for
/// constrained `w`.
pub fn convection_rhs(a: &VelocityField) -> VelocityField {
    let g = a.grid();
    let mut out = VelocityField::zeros(g);
    // term 1: +1/2 t(a,a,w) -> pointwise advective derivative
    for comp in 0..g.dim() {
        a.for_each_face(comp, |idx| {
            if g.is_wall_plane(comp, idx[comp]) {
                return;
            }
            let l = out.lin(comp, idx);
            out.comp_data_mut(comp)[l] += 0.5 * advect_at_face(a, a, comp, idx);
        });
    }
    // term 2: -1/2 t(a,w,a), adjoint in w
    for comp in 0..g.dim() {
        let grid = g.clone();
        a.for_each_face(comp, |idx| {
            if grid.is_wall_plane(comp, idx[comp]) {
                return;
            }
            let av = a.get(comp, idx);
            if av == 0.0 {
                return;
            }
            let s = [idx[0] as isize, idx[1] as isize, idx[2] as isize];
            for i in 0..grid.dim() {
                let ai = if i == comp {
                    a.get(i, idx)
                } else {
                    let mut sum = 0.0;
                    for di in 0..2isize {
                        for dj in [-1isize, 0] {
                            let mut p = s;
                            p[i] += di;
                            p[comp] += dj;
                            sum += a.value(i, p, WallTreatment::NoSlip);
                        }
                    }
                    sum / 4.0
                };
                let lam = -0.5 * ai * av / (2.0 * grid.h(i));
                let mut up = s;
                let mut dn = s;
                up[i] += 1;
                dn[i] -= 1;
                for (lin, coeff) in a.value_coeffs(comp, up) {
                    out.comp_data_mut(comp)[lin] += lam * coeff;
                }
                for (lin, coeff) in a.value_coeffs(comp, dn) {
                    out.comp_data_mut(comp)[lin] -= lam * coeff;
                }
            }
        });
    }
    out.zero_wall_normal_faces();
    out
}
