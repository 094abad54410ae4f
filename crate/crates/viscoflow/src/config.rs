//! Flat INI-like run configuration: one level of `[section]` headers over
//! `key = value` lines. Unknown sections or keys are hard errors with line
//! numbers, as are missing required keys and invalid values.

use crate::control::{AdmissibleSet, OptimizerConfig};
use crate::error::Error;
use crate::field::VelocityField;
use crate::grid::{BoundaryKind, Grid};
use crate::rheology::{FluidModel, ViscosityModel, YieldField};
use crate::solver::{FlowProblem, SolverConfig};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct ControlConfig {
    pub basis_size: usize,
    pub admissible: AdmissibleSet,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Ground-truth coefficients for a twin experiment; the tracking target
    /// is the flow they generate.
    pub truth: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub csv: bool,
    pub vtk: bool,
    pub gnuplot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            csv: true,
            vtk: true,
            gnuplot: true,
        }
    }
}

/// A fully validated run: the flow problem, solver and optimizer settings,
/// optional control setup, and output options. `raw` retains the exact
/// config text for hashing into the manifest.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: FlowProblem,
    pub solver: SolverConfig,
    pub control: Option<ControlConfig>,
    pub optimizer: OptimizerConfig,
    pub output: OutputConfig,
    pub raw: String,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<(usize, String, String)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        let pos = self.entries.iter().position(|(_, k, _)| k == key)?;
        let (line, _, value) = self.entries.remove(pos);
        Some((line, value))
    }

    fn require(&mut self, key: &str) -> Result<(usize, String), Error> {
        self.take(key).ok_or_else(|| {
            Error::Config(format!(
                "section [{}] (line {}): missing required key `{}`",
                self.name, self.line, key
            ))
        })
    }

    fn finish(self) -> Result<(), Error> {
        if let Some((line, key, _)) = self.entries.into_iter().next() {
            return Err(Error::Config(format!(
                "line {line}: unknown key `{key}` in section [{}]",
                self.name
            )));
        }
        Ok(())
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>, Error> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {line_no}: unterminated section header")))?
                .trim()
                .to_string();
            if sections.contains_key(&name) {
                return Err(Error::Config(format!(
                    "line {line_no}: duplicate section [{name}]"
                )));
            }
            sections.insert(
                name.clone(),
                Section {
                    name: name.clone(),
                    line: line_no,
                    entries: Vec::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {line_no}: expected `key = value` or `[section]`"))
        })?;
        let section = current
            .as_ref()
            .ok_or_else(|| Error::Config(format!("line {line_no}: key before any section")))?;
        sections
            .get_mut(section)
            .expect("current section exists")
            .entries
            .push((line_no, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(sections)
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, Error> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: `{key}` expects a number, got `{value}`")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, Error> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: `{key}` expects an integer, got `{value}`")))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, Error> {
    match value {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "line {line}: `{key}` expects true/false, got `{value}`"
        ))),
    }
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, Error> {
    value
        .split(',')
        .map(|x| parse_f64(line, key, x.trim()))
        .collect()
}

fn parse_bc(line: usize, key: &str, value: &str) -> Result<BoundaryKind, Error> {
    match value {
        "wall" => Ok(BoundaryKind::Wall),
        "periodic" => Ok(BoundaryKind::Periodic),
        _ => Err(Error::Config(format!(
            "line {line}: `{key}` expects wall|periodic, got `{value}`"
        ))),
    }
}

pub fn parse(text: &str) -> Result<RunConfig, Error> {
    let mut sections = parse_sections(text)?;

    let mut grid_sec = sections
        .remove("grid")
        .ok_or_else(|| Error::Config("missing required section [grid]".into()))?;
    let (dl, dv) = grid_sec.require("dim")?;
    let dim = parse_usize(dl, "dim", &dv)?;
    let mut n = [1usize; 3];
    let mut extent = [1.0f64; 3];
    let mut bc = [BoundaryKind::Periodic; 3];
    let axes = ["x", "y", "z"];
    for (a, ax) in axes.iter().enumerate().take(dim) {
        let (l, v) = grid_sec.require(&format!("n{ax}"))?;
        n[a] = parse_usize(l, &format!("n{ax}"), &v)?;
        let (l, v) = grid_sec.require(&format!("l{ax}"))?;
        extent[a] = parse_f64(l, &format!("l{ax}"), &v)?;
        let (l, v) = grid_sec.require(&format!("bc_{ax}"))?;
        bc[a] = parse_bc(l, &format!("bc_{ax}"), &v)?;
    }
    grid_sec.finish()?;
    let grid = Grid::new(dim, &n[..dim], &extent[..dim], &bc[..dim])?;

    let mut rheo = sections
        .remove("rheology")
        .ok_or_else(|| Error::Config("missing required section [rheology]".into()))?;
    let (vl, kind) = rheo.require("viscosity")?;
    let viscosity = match kind.as_str() {
        "constant" => {
            let (l, v) = rheo.require("mu")?;
            let mu = parse_f64(l, "mu", &v)?;
            if mu <= 0.0 {
                return Err(Error::Config(format!(
                    "line {l}: viscosity bounds must satisfy 0 < mu_min <= mu(s) <= mu_max; got mu = {mu}"
                )));
            }
            ViscosityModel::constant(mu)?
        }
        "arctan" => {
            let (l, v) = rheo.require("mu_base")?;
            let base = parse_f64(l, "mu_base", &v)?;
            if base <= 0.0 {
                return Err(Error::Config(format!(
                    "line {l}: viscosity bounds must satisfy 0 < mu_min <= mu(s) <= mu_max; got mu_base = {base}"
                )));
            }
            ViscosityModel::arctan(base)?
        }
        "table" => {
            let (l, v) = rheo.require("table_s")?;
            let s = parse_list(l, "table_s", &v)?;
            let (l, v) = rheo.require("table_mu")?;
            let mu = parse_list(l, "table_mu", &v)?;
            if mu.iter().any(|&m| m <= 0.0) {
                return Err(Error::Config(format!(
                    "line {l}: viscosity bounds must satisfy 0 < mu_min <= mu(s) <= mu_max"
                )));
            }
            ViscosityModel::tabulated(s, mu)?
        }
        other => {
            return Err(Error::Config(format!(
                "line {vl}: viscosity expects constant|arctan|table, got `{other}`"
            )))
        }
    };
    let (l, v) = rheo.require("yield")?;
    let yield_value = parse_f64(l, "yield", &v)?;
    if yield_value < 0.0 {
        return Err(Error::Config(format!(
            "line {l}: yield stress must be nonnegative"
        )));
    }
    let yield_field = YieldField::constant(&grid, yield_value)?;
    let (l, v) = rheo.require("epsilon")?;
    let epsilon = parse_f64(l, "epsilon", &v)?;
    if epsilon <= 0.0 {
        return Err(Error::Config(format!(
            "line {l}: regularization epsilon must be positive"
        )));
    }
    rheo.finish()?;
    let model = FluidModel::new(viscosity, yield_field, epsilon)?;

    let mut forces = sections
        .remove("forces")
        .ok_or_else(|| Error::Config("missing required section [forces]".into()))?;
    let mut f_vec = [0.0f64; 3];
    for (a, ax) in axes.iter().enumerate().take(dim) {
        if let Some((l, v)) = forces.take(&format!("f{ax}")) {
            f_vec[a] = parse_f64(l, &format!("f{ax}"), &v)?;
        }
    }
    forces.finish()?;
    let f = VelocityField::sample(&grid, |c, _| f_vec[c]);
    let u = VelocityField::zeros(&grid);

    let mut solver = SolverConfig::default();
    let mut convection = true;
    if let Some(mut sec) = sections.remove("solver") {
        if let Some((l, v)) = sec.take("theta") {
            solver.theta = parse_f64(l, "theta", &v)?;
            if !(solver.theta > 0.0 && solver.theta <= 1.0) {
                return Err(Error::Config(format!(
                    "line {l}: theta must lie in (0, 1]"
                )));
            }
        }
        if let Some((l, v)) = sec.take("tol_v") {
            solver.tol_v = parse_f64(l, "tol_v", &v)?;
        }
        if let Some((l, v)) = sec.take("tol_div") {
            solver.tol_div = parse_f64(l, "tol_div", &v)?;
        }
        if let Some((l, v)) = sec.take("tol_energy") {
            solver.tol_energy = parse_f64(l, "tol_energy", &v)?;
        }
        if let Some((l, v)) = sec.take("max_picard") {
            solver.max_picard = parse_usize(l, "max_picard", &v)?;
        }
        if let Some((l, v)) = sec.take("linear_tol") {
            solver.linear_tol = parse_f64(l, "linear_tol", &v)?;
        }
        if let Some((l, v)) = sec.take("max_linear") {
            solver.max_linear = parse_usize(l, "max_linear", &v)?;
        }
        if let Some((l, v)) = sec.take("convection") {
            convection = parse_bool(l, "convection", &v)?;
        }
        sec.finish()?;
    }

    let problem = FlowProblem::new(grid.clone(), model, f, u, convection)?;

    let control = if let Some(mut sec) = sections.remove("control") {
        let (l, v) = sec.require("basis_size")?;
        let basis_size = parse_usize(l, "basis_size", &v)?;
        if basis_size == 0 || basis_size > crate::control::MAX_BASIS {
            return Err(Error::Config(format!(
                "line {l}: basis_size must be 1..={}",
                crate::control::MAX_BASIS
            )));
        }
        let (al, av) = sec.require("admissible")?;
        let admissible = match av.as_str() {
            "ball" => {
                let (l, v) = sec.require("radius")?;
                let radius = parse_f64(l, "radius", &v)?;
                if radius <= 0.0 {
                    return Err(Error::Config(format!(
                        "line {l}: the admissible set must be nonempty: radius must be positive"
                    )));
                }
                AdmissibleSet::Ball { radius }
            }
            "box" => {
                let (l, v) = sec.require("lo")?;
                let lo = parse_list(l, "lo", &v)?;
                let (l2, v) = sec.require("hi")?;
                let hi = parse_list(l2, "hi", &v)?;
                AdmissibleSet::Box { lo, hi }
            }
            "finite" => {
                let (l, v) = sec.require("points")?;
                let points: Result<Vec<Vec<f64>>, Error> = v
                    .split('/')
                    .map(|p| parse_list(l, "points", p.trim()))
                    .collect();
                let points = points?;
                if points.is_empty() || points.iter().all(|p| p.is_empty()) {
                    return Err(Error::Config(format!(
                        "line {l}: the admissible set must be nonempty"
                    )));
                }
                AdmissibleSet::Finite { points }
            }
            other => {
                return Err(Error::Config(format!(
                    "line {al}: admissible expects ball|box|finite, got `{other}`"
                )))
            }
        };
        let (l, v) = sec.require("lambda1")?;
        let lambda1 = parse_f64(l, "lambda1", &v)?;
        let (l2, v) = sec.require("lambda2")?;
        let lambda2 = parse_f64(l2, "lambda2", &v)?;
        if lambda1 < 0.0 || lambda2 < 0.0 || lambda1 + lambda2 <= 0.0 {
            return Err(Error::Config(format!(
                "line {l}: cost weights must be nonnegative and not both zero"
            )));
        }
        let (l, v) = sec.require("truth")?;
        let truth = parse_list(l, "truth", &v)?;
        if truth.len() != basis_size {
            return Err(Error::Config(format!(
                "line {l}: truth needs {basis_size} coefficients, got {}",
                truth.len()
            )));
        }
        admissible.validate(basis_size)?;
        sec.finish()?;
        Some(ControlConfig {
            basis_size,
            admissible,
            lambda1,
            lambda2,
            truth,
        })
    } else {
        None
    };

    let mut optimizer = OptimizerConfig::default();
    if let Some(mut sec) = sections.remove("optimizer") {
        if let Some((l, v)) = sec.take("max_iterations") {
            optimizer.max_iterations = parse_usize(l, "max_iterations", &v)?;
        }
        if let Some((l, v)) = sec.take("initial_step") {
            optimizer.initial_step = parse_f64(l, "initial_step", &v)?;
        }
        if let Some((l, v)) = sec.take("backtrack") {
            optimizer.backtrack = parse_f64(l, "backtrack", &v)?;
        }
        if let Some((l, v)) = sec.take("fd_step") {
            optimizer.fd_step = parse_f64(l, "fd_step", &v)?;
        }
        if let Some((l, v)) = sec.take("multi_start") {
            optimizer.multi_start = parse_bool(l, "multi_start", &v)?;
        }
        sec.finish()?;
    }

    let mut output = OutputConfig::default();
    if let Some(mut sec) = sections.remove("output") {
        if let Some((l, v)) = sec.take("formats") {
            output.csv = false;
            output.vtk = false;
            for fmt in v.split(',') {
                match fmt.trim() {
                    "csv" => output.csv = true,
                    "vtk" => output.vtk = true,
                    other => {
                        return Err(Error::Config(format!(
                            "line {l}: unknown output format `{other}`"
                        )))
                    }
                }
            }
        }
        if let Some((l, v)) = sec.take("gnuplot") {
            output.gnuplot = parse_bool(l, "gnuplot", &v)?;
        }
        sec.finish()?;
    }

    if let Some((name, sec)) = sections.into_iter().next() {
        return Err(Error::Config(format!(
            "line {}: unknown section [{name}]",
            sec.line
        )));
    }

    Ok(RunConfig {
        problem,
        solver,
        control,
        optimizer,
        output,
        raw: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
[grid]
dim = 2
nx = 4
ny = 16
lx = 0.25
ly = 1.0
bc_x = periodic
bc_y = wall

[rheology]
viscosity = constant
mu = 1.0
yield = 0.25
epsilon = 1e-6

[forces]
fx = 1.0

[solver]
theta = 0.7
convection = false
";

    #[test]
    fn parses_valid_config() {
        let cfg = parse(GOOD).unwrap();
        assert_eq!(cfg.problem.grid.dim(), 2);
        assert!(!cfg.problem.convection);
        assert!(cfg.control.is_none());
        assert_eq!(cfg.solver.theta, 0.7);
    }

    #[test]
    fn unknown_key_is_line_anchored_error() {
        let bad = GOOD.replace("theta = 0.7", "thetaa = 0.7");
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("thetaa"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn nonpositive_viscosity_cites_bounds() {
        let bad = GOOD.replace("mu = 1.0", "mu = -2.0");
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("viscosity bounds"), "{err}");
    }

    #[test]
    fn empty_admissible_set_rejected() {
        let cfg = format!(
            "{GOOD}\n[control]\nbasis_size = 2\nadmissible = ball\nradius = 0.0\n\
             lambda1 = 1.0\nlambda2 = 0.1\ntruth = 0.1,0.2\n"
        );
        let err = parse(&cfg).unwrap_err().to_string();
        assert!(err.contains("nonempty"), "{err}");
    }

    #[test]
    fn missing_section_reported() {
        let err = parse("[grid]\ndim = 2\nnx = 4\nny = 4\nlx = 1\nly = 1\nbc_x = wall\nbc_y = wall\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("[rheology]"), "{err}");
    }
}
