//! Run artifacts: CSV and legacy-VTK field writers, a gnuplot centerline
//! script, and the JSON run manifest. All files are written atomically
//! (temp file + rename) and float formatting uses the shortest round-trip
//! representation, so identical runs produce bitwise-identical files.

use crate::error::Error;
use crate::field::{ScalarField, VelocityField};
use crate::grid::Grid;
use crate::solver::channel_profile;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Write `content` to `path` via a temporary sibling and an atomic rename.
pub fn atomic_write(path: &Path, content: &str) -> Result<(), Error> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Exclusive per-directory run lock; released on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".viscoflow.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::Io(e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// CSV for a cell-centered scalar: `i,j,k,x,y,z,value`, one row per cell in
/// storage order.
pub fn scalar_csv(field: &ScalarField) -> String {
    let g = field.grid();
    let mut out = String::from("i,j,k,x,y,z,value\n");
    for idx in 0..g.num_cells() {
        let [i, j, k] = g.cell_coords(idx);
        let (x, y, z) = (g.center(0, i), g.center(1, j), g.center(2, k));
        let _ = writeln!(out, "{i},{j},{k},{x},{y},{z},{}", field.data()[idx]);
    }
    out
}

/// Parse a scalar CSV produced by [`scalar_csv`] back onto `grid`; values
/// round-trip bitwise.
pub fn scalar_from_csv(grid: &Grid, text: &str) -> Result<ScalarField, Error> {
    let mut field = ScalarField::zeros(grid);
    let mut count = 0usize;
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::Config(format!("csv line {}: expected 7 columns", n + 1)));
        }
        let parse = |s: &str| -> Result<usize, Error> {
            s.parse()
                .map_err(|_| Error::Config(format!("csv line {}: bad index `{s}`", n + 1)))
        };
        let (i, j, k) = (parse(cols[0])?, parse(cols[1])?, parse(cols[2])?);
        let value: f64 = cols[6]
            .parse()
            .map_err(|_| Error::Config(format!("csv line {}: bad value `{}`", n + 1, cols[6])))?;
        field.data_mut()[grid.cell_index(i, j, k)] = value;
        count += 1;
    }
    if count != grid.num_cells() {
        return Err(Error::Config(format!(
            "csv holds {count} cells, grid has {}",
            grid.num_cells()
        )));
    }
    Ok(field)
}

/// CSV for face-stored velocity: `component,i,j,k,x,y,z,value`, one row per
/// stored face. This is the exact solver state and round-trips bitwise.
pub fn velocity_csv(v: &VelocityField) -> String {
    let g = v.grid();
    let mut out = String::from("component,i,j,k,x,y,z,value\n");
    for c in 0..g.dim() {
        let shape = g.comp_shape(c);
        for k in 0..shape[2] {
            for j in 0..shape[1] {
                for i in 0..shape[0] {
                    let idx = [i, j, k];
                    let coord = |a: usize| {
                        if a == c {
                            g.face_coord(a, idx[a])
                        } else {
                            g.center(a, idx[a])
                        }
                    };
                    let (x, y, z) = (coord(0), coord(1), coord(2));
                    let _ = writeln!(out, "{c},{i},{j},{k},{x},{y},{z},{}", v.get(c, idx));
                }
            }
        }
    }
    out
}

/// Parse a velocity CSV produced by [`velocity_csv`]; bitwise round trip.
pub fn velocity_from_csv(grid: &Grid, text: &str) -> Result<VelocityField, Error> {
    let mut v = VelocityField::zeros(grid);
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(Error::Config(format!("csv line {}: expected 8 columns", n + 1)));
        }
        let parse = |s: &str| -> Result<usize, Error> {
            s.parse()
                .map_err(|_| Error::Config(format!("csv line {}: bad index `{s}`", n + 1)))
        };
        let c = parse(cols[0])?;
        let idx = [parse(cols[1])?, parse(cols[2])?, parse(cols[3])?];
        let value: f64 = cols[7]
            .parse()
            .map_err(|_| Error::Config(format!("csv line {}: bad value `{}`", n + 1, cols[7])))?;
        if c >= grid.dim() {
            return Err(Error::Config(format!("csv line {}: bad component {c}", n + 1)));
        }
        v.set(c, idx, value);
    }
    Ok(v)
}

/// Cell-center interpolation of the face velocity, for viewers.
fn center_velocity(v: &VelocityField, cell: [usize; 3]) -> [f64; 3] {
    let g = v.grid();
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate().take(g.dim()) {
        let mut hi = cell;
        hi[c] += 1;
        // wall axes store both boundary planes; periodic axes wrap
        if hi[c] >= g.comp_shape(c)[c] {
            hi[c] = 0;
        }
        *o = 0.5 * (v.get(c, cell) + v.get(c, hi));
    }
    out
}

/// Legacy ASCII VTK structured-points file with cell data: pressure, strain
/// magnitude, rigid mask, and the cell-averaged velocity vector.
pub fn vtk_file(
    grid: &Grid,
    v: &VelocityField,
    p: &ScalarField,
    strain: &ScalarField,
    rigid: &[bool],
) -> String {
    let n = [grid.cells(0), grid.cells(1), grid.cells(2)];
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("viscoflow fields\nASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(out, "DIMENSIONS {} {} {}", n[0] + 1, n[1] + 1, n[2] + 1);
    out.push_str("ORIGIN 0 0 0\n");
    let _ = writeln!(out, "SPACING {} {} {}", grid.h(0), grid.h(1), grid.h(2));
    let _ = writeln!(out, "CELL_DATA {}", grid.num_cells());

    out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for &x in p.data() {
        let _ = writeln!(out, "{x}");
    }
    out.push_str("SCALARS strain_magnitude double 1\nLOOKUP_TABLE default\n");
    for &x in strain.data() {
        let _ = writeln!(out, "{x}");
    }
    out.push_str("SCALARS rigid_mask int 1\nLOOKUP_TABLE default\n");
    for &m in rigid {
        let _ = writeln!(out, "{}", if m { 1 } else { 0 });
    }
    out.push_str("VECTORS velocity double\n");
    for idx in 0..grid.num_cells() {
        let [vx, vy, vz] = center_velocity(v, grid.cell_coords(idx));
        let _ = writeln!(out, "{vx} {vy} {vz}");
    }
    out
}

/// Centerline profile CSV: wall-normal coordinate and streamwise velocity.
pub fn profile_csv(v: &VelocityField) -> String {
    let mut out = String::from("y,vx\n");
    for (y, vx) in channel_profile(v) {
        let _ = writeln!(out, "{y},{vx}");
    }
    out
}

/// Gnuplot script plotting the centerline profile CSV next to it.
pub fn gnuplot_script(profile_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set xlabel 'wall-normal coordinate'\n\
         set ylabel 'streamwise velocity'\n\
         set grid\n\
         set key left top\n\
         set terminal pngcairo size 900,600\n\
         set output 'profile.png'\n\
         plot '{profile_name}' skip 1 using 1:2 with linespoints title 'computed profile'\n"
    )
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministic JSON manifest. Keys are sorted; timings live in a single
/// `timings` object so determinism checks can drop exactly that key.
pub struct ManifestBuilder {
    fields: Map<String, Value>,
    timings: Map<String, Value>,
}

impl ManifestBuilder {
    pub fn new(command: &str, config_text: &str, seed: u64) -> Self {
        let mut fields = Map::new();
        fields.insert("command".into(), json!(command));
        fields.insert("config_sha256".into(), json!(sha256_hex(config_text)));
        fields.insert("seed".into(), json!(seed));
        fields.insert(
            "tool_version".into(),
            json!(env!("CARGO_PKG_VERSION")),
        );
        ManifestBuilder {
            fields,
            timings: Map::new(),
        }
    }

    pub fn scalar(&mut self, key: &str, value: f64) -> &mut Self {
        self.fields.insert(key.into(), json!(value));
        self
    }

    pub fn value(&mut self, key: &str, value: Value) -> &mut Self {
        self.fields.insert(key.into(), value);
        self
    }

    pub fn timing(&mut self, key: &str, seconds: f64) -> &mut Self {
        self.timings.insert(key.into(), json!(seconds));
        self
    }

    pub fn render(&self) -> String {
        let mut all = self.fields.clone();
        all.insert("timings".into(), Value::Object(self.timings.clone()));
        // serde_json Map preserves insertion order; normalize by sorting
        let sorted: std::collections::BTreeMap<_, _> = all.into_iter().collect();
        let mut s = serde_json::to_string_pretty(&sorted).expect("serializable manifest");
        s.push('\n');
        s
    }
}

/// The manifest text with the `timings` object removed, for determinism
/// comparisons.
pub fn manifest_without_timings(text: &str) -> Result<String, Error> {
    let mut value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("manifest is not valid JSON: {e}")))?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("timings");
    }
    let mut s = serde_json::to_string_pretty(&value).expect("serializable");
    s.push('\n');
    Ok(s)
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
            &[0.5, 1.0],
            &[BoundaryKind::Periodic, BoundaryKind::Wall],
        )
        .unwrap()
    }

    #[test]
    fn scalar_csv_round_trips_bitwise() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut field = ScalarField::zeros(&g);
        for x in field.data_mut() {
            *x = rng.gen_range(-1.0..1.0) * 1e-7;
        }
        let text = scalar_csv(&field);
        let back = scalar_from_csv(&g, &text).unwrap();
        assert_eq!(field.data(), back.data());
    }

    #[test]
    fn velocity_csv_round_trips_bitwise() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = VelocityField::sample(&g, |_, _| rng.gen_range(-3.0..3.0));
        let text = velocity_csv(&v);
        let back = velocity_from_csv(&g, &text).unwrap();
        for c in 0..2 {
            assert_eq!(v.comp_data(c), back.comp_data(c));
        }
    }

    #[test]
    fn manifest_is_deterministic_modulo_timings() {
        let mut m1 = ManifestBuilder::new("solve", "cfg", 3);
        m1.scalar("energy", 1.25e-9).timing("solve", 0.5);
        let mut m2 = ManifestBuilder::new("solve", "cfg", 3);
        m2.scalar("energy", 1.25e-9).timing("solve", 99.0);
        assert_ne!(m1.render(), m2.render());
        assert_eq!(
            manifest_without_timings(&m1.render()).unwrap(),
            manifest_without_timings(&m2.render()).unwrap()
        );
    }

    #[test]
    fn vtk_header_shape() {
        let g = grid();
        let v = VelocityField::zeros(&g);
        let p = ScalarField::zeros(&g);
        let s = ScalarField::zeros(&g);
        let rigid = vec![true; g.num_cells()];
        let text = vtk_file(&g, &v, &p, &s, &rigid);
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("DIMENSIONS 5 9 2"));
        assert!(text.contains("CELL_DATA 32"));
    }
}
