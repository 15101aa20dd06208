//! Structured finite-volume meshes over the built-in charts.
//!
//! Cells are coordinate boxes indexed `i + n0 * j`. Every face is a coordinate
//! line (or point in 1D) `x^a = const`; its induced measure and unit normal
//! follow from the metric:
//!
//! ```text
//! area = √|g| · √(g^{aa}) · Δx^b          (b ≠ a; Δx^b = 1 in 1D)
//! ν^i  = g^{ia} / √(g^{aa})               so that g(ν, ν) = 1
//! ```
//!
//! Volumes and areas use the midpoint rule. Non-periodic axes (the sphere
//! band) get no faces on their edges, which is the zero-normal-flux closure.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{MetricChart, Point, Vector};

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: [usize; 2],
    pub center: Point,
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Cell on the low-coordinate side; the normal points out of it.
    pub left: usize,
    pub right: usize,
    pub axis: usize,
    pub center: Point,
    pub area: f64,
    /// Contravariant unit normal.
    pub normal: Vector,
    /// `√|g| g^{aa} Δx^b / Δx^a`: multiplies `u_R − u_L` in the diffusive flux.
    pub diffusion: f64,
    /// `√|g| g^{ab} Δx^b`: multiplies the tangential derivative `∂_b u`.
    pub cross: f64,
}

#[derive(Clone, Debug)]
pub struct ManifoldMesh {
    chart: MetricChart,
    shape: [usize; 2],
    spacing: [f64; 2],
    cells: Vec<Cell>,
    faces: Vec<Face>,
    // CSR list of (face, sign) per cell; sign is +1 when the cell is `left`.
    cell_face_offsets: Vec<usize>,
    cell_face_entries: Vec<(usize, f64)>,
}

impl ManifoldMesh {
    /// Builds a mesh with `resolution[a]` cells along each chart axis.
    pub fn new(chart: MetricChart, resolution: &[usize]) -> Result<Self> {
        let dim = chart.dim();
        if resolution.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "{} chart needs {dim} resolution value(s), got {}",
                chart.name(),
                resolution.len()
            )));
        }
        let axes = chart.axes();
        let mut shape = [1usize; 2];
        let mut spacing = [1.0; 2];
        for a in 0..dim {
            let need = if axes[a].periodic { 3 } else { 2 };
            if resolution[a] < need {
                return Err(Error::InvalidParameter(format!(
                    "axis {a} needs at least {need} cells, got {}",
                    resolution[a]
                )));
            }
            shape[a] = resolution[a];
            spacing[a] = axes[a].length() / resolution[a] as f64;
        }

        let mut cells = Vec::with_capacity(shape[0] * shape[1]);
        for j in 0..shape[1] {
            for i in 0..shape[0] {
                let mut center = [0.0; 2];
                center[0] = axes[0].lo + (i as f64 + 0.5) * spacing[0];
                if dim == 2 {
                    center[1] = axes[1].lo + (j as f64 + 0.5) * spacing[1];
                }
                chart.check_positive(&center)?;
                let volume = chart.sqrt_det(&center) * spacing[0] * spacing[1];
                cells.push(Cell {
                    index: [i, j],
                    center,
                    volume,
                });
            }
        }

        let mut faces = Vec::new();
        for a in 0..dim {
            let b = 1 - a;
            let count_a = if axes[a].periodic { shape[a] } else { shape[a] - 1 };
            for jb in 0..shape[b] {
                for ia in 0..count_a {
                    let mut lidx = [0usize; 2];
                    lidx[a] = ia;
                    lidx[b] = jb;
                    let mut ridx = lidx;
                    ridx[a] = (ia + 1) % shape[a];
                    let left = lidx[0] + shape[0] * lidx[1];
                    let right = ridx[0] + shape[0] * ridx[1];
                    let mut center = cells[left].center;
                    center[a] = axes[a].lo + (ia + 1) as f64 * spacing[a];
                    chart.check_positive(&center)?;
                    let gi = chart.inverse_metric(&center);
                    let sqrt_g = chart.sqrt_det(&center);
                    let gaa = gi[a][a];
                    let other = if dim == 2 { spacing[b] } else { 1.0 };
                    let mut normal = [0.0; 2];
                    for (i, n) in normal.iter_mut().enumerate().take(dim) {
                        *n = gi[i][a] / gaa.sqrt();
                    }
                    faces.push(Face {
                        left,
                        right,
                        axis: a,
                        center,
                        area: sqrt_g * gaa.sqrt() * other,
                        normal,
                        diffusion: sqrt_g * gaa * other / spacing[a],
                        cross: if dim == 2 { sqrt_g * gi[a][b] * other } else { 0.0 },
                    });
                }
            }
        }

        let mut per_cell: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cells.len()];
        for (f, face) in faces.iter().enumerate() {
            per_cell[face.left].push((f, 1.0));
            per_cell[face.right].push((f, -1.0));
        }
        let mut cell_face_offsets = Vec::with_capacity(cells.len() + 1);
        let mut cell_face_entries = Vec::new();
        cell_face_offsets.push(0);
        for list in per_cell {
            cell_face_entries.extend(list);
            cell_face_offsets.push(cell_face_entries.len());
        }

        Ok(Self {
            chart,
            shape,
            spacing,
            cells,
            faces,
            cell_face_offsets,
            cell_face_entries,
        })
    }

    pub fn chart(&self) -> &MetricChart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dim()].iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Faces bounding `cell` with orientation sign (+1: outward normal).
    pub fn cell_faces(&self, cell: usize) -> &[(usize, f64)] {
        &self.cell_face_entries[self.cell_face_offsets[cell]..self.cell_face_offsets[cell + 1]]
    }

    /// Index of the neighbour of `cell` shifted by `offset` cells along `axis`,
    /// or `None` across a closed (non-periodic) edge.
    pub fn neighbor(&self, cell: usize, axis: usize, offset: isize) -> Option<usize> {
        let mut idx = self.cells[cell].index;
        let n = self.shape[axis] as isize;
        let moved = idx[axis] as isize + offset;
        if self.chart.axes()[axis].periodic {
            idx[axis] = moved.rem_euclid(n) as usize;
        } else if (0..n).contains(&moved) {
            idx[axis] = moved as usize;
        } else {
            return None;
        }
        Some(idx[0] + self.shape[0] * idx[1])
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    /// Samples `f` at the cell centres.
    pub fn sample(self: &Arc<Self>, f: impl Fn(&Point) -> f64) -> ScalarField {
        let values = self.cells.iter().map(|c| f(&c.center)).collect();
        ScalarField {
            mesh: Arc::clone(self),
            values,
        }
    }

    /// `Σ_cells vol · v`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.cells.iter().zip(values).map(|(c, v)| c.volume * v).sum()
    }

    pub fn l1_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.cells
            .iter()
            .zip(a.iter().zip(b))
            .map(|(c, (x, y))| c.volume * (x - y).abs())
            .sum()
    }

    /// Largest eigenvalue of `g^{ij}` over cell and face centres.
    pub fn inverse_metric_bound(&self) -> f64 {
        let cells = self.cells.iter().map(|c| self.chart.inverse_metric_bound(&c.center));
        let faces = self.faces.iter().map(|f| self.chart.inverse_metric_bound(&f.center));
        cells.chain(faces).fold(0.0, f64::max)
    }
}

/// One value per cell, interpreted as a cell average.
#[derive(Clone, Debug)]
pub struct ScalarField {
    mesh: Arc<ManifoldMesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<ManifoldMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values for {} cells",
                values.len(),
                mesh.len()
            )));
        }
        if let Some(cell) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 0, cell });
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Arc<ManifoldMesh>, value: f64) -> Self {
        let values = vec![value; mesh.len()];
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<ManifoldMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Face-jump total variation `Σ_faces area · |u_R − u_L|`.
pub fn total_variation(field: &ScalarField) -> f64 {
    total_variation_of(&field.mesh, &field.values)
}

pub fn total_variation_of(mesh: &ManifoldMesh, values: &[f64]) -> f64 {
    mesh.faces
        .iter()
        .map(|f| f.area * (values[f.right] - values[f.left]).abs())
        .sum()
}

/// `(Σ vol |u|^p)^{1/p}`, or `max |u|` for `p = ∞`.
pub fn lp_norm(field: &ScalarField, p: f64) -> Result<f64> {
    lp_norm_of(&field.mesh, &field.values, p)
}

pub fn lp_norm_of(mesh: &ManifoldMesh, values: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "L^p exponent must be at least 1, got {p}"
        )));
    }
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    }
    if p == 1.0 {
        return Ok(mesh.integrate(&values.iter().map(|v| v.abs()).collect::<Vec<_>>()));
    }
    let s: f64 = mesh
        .cells
        .iter()
        .zip(values)
        .map(|(c, v)| c.volume * v.abs().powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::geometry::Fourier1d;

    fn mesh(chart: MetricChart, res: &[usize]) -> Arc<ManifoldMesh> {
        Arc::new(ManifoldMesh::new(chart, res).unwrap())
    }

    #[test]
    fn faces_pair_up_with_opposite_signs() {
        let m = mesh(MetricChart::sphere_band(PI / 3.0).unwrap(), &[8, 12]);
        let mut seen = vec![0i32; m.faces().len()];
        for c in 0..m.len() {
            for &(f, s) in m.cell_faces(c) {
                seen[f] += s as i32;
                let face = &m.faces()[f];
                assert!(if s > 0.0 { face.left == c } else { face.right == c });
            }
        }
        assert!(seen.iter().all(|s| *s == 0));
        // band edges carry no faces
        assert_eq!(m.faces().len(), 7 * 12 + 8 * 12);
    }

    #[test]
    fn normals_are_unit() {
        for chart in [
            MetricChart::wavy_torus(2.0 * PI).unwrap(),
            MetricChart::sphere_band(PI / 3.0).unwrap(),
            MetricChart::weighted_circle(Fourier1d::new(2.0, vec![1.0], vec![])).unwrap(),
        ] {
            let res: Vec<usize> = vec![16; chart.dim()];
            let m = mesh(chart, &res);
            for f in m.faces() {
                let n = m.chart().inner(&f.center, &f.normal, &f.normal);
                assert!((n - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn band_volume_converges_quadratically() {
        // ∫ cosθ dθ dφ over |θ| ≤ π/3 = 2π · 2 sin(π/3)
        let exact = 2.0 * PI * 2.0 * (PI / 3.0).sin();
        let err = |n: usize| (mesh(MetricChart::sphere_band(PI / 3.0).unwrap(), &[n, n]).total_volume() - exact).abs();
        let order = (err(16) / err(32)).log2();
        assert!(order > 1.9 && order < 2.1, "order {order}");
    }

    #[test]
    fn tv_of_constant_and_pulse() {
        let m = mesh(MetricChart::flat_circle(1.0).unwrap(), &[64]);
        assert_eq!(total_variation(&ScalarField::constant(m.clone(), 3.0)), 0.0);
        let pulse = m.sample(|x| if x[0] > 0.25 && x[0] < 0.5 { 1.0 } else { 0.0 });
        assert_eq!(total_variation(&pulse), 2.0);
    }

    #[test]
    fn lp_norm_examples() {
        let m = mesh(MetricChart::flat_circle(1.0).unwrap(), &[512]);
        let s = m.sample(|x| (2.0 * PI * x[0]).sin());
        assert!((lp_norm(&s, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-4);
        assert_eq!(
            lp_norm(&s, f64::INFINITY).unwrap(),
            s.values().iter().fold(0.0, |a: f64, v| a.max(v.abs()))
        );
        assert!(lp_norm(&s, 0.5).is_err());

        let band = mesh(MetricChart::sphere_band(PI / 3.0).unwrap(), &[10, 20]);
        let c = ScalarField::constant(band.clone(), 2.0);
        let v = band.total_volume();
        for p in [1.0, 2.0, 3.5] {
            assert!((lp_norm(&c, p).unwrap() - 2.0 * v.powf(1.0 / p)).abs() < 1e-12);
        }
    }

    #[test]
    fn neighbours_wrap_on_periodic_axes_only() {
        let m = mesh(MetricChart::sphere_band(PI / 3.0).unwrap(), &[4, 6]);
        assert_eq!(m.neighbor(0, 1, -1), Some(5 * 4));
        assert_eq!(m.neighbor(0, 0, -1), None);
        assert_eq!(m.neighbor(3, 0, 1), None);
    }

    #[test]
    fn rejects_bad_resolution() {
        assert!(ManifoldMesh::new(MetricChart::flat_torus(1.0).unwrap(), &[16]).is_err());
        assert!(ManifoldMesh::new(MetricChart::flat_circle(1.0).unwrap(), &[2]).is_err());
        let m = mesh(MetricChart::flat_circle(1.0).unwrap(), &[8]);
        assert!(ScalarField::new(m.clone(), vec![0.0; 7]).is_err());
        assert!(ScalarField::new(m, vec![f64::NAN; 8]).is_err());
    }
}
