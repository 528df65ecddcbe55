//! Vertex templates for the built-in polyhedral formations.

use nalgebra::{DVector, Unit, Vector3};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::stack_points;
use crate::polyhedron::{extract_minimal_pps, winding_normal, Development, MinimalPps, PolyhedronFormation};

pub const SHAPE_NAMES: [&str; 5] = ["cube", "octahedron", "hexagonal_box", "tetrahedron", "dome"];

#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub name: String,
    pub positions: Vec<Vector3<f64>>,
    /// Each face counterclockwise about its outward normal.
    pub faces: Vec<Vec<usize>>,
    pub root_face: usize,
}

impl Shape {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn stacked(&self) -> DVector<f64> {
        stack_points(&self.positions)
    }

    pub fn development(&self) -> Result<Development> {
        Development::from_template(&self.positions, &self.faces)
    }

    pub fn pps(&self) -> Result<(Development, MinimalPps)> {
        let d = self.development()?;
        let pps = extract_minimal_pps(&d, self.root_face)?;
        Ok((d, pps))
    }

    pub fn formation(&self, gain: f64, horizon: usize) -> Result<PolyhedronFormation> {
        let (d, pps) = self.pps()?;
        PolyhedronFormation::uniform(d, pps, gain, horizon)
    }
}

pub fn by_name(name: &str, edge: f64) -> Result<Shape> {
    if !(edge > 0.0) || !edge.is_finite() {
        return Err(Error::Parameter(format!("edge length must be positive, got {edge}")));
    }
    match name {
        "cube" => Ok(cube(edge)),
        "octahedron" => Ok(octahedron(edge)),
        "hexagonal_box" => Ok(hexagonal_box(edge)),
        "tetrahedron" => Ok(tetrahedron(edge)),
        "dome" => Ok(dome(edge)),
        other => Err(Error::Parameter(format!("unknown shape '{other}'"))),
    }
}

/// Reverse any face whose winding normal points toward `inside`.
fn orient(positions: &[Vector3<f64>], faces: Vec<Vec<usize>>, inside: &Vector3<f64>) -> Vec<Vec<usize>> {
    faces
        .into_iter()
        .map(|mut f| {
            let c = f.iter().map(|&i| positions[i]).sum::<Vector3<f64>>() / f.len() as f64;
            if winding_normal(positions, &f).dot(&(c - inside)) < 0.0 {
                f.reverse();
            }
            f
        })
        .collect()
}

fn centroid(p: &[Vector3<f64>]) -> Vector3<f64> {
    p.iter().sum::<Vector3<f64>>() / p.len() as f64
}

fn closed(name: &str, positions: Vec<Vector3<f64>>, faces: Vec<Vec<usize>>) -> Shape {
    let c = centroid(&positions);
    let faces = orient(&positions, faces, &c);
    Shape { name: name.into(), positions, faces, root_face: 0 }
}

pub fn cube(edge: f64) -> Shape {
    let h = edge / 2.0;
    let mut p = Vec::new();
    for x in [-h, h] {
        for y in [-h, h] {
            for z in [-h, h] {
                p.push(Vector3::new(x, y, z));
            }
        }
    }
    // top, front, bottom, back, left, right
    let faces = vec![
        vec![1, 5, 7, 3],
        vec![0, 4, 5, 1],
        vec![0, 2, 6, 4],
        vec![2, 3, 7, 6],
        vec![0, 1, 3, 2],
        vec![4, 6, 7, 5],
    ];
    closed("cube", p, faces)
}

pub fn octahedron(edge: f64) -> Shape {
    let s = edge / 2f64.sqrt();
    let p = vec![
        Vector3::new(s, 0.0, 0.0),
        Vector3::new(-s, 0.0, 0.0),
        Vector3::new(0.0, s, 0.0),
        Vector3::new(0.0, -s, 0.0),
        Vector3::new(0.0, 0.0, s),
        Vector3::new(0.0, 0.0, -s),
    ];
    let faces = vec![
        vec![0, 2, 4],
        vec![2, 1, 4],
        vec![1, 3, 4],
        vec![3, 0, 4],
        vec![2, 0, 5],
        vec![1, 2, 5],
        vec![3, 1, 5],
        vec![0, 3, 5],
    ];
    closed("octahedron", p, faces)
}

pub fn tetrahedron(edge: f64) -> Shape {
    let s = edge / (2.0 * 2f64.sqrt());
    let p = vec![
        Vector3::new(s, s, s),
        Vector3::new(s, -s, -s),
        Vector3::new(-s, s, -s),
        Vector3::new(-s, -s, s),
    ];
    let faces = vec![vec![0, 1, 2], vec![0, 3, 1], vec![0, 2, 3], vec![1, 3, 2]];
    closed("tetrahedron", p, faces)
}

/// Hexagonal prism with square sides.
pub fn hexagonal_box(edge: f64) -> Shape {
    let mut p = Vec::new();
    for z in [edge / 2.0, -edge / 2.0] {
        for k in 0..6 {
            let t = k as f64 * PI / 3.0;
            p.push(Vector3::new(edge * t.cos(), edge * t.sin(), z));
        }
    }
    let mut faces = vec![(0..6).collect(), vec![0, 6, 7, 1], (6..12).collect()];
    for k in 1..6 {
        faces.push(vec![k, 6 + k, 6 + (k + 1) % 6, (k + 1) % 6]);
    }
    closed("hexagonal_box", p, faces)
}

/// Nine squares: a top square, four squares folded down 30° off its edges
/// and four more folded a further 30° off their outer edges. 20 vertices.
pub fn dome(edge: f64) -> Shape {
    let fold = PI / 6.0;
    let rot = |axis: Vector3<f64>, angle: f64, v: Vector3<f64>| {
        nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle) * v
    };
    // fold `dir` about `axis` by `fold` in whichever sense lowers it
    let fold_down = |axis: Vector3<f64>, dir: Vector3<f64>| {
        let d = rot(axis, fold, dir);
        if d.z > dir.z {
            rot(axis, -fold, dir)
        } else {
            d
        }
    };
    let mut p = vec![
        Vector3::new(-0.5, -0.5, 0.0),
        Vector3::new(0.5, -0.5, 0.0),
        Vector3::new(0.5, 0.5, 0.0),
        Vector3::new(-0.5, 0.5, 0.0),
    ];
    let mut faces = vec![vec![0, 1, 2, 3]];
    for e in 0..4 {
        let (a, b) = (e, (e + 1) % 4);
        let (pa, pb) = (p[a], p[b]);
        let out = ((pa + pb) / 2.0).normalize();
        let d = fold_down(pb - pa, out);
        let (c, dd) = (pb + d, pa + d);
        let (i1, i2) = (p.len(), p.len() + 1);
        p.push(c);
        p.push(dd);
        faces.push(vec![b, a, i2, i1]);

        let d2 = fold_down(c - dd, d);
        let (j1, j2) = (p.len(), p.len() + 1);
        p.push(c + d2);
        p.push(dd + d2);
        faces.push(vec![i1, i2, j2, j1]);
    }
    let p: Vec<Vector3<f64>> = p.into_iter().map(|v| v * edge).collect();
    let inside = Vector3::new(0.0, 0.0, -1.5 * edge);
    let faces = orient(&p, faces, &inside);
    Shape { name: "dome".into(), positions: p, faces, root_face: 0 }
}
