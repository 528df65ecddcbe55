//! Polyhedral formations built from a tree of regular polygonal faces.
//!
//! A [`Development`] lists faces and the rules gluing their edges. A
//! [`MinimalPps`] is a vertex-spanning subset of faces whose dual graph is a
//! tree; its reduced constraint matrix keeps the in-plane row only for the
//! first two faces.

use nalgebra::{DMatrix, DVector, Vector3};
use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::cyclic::{assemble_l, cyclic_control, fixed_size_angles, CyclicParams, DEFINITENESS_TOL};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{frame_from_normal, lambda_max_sym, numeric_rank, Rotation3};
use crate::report::CertificationEntry;
use crate::subspace::{orthonormalize, polygon_rows, ConstraintMatrix, RANK_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Counterclockwise about the outward normal.
    pub vertex_ids: Vec<usize>,
    /// Unit outward normal.
    pub normal: Vector3<f64>,
    /// Frame used for the face constraints. Its plane normal `R_ηᵀ e_z` is the
    /// inward normal, so the counterclockwise-outward vertex order is the
    /// clockwise order the polygon constraints expect.
    pub normal_rotation: Rotation3,
}

impl Face {
    pub fn new(vertex_ids: Vec<usize>, outward_normal: Vector3<f64>) -> Result<Self> {
        if vertex_ids.len() < 3 {
            return Err(Error::Parameter(format!("face needs >= 3 vertices, got {}", vertex_ids.len())));
        }
        let unique: BTreeSet<_> = vertex_ids.iter().collect();
        if unique.len() != vertex_ids.len() {
            return Err(Error::Parameter(format!("face {vertex_ids:?} repeats a vertex")));
        }
        let normal = outward_normal.normalize();
        let normal_rotation = frame_from_normal(&(-normal))?;
        Ok(Self { vertex_ids, normal, normal_rotation })
    }

    pub fn len(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_ids.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.vertex_ids.len();
        (0..k).map(move |a| (self.vertex_ids[a], self.vertex_ids[(a + 1) % k]))
    }

    pub fn has_edge(&self, edge: (usize, usize)) -> bool {
        self.edges().any(|(a, b)| (a, b) == edge || (b, a) == edge)
    }

    /// Position of robot `v` within the face, if it is a member.
    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.vertex_ids.iter().position(|&w| w == v)
    }
}

/// Outward normal of a planar polygon from its winding (Newell's method).
pub fn winding_normal(positions: &[Vector3<f64>], ids: &[usize]) -> Vector3<f64> {
    let k = ids.len();
    let c = ids.iter().map(|&i| positions[i]).sum::<Vector3<f64>>() / k as f64;
    let mut n = Vector3::zeros();
    for a in 0..k {
        n += (positions[ids[a]] - c).cross(&(positions[ids[(a + 1) % k]] - c));
    }
    n.normalize()
}

/// Two faces glued along an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rule {
    pub face_a: usize,
    pub face_b: usize,
    pub edge: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Development {
    pub faces: Vec<Face>,
    pub rules: Vec<Rule>,
}

fn same_edge(a: (usize, usize), b: (usize, usize)) -> bool {
    a == b || a == (b.1, b.0)
}

impl Development {
    /// Faces from vertex positions; normals follow the winding and every edge
    /// shared by two faces gets one rule.
    pub fn from_template(positions: &[Vector3<f64>], faces: &[Vec<usize>]) -> Result<Self> {
        let faces = faces
            .iter()
            .map(|ids| {
                if let Some(&bad) = ids.iter().find(|&&i| i >= positions.len()) {
                    return Err(Error::Parameter(format!("vertex id {bad} has no position")));
                }
                Face::new(ids.clone(), winding_normal(positions, ids))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_faces(faces))
    }

    /// Faces with stored normals; one rule per shared edge.
    pub fn from_faces(faces: Vec<Face>) -> Self {
        let rules = shared_edges(&faces);
        Self { faces, rules }
    }

    pub fn vertex_count(&self) -> usize {
        self.faces.iter().flat_map(|f| f.vertex_ids.iter()).max().map_or(0, |m| m + 1)
    }

    pub fn vertex_set(&self, face_ids: &[usize]) -> BTreeSet<usize> {
        face_ids.iter().flat_map(|&f| self.faces[f].vertex_ids.iter().copied()).collect()
    }

    /// Dual-graph neighbors of each face according to the rules.
    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.faces.len()];
        for r in &self.rules {
            if r.face_a < self.faces.len() && r.face_b < self.faces.len() {
                adj[r.face_a].insert(r.face_b);
                adj[r.face_b].insert(r.face_a);
            }
        }
        adj
    }

    pub fn rule_between(&self, a: usize, b: usize) -> Option<&Rule> {
        self.rules
            .iter()
            .find(|r| (r.face_a == a && r.face_b == b) || (r.face_a == b && r.face_b == a))
    }
}

fn shared_edges(faces: &[Face]) -> Vec<Rule> {
    let mut rules = Vec::new();
    for a in 0..faces.len() {
        for b in a + 1..faces.len() {
            for e in faces[a].edges() {
                if faces[b].has_edge(e) {
                    rules.push(Rule { face_a: a, face_b: b, edge: e });
                }
            }
        }
    }
    rules
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    BadFace { face: usize, reason: String },
    UnknownFace { rule: usize, face: usize },
    EdgeNotShared { rule: usize },
    DuplicateRule { rule: usize, previous: usize },
    MissingRule { face_a: usize, face_b: usize, edge: (usize, usize) },
    EdgeMatchedTwice { face: usize, edge: (usize, usize) },
    Disconnected { components: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadFace { face, reason } => write!(f, "face {face}: {reason}"),
            Violation::UnknownFace { rule, face } => write!(f, "rule {rule} names unknown face {face}"),
            Violation::EdgeNotShared { rule } => write!(f, "rule {rule} glues an edge not on both faces"),
            Violation::DuplicateRule { rule, previous } => {
                write!(f, "rule {rule} repeats rule {previous}")
            }
            Violation::MissingRule { face_a, face_b, edge } => {
                write!(f, "faces {face_a} and {face_b} share edge {edge:?} without a rule")
            }
            Violation::EdgeMatchedTwice { face, edge } => {
                write!(f, "edge {edge:?} of face {face} is matched to more than one face")
            }
            Violation::Disconnected { components } => {
                write!(f, "dual graph has {components} components")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_development(d: &Development) -> ValidationReport {
    let mut violations = Vec::new();
    let nf = d.faces.len();
    for (i, f) in d.faces.iter().enumerate() {
        let unique: BTreeSet<_> = f.vertex_ids.iter().collect();
        if f.vertex_ids.len() < 3 {
            violations.push(Violation::BadFace { face: i, reason: "fewer than 3 vertices".into() });
        } else if unique.len() != f.vertex_ids.len() {
            violations.push(Violation::BadFace { face: i, reason: "repeated vertex".into() });
        }
    }

    let mut good = Vec::new();
    for (ri, r) in d.rules.iter().enumerate() {
        let mut ok = true;
        for face in [r.face_a, r.face_b] {
            if face >= nf {
                violations.push(Violation::UnknownFace { rule: ri, face });
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        if r.face_a == r.face_b || !d.faces[r.face_a].has_edge(r.edge) || !d.faces[r.face_b].has_edge(r.edge) {
            violations.push(Violation::EdgeNotShared { rule: ri });
            continue;
        }
        if let Some(&prev) = good.iter().find(|&&pi: &&usize| {
            let p = &d.rules[pi];
            same_edge(p.edge, r.edge)
                && ((p.face_a == r.face_a && p.face_b == r.face_b) || (p.face_a == r.face_b && p.face_b == r.face_a))
        }) {
            violations.push(Violation::DuplicateRule { rule: ri, previous: prev });
            continue;
        }
        good.push(ri);
    }

    for (face, f) in d.faces.iter().enumerate() {
        for e in f.edges() {
            let uses = good
                .iter()
                .filter(|&&ri| {
                    let r = &d.rules[ri];
                    (r.face_a == face || r.face_b == face) && same_edge(r.edge, e)
                })
                .count();
            if uses > 1 {
                violations.push(Violation::EdgeMatchedTwice { face, edge: e });
            }
        }
    }

    for a in 0..nf {
        for b in a + 1..nf {
            for e in d.faces[a].edges() {
                if d.faces[b].has_edge(e) {
                    let covered = good.iter().any(|&ri| {
                        let r = &d.rules[ri];
                        same_edge(r.edge, e)
                            && ((r.face_a == a && r.face_b == b) || (r.face_a == b && r.face_b == a))
                    });
                    if !covered {
                        violations.push(Violation::MissingRule { face_a: a, face_b: b, edge: e });
                    }
                }
            }
        }
    }

    let components = count_components(nf, good.iter().map(|&ri| (d.rules[ri].face_a, d.rules[ri].face_b)));
    if components > 1 {
        violations.push(Violation::Disconnected { components });
    }
    ValidationReport { violations }
}

fn count_components(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> usize {
    let mut adj = vec![Vec::new(); n];
    for (a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut comps = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        comps += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    comps
}

/// Tree of faces spanning every vertex, in breadth-first order from the root.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimalPps {
    /// Indices into the development's faces.
    pub faces: Vec<usize>,
    /// Tree edges, one per non-root face, joining it to its parent.
    pub rules: Vec<Rule>,
}

impl MinimalPps {
    /// Whether the rules still connect every face of the tree.
    pub fn is_connected_without(&self, skip: Option<usize>) -> bool {
        let pos = |f: usize| self.faces.iter().position(|&g| g == f).expect("rule face in pps");
        let edges = self
            .rules
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, r)| (pos(r.face_a), pos(r.face_b)));
        count_components(self.faces.len(), edges) == 1
    }
}

/// Grow a vertex-spanning tree of faces from `root`.
///
/// A face may join when it is adjacent to exactly one tree face and meets the
/// covered vertices only on the glued edge. Among admissible faces the one
/// adding the most new vertices wins, lowest id on ties; dead ends backtrack.
pub fn extract_minimal_pps(d: &Development, root: usize) -> Result<MinimalPps> {
    let report = validate_development(d);
    if !report.is_valid() {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Structural(format!("invalid development: {}", msgs.join("; "))));
    }
    if root >= d.faces.len() {
        return Err(Error::Parameter(format!("root face {root} out of range")));
    }
    let all = d.vertex_set(&(0..d.faces.len()).collect::<Vec<_>>());
    let adj = d.adjacency();
    let mut tree = vec![root];
    let mut parents = vec![usize::MAX];
    if !grow(d, &adj, &all, &mut tree, &mut parents) {
        return Err(Error::Structural("no vertex-spanning tree of faces exists".into()));
    }
    Ok(bfs_order(d, root, &tree, &parents))
}

fn grow(
    d: &Development,
    adj: &[BTreeSet<usize>],
    all: &BTreeSet<usize>,
    tree: &mut Vec<usize>,
    parents: &mut Vec<usize>,
) -> bool {
    let covered = d.vertex_set(tree);
    if covered.len() == all.len() {
        return true;
    }
    let mut candidates = Vec::new();
    for f in 0..d.faces.len() {
        if tree.contains(&f) {
            continue;
        }
        let touching: Vec<usize> = adj[f].iter().copied().filter(|g| tree.contains(g)).collect();
        if touching.len() != 1 {
            continue;
        }
        let parent = touching[0];
        let rule = d.rule_between(f, parent).expect("adjacent faces have a rule");
        let face = &d.faces[f];
        let shared: BTreeSet<usize> = face.vertex_ids.iter().copied().filter(|v| covered.contains(v)).collect();
        let edge: BTreeSet<usize> = [rule.edge.0, rule.edge.1].into_iter().collect();
        if shared != edge {
            continue;
        }
        candidates.push((face.len() - 2, f, parent));
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, f, parent) in candidates {
        tree.push(f);
        parents.push(parent);
        if grow(d, adj, all, tree, parents) {
            return true;
        }
        tree.pop();
        parents.pop();
    }
    false
}

fn bfs_order(d: &Development, root: usize, tree: &[usize], parents: &[usize]) -> MinimalPps {
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); d.faces.len()];
    for (&f, &p) in tree.iter().zip(parents.iter()).skip(1) {
        children[p].push(f);
    }
    for c in &mut children {
        c.sort_unstable();
    }
    let mut faces = Vec::new();
    let mut rules = Vec::new();
    let mut queue = VecDeque::from([root]);
    while let Some(f) = queue.pop_front() {
        faces.push(f);
        for &c in &children[f] {
            rules.push(*d.rule_between(f, c).expect("tree edge has a rule"));
            queue.push_back(c);
        }
    }
    MinimalPps { faces, rules }
}

/// `Ē^(k) ⊗ I₃`, extracting a face's robots in face order.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrix {
    pub face_id: usize,
    pub matrix: DMatrix<f64>,
}

impl SelectionMatrix {
    pub fn new(face_id: usize, face: &Face, n: usize) -> Result<Self> {
        let mut e = DMatrix::zeros(3 * face.len(), 3 * n);
        for (i, &v) in face.vertex_ids.iter().enumerate() {
            if v >= n {
                return Err(Error::Parameter(format!("vertex {v} out of range for {n} robots")));
            }
            for c in 0..3 {
                e[(3 * i + c, 3 * v + c)] = 1.0;
            }
        }
        Ok(Self { face_id, matrix: e })
    }
}

pub fn gather(face: &Face, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        3 * face.len(),
        face.vertex_ids.iter().flat_map(|&v| [x[3 * v], x[3 * v + 1], x[3 * v + 2]]),
    )
}

/// Face constraint rows on the full state; `reduced` drops the in-plane row.
pub fn build_face_constraints(face: &Face, n: usize, reduced: bool) -> Result<DMatrix<f64>> {
    let e = SelectionMatrix::new(0, face, n)?;
    Ok(polygon_rows(face.len(), &face.normal_rotation, !reduced)? * e.matrix)
}

fn stack(blocks: &[DMatrix<f64>], cols: usize) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut v = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        v.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    v
}

/// Full constraints for every face of the tree, without row reduction.
pub fn build_full_v(d: &Development, pps: &MinimalPps, n: usize) -> Result<DMatrix<f64>> {
    let blocks = pps
        .faces
        .iter()
        .map(|&f| build_face_constraints(&d.faces[f], n, false))
        .collect::<Result<Vec<_>>>()?;
    Ok(stack(&blocks, 3 * n))
}

/// Full constraints for the first two faces, rotational rows only for the rest.
pub fn build_reduced_v(d: &Development, pps: &MinimalPps, n: usize) -> Result<ConstraintMatrix> {
    if pps.faces.len() >= 2 && d.rule_between(pps.faces[0], pps.faces[1]).is_none() {
        return Err(Error::Structural(format!(
            "faces {} and {} must share an edge",
            pps.faces[0], pps.faces[1]
        )));
    }
    let mut blocks = Vec::new();
    for (pos, &f) in pps.faces.iter().enumerate() {
        blocks.push(build_face_constraints(&d.faces[f], n, pos >= 2)?);
        let v = stack(&blocks, 3 * n);
        if numeric_rank(&v, RANK_TOL) < v.nrows() {
            return Err(Error::Structural(format!("face {f} makes the constraint rows dependent")));
        }
    }
    let v = stack(&blocks, 3 * n);
    let (vbar, ubar) = orthonormalize(&v)?;
    let rank = vbar.nrows();
    Ok(ConstraintMatrix { v, vbar, ubar, rank })
}

/// Expected row count `3Σ|𝒱_k| − 6L + 2`.
pub fn reduced_row_count(d: &Development, pps: &MinimalPps) -> usize {
    let total: usize = pps.faces.iter().map(|&f| d.faces[f].len()).sum();
    3 * total + 2 - 6 * pps.faces.len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceController {
    pub face: Face,
    pub params: CyclicParams,
}

/// A tree of faces with one cyclic controller per face.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedronFormation {
    pub n: usize,
    pub development: Development,
    pub pps: MinimalPps,
    pub faces: Vec<FaceController>,
}

impl PolyhedronFormation {
    /// Uniform gain and horizon on every face of the tree with the fixed-size
    /// angles `mπ/|𝒱_k|`.
    pub fn uniform(development: Development, pps: MinimalPps, gain: f64, horizon: usize) -> Result<Self> {
        let n = development.vertex_count();
        let faces = pps
            .faces
            .iter()
            .map(|&f| {
                let face = development.faces[f].clone();
                let params = CyclicParams::uniform(face.len(), horizon, gain, face.normal_rotation)?;
                Ok(FaceController { face, params })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, development, pps, faces })
    }

    pub fn constraint_matrix(&self) -> Result<ConstraintMatrix> {
        build_reduced_v(&self.development, &self.pps, self.n)
    }

    /// `Σ_k E^(k)ᵀ 𝓛_η^(k) E^(k)`; the closed loop is `ẋ = −A x`.
    pub fn closed_loop_matrix(&self) -> Result<DMatrix<f64>> {
        let mut a = DMatrix::zeros(3 * self.n, 3 * self.n);
        for fc in &self.faces {
            let e = SelectionMatrix::new(0, &fc.face, self.n)?.matrix;
            a += e.transpose() * assemble_l(&fc.params)? * e;
        }
        Ok(a)
    }

    /// Distinct robots whose positions robot `v`'s controller reads.
    pub fn neighbors(&self, v: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for fc in &self.faces {
            if let Some(i) = fc.face.local_index(v) {
                let k = fc.face.len();
                for m in 1..=fc.params.horizon {
                    out.insert(fc.face.vertex_ids[(i + m) % k]);
                    out.insert(fc.face.vertex_ids[(i + k - m) % k]);
                }
            }
        }
        out.remove(&v);
        out
    }
}

/// Superposition of per-face cyclic controllers.
pub fn polyhedron_control(x: &DVector<f64>, formation: &PolyhedronFormation) -> Result<DVector<f64>> {
    check_dim(3 * formation.n, x.len())?;
    let mut u = DVector::zeros(x.len());
    for fc in &formation.faces {
        let k = fc.face.len();
        if fc.params.n != k {
            return Err(Error::Dimension { expected: k, got: fc.params.n });
        }
        let expected = fixed_size_angles(k, fc.params.horizon);
        if fc.params.angles.iter().zip(expected.iter()).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::Parameter(format!(
                "face {:?} must use angles m*pi/{k} to keep the formation invariant",
                fc.face.vertex_ids
            )));
        }
        let uf = cyclic_control(&gather(&fc.face, x), &fc.params)?;
        for (i, &v) in fc.face.vertex_ids.iter().enumerate() {
            for c in 0..3 {
                u[3 * v + c] += uf[3 * i + c];
            }
        }
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem7Report {
    /// `λ_max(sym(V(−A)Vᵀ))`.
    pub lambda_max: f64,
    /// Same with the row-orthonormal `V̄`; shares its sign with `lambda_max`.
    pub lambda_max_orthonormal: f64,
    pub certified: bool,
}

impl Theorem7Report {
    pub fn margin(&self) -> f64 {
        -self.lambda_max
    }

    pub fn entry(&self) -> CertificationEntry {
        CertificationEntry {
            check: "polyhedron-definiteness".into(),
            margin: self.margin(),
            certified: self.certified,
            warnings: Vec::new(),
        }
    }
}

pub fn theorem7_certify(cm: &ConstraintMatrix, formation: &PolyhedronFormation) -> Result<Theorem7Report> {
    let a = -formation.closed_loop_matrix()?;
    let lambda_max = lambda_max_sym(&(&cm.v * &a * cm.v.transpose()));
    let lambda_max_orthonormal = lambda_max_sym(&(&cm.vbar * &a * cm.vbar.transpose()));
    Ok(Theorem7Report { lambda_max, lambda_max_orthonormal, certified: lambda_max < -DEFINITENESS_TOL })
}
