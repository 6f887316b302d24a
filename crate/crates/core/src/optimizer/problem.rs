//! Index-based view of a [`FactorGraph`] used by the solver: parameter layout,
//! edge linearization, normal-equation assembly and the two linear solvers.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{
    Cholesky, DMatrix, DVector, Matrix2, Matrix3, Matrix4, Matrix6, Matrix6x4, SMatrix, Vector2, Vector3,
    Vector4, Vector6,
};

use super::graph::{FactorGraph, LandmarkKey, PointMeasurement, VertexId};
use super::kernel::{robust_cost, robust_weight};
use crate::geometry::{LineUpdate, OrthonormalLine, Pose, PoseUpdate};
use crate::measurement::{line_jacobians_side, line_residual_at, mono_point_jacobians, stereo_point_jacobians};

/// Ordering of the free variables: all free poses (6 each) first, then free
/// points (3 each), then free lines (4 each), each group in ascending id.
/// Vertices without any edge are left out.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub poses: Vec<VertexId>,
    pub landmarks: Vec<LandmarkKey>,
    landmark_offsets: Vec<usize>,
    dim: usize,
}

impl Layout {
    pub fn new(graph: &FactorGraph) -> Self {
        let mut seen_poses = BTreeSet::new();
        let mut seen_points = BTreeSet::new();
        let mut seen_lines = BTreeSet::new();
        for e in &graph.point_edges {
            seen_poses.insert(e.pose);
            seen_points.insert(e.point);
        }
        for e in &graph.line_edges {
            seen_poses.insert(e.pose);
            seen_lines.insert(e.line);
        }
        let poses: Vec<VertexId> = graph
            .poses
            .iter()
            .filter(|(id, v)| !v.fixed && seen_poses.contains(*id))
            .map(|(id, _)| *id)
            .collect();
        let mut landmarks = Vec::new();
        landmarks.extend(
            graph
                .points
                .iter()
                .filter(|(id, v)| !v.fixed && seen_points.contains(*id))
                .map(|(id, _)| LandmarkKey::Point(*id)),
        );
        landmarks.extend(
            graph
                .lines
                .iter()
                .filter(|(id, v)| !v.fixed && seen_lines.contains(*id))
                .map(|(id, _)| LandmarkKey::Line(*id)),
        );
        let mut offset = 6 * poses.len();
        let mut landmark_offsets = Vec::with_capacity(landmarks.len());
        for lm in &landmarks {
            landmark_offsets.push(offset);
            offset += landmark_dim(lm);
        }
        Self {
            poses,
            landmarks,
            landmark_offsets,
            dim: offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pose_dim(&self) -> usize {
        6 * self.poses.len()
    }

    pub fn landmark_offset(&self, j: usize) -> usize {
        self.landmark_offsets[j]
    }

    pub fn is_empty(&self) -> bool {
        self.dim == 0
    }
}

pub fn landmark_dim(key: &LandmarkKey) -> usize {
    match key {
        LandmarkKey::Point(_) => 3,
        LandmarkKey::Line(_) => 4,
    }
}

/// Mutable copy of every vertex value, indexed densely.
#[derive(Debug, Clone)]
pub(crate) struct State {
    pub poses: Vec<Pose>,
    pub points: Vec<Vector3<f64>>,
    pub lines: Vec<OrthonormalLine>,
}

#[derive(Debug, Clone, Copy)]
struct EdgeRef {
    edge: usize,
    pose: usize,
    landmark: usize,
    pose_block: Option<usize>,
    landmark_block: Option<usize>,
}

/// Gauss–Newton system `H δ = −g` with block structure. Landmark blocks are
/// stored padded to 4×4; only the leading `dim × dim` part is meaningful.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub layout: Layout,
    pub pose_hessian: Vec<Matrix6<f64>>,
    pub pose_gradient: Vec<Vector6<f64>>,
    pub landmark_hessian: Vec<Matrix4<f64>>,
    pub landmark_gradient: Vec<Vector4<f64>>,
    /// Per landmark block: `(pose block, H_pose,landmark)` in first-seen order.
    pub cross: Vec<Vec<(usize, Matrix6x4<f64>)>>,
}

impl NormalEquations {
    fn zeros(layout: Layout) -> Self {
        let np = layout.poses.len();
        let nl = layout.landmarks.len();
        Self {
            layout,
            pose_hessian: vec![Matrix6::zeros(); np],
            pose_gradient: vec![Vector6::zeros(); np],
            landmark_hessian: vec![Matrix4::zeros(); nl],
            landmark_gradient: vec![Vector4::zeros(); nl],
            cross: vec![Vec::new(); nl],
        }
    }

    /// Dense `(H, g)` in layout order.
    pub fn to_dense(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.layout.dim();
        let mut h = DMatrix::zeros(n, n);
        let mut g = DVector::zeros(n);
        for (i, (hp, gp)) in self.pose_hessian.iter().zip(&self.pose_gradient).enumerate() {
            h.view_mut((6 * i, 6 * i), (6, 6)).copy_from(hp);
            g.rows_mut(6 * i, 6).copy_from(gp);
        }
        for (j, key) in self.layout.landmarks.iter().enumerate() {
            let d = landmark_dim(key);
            let o = self.layout.landmark_offset(j);
            h.view_mut((o, o), (d, d)).copy_from(&self.landmark_hessian[j].view((0, 0), (d, d)));
            g.rows_mut(o, d).copy_from(&self.landmark_gradient[j].rows(0, d));
            for (p, block) in &self.cross[j] {
                let b = block.view((0, 0), (6, d));
                h.view_mut((6 * p, o), (6, d)).copy_from(&b);
                h.view_mut((o, 6 * p), (d, 6)).copy_from(&b.transpose());
            }
        }
        (h, g)
    }

    pub fn max_diagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for hp in &self.pose_hessian {
            for i in 0..6 {
                m = m.max(hp[(i, i)]);
            }
        }
        for (j, key) in self.layout.landmarks.iter().enumerate() {
            for i in 0..landmark_dim(key) {
                m = m.max(self.landmark_hessian[j][(i, i)]);
            }
        }
        m
    }

    pub fn gradient_inf_norm(&self) -> f64 {
        let a = self.pose_gradient.iter().map(|g| g.amax()).fold(0.0, f64::max);
        let b = self.landmark_gradient.iter().map(|g| g.amax()).fold(0.0, f64::max);
        a.max(b)
    }

    /// Solve `(H + λI) δ = −g` on the full dense system.
    pub fn solve_dense(&self, lambda: f64) -> Option<DVector<f64>> {
        let (mut h, g) = self.to_dense();
        for i in 0..h.nrows() {
            h[(i, i)] += lambda;
        }
        let chol = Cholesky::new(h)?;
        Some(chol.solve(&(-g)))
    }

    /// Solve `(H + λI) δ = −g` by eliminating the landmark blocks (Schur
    /// complement) and back-substituting.
    pub fn solve_schur(&self, lambda: f64) -> Option<DVector<f64>> {
        let np = self.layout.poses.len();
        let pd = 6 * np;
        let mut s = DMatrix::zeros(pd, pd);
        let mut rhs = DVector::zeros(pd);
        for i in 0..np {
            let mut block = self.pose_hessian[i];
            for k in 0..6 {
                block[(k, k)] += lambda;
            }
            s.view_mut((6 * i, 6 * i), (6, 6)).copy_from(&block);
            rhs.rows_mut(6 * i, 6).copy_from(&(-self.pose_gradient[i]));
        }

        let mut inverses = Vec::with_capacity(self.layout.landmarks.len());
        for (j, key) in self.layout.landmarks.iter().enumerate() {
            let d = landmark_dim(key);
            let mut a = self.landmark_hessian[j];
            for k in 0..d {
                a[(k, k)] += lambda;
            }
            let inv = invert_spd_block(&a, d)?;
            let gj = -self.landmark_gradient[j];
            let cross = &self.cross[j];
            // H_pj A⁻¹ for every pose observing landmark j.
            let scaled: Vec<Matrix6x4<f64>> = cross.iter().map(|(_, b)| b * inv).collect();
            for (a_idx, (p, _)) in cross.iter().enumerate() {
                let w = &scaled[a_idx];
                let r = w * gj;
                let mut seg = rhs.rows_mut(6 * p, 6);
                seg -= r;
                for (q, bq) in cross.iter() {
                    let update = w * bq.transpose();
                    let mut blk = s.view_mut((6 * p, 6 * q), (6, 6));
                    blk -= update;
                }
            }
            inverses.push(inv);
        }

        let dp = if pd > 0 {
            Cholesky::new(s)?.solve(&rhs)
        } else {
            DVector::zeros(0)
        };

        let mut delta = DVector::zeros(self.layout.dim());
        delta.rows_mut(0, pd).copy_from(&dp);
        for (j, key) in self.layout.landmarks.iter().enumerate() {
            let d = landmark_dim(key);
            let mut r = -self.landmark_gradient[j];
            for (p, b) in &self.cross[j] {
                let dpi = Vector6::from_column_slice(dp.rows(6 * p, 6).as_slice());
                r -= b.transpose() * dpi;
            }
            let dl = inverses[j] * r;
            delta.rows_mut(self.layout.landmark_offset(j), d).copy_from(&dl.rows(0, d));
        }
        Some(delta)
    }
}

fn invert_spd_block(a: &Matrix4<f64>, d: usize) -> Option<Matrix4<f64>> {
    let mut out = Matrix4::zeros();
    match d {
        3 => {
            let m: Matrix3<f64> = a.fixed_view::<3, 3>(0, 0).into_owned();
            let inv = m.cholesky()?.inverse();
            out.fixed_view_mut::<3, 3>(0, 0).copy_from(&inv);
        }
        _ => out = a.cholesky()?.inverse(),
    }
    Some(out)
}

/// Whitening factor `Lᵀ` with `Ω = L Lᵀ`, or `None` for the identity.
fn sqrt_info2(info: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    if *info == Matrix2::identity() {
        None
    } else {
        info.cholesky().map(|c| c.l().transpose())
    }
}

fn sqrt_info3(info: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    if *info == Matrix3::identity() {
        None
    } else {
        info.cholesky().map(|c| c.l().transpose())
    }
}

/// Whitened residual and Jacobians of one edge, rows padded to 3.
pub(crate) struct Linearized {
    pub dim: usize,
    pub residual: Vector3<f64>,
    pub j_pose: SMatrix<f64, 3, 6>,
    pub j_landmark: SMatrix<f64, 3, 4>,
}

pub(crate) struct Problem<'g> {
    pub graph: &'g FactorGraph,
    pub layout: Layout,
    pose_ids: Vec<VertexId>,
    point_ids: Vec<VertexId>,
    line_ids: Vec<VertexId>,
    point_edges: Vec<EdgeRef>,
    line_edges: Vec<EdgeRef>,
}

impl<'g> Problem<'g> {
    pub fn new(graph: &'g FactorGraph) -> Self {
        let layout = Layout::new(graph);
        let pose_ids: Vec<VertexId> = graph.poses.keys().copied().collect();
        let point_ids: Vec<VertexId> = graph.points.keys().copied().collect();
        let line_ids: Vec<VertexId> = graph.lines.keys().copied().collect();
        let pose_index: HashMap<VertexId, usize> = pose_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let point_index: HashMap<VertexId, usize> = point_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let line_index: HashMap<VertexId, usize> = line_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let pose_block: HashMap<VertexId, usize> = layout.poses.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let lm_block: HashMap<LandmarkKey, usize> =
            layout.landmarks.iter().enumerate().map(|(i, k)| (*k, i)).collect();

        let point_edges = graph
            .point_edges
            .iter()
            .enumerate()
            .map(|(i, e)| EdgeRef {
                edge: i,
                pose: pose_index[&e.pose],
                landmark: point_index[&e.point],
                pose_block: pose_block.get(&e.pose).copied(),
                landmark_block: lm_block.get(&LandmarkKey::Point(e.point)).copied(),
            })
            .filter(|r| r.pose_block.is_some() || r.landmark_block.is_some())
            .collect();
        let line_edges = graph
            .line_edges
            .iter()
            .enumerate()
            .map(|(i, e)| EdgeRef {
                edge: i,
                pose: pose_index[&e.pose],
                landmark: line_index[&e.line],
                pose_block: pose_block.get(&e.pose).copied(),
                landmark_block: lm_block.get(&LandmarkKey::Line(e.line)).copied(),
            })
            .filter(|r| r.pose_block.is_some() || r.landmark_block.is_some())
            .collect();
        Self {
            graph,
            layout,
            pose_ids,
            point_ids,
            line_ids,
            point_edges,
            line_edges,
        }
    }

    pub fn active_edges(&self) -> usize {
        self.point_edges.len() + self.line_edges.len()
    }

    pub fn initial_state(&self) -> State {
        State {
            poses: self.pose_ids.iter().map(|id| self.graph.poses[id].pose).collect(),
            points: self.point_ids.iter().map(|id| self.graph.points[id].position).collect(),
            lines: self.line_ids.iter().map(|id| self.graph.lines[id].line).collect(),
        }
    }

    pub fn write_back(&self, state: &State, graph: &mut FactorGraph) {
        for (id, p) in self.pose_ids.iter().zip(&state.poses) {
            graph.poses.get_mut(id).unwrap().pose = *p;
        }
        for (id, p) in self.point_ids.iter().zip(&state.points) {
            graph.points.get_mut(id).unwrap().position = *p;
        }
        for (id, l) in self.line_ids.iter().zip(&state.lines) {
            graph.lines.get_mut(id).unwrap().line = *l;
        }
    }

    fn point_residual(&self, r: &EdgeRef, state: &State) -> Option<(usize, Vector3<f64>)> {
        let e = &self.graph.point_edges[r.edge];
        let pose = &state.poses[r.pose];
        let x = &state.points[r.landmark];
        let k = &self.graph.camera;
        match &e.measurement {
            PointMeasurement::Mono {
                side,
                pixel,
                information,
            } => {
                let res = crate::measurement::mono_point_residual(pixel, pose, x, k, *side).ok()?;
                let w = sqrt_info2(information).map_or(res, |l| l * res);
                Some((2, Vector3::new(w.x, w.y, 0.0)))
            }
            PointMeasurement::Stereo { obs, information } => {
                let res = crate::measurement::stereo_point_residual(obs, pose, x, k).ok()?;
                Some((3, sqrt_info3(information).map_or(res, |l| l * res)))
            }
        }
    }

    fn line_residual(&self, r: &EdgeRef, state: &State) -> Option<Vector2<f64>> {
        let e = &self.graph.line_edges[r.edge];
        let res = line_residual_at(&e.segment, &state.poses[r.pose], &state.lines[r.landmark], &self.graph.camera, e.side)
            .ok()?;
        Some(sqrt_info2(&e.information).map_or(res, |l| l * res))
    }

    /// Robust cost over the active edges.
    pub fn cost(&self, state: &State) -> f64 {
        let mut c = 0.0;
        for r in &self.point_edges {
            if let Some((_, w)) = self.point_residual(r, state) {
                c += robust_cost(self.graph.point_edges[r.edge].kernel.as_ref(), w.norm_squared());
            }
        }
        for r in &self.line_edges {
            if let Some(w) = self.line_residual(r, state) {
                c += robust_cost(self.graph.line_edges[r.edge].kernel.as_ref(), w.norm_squared());
            }
        }
        c
    }

    fn linearize_point(&self, r: &EdgeRef, state: &State) -> Option<Linearized> {
        let e = &self.graph.point_edges[r.edge];
        let pose = &state.poses[r.pose];
        let x = &state.points[r.landmark];
        let k = &self.graph.camera;
        let mut out = Linearized {
            dim: 0,
            residual: Vector3::zeros(),
            j_pose: SMatrix::zeros(),
            j_landmark: SMatrix::zeros(),
        };
        match &e.measurement {
            PointMeasurement::Mono {
                side,
                pixel,
                information,
            } => {
                let (mut res, mut jp, mut jl) = mono_point_jacobians(pixel, pose, x, k, *side).ok()?;
                if let Some(l) = sqrt_info2(information) {
                    res = l * res;
                    jp = l * jp;
                    jl = l * jl;
                }
                out.dim = 2;
                out.residual.fixed_rows_mut::<2>(0).copy_from(&res);
                out.j_pose.fixed_view_mut::<2, 6>(0, 0).copy_from(&jp);
                out.j_landmark.fixed_view_mut::<2, 3>(0, 0).copy_from(&jl);
            }
            PointMeasurement::Stereo { obs, information } => {
                let (mut res, mut jp, mut jl) = stereo_point_jacobians(obs, pose, x, k).ok()?;
                if let Some(l) = sqrt_info3(information) {
                    res = l * res;
                    jp = l * jp;
                    jl = l * jl;
                }
                out.dim = 3;
                out.residual = res;
                out.j_pose = jp;
                out.j_landmark.fixed_view_mut::<3, 3>(0, 0).copy_from(&jl);
            }
        }
        Some(out)
    }

    fn linearize_line(&self, r: &EdgeRef, state: &State) -> Option<Linearized> {
        let e = &self.graph.line_edges[r.edge];
        let (mut res, mut jp, mut jl) = line_jacobians_side(
            &e.segment,
            &state.poses[r.pose],
            &state.lines[r.landmark],
            &self.graph.camera,
            e.side,
        )
        .ok()?;
        if let Some(l) = sqrt_info2(&e.information) {
            res = l * res;
            jp = l * jp;
            jl = l * jl;
        }
        let mut out = Linearized {
            dim: 2,
            residual: Vector3::zeros(),
            j_pose: SMatrix::zeros(),
            j_landmark: SMatrix::zeros(),
        };
        out.residual.fixed_rows_mut::<2>(0).copy_from(&res);
        out.j_pose.fixed_view_mut::<2, 6>(0, 0).copy_from(&jp);
        out.j_landmark.fixed_view_mut::<2, 4>(0, 0).copy_from(&jl);
        Some(out)
    }

    /// Assemble the robustified Gauss–Newton system at `state`. Point edges
    /// are accumulated before line edges, each in graph order.
    pub fn assemble(&self, state: &State) -> NormalEquations {
        let mut neq = NormalEquations::zeros(self.layout.clone());
        for r in &self.point_edges {
            if let Some(lin) = self.linearize_point(r, state) {
                let kernel = self.graph.point_edges[r.edge].kernel;
                accumulate(&mut neq, r, &lin, kernel.as_ref());
            }
        }
        for r in &self.line_edges {
            if let Some(lin) = self.linearize_line(r, state) {
                let kernel = self.graph.line_edges[r.edge].kernel;
                accumulate(&mut neq, r, &lin, kernel.as_ref());
            }
        }
        neq
    }

    /// Apply a layout-ordered increment to the free vertices of `state`.
    pub fn retract(&self, state: &State, delta: &DVector<f64>) -> State {
        let mut out = state.clone();
        let pose_block: HashMap<VertexId, usize> =
            self.layout.poses.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        for (i, id) in self.pose_ids.iter().enumerate() {
            if let Some(b) = pose_block.get(id) {
                let d = PoseUpdate(Vector6::from_column_slice(delta.rows(6 * b, 6).as_slice()));
                out.poses[i] = state.poses[i].update(&d);
            }
        }
        let point_index: HashMap<VertexId, usize> =
            self.point_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let line_index: HashMap<VertexId, usize> =
            self.line_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        for (j, key) in self.layout.landmarks.iter().enumerate() {
            let o = self.layout.landmark_offset(j);
            match key {
                LandmarkKey::Point(id) => {
                    let i = point_index[id];
                    out.points[i] = state.points[i] + Vector3::from_column_slice(delta.rows(o, 3).as_slice());
                }
                LandmarkKey::Line(id) => {
                    let i = line_index[id];
                    let d = LineUpdate(Vector4::from_column_slice(delta.rows(o, 4).as_slice()));
                    out.lines[i] = state.lines[i].update(&d);
                }
            }
        }
        out
    }

    /// Stacked whitened residuals of the active edges (no robust weighting);
    /// deactivated edges contribute zeros.
    pub fn whitened_residuals(&self, state: &State) -> DVector<f64> {
        let mut out = Vec::new();
        for r in &self.point_edges {
            let dim = self.graph.point_edges[r.edge].measurement.dim();
            match self.point_residual(r, state) {
                Some((_, w)) => out.extend_from_slice(&w.as_slice()[..dim]),
                None => out.extend(std::iter::repeat(0.0).take(dim)),
            }
        }
        for r in &self.line_edges {
            match self.line_residual(r, state) {
                Some(w) => out.extend_from_slice(w.as_slice()),
                None => out.extend_from_slice(&[0.0, 0.0]),
            }
        }
        DVector::from_vec(out)
    }
}

fn accumulate(
    neq: &mut NormalEquations,
    r: &EdgeRef,
    lin: &Linearized,
    kernel: Option<&super::kernel::Huber>,
) {
    // Padding rows and columns are zero, so the fixed-size products are exact.
    let res = &lin.residual;
    let w = robust_weight(kernel, res.norm_squared());
    let jp = &lin.j_pose;
    let jl = &lin.j_landmark;
    if let Some(p) = r.pose_block {
        neq.pose_hessian[p] += w * jp.transpose() * jp;
        neq.pose_gradient[p] += w * jp.transpose() * res;
    }
    if let Some(l) = r.landmark_block {
        neq.landmark_hessian[l] += w * jl.transpose() * jl;
        neq.landmark_gradient[l] += w * jl.transpose() * res;
        if let Some(p) = r.pose_block {
            let block: Matrix6x4<f64> = w * jp.transpose() * jl;
            let list = &mut neq.cross[l];
            match list.iter_mut().find(|(q, _)| *q == p) {
                Some((_, b)) => *b += block,
                None => list.push((p, block)),
            }
        }
    }
}

/// Normal equations of `graph` at its current estimate.
pub fn assemble_normal_equations(graph: &FactorGraph) -> NormalEquations {
    let problem = Problem::new(graph);
    let state = problem.initial_state();
    problem.assemble(&state)
}

impl FactorGraph {
    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }

    /// Apply a layout-ordered increment to the free vertices.
    pub fn retract(&mut self, delta: &DVector<f64>) {
        let graph = self.clone();
        let problem = Problem::new(&graph);
        let state = problem.retract(&problem.initial_state(), delta);
        problem.write_back(&state, self);
    }

    /// Stacked whitened residuals of every edge touching a free vertex.
    pub fn whitened_residuals(&self) -> DVector<f64> {
        let problem = Problem::new(self);
        problem.whitened_residuals(&problem.initial_state())
    }
}
