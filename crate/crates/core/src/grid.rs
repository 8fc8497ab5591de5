//! Uniform rectilinear grids on boxes `[0, L_x] (x [0, L_y])`, nodal fields,
//! second-order finite-difference operators and trapezoidal quadrature.
//!
//! Nodes include the boundary. Node `(i, j)` has flat index `i + n_x * j`.
//! Displacement-type fields are read with homogeneous Dirichlet values on the
//! boundary; damage-type fields use homogeneous Neumann data through ghost
//! mirroring.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    nodes: [usize; 2],
    extent: [f64; 2],
    spacing: [f64; 2],
}

impl Grid {
    pub const MIN_NODES: usize = 4;

    pub fn new_1d(extent: f64, nodes: usize) -> Result<Self> {
        Self::build(1, [extent, 1.0], [nodes, 1])
    }

    pub fn new_2d(extent: [f64; 2], nodes: [usize; 2]) -> Result<Self> {
        Self::build(2, extent, nodes)
    }

    /// Unit interval with `nodes` points.
    pub fn unit_interval(nodes: usize) -> Result<Self> {
        Self::new_1d(1.0, nodes)
    }

    fn build(dim: usize, extent: [f64; 2], nodes: [usize; 2]) -> Result<Self> {
        let mut spacing = [1.0; 2];
        for axis in 0..dim {
            if !(extent[axis].is_finite() && extent[axis] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "extent on axis {axis} must be positive, got {}",
                    extent[axis]
                )));
            }
            if nodes[axis] < Self::MIN_NODES {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} needs at least {} nodes, got {}",
                    Self::MIN_NODES,
                    nodes[axis]
                )));
            }
            spacing[axis] = extent[axis] / (nodes[axis] - 1) as f64;
        }
        Ok(Grid {
            dim,
            nodes,
            extent,
            spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self, axis: usize) -> usize {
        self.nodes[axis]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extent[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.extent[a]).product()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nodes[0] * j
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nodes[0], idx / self.nodes[0])
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        let y = if self.dim == 2 {
            j as f64 * self.spacing[1]
        } else {
            0.0
        };
        [i as f64 * self.spacing[0], y]
    }

    #[inline]
    fn on_edge(n: usize, i: usize) -> bool {
        i == 0 || i + 1 == n
    }

    /// True for nodes on the Dirichlet boundary.
    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.ij(idx);
        Self::on_edge(self.nodes[0], i) || (self.dim == 2 && Self::on_edge(self.nodes[1], j))
    }

    #[inline]
    fn axis_weight(&self, axis: usize, i: usize) -> f64 {
        if Self::on_edge(self.nodes[axis], i) {
            0.5 * self.spacing[axis]
        } else {
            self.spacing[axis]
        }
    }

    /// Trapezoidal quadrature weight of node `idx`.
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let (i, j) = self.ij(idx);
        let wx = self.axis_weight(0, i);
        if self.dim == 2 {
            wx * self.axis_weight(1, j)
        } else {
            wx
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }

    /// Per-axis stride in the flat index.
    #[inline]
    fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.nodes[0]
        }
    }

    #[inline]
    fn axis_index(&self, axis: usize, i: usize, j: usize) -> usize {
        if axis == 0 {
            i
        } else {
            j
        }
    }

    /// Row length used for data-parallel loops.
    fn row_len(&self) -> usize {
        self.nodes[0]
    }

    fn fill<F>(&self, exec: Execution, f: F) -> Vec<f64>
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        let mut out = vec![0.0; self.len()];
        self.fill_into(exec, &mut out, f);
        out
    }

    fn fill_into<F>(&self, exec: Execution, out: &mut [f64], f: F)
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        par::for_each_row(exec, out, self.row_len(), |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        });
    }

    /// Compact metadata line used in snapshot headers.
    pub fn metadata(&self) -> String {
        if self.dim == 1 {
            format!("dim=1 extent={} nodes={}", self.extent[0], self.nodes[0])
        } else {
            format!(
                "dim=2 extent={},{} nodes={},{}",
                self.extent[0], self.extent[1], self.nodes[0], self.nodes[1]
            )
        }
    }
}

/// Nodal scalar values over a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite field value {} at node {k}",
                values[k]
            )));
        }
        Ok(Field { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Sample `f(x, y)` at every node (`y = 0` in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.coords(k);
                f(x, y)
            })
            .collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        check_same(self, other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm of the difference of two fields on the same grid.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        check_same(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Zero the Dirichlet boundary nodes.
    pub fn with_zero_boundary(&self) -> Field {
        let g = self.grid;
        Field::from_raw(
            g,
            self.values
                .iter()
                .enumerate()
                .map(|(k, &v)| if g.is_boundary(k) { 0.0 } else { v })
                .collect(),
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::new();
        writeln!(buf, "# grid {}", self.grid.metadata()).unwrap();
        if self.grid.dim == 1 {
            buf.push_str("x,value\n");
        } else {
            buf.push_str("x,y,value\n");
        }
        for (k, v) in self.values.iter().enumerate() {
            let [x, y] = self.grid.coords(k);
            if self.grid.dim == 1 {
                writeln!(buf, "{x},{v}").unwrap();
            } else {
                writeln!(buf, "{x},{y},{v}").unwrap();
            }
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Field> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Snapshot("empty snapshot".into()))??;
        let grid = parse_metadata(&header)?;
        let columns = lines
            .next()
            .ok_or_else(|| Error::Snapshot("missing column header".into()))??;
        let ncols = columns.split(',').count();
        if ncols != grid.dim + 1 {
            return Err(Error::Snapshot(format!(
                "expected {} columns, header is '{columns}'",
                grid.dim + 1
            )));
        }
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let last = line
                .rsplit(',')
                .next()
                .ok_or_else(|| Error::Snapshot(format!("bad row '{line}'")))?;
            let v: f64 = last
                .trim()
                .parse()
                .map_err(|_| Error::Snapshot(format!("bad value in row '{line}'")))?;
            values.push(v);
        }
        Field::new(grid, values).map_err(|e| Error::Snapshot(e.to_string()))
    }

    pub fn load_csv(path: &Path) -> Result<Field> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

fn parse_metadata(header: &str) -> Result<Grid> {
    let rest = header
        .strip_prefix("# grid")
        .ok_or_else(|| Error::Snapshot(format!("missing '# grid' header, got '{header}'")))?;
    let mut dim = None;
    let mut extent = Vec::new();
    let mut nodes = Vec::new();
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Snapshot(format!("bad header token '{tok}'")))?;
        let bad = || Error::Snapshot(format!("bad header value '{tok}'"));
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
            "extent" => {
                extent = v
                    .split(',')
                    .map(|s| s.parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<_>>()?
            }
            "nodes" => {
                nodes = v
                    .split(',')
                    .map(|s| s.parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<_>>()?
            }
            _ => return Err(bad()),
        }
    }
    match (dim, extent.as_slice(), nodes.as_slice()) {
        (Some(1), [l], [n]) => Grid::new_1d(*l, *n),
        (Some(2), [lx, ly], [nx, ny]) => Grid::new_2d([*lx, *ly], [*nx, *ny]),
        _ => Err(Error::Snapshot(format!(
            "inconsistent grid header '{header}'"
        ))),
    }
}

pub(crate) fn check_same(a: &Field, b: &Field) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(format!(
            "{} vs {}",
            a.grid.metadata(),
            b.grid.metadata()
        )));
    }
    Ok(())
}

/// Boundary handling used by [`norms`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormReport {
    pub l2: f64,
    /// `‖v‖ + ‖∇v‖`.
    pub h1: f64,
    pub linf: f64,
    /// `(‖v‖² + ‖Δv‖²)^½`.
    pub w: f64,
}

/// Second-order centered Laplacian with homogeneous Neumann data (ghost
/// nodes mirror the first interior neighbour).
pub fn laplacian_neumann(v: &Field) -> Field {
    laplacian_neumann_with(Execution::default(), v)
}

pub fn laplacian_neumann_with(exec: Execution, v: &Field) -> Field {
    let g = *v.grid();
    let mut out = vec![0.0; g.len()];
    laplacian_neumann_raw(&g, exec, v.values(), &mut out);
    Field::from_raw(g, out)
}

pub(crate) fn laplacian_neumann_raw(g: &Grid, exec: Execution, vals: &[f64], out: &mut [f64]) {
    let g = *g;
    g.fill_into(exec, out, |i, j| {
        let k = g.index(i, j);
        let mut acc = 0.0;
        for axis in 0..g.dim {
            let n = g.nodes[axis];
            let a = g.axis_index(axis, i, j);
            let s = g.stride(axis);
            let h2 = g.spacing[axis] * g.spacing[axis];
            let c = vals[k];
            let second = if a == 0 {
                2.0 * (vals[k + s] - c)
            } else if a + 1 == n {
                2.0 * (vals[k - s] - c)
            } else {
                vals[k - s] - 2.0 * c + vals[k + s]
            };
            acc += second / h2;
        }
        acc
    });
}

/// `−div(a ∇u)` in flux form with arithmetic face averages of `a`.
///
/// `u` is read with zero Dirichlet values on the boundary and the output is
/// zero there, so the operator acts on interior unknowns only.
pub fn apply_div_coeff_grad(a: &Field, u: &Field) -> Result<Field> {
    apply_div_coeff_grad_with(Execution::default(), a, u)
}

pub fn apply_div_coeff_grad_with(exec: Execution, a: &Field, u: &Field) -> Result<Field> {
    check_same(a, u)?;
    if let Some(k) = a.values().iter().position(|&c| c < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative coefficient {} at node {k}",
            a.values()[k]
        )));
    }
    Ok(div_coeff_grad_unchecked(exec, a.values(), u))
}

pub(crate) fn div_coeff_grad_unchecked(exec: Execution, a: &[f64], u: &Field) -> Field {
    let g = *u.grid();
    let mut out = vec![0.0; g.len()];
    div_coeff_grad_raw(&g, exec, a, u.values(), &mut out);
    Field::from_raw(g, out)
}

pub(crate) fn div_coeff_grad_raw(
    g: &Grid,
    exec: Execution,
    a: &[f64],
    uv: &[f64],
    out: &mut [f64],
) {
    let g = *g;
    g.fill_into(exec, out, |i, j| {
        let k = g.index(i, j);
        if g.is_boundary(k) {
            return 0.0;
        }
        let mut acc = 0.0;
        for axis in 0..g.dim {
            let s = g.stride(axis);
            let h2 = g.spacing[axis] * g.spacing[axis];
            let (lo, hi) = (k - s, k + s);
            let u_lo = if g.is_boundary(lo) { 0.0 } else { uv[lo] };
            let u_hi = if g.is_boundary(hi) { 0.0 } else { uv[hi] };
            let a_lo = 0.5 * (a[k] + a[lo]);
            let a_hi = 0.5 * (a[k] + a[hi]);
            acc += (a_lo * (uv[k] - u_lo) + a_hi * (uv[k] - u_hi)) / h2;
        }
        acc
    });
}

/// Dirichlet `−Δ`: the constant-coefficient case of
/// [`apply_div_coeff_grad`].
pub fn neg_laplacian_dirichlet(v: &Field) -> Field {
    neg_laplacian_dirichlet_with(Execution::default(), v)
}

pub fn neg_laplacian_dirichlet_with(exec: Execution, v: &Field) -> Field {
    let g = *v.grid();
    let mut out = vec![0.0; g.len()];
    neg_laplacian_dirichlet_raw(&g, exec, v.values(), &mut out);
    Field::from_raw(g, out)
}

pub(crate) fn neg_laplacian_dirichlet_raw(
    g: &Grid,
    exec: Execution,
    vals: &[f64],
    out: &mut [f64],
) {
    let g = *g;
    g.fill_into(exec, out, |i, j| {
        let k = g.index(i, j);
        if g.is_boundary(k) {
            return 0.0;
        }
        let mut acc = 0.0;
        for axis in 0..g.dim {
            let s = g.stride(axis);
            let h2 = g.spacing[axis] * g.spacing[axis];
            let lo = if g.is_boundary(k - s) {
                0.0
            } else {
                vals[k - s]
            };
            let hi = if g.is_boundary(k + s) {
                0.0
            } else {
                vals[k + s]
            };
            acc += (2.0 * vals[k] - lo - hi) / h2;
        }
        acc
    });
}

/// Nodal `|∇u|²` from centered differences in the interior and one-sided
/// second-order differences on the boundary.
pub fn gradient_sq(u: &Field) -> Field {
    let g = *u.grid();
    let vals = u.values();
    let out = g.fill(Execution::default(), |i, j| {
        let k = g.index(i, j);
        let mut acc = 0.0;
        for axis in 0..g.dim {
            let n = g.nodes[axis];
            let a = g.axis_index(axis, i, j);
            let s = g.stride(axis);
            let h = g.spacing[axis];
            let d = if a == 0 {
                (-3.0 * vals[k] + 4.0 * vals[k + s] - vals[k + 2 * s]) / (2.0 * h)
            } else if a + 1 == n {
                (3.0 * vals[k] - 4.0 * vals[k - s] + vals[k - 2 * s]) / (2.0 * h)
            } else {
                (vals[k + s] - vals[k - s]) / (2.0 * h)
            };
            acc += d * d;
        }
        acc
    });
    Field::from_raw(g, out)
}

/// Nodal `|∇u|²` built from squared face differences so that
/// `⟨a, face_gradient_sq(u)⟩ = ⟨A_a u, u⟩` for every coefficient `a` when
/// `u` vanishes on the boundary, and `⟨1, face_gradient_sq(v)⟩ = ⟨−Δ_N v, v⟩`
/// for every `v`. This is the variational derivative of the discrete energy.
pub fn face_gradient_sq(u: &Field) -> Field {
    let g = *u.grid();
    let vals = u.values();
    let out = g.fill(Execution::default(), |i, j| {
        let k = g.index(i, j);
        let w = g.weight(k);
        let mut acc = 0.0;
        for axis in 0..g.dim {
            let n = g.nodes[axis];
            let a = g.axis_index(axis, i, j);
            let s = g.stride(axis);
            let h = g.spacing[axis];
            // transverse weight of the faces through this node
            let tw = if g.dim == 2 {
                let other = 1 - axis;
                g.axis_weight(other, g.axis_index(other, i, j))
            } else {
                1.0
            };
            let face = |nb: usize| {
                let d = (vals[nb] - vals[k]) / h;
                0.5 * h * tw * d * d
            };
            if a > 0 {
                acc += face(k - s);
            }
            if a + 1 < n {
                acc += face(k + s);
            }
        }
        acc / w
    });
    Field::from_raw(g, out)
}

/// Composite trapezoidal rule.
pub fn integrate(v: &Field) -> f64 {
    let g = v.grid();
    v.values()
        .iter()
        .enumerate()
        .map(|(k, x)| g.weight(k) * x)
        .sum()
}

/// Trapezoid-weighted inner product.
pub fn inner(a: &Field, b: &Field) -> Result<f64> {
    check_same(a, b)?;
    Ok(inner_raw(a.grid(), a.values(), b.values()))
}

pub(crate) fn inner_raw(g: &Grid, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(k, (x, y))| g.weight(k) * x * y)
        .sum()
}

pub fn l2_norm(v: &Field) -> f64 {
    inner_raw(v.grid(), v.values(), v.values()).max(0.0).sqrt()
}

/// Discrete `L^p` norm, `p ≥ 1`.
pub fn lp_norm(v: &Field, p: f64) -> f64 {
    let g = v.grid();
    let s: f64 = v
        .values()
        .iter()
        .enumerate()
        .map(|(k, x)| g.weight(k) * x.abs().powf(p))
        .sum();
    s.powf(1.0 / p)
}

pub fn norms(v: &Field, mode: BoundaryMode) -> NormReport {
    let l2 = l2_norm(v);
    let grad = integrate(&gradient_sq(v)).max(0.0).sqrt();
    let lap = match mode {
        BoundaryMode::Neumann => laplacian_neumann(v),
        BoundaryMode::Dirichlet => neg_laplacian_dirichlet(v),
    };
    let lap_l2 = l2_norm(&lap);
    NormReport {
        l2,
        h1: l2 + grad,
        linf: v.max_abs(),
        w: (l2 * l2 + lap_l2 * lap_l2).sqrt(),
    }
}
