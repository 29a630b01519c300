//! Committor functions: closed forms, 1-D quadrature, the saddle-point
//! approximation and a finite-difference solver for 2-D gradient systems.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::models::{Dynamics, RhoCSampler, State, Tabulated1d};
use crate::quadrature;

/// Committor of Brownian motion with drift `-mu` between `x_a` and `x_b`.
///
/// Algebraically identical to the `sinh` form but written with `expm1` so it
/// stays accurate for small `beta mu` and finite for large ones. Points
/// outside `[x_a, x_b]` get the natural (monotone) continuation.
pub fn drift_committor(x: f64, x_a: f64, x_b: f64, beta: f64, mu: f64) -> f64 {
    let k = beta * mu;
    let d = x_b - x_a;
    if k == 0.0 {
        return (x - x_a) / d;
    }
    if k > 0.0 {
        (k * (x - x_b)).exp() * (-(-k * (x - x_a)).exp_m1()) / (-(-k * d).exp_m1())
    } else {
        (k * (x - x_a)).exp_m1() / (k * d).exp_m1()
    }
}

fn max_exponent<D: Dynamics + ?Sized>(model: &D, x_a: f64, x_b: f64) -> Result<f64> {
    let beta = model.beta();
    let v = |x: f64| model.potential(State::scalar(x)).ok_or(Error::UnsupportedDimension(model.dimension()));
    let mut m = f64::NEG_INFINITY;
    for i in 0..=2000 {
        let x = x_a + (x_b - x_a) * i as f64 / 2000.0;
        m = m.max(beta * v(x)?);
    }
    Ok(m)
}

/// `∫_{x_a}^{x} e^{βV} / ∫_{x_a}^{x_b} e^{βV}` by adaptive quadrature.
pub fn committor_1d_quadrature<D: Dynamics + ?Sized>(x: f64, model: &D, x_a: f64, x_b: f64) -> Result<f64> {
    if model.dimension() != 1 {
        return Err(Error::UnsupportedDimension(model.dimension()));
    }
    let beta = model.beta();
    let m = max_exponent(model, x_a, x_b)?;
    let f = |t: f64| (beta * model.potential(State::scalar(t)).unwrap_or(f64::NAN) - m).exp();
    let total = quadrature::integrate(f, x_a, x_b, 1e-13, 0.0)?;
    let part = quadrature::integrate(f, x_a, x, 1e-13, 1e-15 * total)?;
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::QuadratureFailure(total));
    }
    Ok(part / total)
}

/// 1-D committor tabulated on `points` equispaced nodes of `[x_a, x_b]`.
pub fn tabulate_1d<D: Dynamics + ?Sized>(model: &D, x_a: f64, x_b: f64, points: usize) -> Result<Tabulated1d> {
    if model.dimension() != 1 {
        return Err(Error::UnsupportedDimension(model.dimension()));
    }
    let beta = model.beta();
    let m = max_exponent(model, x_a, x_b)?;
    let f = |t: f64| (beta * model.potential(State::scalar(t)).unwrap_or(f64::NAN) - m).exp();
    let h = (x_b - x_a) / (points - 1) as f64;
    let mut cum = Vec::with_capacity(points);
    cum.push(0.0);
    for i in 1..points {
        let lo = x_a + h * (i - 1) as f64;
        let piece = quadrature::integrate(f, lo, lo + h, 1e-13, 0.0)?;
        cum.push(cum[i - 1] + piece);
    }
    let total = cum[points - 1];
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::QuadratureFailure(total));
    }
    cum.iter_mut().for_each(|c| *c /= total);
    Ok(Tabulated1d::new(x_a, x_b, cum))
}

/// `ω = -½ β V''(x_s)`; fails unless `x_s` is a strict local maximum of V.
pub fn saddle_omega<D: Dynamics + ?Sized>(model: &D, x_s: f64) -> Result<f64> {
    let (_, f1, _) = model.force_derivatives(x_s).ok_or(Error::UnsupportedDimension(model.dimension()))?;
    let v2 = -f1;
    if v2 >= 0.0 {
        return Err(Error::NotASaddle(v2));
    }
    Ok(-0.5 * model.beta() * v2)
}

/// Saddle-point approximation of the committor with a given `ω`.
pub fn saddle_formula(x: f64, x_a: f64, x_b: f64, x_s: f64, omega: f64) -> f64 {
    let g = |z: f64| (-(-omega * z * z).exp_m1()).sqrt();
    let sigma = if x > x_s {
        1.0
    } else if x < x_s {
        -1.0
    } else {
        0.0
    };
    let ga = g(x_a - x_s);
    (ga + sigma * g(x - x_s)) / (ga + g(x_b - x_s))
}

pub fn committor_saddle_approx<D: Dynamics + ?Sized>(x: f64, model: &D, x_a: f64, x_b: f64, x_s: f64) -> Result<f64> {
    let omega = saddle_omega(model, x_s)?;
    Ok(saddle_formula(x, x_a, x_b, x_s, omega))
}

/// Rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Domain { x0: -1.5, x1: 1.5, y0: -1.0, y1: 2.0 }
    }
}

/// Committor values on a rectangular grid, stored row by row (`y` outer).
#[derive(Clone, Debug, PartialEq)]
pub struct CommittorGrid {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub beta: f64,
    pub dirichlet_a: Vec<(usize, usize)>,
    pub dirichlet_b: Vec<(usize, usize)>,
    pub residual: f64,
    pub values: Vec<f64>,
}

impl CommittorGrid {
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn node(&self, i: usize, j: usize) -> State {
        State::new(self.domain.x0 + i as f64 * self.dx, self.domain.y0 + j as f64 * self.dy)
    }

    pub fn contains(&self, s: State) -> bool {
        s.x >= self.domain.x0 && s.x <= self.domain.x1 && s.y >= self.domain.y0 && s.y <= self.domain.y1
    }

    /// Bilinear interpolation, clamped to `[0, 1]`.
    pub fn interpolate(&self, s: State) -> Result<f64> {
        if !self.contains(s) {
            return Err(Error::OutOfDomain { x: s.x, y: s.y });
        }
        Ok(self.bilinear(s.x, s.y))
    }

    /// Bilinear interpolation at the nearest point of the grid domain.
    #[inline]
    pub fn interpolate_clamped(&self, s: State) -> f64 {
        let x = s.x.clamp(self.domain.x0, self.domain.x1);
        let y = s.y.clamp(self.domain.y0, self.domain.y1);
        self.bilinear(x, y)
    }

    #[inline]
    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let tx = (x - self.domain.x0) / self.dx;
        let ty = (y - self.domain.y0) / self.dy;
        let i = (tx.floor() as usize).min(self.nx - 2);
        let j = (ty.floor() as usize).min(self.ny - 2);
        let wx = tx - i as f64;
        let wy = ty - j as f64;
        let k = j * self.nx + i;
        let v = &self.values;
        let q = (1.0 - wy) * ((1.0 - wx) * v[k] + wx * v[k + 1])
            + wy * ((1.0 - wx) * v[k + self.nx] + wx * v[k + self.nx + 1]);
        q.clamp(0.0, 1.0)
    }

    pub fn nearest_node(&self, s: State) -> (usize, usize) {
        let i = ((s.x - self.domain.x0) / self.dx).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((s.y - self.domain.y0) / self.dy).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    /// Write the grid as a self-describing text table.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = &self.domain;
        let mut s = String::new();
        let _ = writeln!(s, "# committor grid");
        let _ = writeln!(s, "domain {} {} {} {}", d.x0, d.x1, d.y0, d.y1);
        let _ = writeln!(s, "nodes {} {}", self.nx, self.ny);
        let _ = writeln!(s, "spacing {} {}", self.dx, self.dy);
        let _ = writeln!(s, "beta {}", self.beta);
        let _ = writeln!(s, "dirichlet_a {}", index_list(&self.dirichlet_a));
        let _ = writeln!(s, "dirichlet_b {}", index_list(&self.dirichlet_b));
        let _ = writeln!(s, "residual {}", self.residual);
        let _ = writeln!(s, "values");
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        w.write_all(s.as_bytes())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let bad = |m: &str| Error::GridFormat(m.to_string());
        let mut lines = BufReader::new(r).lines();
        let mut header = std::collections::HashMap::new();
        loop {
            let line = lines.next().ok_or_else(|| bad("missing values section"))?.map_err(|e| bad(&e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "values" {
                break;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            header.insert(key.to_string(), rest.trim().to_string());
        }
        let field = |k: &str| header.get(k).ok_or_else(|| bad(&format!("missing {k}")));
        let floats = |k: &str| -> Result<Vec<f64>> {
            field(k)?.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| bad(k))).collect()
        };
        let dom = floats("domain")?;
        let nodes: Vec<usize> = field("nodes")?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("nodes")))
            .collect::<Result<_>>()?;
        let spacing = floats("spacing")?;
        if dom.len() != 4 || nodes.len() != 2 || spacing.len() != 2 || nodes[0] < 2 || nodes[1] < 2 {
            return Err(bad("malformed header"));
        }
        let beta = floats("beta")?.first().copied().ok_or_else(|| bad("beta"))?;
        let residual = floats("residual")?.first().copied().ok_or_else(|| bad("residual"))?;
        let dirichlet_a = parse_index_list(field("dirichlet_a")?).ok_or_else(|| bad("dirichlet_a"))?;
        let dirichlet_b = parse_index_list(field("dirichlet_b")?).ok_or_else(|| bad("dirichlet_b"))?;
        let mut values = Vec::with_capacity(nodes[0] * nodes[1]);
        for line in lines {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            for t in line.split_whitespace() {
                values.push(t.parse::<f64>().map_err(|_| bad("value"))?);
            }
        }
        if values.len() != nodes[0] * nodes[1] {
            return Err(bad("value count does not match node count"));
        }
        Ok(CommittorGrid {
            domain: Domain { x0: dom[0], x1: dom[1], y0: dom[2], y1: dom[3] },
            nx: nodes[0],
            ny: nodes[1],
            dx: spacing[0],
            dy: spacing[1],
            beta,
            dirichlet_a,
            dirichlet_b,
            residual,
            values,
        })
    }
}

fn index_list(v: &[(usize, usize)]) -> String {
    v.iter().map(|(i, j)| format!("{i},{j}")).collect::<Vec<_>>().join(" ")
}

fn parse_index_list(s: &str) -> Option<Vec<(usize, usize)>> {
    s.split_whitespace()
        .map(|t| {
            let (a, b) = t.split_once(',')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        })
        .collect()
}

/// Banded matrix with equal lower and upper bandwidth `w`.
struct Banded {
    n: usize,
    w: usize,
    data: Vec<f64>,
}

impl Banded {
    fn new(n: usize, w: usize) -> Self {
        Banded { n, w, data: vec![0.0; n * (2 * w + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.w + 1) + (j + self.w - i)
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.w < i || j > i + self.w {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.w);
            let hi = (i + self.w).min(self.n - 1);
            out[i] = (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum();
        }
    }

    /// In-place LU without pivoting. Safe here because the assembled
    /// operator is a diagonally dominant M-matrix.
    fn factor(mut self) -> Result<Self> {
        let (n, w) = (self.n, self.w);
        for p in 0..n {
            let piv = self.data[self.idx(p, p)];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::SolverDiverged { residual: f64::INFINITY, tol: 0.0 });
            }
            let hi = (p + w).min(n - 1);
            for i in p + 1..=hi {
                let kip = self.idx(i, p);
                let l = self.data[kip] / piv;
                if l == 0.0 {
                    continue;
                }
                self.data[kip] = l;
                for j in p + 1..=hi {
                    let upj = self.data[self.idx(p, j)];
                    if upj != 0.0 {
                        let kij = self.idx(i, j);
                        self.data[kij] -= l * upj;
                    }
                }
            }
        }
        Ok(self)
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, w) = (self.n, self.w);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let s: f64 = (lo..i).map(|j| self.data[self.idx(i, j)] * b[j]).sum();
            b[i] -= s;
        }
        for i in (0..n).rev() {
            let hi = (i + w).min(n - 1);
            let s: f64 = (i + 1..=hi).map(|j| self.data[self.idx(i, j)] * b[j]).sum();
            b[i] = (b[i] - s) / self.data[self.idx(i, i)];
        }
    }
}

/// Solve `F·∇q + β⁻¹ Δq = 0` on a rectangle with `q = 0` at the node nearest
/// `point_a`, `q = 1` at the node nearest `point_b` and reflecting walls.
///
/// Advection is centred where the cell Péclet number `|F| h β / 2` is at most
/// one and upwinded elsewhere, which keeps the discrete operator monotone.
pub fn solve_committor_2d<D: Dynamics + ?Sized>(
    model: &D,
    domain: Domain,
    dx: f64,
    dy: f64,
    point_a: State,
    point_b: State,
    tol: f64,
) -> Result<CommittorGrid> {
    if model.dimension() != 2 {
        return Err(Error::UnsupportedDimension(model.dimension()));
    }
    let nx = ((domain.x1 - domain.x0) / dx).round() as usize + 1;
    let ny = ((domain.y1 - domain.y0) / dy).round() as usize + 1;
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidConfig("committor grid needs at least 3 nodes per axis".into()));
    }
    let dx = (domain.x1 - domain.x0) / (nx - 1) as f64;
    let dy = (domain.y1 - domain.y0) / (ny - 1) as f64;
    let beta = model.beta();
    let diff = 1.0 / beta;
    let mut grid = CommittorGrid {
        domain,
        nx,
        ny,
        dx,
        dy,
        beta,
        dirichlet_a: vec![],
        dirichlet_b: vec![],
        residual: 0.0,
        values: vec![],
    };
    let na = grid.nearest_node(point_a);
    let nb = grid.nearest_node(point_b);
    if na == nb {
        return Err(Error::InvalidConfig("A and B map to the same grid node".into()));
    }
    grid.dirichlet_a = vec![na];
    grid.dirichlet_b = vec![nb];

    let n = nx * ny;
    let mut mat = Banded::new(n, nx);
    let mut rhs = vec![0.0; n];
    // stencil weights for one axis: (minus, centre, plus)
    let axis = |f: f64, h: f64| -> (f64, f64, f64) {
        let d = diff / (h * h);
        if f.abs() * h * beta / 2.0 <= 1.0 {
            (d - f / (2.0 * h), -2.0 * d, d + f / (2.0 * h))
        } else if f > 0.0 {
            (d, -2.0 * d - f / h, d + f / h)
        } else {
            (d - f / h, -2.0 * d + f / h, d)
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if (i, j) == na || (i, j) == nb {
                mat.add(k, k, 1.0);
                rhs[k] = if (i, j) == nb { 1.0 } else { 0.0 };
                continue;
            }
            let f = model.force(grid.node(i, j));
            let (xm, xc, xp) = axis(f.x, dx);
            let (ym, yc, yp) = axis(f.y, dy);
            mat.add(k, k, xc + yc);
            // mirrored ghost nodes at the walls
            let west = if i == 0 { k + 1 } else { k - 1 };
            let east = if i == nx - 1 { k - 1 } else { k + 1 };
            let south = if j == 0 { k + nx } else { k - nx };
            let north = if j == ny - 1 { k - nx } else { k + nx };
            mat.add(k, west, xm);
            mat.add(k, east, xp);
            mat.add(k, south, ym);
            mat.add(k, north, yp);
        }
    }
    let diag: Vec<f64> = (0..n).map(|k| mat.get(k, k).abs()).collect();
    let mut ax = vec![0.0; n];
    let residual_of = |mat: &Banded, q: &[f64], ax: &mut Vec<f64>| -> (Vec<f64>, f64) {
        mat.mul(q, ax);
        let r: Vec<f64> = (0..n).map(|k| rhs[k] - ax[k]).collect();
        let m = r.iter().zip(&diag).map(|(r, d)| (r / d).abs()).fold(0.0, f64::max);
        (r, m)
    };
    let original = Banded { n, w: nx, data: mat.data.clone() };
    let lu = mat.factor()?;
    let mut q = rhs.clone();
    lu.solve(&mut q);
    let (mut r, mut res) = residual_of(&original, &q, &mut ax);
    let mut sweeps = 0;
    while res >= tol {
        if sweeps == 5 {
            return Err(Error::SolverDiverged { residual: res, tol });
        }
        lu.solve(&mut r);
        q.iter_mut().zip(&r).for_each(|(q, d)| *q += d);
        (r, res) = residual_of(&original, &q, &mut ax);
        sweeps += 1;
    }
    let overshoot = q.iter().map(|&v| (-v).max(v - 1.0)).fold(0.0, f64::max);
    if overshoot > 1e-9 {
        return Err(Error::SolverDiverged { residual: overshoot, tol });
    }
    q.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    grid.residual = res;
    grid.values = q;
    Ok(grid)
}

/// Crossing probability predicted by a committor grid: the mean of the
/// interpolated committor under the start distribution.
pub fn alpha_from_grid(grid: &CommittorGrid, sampler: &RhoCSampler) -> f64 {
    sampler.expectation(|s| grid.interpolate_clamped(s))
}

/// Default triple-well or two-saddles committor: mesh 0.03 on
/// `[-1.5, 1.5] × [-1, 2]`, A at `(-1, 0)`, B at `(1, 0)`, tolerance `1e-8`.
pub fn solve_committor_2d_default<D: Dynamics + ?Sized>(model: &D) -> Result<CommittorGrid> {
    solve_committor_2d(model, Domain::default(), 0.03, 0.03, State::new(-1.0, 0.0), State::new(1.0, 0.0), 1e-8)
}
