//! The large-deviation variational layer: the path action
//! `(1/2) int c'(t)^2 g(c(t)) dt` over velocity paths of the modulated
//! soliton family, its closed-form minimum for the endpoint problem, a
//! discrete path optimizer kept as an independent oracle, the guessed
//! linear-in-time escape path with its `1/T^3` action bound, and synthesis
//! of the control `h_c` that realizes a velocity path through the
//! controlled equation.
//!
//! `g(c) = ||dc phi_c||_{H1}^2` obeys the exact two-term law
//! `g(c) = A c^{-1/2} + B c^{1/2}` (substitute `z = sqrt(c) x` in the two
//! integrals); the optimizer uses that law for cheap derivative evaluations
//! while every reported action value goes through the spectral `g`.

use crate::error::{Error, Result};
use crate::integrator::ControlForcing;
use crate::noise::CovarianceMultiplier;
use crate::soliton::g_coefficient;
use crate::spectral::Grid1D;

/// A time-discretized velocity path `c(t)` on `[0, T]`.
///
/// Between nodes the path is linear; `cumulative_position` holds the
/// trapezoid (here exact) integral `int_0^{t_i} c(s) ds`.
#[derive(Clone, Debug)]
pub struct ControlPath {
    times: Vec<f64>,
    c_values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ControlPath {
    pub fn new(times: Vec<f64>, c_values: Vec<f64>) -> Result<Self> {
        if times.len() != c_values.len() || times.len() < 2 {
            return Err(Error::invalid("path needs matching times/values with at least 2 nodes"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid("path must start at t = 0"));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::invalid("path times must be strictly increasing"));
            }
        }
        if c_values.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::invalid("path velocity must stay positive and finite"));
        }
        let mut cumulative = vec![0.0; times.len()];
        for i in 1..times.len() {
            cumulative[i] = cumulative[i - 1]
                + 0.5 * (c_values[i] + c_values[i - 1]) * (times[i] - times[i - 1]);
        }
        Ok(ControlPath { times, c_values, cumulative })
    }

    /// Uniform-in-time path sampled from a closure.
    pub fn uniform(horizon: f64, segments: usize, c_of_t: impl Fn(f64) -> f64) -> Result<Self> {
        if !(horizon > 0.0) || segments < 1 {
            return Err(Error::invalid("uniform path needs horizon > 0 and >= 1 segment"));
        }
        let times: Vec<f64> = (0..=segments)
            .map(|i| horizon * i as f64 / segments as f64)
            .collect();
        let c_values = times.iter().map(|&t| c_of_t(t)).collect();
        ControlPath::new(times, c_values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn c_values(&self) -> &[f64] {
        &self.c_values
    }

    pub fn cumulative_position(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn node_count(&self) -> usize {
        self.times.len()
    }

    fn segment_of(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.times.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.times.len() - 2),
        }
    }

    /// Piecewise-linear velocity at `t` (clamped to `[0, T]`).
    pub fn c_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon());
        let i = self.segment_of(t);
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        self.c_values[i] + w * (self.c_values[i + 1] - self.c_values[i])
    }

    /// Segment slope at `t` (the a.e. derivative of the PL path).
    pub fn slope_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon());
        let i = self.segment_of(t);
        (self.c_values[i + 1] - self.c_values[i]) / (self.times[i + 1] - self.times[i])
    }

    /// Exact `int_0^t c(s) ds` of the PL path.
    pub fn position_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon());
        let i = self.segment_of(t);
        let dt = t - self.times[i];
        let slope = (self.c_values[i + 1] - self.c_values[i]) / (self.times[i + 1] - self.times[i]);
        self.cumulative[i] + self.c_values[i] * dt + 0.5 * slope * dt * dt
    }

    /// Node derivatives: centered differences at interior nodes, one-sided
    /// at the ends — the convention shared by the action quadrature.
    pub(crate) fn centered_slopes(&self) -> Vec<f64> {
        let n = self.times.len();
        let mut d = vec![0.0; n];
        d[0] = (self.c_values[1] - self.c_values[0]) / (self.times[1] - self.times[0]);
        d[n - 1] =
            (self.c_values[n - 1] - self.c_values[n - 2]) / (self.times[n - 1] - self.times[n - 2]);
        for i in 1..n - 1 {
            d[i] = (self.c_values[i + 1] - self.c_values[i - 1])
                / (self.times[i + 1] - self.times[i - 1]);
        }
        d
    }

    fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.times.len();
        let mut w = vec![0.0; n];
        w[0] = 0.5 * (self.times[1] - self.times[0]);
        w[n - 1] = 0.5 * (self.times[n - 1] - self.times[n - 2]);
        for i in 1..n - 1 {
            w[i] = 0.5 * (self.times[i + 1] - self.times[i - 1]);
        }
        w
    }
}

/// Path action `(1/2) sum_i w_i c'_i^2 g(c_i)` with a caller-supplied `g`
/// (test hook and optimizer entry; the public evaluator fixes `g` to the
/// spectral coefficient).
pub fn action_of_path_with(path: &ControlPath, g: impl Fn(f64) -> f64) -> f64 {
    let slopes = path.centered_slopes();
    let weights = path.trapezoid_weights();
    0.5 * slopes
        .iter()
        .zip(path.c_values())
        .zip(&weights)
        .map(|((d, &c), w)| w * d * d * g(c))
        .sum::<f64>()
}

/// Path action with the spectral `g(c)`.
pub fn action_of_path(path: &ControlPath, grid: &Grid1D) -> Result<f64> {
    let gs: Vec<f64> = path
        .c_values()
        .iter()
        .map(|&c| g_coefficient(c, grid))
        .collect::<Result<_>>()?;
    let slopes = path.centered_slopes();
    let weights = path.trapezoid_weights();
    Ok(0.5
        * slopes
            .iter()
            .zip(&gs)
            .zip(&weights)
            .map(|((d, g), w)| w * d * d * g)
            .sum::<f64>())
}

/// The exact two-term form of `g`, fitted once per grid from spectral
/// evaluations at `c = 1` and `c = 4`.
#[derive(Clone, Copy, Debug)]
pub struct GLaw {
    pub a: f64,
    pub b: f64,
}

impl GLaw {
    pub fn fit(grid: &Grid1D) -> Result<Self> {
        let g1 = g_coefficient(1.0, grid)?;
        let g4 = g_coefficient(4.0, grid)?;
        // g1 = A + B, g4 = A/2 + 2B
        let b = (g4 - 0.5 * g1) / 1.5;
        let a = g1 - b;
        Ok(GLaw { a, b })
    }

    pub fn value(&self, c: f64) -> f64 {
        self.a / c.sqrt() + self.b * c.sqrt()
    }

    pub fn deriv(&self, c: f64) -> f64 {
        0.5 * (-self.a / (c * c.sqrt()) + self.b / c.sqrt())
    }
}

/// Closed-form minimum of the endpoint problem
/// (`c(0) = c0`, `c(T) = c0 + 2 alpha`):
/// the Euler-Lagrange first integral `c'(t)^2 g(c(t)) = const` gives the
/// value `(int_{c0}^{c0+2alpha} sqrt(g))^2 / (2T)` and a realizing path that
/// is uniform in the `sqrt(g)` arclength.
pub fn optimal_action_endpoint(
    c0: f64,
    alpha: f64,
    horizon: f64,
    grid: &Grid1D,
) -> Result<(f64, ControlPath)> {
    if !(c0 > 0.0) || !(alpha > 0.0) || !(horizon > 0.0) {
        return Err(Error::invalid("endpoint problem needs c0, alpha, T > 0"));
    }
    let c1 = c0 + 2.0 * alpha;

    // composite Simpson for s(c) = int_c0^c sqrt(g), on a fine even grid
    let panels = 2048usize;
    let h = (c1 - c0) / panels as f64;
    let sqrt_g: Vec<f64> = (0..=panels)
        .map(|i| g_coefficient(c0 + i as f64 * h, grid).map(|g| g.sqrt()))
        .collect::<Result<_>>()?;
    let mut s_cum = vec![0.0; panels + 1];
    for i in (2..=panels).step_by(2) {
        // half-panel value by the quadratic through the three nodes
        s_cum[i - 1] =
            s_cum[i - 2] + h / 12.0 * (5.0 * sqrt_g[i - 2] + 8.0 * sqrt_g[i - 1] - sqrt_g[i]);
        s_cum[i] = s_cum[i - 2] + h / 3.0 * (sqrt_g[i - 2] + 4.0 * sqrt_g[i - 1] + sqrt_g[i]);
    }
    let total = s_cum[panels];
    let value = total * total / (2.0 * horizon);

    // realizing path: t(c) = T s(c)/S, inverted onto uniform time nodes
    let segments = 256usize;
    let mut c_nodes = Vec::with_capacity(segments + 1);
    let mut cursor = 0usize;
    for i in 0..=segments {
        let target = total * i as f64 / segments as f64;
        while cursor + 1 < s_cum.len() && s_cum[cursor + 1] < target {
            cursor += 1;
        }
        let c = if i == 0 {
            c0
        } else if i == segments {
            c1
        } else {
            let (s_lo, s_hi) = (s_cum[cursor], s_cum[cursor + 1]);
            let w = if s_hi > s_lo { (target - s_lo) / (s_hi - s_lo) } else { 0.0 };
            c0 + (cursor as f64 + w) * h
        };
        c_nodes.push(c);
    }
    let times = (0..=segments)
        .map(|i| horizon * i as f64 / segments as f64)
        .collect();
    let path = ControlPath::new(times, c_nodes)?;
    Ok((value, path))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    /// Fixed endpoints `c(0) = c0`, `c(T) = c0 + 2 alpha`.
    Endpoint,
    /// Fixed-frame escape: `c(0) = c0`, terminal value free, integrated
    /// displacement `int (c0 - c)` pinned to the guessed path's value so
    /// the optimum is directly comparable to the guess.
    FixedFrameEscape,
}

#[derive(Clone, Copy, Debug)]
pub struct VariationalProblem {
    pub kind: ProblemKind,
    pub c0: f64,
    pub alpha: f64,
    pub horizon: f64,
    /// Sobolev embedding constant in the fixed-frame admissibility window
    /// `alpha < 3 c0 / (4 C_inf)`.
    pub sobolev_constant: f64,
}

impl VariationalProblem {
    pub fn endpoint(c0: f64, alpha: f64, horizon: f64) -> Self {
        VariationalProblem {
            kind: ProblemKind::Endpoint,
            c0,
            alpha,
            horizon,
            sobolev_constant: SOBOLEV_SHARP,
        }
    }

    pub fn fixed_frame(c0: f64, alpha: f64, horizon: f64) -> Self {
        VariationalProblem {
            kind: ProblemKind::FixedFrameEscape,
            c0,
            alpha,
            horizon,
            sobolev_constant: SOBOLEV_SHARP,
        }
    }
}

/// Sharp constant of `||f||_inf^2 <= ||f|| ||f'|| <= (1/2) ||f||_{H1}^2`.
pub const SOBOLEV_SHARP: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Debug)]
pub struct OptimizedPath {
    pub path: ControlPath,
    /// Action of the optimized path under the spectral `g`.
    pub action: f64,
    pub converged: bool,
    pub sweeps: usize,
}

const OPT_SWEEP_CAP: usize = 10_000;
const OPT_DECREASE_TOL: f64 = 1e-12;
const OPT_GRAD_TOL: f64 = 1e-10;

/// Uniform-grid centered slopes (optimizer inner loop).
fn centered_slopes_uniform(c: &[f64], h: f64) -> Vec<f64> {
    let n = c.len();
    let mut d = vec![0.0; n];
    d[0] = (c[1] - c[0]) / h;
    d[n - 1] = (c[n - 1] - c[n - 2]) / h;
    for i in 1..n - 1 {
        d[i] = (c[i + 1] - c[i - 1]) / (2.0 * h);
    }
    d
}

/// Discrete action on a uniform grid (the exact objective the optimizer
/// minimizes; identical quadrature to [`action_of_path_with`]).
fn action_uniform(c: &[f64], h: f64, g: &impl Fn(f64) -> f64) -> f64 {
    let n = c.len();
    let slopes = centered_slopes_uniform(c, h);
    let mut total = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        total += w * slopes[i] * slopes[i] * g(c[i]);
    }
    0.5 * total
}

/// Analytic gradient of [`action_uniform`] with respect to the nodes
/// `free_lo..free_hi`.
///
/// Slope stencils touching `c_j`:
/// `d_0 = (c_1 - c_0)/h`, `d_i = (c_{i+1} - c_{i-1})/(2h)`,
/// `d_{n-1} = (c_{n-1} - c_{n-2})/h`.
fn action_gradient_uniform(
    c: &[f64],
    h: f64,
    free_lo: usize,
    free_hi: usize,
    g: &impl Fn(f64) -> f64,
    g_deriv: &impl Fn(f64) -> f64,
    out: &mut [f64],
) {
    let n = c.len();
    let slopes = centered_slopes_uniform(c, h);
    let weight = |i: usize| if i == 0 || i == n - 1 { 0.5 * h } else { h };
    for (slot, j) in (free_lo..free_hi).enumerate() {
        let mut acc = weight(j) * slopes[j] * slopes[j] * g_deriv(c[j]);
        let mut add = |i: usize, dd: f64| {
            acc += 2.0 * weight(i) * slopes[i] * g(c[i]) * dd;
        };
        if j == 0 {
            add(0, -1.0 / h); // d_0 left node
        }
        if j == 1 {
            add(0, 1.0 / h); // d_0 right node
        }
        if j == n - 2 {
            add(n - 1, -1.0 / h); // d_{n-1} left node
        }
        if j == n - 1 {
            add(n - 1, 1.0 / h);
        }
        if j >= 2 && j - 1 <= n - 2 {
            add(j - 1, 1.0 / (2.0 * h)); // c_j is the right neighbor of d_{j-1}
        }
        if j + 1 <= n - 2 {
            add(j + 1, -1.0 / (2.0 * h)); // c_j is the left neighbor of d_{j+1}
        }
        out[slot] = 0.5 * acc;
    }
}

/// Dense LU solve with partial pivoting (the optimizer systems stay small,
/// a few hundred unknowns).
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (pivot, pmax) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if pmax <= 1e-300 || !pmax.is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Hessian of [`action_uniform`] over the free nodes (pentadiagonal stencil
/// assembled densely; `g''` by central differences of `g'`).
fn action_hessian_uniform(
    c: &[f64],
    h: f64,
    free_lo: usize,
    free_hi: usize,
    g: &impl Fn(f64) -> f64,
    g_deriv: &impl Fn(f64) -> f64,
) -> Vec<Vec<f64>> {
    let n = c.len();
    let free = free_hi - free_lo;
    let slopes = centered_slopes_uniform(c, h);
    let weight = |i: usize| if i == 0 || i == n - 1 { 0.5 * h } else { h };
    let deps = |i: usize| -> [(usize, f64); 2] {
        if i == 0 {
            [(0, -1.0 / h), (1, 1.0 / h)]
        } else if i == n - 1 {
            [(n - 2, -1.0 / h), (n - 1, 1.0 / h)]
        } else {
            [(i - 1, -0.5 / h), (i + 1, 0.5 / h)]
        }
    };
    let g_second = |x: f64| {
        let step = 1e-5 * x.max(1.0);
        (g_deriv(x + step) - g_deriv(x - step)) / (2.0 * step)
    };
    let mut hess = vec![vec![0.0; free]; free];
    let slot = |j: usize| -> Option<usize> {
        (j >= free_lo && j < free_hi).then(|| j - free_lo)
    };
    for i in 0..n {
        let w = weight(i);
        let gi = g(c[i]);
        let gpi = g_deriv(c[i]);
        let d = deps(i);
        // w g(c_i) (dd_i/dc_j)(dd_i/dc_l)
        for &(j, cj) in &d {
            for &(l, cl) in &d {
                if let (Some(js), Some(ls)) = (slot(j), slot(l)) {
                    hess[js][ls] += w * gi * cj * cl;
                }
            }
        }
        // w d_i g'(c_i) cross terms against the g(c_i) argument
        if let Some(is) = slot(i) {
            for &(l, cl) in &d {
                if let Some(ls) = slot(l) {
                    hess[is][ls] += w * slopes[i] * gpi * cl;
                    hess[ls][is] += w * slopes[i] * gpi * cl;
                }
            }
            hess[is][is] += 0.5 * w * slopes[i] * slopes[i] * g_second(c[i]);
        }
    }
    hess
}

/// [`optimize_path`] with a caller-supplied coefficient (test hook: the
/// constant-`g` problem has the straight line as its exact optimum).
///
/// Damped Newton sweeps with an Armijo line search; the fixed-frame kind
/// solves the KKT system of the affine displacement constraint. The
/// objective is nonincreasing by construction, and the gradient falls back
/// in whenever a Newton direction fails to descend.
pub fn optimize_path_with_g(
    prob: &VariationalProblem,
    m_nodes: usize,
    g: impl Fn(f64) -> f64,
    g_deriv: impl Fn(f64) -> f64,
) -> Result<OptimizedPath> {
    if m_nodes < 16 {
        return Err(Error::invalid("optimizer needs at least 16 nodes"));
    }
    if !(prob.c0 > 0.0) || !(prob.alpha > 0.0) || !(prob.horizon > 0.0) {
        return Err(Error::invalid("variational problem needs c0, alpha, T > 0"));
    }
    let n = m_nodes;
    let m = n - 1;
    let horizon = prob.horizon;
    let h = horizon / m as f64;
    let times: Vec<f64> = (0..n).map(|i| h * i as f64).collect();

    let mut c = vec![prob.c0; n];
    let (free_lo, free_hi, constraint_weights): (usize, usize, Option<Vec<f64>>) = match prob.kind
    {
        ProblemKind::Endpoint => {
            let c1 = prob.c0 + 2.0 * prob.alpha;
            for (i, ci) in c.iter_mut().enumerate() {
                *ci = prob.c0 + (c1 - prob.c0) * i as f64 / m as f64;
            }
            (1, n - 1, None)
        }
        ProblemKind::FixedFrameEscape => {
            let guess =
                heuristic_escape_path(prob.c0, prob.alpha, horizon, prob.sobolev_constant)?;
            for (i, ci) in c.iter_mut().enumerate() {
                *ci = guess.path.c_at(times[i]);
            }
            let mut w = vec![h; n];
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
            (1, n, Some(w))
        }
    };
    let free = free_hi - free_lo;

    let objective = |c: &[f64]| -> f64 {
        if c.iter().any(|&ci| !(ci > 0.0) || !ci.is_finite()) {
            return f64::INFINITY;
        }
        action_uniform(c, h, &g)
    };
    // keep sum w_i c_i fixed for the constrained kind
    let project = |d: &mut [f64]| {
        if let Some(w) = &constraint_weights {
            let wa = &w[free_lo..free_hi];
            let dot: f64 = d.iter().zip(wa).map(|(a, b)| a * b).sum();
            let nsq: f64 = wa.iter().map(|a| a * a).sum();
            for (di, wi) in d.iter_mut().zip(wa) {
                *di -= dot / nsq * wi;
            }
        }
    };
    let newton_direction = |c: &[f64], grad: &[f64]| -> Option<Vec<f64>> {
        let hess = action_hessian_uniform(c, h, free_lo, free_hi, &g, &g_deriv);
        match &constraint_weights {
            None => solve_dense(hess, grad.iter().map(|x| -x).collect()),
            Some(w) => {
                // KKT system [[H, w], [w^T, 0]] [d; lambda] = [-g; 0]
                let wa = &w[free_lo..free_hi];
                let mut kkt = vec![vec![0.0; free + 1]; free + 1];
                for (r, row) in hess.iter().enumerate() {
                    kkt[r][..free].copy_from_slice(row);
                    kkt[r][free] = wa[r];
                    kkt[free][r] = wa[r];
                }
                let mut rhs: Vec<f64> = grad.iter().map(|x| -x).collect();
                rhs.push(0.0);
                solve_dense(kkt, rhs).map(|mut d| {
                    d.truncate(free);
                    d
                })
            }
        }
    };

    let mut obj = objective(&c);
    let mut grad = vec![0.0; free];
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < OPT_SWEEP_CAP {
        sweeps += 1;
        action_gradient_uniform(&c, h, free_lo, free_hi, &g, &g_deriv, &mut grad);
        project(&mut grad);
        let gnorm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm < OPT_GRAD_TOL {
            converged = true;
            break;
        }
        let mut dir = match newton_direction(&c, &grad) {
            Some(d) => d,
            None => grad.iter().map(|x| -x).collect(),
        };
        project(&mut dir);
        let mut slope: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            dir = grad.iter().map(|x| -x).collect();
            project(&mut dir);
            slope = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        }
        let mut t = 1.0f64;
        let mut accepted = false;
        let mut trial = c.clone();
        for _ in 0..60 {
            for (i, d) in dir.iter().enumerate() {
                trial[free_lo + i] = c[free_lo + i] + t * d;
            }
            let new_obj = objective(&trial);
            if new_obj <= obj + 1e-4 * t * slope {
                let decrease = obj - new_obj;
                c.copy_from_slice(&trial);
                obj = new_obj;
                accepted = true;
                if decrease < OPT_DECREASE_TOL {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // a descent direction admits no decrease: numerically flat
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let path = ControlPath::new(times, c)?;
    Ok(OptimizedPath { path, action: obj, converged, sweeps })
}

/// Minimize the discrete action over node values by projected
/// nonlinear-conjugate-gradient sweeps with a backtracking line search; the
/// objective is nonincreasing across sweeps and the reported action is
/// re-evaluated with the spectral `g`.
pub fn optimize_path(
    prob: &VariationalProblem,
    m_nodes: usize,
    grid: &Grid1D,
) -> Result<OptimizedPath> {
    let glaw = GLaw::fit(grid)?;
    let mut opt =
        optimize_path_with_g(prob, m_nodes, |c| glaw.value(c), |c| glaw.deriv(c))?;
    opt.action = action_of_path(&opt.path, grid)?;
    Ok(opt)
}

/// The guessed escape path of the fixed-frame problem together with its
/// diagnostic quantities.
#[derive(Clone, Debug)]
pub struct HeuristicEscape {
    pub path: ControlPath,
    /// `gamma = min(3/2 delta, c0/4)`.
    pub gamma: f64,
    /// `delta(c0, alpha) = 4 / (e sqrt(c0 - 4 C_inf alpha / 3))`.
    pub delta: f64,
    /// Realized `int_0^T (c0 - c(s)) ds` (equals gamma for the linear path).
    pub displacement: f64,
    /// Whether the sufficient escape condition `displacement > delta` holds.
    pub condition_met: bool,
}

/// The linear guess `c(t) = c0 - 2 gamma t / T^2`, defined for `T >= 1`;
/// its floor `c(T) >= c0/2` is guaranteed by the `c0/4` cap on `gamma`.
pub fn heuristic_escape_path(
    c0: f64,
    alpha: f64,
    horizon: f64,
    sobolev_constant: f64,
) -> Result<HeuristicEscape> {
    if !(horizon >= 1.0) {
        return Err(Error::invalid(format!("escape path needs T >= 1, got {horizon}")));
    }
    if !(c0 > 0.0) {
        return Err(Error::invalid("c0 must be positive"));
    }
    let alpha_cap = 3.0 * c0 / (4.0 * sobolev_constant);
    if !(alpha > 0.0) || alpha >= alpha_cap {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 3 c0 / (4 C_inf)) = (0, {alpha_cap}), got {alpha}"
        )));
    }
    let delta = 4.0 / (std::f64::consts::E * (c0 - 4.0 * sobolev_constant * alpha / 3.0).sqrt());
    let gamma = (1.5 * delta).min(0.25 * c0);
    let path = ControlPath::uniform(horizon, 256, |t| c0 - 2.0 * gamma * t / (horizon * horizon))?;
    let displacement = c0 * horizon - path.cumulative_position().last().unwrap();
    Ok(HeuristicEscape {
        path,
        gamma,
        delta,
        displacement,
        condition_met: displacement > delta,
    })
}

/// Action of the guessed escape path; `T^3 * value` stays bounded in `T`
/// because `c0/2 <= c(t) <= c0` keeps `g` along the path near `g(c0)`.
pub fn action_fixed_frame_bound(
    c0: f64,
    alpha: f64,
    horizon: f64,
    grid: &Grid1D,
    sobolev_constant: f64,
) -> Result<f64> {
    let escape = heuristic_escape_path(c0, alpha, horizon, sobolev_constant)?;
    action_of_path(&escape.path, grid)
}

/// Build the realizing control
/// `h_c(t) = c'(t) (I - Laplacian)^{1/2} dc phi_c|_{c(t)} (. - pos(t))`
/// for a velocity path, ready to feed to the controlled integrator (which
/// applies the covariance multiplier, leaving exactly `c'(t) dc phi_c`).
pub fn synthesize_control(
    path: &ControlPath,
    grid: &Grid1D,
    frame_velocity: f64,
) -> Result<ControlForcing> {
    let half = 0.5 * grid.length();
    let c_min = path.c_values().iter().cloned().fold(f64::INFINITY, f64::min);
    let margin = 20.0 / c_min.sqrt();
    for (t, cum) in path.times().iter().zip(path.cumulative_position()) {
        let pos = cum - frame_velocity * t;
        if pos.abs() + margin > half {
            return Err(Error::invalid(format!(
                "control crest position {pos:.3} leaves less than {margin:.3} to a box edge"
            )));
        }
    }
    Ok(ControlForcing::new(
        path.clone(),
        grid.clone(),
        frame_velocity,
        CovarianceMultiplier::H1White,
    ))
}
