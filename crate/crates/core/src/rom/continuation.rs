use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};

use super::ReducedSystem;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationOptions {
    pub omega_min: f64,
    pub omega_max: f64,
    /// Initial, smallest and largest arclength step, in units where both the
    /// reduced state (divided by its linear-response scale) and `Ω` are O(1).
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub detect_bifurcations: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            omega_min: 0.8,
            omega_max: 1.2,
            ds: 1e-3,
            ds_min: 1e-10,
            ds_max: 2e-2,
            max_steps: 50_000,
            newton_tol: 1e-11,
            newton_max: 12,
            detect_bifurcations: true,
        }
    }
}

impl ContinuationOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(SsmError::Config {
                field: field.into(),
                message: message.into(),
            })
        };
        if !(self.omega_min > 0.0 && self.omega_max > self.omega_min) {
            return bad("omega_range", "need 0 < omega_min < omega_max");
        }
        if !(self.ds_min > 0.0 && self.ds >= self.ds_min && self.ds_max >= self.ds) {
            return bad("ds", "need 0 < ds_min <= ds <= ds_max");
        }
        if !(self.newton_tol > 0.0) || self.newton_max == 0 {
            return bad("newton_tol", "must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BifurcationKind {
    SaddleNode,
    Hopf,
    /// `det J` changes sign while `Ω` passes through monotonically.
    BranchPoint,
}

impl std::fmt::Display for BifurcationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BifurcationKind::SaddleNode => "SN",
            BifurcationKind::Hopf => "HB",
            BifurcationKind::BranchPoint => "BP",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchPoint {
    pub omega: f64,
    pub y: Vec<f64>,
    pub stable: bool,
    pub det: f64,
    pub hopf_test: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bifurcation {
    pub kind: BifurcationKind,
    pub omega: f64,
    pub y: Vec<f64>,
    /// Index of the branch point preceding the bifurcation.
    pub after_point: usize,
    /// Unit tangent in scaled coordinates `(y / y_scale, Ω)`.
    pub tangent: Vec<f64>,
    pub y_scale: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub bifurcations: Vec<Bifurcation>,
    pub y_scale: f64,
}

/// Scaled point `x = (y / ys, Ω)` with its unit tangent.
#[derive(Clone, Debug)]
struct Arc {
    x: DVector<f64>,
    t: DVector<f64>,
}

struct Tracker<'a> {
    sys: &'a ReducedSystem,
    ys: f64,
    tol: f64,
    newton_max: usize,
}

fn split(x: &DVector<f64>, ys: f64) -> (Vec<f64>, f64) {
    let n = x.len() - 1;
    ((0..n).map(|i| x[i] * ys).collect(), x[n])
}

impl<'a> Tracker<'a> {
    fn extended_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (y, om) = split(x, self.ys);
        let n = y.len();
        let j = self.sys.jacobian(&y, om) * self.ys;
        let g_om = self.sys.d_omega(&y);
        let mut ext = DMatrix::zeros(n + 1, n + 1);
        ext.view_mut((0, 0), (n, n)).copy_from(&j);
        for i in 0..n {
            ext[(i, n)] = g_om[i];
        }
        ext
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let (y, om) = split(x, self.ys);
        DVector::from_vec(self.sys.field(&y, om)).map(|v| v / self.ys)
    }

    /// Unit tangent oriented along `prev`.
    fn tangent(&self, x: &DVector<f64>, prev: &DVector<f64>) -> Result<DVector<f64>> {
        let n = x.len() - 1;
        let mut m = self.extended_jacobian(x) / self.ys;
        for i in 0..=n {
            m[(n, i)] = prev[i];
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs[n] = 1.0;
        let t = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| SsmError::Numerical("singular extended Jacobian while computing the tangent".into()))?;
        let t = t.normalize();
        Ok(if t.dot(prev) < 0.0 { -t } else { t })
    }

    /// Newton at fixed `Ω` from `y0`.
    fn solve_fixed(&self, y0: &[f64], omega: f64) -> Result<Vec<f64>> {
        let mut y = y0.to_vec();
        for _ in 0..self.newton_max {
            let g = DVector::from_vec(self.sys.field(&y, omega));
            let dy = self
                .sys
                .jacobian(&y, omega)
                .lu()
                .solve(&g)
                .ok_or_else(|| SsmError::Numerical(format!("singular reduced Jacobian at Ω = {omega}")))?;
            for (a, d) in y.iter_mut().zip(dy.iter()) {
                *a -= d;
            }
            if dy.amax() <= self.tol * self.ys {
                return Ok(y);
            }
        }
        Err(SsmError::NonConvergence {
            context: format!("reduced equilibrium at Ω = {omega}"),
            iterations: self.newton_max,
            residual: DVector::from_vec(self.sys.field(&y, omega)).amax(),
        })
    }

    /// Corrector on `t·(x − x_pred) = 0`; returns the point and iteration count.
    fn correct(&self, pred: &DVector<f64>, t: &DVector<f64>) -> Option<(DVector<f64>, usize)> {
        let n = pred.len() - 1;
        let mut x = pred.clone();
        for it in 1..=self.newton_max {
            let mut m = self.extended_jacobian(&x) / self.ys;
            let mut f = self.residual(&x).push(0.0);
            for i in 0..=n {
                m[(n, i)] = t[i];
            }
            f[n] = t.dot(&(&x - pred));
            let dx = m.lu().solve(&f)?;
            x -= &dx;
            if !x.iter().all(|v| v.is_finite()) {
                return None;
            }
            if dx.amax() <= self.tol {
                return Some((x, it));
            }
        }
        None
    }

    fn step(&self, at: &Arc, ds: f64) -> Option<(Arc, usize)> {
        let pred = &at.x + &at.t * ds;
        let (x, it) = self.correct(&pred, &at.t)?;
        let t = self.tangent(&x, &at.t).ok()?;
        Some((Arc { x, t }, it))
    }

    fn tests(&self, x: &DVector<f64>) -> (f64, f64, bool) {
        let (y, om) = split(x, self.ys);
        let j = self.sys.jacobian(&y, om);
        let ev = j.complex_eigenvalues();
        let stable = ev.iter().all(|e| e.re < 0.0);
        let mut hopf = 1.0;
        for a in 0..ev.len() {
            for b in a + 1..ev.len() {
                hopf *= (ev[a] + ev[b]).re;
            }
        }
        (j.determinant(), hopf, stable)
    }

    fn point(&self, x: &DVector<f64>) -> BranchPoint {
        let (y, omega) = split(x, self.ys);
        let (det, hopf_test, stable) = self.tests(x);
        BranchPoint {
            omega,
            y,
            stable,
            det,
            hopf_test,
        }
    }

    /// Bisect on the arclength from `a` to find a sign change of `test`.
    fn locate(&self, a: &Arc, ds: f64, test: impl Fn(&DVector<f64>) -> f64) -> Option<Arc> {
        let (mut lo, mut hi) = (0.0, ds);
        let f_lo = test(&a.x);
        let mut best = None;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let (arc, _) = self.step(a, mid)?;
            if (test(&arc.x) > 0.0) == (f_lo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
            best = Some(arc);
            if (hi - lo).abs() <= 1e-13 * ds.abs().max(1.0) {
                break;
            }
        }
        best
    }
}

impl ReducedSystem {
    /// Scale of the linear forced response, `max_k |ε s_k| / |Re λ_k|`.
    pub fn response_scale(&self) -> f64 {
        let s = self
            .positive_modes()
            .iter()
            .enumerate()
            .map(|(k, &i)| self.forcing_entry(k).norm() / self.lambdas()[i].re.abs().max(1e-300))
            .fold(0.0, f64::max);
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    }
}

/// Pseudo-arclength continuation of rotating-frame equilibria (periodic
/// responses) in `Ω`, from `omega_min` until the branch leaves the range.
/// Saddle-node and Hopf points are located by bisection on sign changes of
/// `det J` and `Π_{i<j}(μ_i + μ_j)`.
pub fn continue_branch(sys: &ReducedSystem, opts: &ContinuationOptions) -> Result<Branch> {
    opts.validate()?;
    let ys = sys.response_scale();
    let tr = Tracker {
        sys,
        ys,
        tol: opts.newton_tol,
        newton_max: opts.newton_max,
    };
    let n = sys.dim();
    let y0 = tr.solve_fixed(&vec![0.0; n], opts.omega_min)?;
    let x0 = DVector::from_iterator(n + 1, y0.iter().map(|v| v / ys).chain([opts.omega_min]));
    let mut dir = DVector::zeros(n + 1);
    dir[n] = 1.0;
    let t0 = tr.tangent(&x0, &dir)?;
    let mut cur = Arc { x: x0, t: t0 };
    let mut points = vec![tr.point(&cur.x)];
    let mut bifurcations = Vec::new();
    let mut ds = opts.ds;
    let mut steps = 0;
    while steps < opts.max_steps {
        steps += 1;
        let Some((next, it)) = tr.step(&cur, ds).filter(|(nx, _)| nx.t.dot(&cur.t) > 0.95) else {
            ds *= 0.5;
            if ds < opts.ds_min {
                return Err(SsmError::NonConvergence {
                    context: format!("continuation at Ω = {:.6}", cur.x[n]),
                    iterations: steps,
                    residual: ds,
                });
            }
            continue;
        };
        let pt = tr.point(&next.x);
        if opts.detect_bifurcations {
            let prev = points.last().expect("nonempty");
            let after_point = points.len() - 1;
            let mut found = Vec::new();
            if (prev.det > 0.0) != (pt.det > 0.0) {
                if let Some(a) = tr.locate(&cur, ds, |x| tr.tests(x).0) {
                    // a fold has a tangent with vanishing Ω-component
                    let kind = if a.t[n].abs() < 1e-3 {
                        BifurcationKind::SaddleNode
                    } else {
                        BifurcationKind::BranchPoint
                    };
                    found.push((kind, a));
                }
            }
            if (prev.hopf_test > 0.0) != (pt.hopf_test > 0.0) {
                if let Some(a) = tr.locate(&cur, ds, |x| tr.tests(x).1) {
                    if has_imaginary_pair(&tr, &a.x) {
                        found.push((BifurcationKind::Hopf, a));
                    }
                }
            }
            for (kind, a) in found {
                let (y, omega) = split(&a.x, ys);
                bifurcations.push(Bifurcation {
                    kind,
                    omega,
                    y,
                    after_point,
                    tangent: a.t.iter().copied().collect(),
                    y_scale: ys,
                });
            }
        }
        let omega = pt.omega;
        points.push(pt);
        cur = next;
        if omega > opts.omega_max || omega < opts.omega_min {
            break;
        }
        if it <= 3 {
            ds = (ds * 1.5).min(opts.ds_max);
        } else if it > 6 {
            ds = (ds * 0.7).max(opts.ds_min);
        }
    }
    bifurcations.sort_by(|a, b| a.after_point.cmp(&b.after_point));
    Ok(Branch {
        points,
        bifurcations,
        y_scale: ys,
    })
}

/// Distinguish a Hopf point from a neutral saddle: the eigenvalue nearest
/// the imaginary axis must have a nonzero imaginary part.
fn has_imaginary_pair(tr: &Tracker, x: &DVector<f64>) -> bool {
    let (y, om) = split(x, tr.ys);
    let ev = tr.sys.jacobian(&y, om).complex_eigenvalues();
    let scale = ev.iter().map(|e| e.norm()).fold(0.0, f64::max).max(1e-300);
    ev.iter()
        .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
        .is_some_and(|e| e.im.abs() > 1e-8 * scale)
}

/// Result of checking a detected bifurcation by direct recomputation of the
/// reduced Jacobian on nearby solutions at `Ω* ± δ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BifurcationCheck {
    pub kind: BifurcationKind,
    pub omega: f64,
    /// `(Ω, indicator)` on either side; the indicator is `det J` for a
    /// saddle-node and the real part of the critical complex pair for Hopf.
    pub sides: [(f64, f64); 2],
    pub confirmed: bool,
}

/// Walk the branch away from the bifurcation in both directions until `|Ω −
/// Ω*| ≥ δ`, re-solve at exactly `Ω* ± δ`, and compare the indicators. A
/// saddle-node is confirmed when both solutions lie on the same side of `Ω*`
/// with opposite `det J`; a Hopf point when the critical pair's real part
/// changes sign across `Ω*`.
pub fn verify_bifurcation(
    sys: &ReducedSystem,
    bif: &Bifurcation,
    delta: f64,
    opts: &ContinuationOptions,
) -> Result<BifurcationCheck> {
    let ys = bif.y_scale;
    let tr = Tracker {
        sys,
        ys,
        tol: opts.newton_tol,
        newton_max: opts.newton_max,
    };
    let n = sys.dim();
    let x0 = DVector::from_iterator(n + 1, bif.y.iter().map(|v| v / ys).chain([bif.omega]));
    let t0 = DVector::from_vec(bif.tangent.clone());
    let mut sides = [(0.0, 0.0); 2];
    for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
        let mut cur = Arc {
            x: x0.clone(),
            t: &t0 * sign,
        };
        let mut h = (delta * 1e-2).max(opts.ds_min);
        let mut reached = None;
        for _ in 0..100_000 {
            let (next, _) = tr
                .step(&cur, h)
                .ok_or_else(|| SsmError::Numerical("branch walk failed near bifurcation".into()))?;
            let d = next.x[n] - bif.omega;
            if d.abs() >= delta {
                let target = bif.omega + delta * d.signum();
                // linear interpolation between the bracketing points as a start
                let w = (target - cur.x[n]) / (next.x[n] - cur.x[n]);
                let start: Vec<f64> = (0..n).map(|i| ys * (cur.x[i] + w * (next.x[i] - cur.x[i]))).collect();
                reached = Some((tr.solve_fixed(&start, target)?, target));
                break;
            }
            cur = next;
            h = (h * 1.2).min(opts.ds_max);
        }
        let (y, om) = reached.ok_or_else(|| SsmError::Numerical("branch did not leave the δ-window".into()))?;
        let j = sys.jacobian(&y, om);
        let indicator = match bif.kind {
            BifurcationKind::SaddleNode | BifurcationKind::BranchPoint => j.determinant(),
            BifurcationKind::Hopf => critical_pair_re(&j),
        };
        sides[side] = (om, indicator);
    }
    let flips = (sides[0].1 > 0.0) != (sides[1].1 > 0.0);
    // both fold branches sit on the same side of Ω*; the others straddle it
    let same_side = sides[0].0 == sides[1].0;
    let confirmed = flips
        && match bif.kind {
            BifurcationKind::SaddleNode => same_side,
            _ => !same_side,
        };
    Ok(BifurcationCheck {
        kind: bif.kind,
        omega: bif.omega,
        sides,
        confirmed,
    })
}

/// Real part of the complex eigenvalue nearest the imaginary axis.
fn critical_pair_re(j: &DMatrix<f64>) -> f64 {
    let ev = j.complex_eigenvalues();
    let scale = ev.iter().map(|e| e.norm()).fold(0.0, f64::max).max(1e-300);
    ev.iter()
        .filter(|e| e.im.abs() > 1e-8 * scale)
        .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
        .map_or(f64::NAN, |e| e.re)
}
