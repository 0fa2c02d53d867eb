//! Homogeneous self-dual interior-point method for real linear programs over a
//! product of symmetric PSD cones (a 1x1 block is a nonnegative scalar):
//!
//! ```text
//! minimize c^T x  subject to  G x + s = h,  A x = b,  s in K.
//! ```
//!
//! Search directions use Nesterov-Todd scaling and a Mehrotra
//! predictor-corrector; the reduced KKT system is dense.

use nalgebra::{DMatrix, DVector};

/// One PSD block of the cone: `s = h - sum_j x_j g_j`, `g` holding only the
/// nonzero columns.
#[derive(Debug, Clone)]
pub struct Block {
    pub size: usize,
    pub h: DMatrix<f64>,
    pub g: Vec<(usize, DMatrix<f64>)>,
}

impl Block {
    pub fn new(size: usize) -> Self {
        Block { size, h: DMatrix::zeros(size, size), g: Vec::new() }
    }

    /// Add `coef * mat` to the column of variable `var`.
    pub fn add(&mut self, var: usize, mat: DMatrix<f64>) {
        if let Some((_, m)) = self.g.iter_mut().find(|(v, _)| *v == var) {
            *m += mat;
        } else {
            self.g.push((var, mat));
        }
    }

    fn apply(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.size, self.size);
        for (j, g) in &self.g {
            if x[*j] != 0.0 {
                out += g * x[*j];
            }
        }
        out
    }

    fn apply_t(&self, z: &DMatrix<f64>, out: &mut DVector<f64>) {
        for (j, g) in &self.g {
            out[*j] += g.dot(z);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConeLp {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    Failure,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: DVector<f64>,
    pub iterations: usize,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub feastol: f64,
    pub abstol: f64,
    pub reltol: f64,
    pub max_iter: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { feastol: 1e-9, abstol: 1e-10, reltol: 1e-9, max_iter: 200 }
    }
}

/// Nesterov-Todd scaling of one block: `W z = R^T z R`, `W^{-T} s = R^{-1} s R^{-T}`,
/// with the scaled point `diag(lambda)`.
struct Scaling {
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    lambda: DVector<f64>,
}

fn lower_inverse(l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = l.nrows();
    let mut inv = DMatrix::identity(n, n);
    l.solve_lower_triangular_mut(&mut inv).then_some(inv)
}

fn nt_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let n = s.nrows();
    if n == 1 {
        let (sv, zv) = (s[(0, 0)], z[(0, 0)]);
        if !(sv > 0.0 && zv > 0.0) {
            return None;
        }
        let r = (sv / zv).sqrt().sqrt();
        return Some(Scaling {
            r: DMatrix::from_element(1, 1, r),
            r_inv: DMatrix::from_element(1, 1, 1.0 / r),
            lambda: DVector::from_element(1, (sv * zv).sqrt()),
        });
    }
    let ls = s.clone().cholesky()?.unpack();
    let lz = z.clone().cholesky()?.unpack();
    let svd = (lz.transpose() * &ls).svd(false, true);
    let v_t = svd.v_t?;
    let lambda = svd.singular_values;
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let inv_sqrt = DMatrix::from_diagonal(&lambda.map(|l| 1.0 / l.sqrt()));
    let sqrt = DMatrix::from_diagonal(&lambda.map(f64::sqrt));
    let r = &ls * v_t.transpose() * inv_sqrt;
    let r_inv = sqrt * &v_t * lower_inverse(&ls)?;
    Some(Scaling { r, r_inv, lambda })
}

/// Solve `lambda o X = D` (Jordan product with a diagonal `lambda`).
fn jordan_div(lambda: &DVector<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| 2.0 * d[(i, j)] / (lambda[i] + lambda[j]))
}

fn jordan_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a * b;
    (&p + p.transpose()) * 0.5
}

fn sym(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// Largest `t` keeping `diag(lambda) + t d` PSD.
fn max_step(lambda: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let n = lambda.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| d[(i, j)] / (lambda[i] * lambda[j]).sqrt());
    let min = if n == 1 {
        scaled[(0, 0)]
    } else {
        sym(scaled).symmetric_eigenvalues().min()
    };
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

fn blocks_dot(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn blocks_norm(a: &[DMatrix<f64>]) -> f64 {
    blocks_dot(a, a).sqrt()
}

struct Kkt {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    /// Columns of `W^{-T} G`, per block.
    gs: Vec<Vec<(usize, DMatrix<f64>)>>,
}

impl Kkt {
    fn gs_apply(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.gs
            .iter()
            .map(|cols| {
                let size = cols.first().map_or(0, |(_, g)| g.nrows());
                let mut out = DMatrix::zeros(size, size);
                for (j, g) in cols {
                    out += g * x[*j];
                }
                out
            })
            .collect()
    }

    fn gs_t(&self, z: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (cols, zb) in self.gs.iter().zip(z) {
            for (j, g) in cols {
                out[*j] += g.dot(zb);
            }
        }
        out
    }
}

impl ConeLp {
    fn g_apply(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.apply(x)).collect()
    }

    fn g_t(&self, z: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.c.len());
        for (b, zb) in self.blocks.iter().zip(z) {
            b.apply_t(zb, &mut out);
        }
        out
    }

    fn hs(&self) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.h.clone()).collect()
    }

    fn factor(&self, sc: &[Scaling]) -> Option<Kkt> {
        let n = self.c.len();
        let p = self.a.nrows();
        let mut k = DMatrix::zeros(n + p, n + p);
        let mut gs = Vec::with_capacity(self.blocks.len());
        for (blk, s) in self.blocks.iter().zip(sc) {
            let scaled: Vec<(usize, DMatrix<f64>)> = blk
                .g
                .iter()
                .map(|(j, g)| (*j, &s.r_inv * g * s.r_inv.transpose()))
                .collect();
            for (a, (i, gi)) in scaled.iter().enumerate() {
                for (jj, gj) in scaled.iter().skip(a) {
                    let v = gi.dot(gj);
                    k[(*i, *jj)] += v;
                    if i != jj {
                        k[(*jj, *i)] += v;
                    }
                }
            }
            gs.push(scaled);
        }
        for r in 0..p {
            for c in 0..n {
                k[(n + r, c)] = self.a[(r, c)];
                k[(c, n + r)] = self.a[(r, c)];
            }
        }
        let lu = k.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Kkt { lu, n, gs })
    }

    /// Solve `A^T dy + G^T dz = r1`, `A dx = r2`, `G dx - W^T W dz = r3`.
    /// Returns `dz` both plain and scaled (`W dz`).
    fn kkt_solve(
        &self,
        kkt: &Kkt,
        sc: &[Scaling],
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &[DMatrix<f64>],
    ) -> (DVector<f64>, DVector<f64>, Vec<DMatrix<f64>>) {
        let n = kkt.n;
        let p = r2.len();
        // Scaled third block: W^{-T} G dx - W dz = W^{-T} r3.
        let r3s: Vec<DMatrix<f64>> =
            sc.iter().zip(r3).map(|(s, r)| &s.r_inv * r * s.r_inv.transpose()).collect();
        let mut dx = DVector::zeros(n);
        let mut dy = DVector::zeros(p);
        let mut e1 = r1 + kkt.gs_t(&r3s);
        let mut e2 = r2.clone();
        for _ in 0..2 {
            let mut rhs = DVector::zeros(n + p);
            rhs.rows_mut(0, n).copy_from(&e1);
            rhs.rows_mut(n, p).copy_from(&e2);
            let Some(sol) = kkt.lu.solve(&rhs) else { break };
            if !sol.iter().all(|v| v.is_finite()) {
                break;
            }
            dx += sol.rows(0, n);
            dy += sol.rows(n, p);
            // Residuals of the unreduced equations.
            let dzs: Vec<DMatrix<f64>> =
                kkt.gs_apply(&dx).iter().zip(&r3s).map(|(g, r)| g - r).collect();
            e1 = r1 - self.a.transpose() * &dy - kkt.gs_t(&dzs);
            e2 = r2 - &self.a * &dx;
        }
        let dz = kkt
            .gs_apply(&dx)
            .iter()
            .zip(&r3s)
            .zip(sc)
            .map(|((g, r), s)| s.r_inv.transpose() * (g - r) * &s.r_inv)
            .collect();
        (dx, dy, dz)
    }
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dtau: f64,
    dkappa: f64,
}

/// Replace `A x = b` by an equivalent full-row-rank system, or report that the
/// equalities are inconsistent.
fn reduce_equalities(lp: &ConeLp) -> Option<ConeLp> {
    let p = lp.a.nrows();
    let svd = lp.a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-10 * smax)
        .collect();
    let ub = u.transpose() * &lp.b;
    let bscale = lp.b.norm().max(1.0);
    for k in 0..p.min(u.ncols()) {
        if !keep.contains(&k) && ub[k].abs() > 1e-9 * bscale {
            return None;
        }
    }
    let mut reduced = lp.clone();
    reduced.a = DMatrix::from_fn(keep.len(), lp.a.ncols(), |r, c| {
        (0..p).map(|i| u[(i, keep[r])] * lp.a[(i, c)]).sum()
    });
    reduced.b = DVector::from_fn(keep.len(), |r, _| ub[keep[r]]);
    Some(reduced)
}

pub fn solve(lp: &ConeLp, settings: &Settings) -> LpResult {
    let n = lp.c.len();
    let p = lp.a.nrows();
    if p > 0 {
        let full_rank = lp.a.rank(1e-10 * lp.a.amax().max(f64::MIN_POSITIVE)) == p;
        if !full_rank {
            return match reduce_equalities(lp) {
                Some(r) => solve(&r, settings),
                None => LpResult {
                    status: LpStatus::PrimalInfeasible,
                    x: DVector::zeros(n),
                    iterations: 0,
                    pres: f64::INFINITY,
                    dres: 0.0,
                    gap: f64::INFINITY,
                },
            };
        }
    }
    let degree: usize = lp.blocks.iter().map(|b| b.size).sum::<usize>() + 1;
    let h = lp.hs();
    let resx0 = lp.c.norm().max(1.0);
    let resy0 = lp.b.norm().max(1.0);
    let resz0 = blocks_norm(&h).max(1.0);

    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(p);
    let mut s: Vec<DMatrix<f64>> = lp.blocks.iter().map(|b| DMatrix::identity(b.size, b.size)).collect();
    let mut z = s.clone();
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut best: Option<(f64, LpResult)> = None;
    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);

    for iter in 0..=settings.max_iter {
        let gx = lp.g_apply(&x);
        let gtz = lp.g_t(&z);
        let aty = lp.a.transpose() * &y;
        let rx = &aty + &gtz + &lp.c * tau;
        let ry = &lp.a * &x - &lp.b * tau;
        let rz: Vec<DMatrix<f64>> =
            s.iter().zip(&gx).zip(&h).map(|((si, gi), hi)| si + gi - hi * tau).collect();
        let cx = lp.c.dot(&x);
        let by = lp.b.dot(&y);
        let hz = blocks_dot(&h, &z);
        let rt = kappa + cx + by + hz;
        let gap = blocks_dot(&s, &z);

        let pcost = cx / tau;
        let dcost = -(by + hz) / tau;
        let pres = (ry.norm() / resy0).max(blocks_norm(&rz) / resz0) / tau;
        let dres = rx.norm() / resx0 / tau;
        let abs_gap = gap / (tau * tau);
        let relgap = if pcost < 0.0 {
            abs_gap / -pcost
        } else if dcost > 0.0 {
            abs_gap / dcost
        } else {
            f64::INFINITY
        };
        last = (pres, dres, abs_gap.min(relgap));
        let result = |status| LpResult {
            status,
            x: &x / tau,
            iterations: iter,
            pres,
            dres,
            gap: abs_gap.min(relgap),
        };
        if pres <= settings.feastol
            && dres <= settings.feastol
            && (abs_gap <= settings.abstol || relgap <= settings.reltol)
        {
            return result(LpStatus::Optimal);
        }
        let quality = pres.max(dres).max(abs_gap.min(relgap));
        if quality.is_finite() && best.as_ref().is_none_or(|(q, _)| quality < *q) {
            best = Some((quality, result(LpStatus::Optimal)));
        }
        if by + hz < 0.0 {
            let pinf = (&aty + &gtz).norm() / resx0 / -(by + hz);
            if pinf <= settings.feastol {
                return result(LpStatus::PrimalInfeasible);
            }
        }
        if cx < 0.0 {
            let ax = &lp.a * &x;
            let gxs: Vec<DMatrix<f64>> = gx.iter().zip(&s).map(|(g, si)| g + si).collect();
            let dinf = (ax.norm() / resy0).max(blocks_norm(&gxs) / resz0) / -cx;
            if dinf <= settings.feastol {
                return result(LpStatus::DualInfeasible);
            }
        }
        if iter == settings.max_iter {
            break;
        }

        let Some(sc) = s.iter().zip(&z).map(|(si, zi)| nt_scaling(si, zi)).collect::<Option<Vec<_>>>()
        else {
            break;
        };
        let Some(kkt) = lp.factor(&sc) else { break };
        let mu = (gap + tau * kappa) / degree as f64;

        // Direction multiplying dtau.
        let neg_c = -&lp.c;
        let (dx1, dy1, dz1) = lp.kkt_solve(&kkt, &sc, &neg_c, &lp.b, &h);
        let denom_base = -kappa / tau + lp.c.dot(&dx1) + lp.b.dot(&dy1) + blocks_dot(&h, &dz1);

        let direction = |eta: f64, ds_target: &[DMatrix<f64>], dk_target: f64| -> Direction {
            let ld: Vec<DMatrix<f64>> =
                sc.iter().zip(ds_target).map(|(s, d)| jordan_div(&s.lambda, d)).collect();
            let r1 = &rx * -eta;
            let r2 = &ry * -eta;
            let r3: Vec<DMatrix<f64>> = rz
                .iter()
                .zip(sc.iter().zip(&ld))
                .map(|(r, (s, l))| -(r * eta) - &s.r * l * s.r.transpose())
                .collect();
            let (dx2, dy2, dz2) = lp.kkt_solve(&kkt, &sc, &r1, &r2, &r3);
            let num = -eta * rt - dk_target / tau
                - lp.c.dot(&dx2)
                - lp.b.dot(&dy2)
                - blocks_dot(&h, &dz2);
            let dtau = num / denom_base;
            let dx = dx2 + &dx1 * dtau;
            let dy = dy2 + &dy1 * dtau;
            let dz: Vec<DMatrix<f64>> = dz2.iter().zip(&dz1).map(|(a, b)| a + b * dtau).collect();
            // ds from the linearized primal equation, which keeps the primal
            // residual reduction exact even when W is badly conditioned.
            let gdx = lp.g_apply(&dx);
            let ds = rz
                .iter()
                .zip(gdx.iter().zip(&h))
                .map(|(r, (g, hi))| sym(-(r * eta) - g + hi * dtau))
                .collect();
            let dkappa = (dk_target - kappa * dtau) / tau;
            Direction { dx, dy, dz, ds, dtau, dkappa }
        };

        let step_len = |d: &Direction| -> f64 {
            let mut t = f64::INFINITY;
            for (sc_i, (dsi, dzi)) in sc.iter().zip(d.ds.iter().zip(&d.dz)) {
                let ds_t = &sc_i.r_inv * dsi * sc_i.r_inv.transpose();
                let dz_t = sc_i.r.transpose() * dzi * &sc_i.r;
                t = t.min(max_step(&sc_i.lambda, &ds_t)).min(max_step(&sc_i.lambda, &dz_t));
            }
            if d.dtau < 0.0 {
                t = t.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                t = t.min(-kappa / d.dkappa);
            }
            t
        };

        // Predictor.
        let aff_target: Vec<DMatrix<f64>> =
            sc.iter().map(|s| DMatrix::from_diagonal(&s.lambda.map(|l| -l * l))).collect();
        let aff = direction(1.0, &aff_target, -tau * kappa);
        let t_aff = step_len(&aff).min(1.0);
        let sigma = (1.0 - t_aff).powi(3);

        // Corrector.
        let target: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(aff.ds.iter().zip(&aff.dz))
            .map(|(s, (dsi, dzi))| {
                let ds_t = &s.r_inv * dsi * s.r_inv.transpose();
                let dz_t = s.r.transpose() * dzi * &s.r;
                let mut t = -jordan_prod(&ds_t, &dz_t);
                for i in 0..s.lambda.len() {
                    t[(i, i)] += sigma * mu - s.lambda[i] * s.lambda[i];
                }
                t
            })
            .collect();
        let dk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        let dir = direction(1.0 - sigma, &target, dk);
        let t = (0.99 * step_len(&dir)).min(1.0);
        if !(t > 1e-14) || !dir.dtau.is_finite() {
            break;
        }

        x += &dir.dx * t;
        y += &dir.dy * t;
        for (si, dsi) in s.iter_mut().zip(&dir.ds) {
            *si = sym(&*si + dsi * t);
        }
        for (zi, dzi) in z.iter_mut().zip(&dir.dz) {
            *zi = sym(&*zi + dzi * t);
        }
        tau += dir.dtau * t;
        kappa += dir.dkappa * t;
    }

    // Stalled or out of iterations: accept only a point meeting the looser
    // reporting tolerance.
    match best {
        Some((q, mut r)) if q <= 1e-6 => {
            r.status = LpStatus::Optimal;
            r
        }
        _ => LpResult {
            status: LpStatus::Failure,
            x: DVector::zeros(n),
            iterations: settings.max_iter,
            pres: last.0,
            dres: last.1,
            gap: last.2,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_block(h: f64, terms: &[(usize, f64)]) -> Block {
        let mut b = Block::new(1);
        b.h[(0, 0)] = h;
        for &(v, c) in terms {
            b.add(v, DMatrix::from_element(1, 1, c));
        }
        b
    }

    #[test]
    fn small_lp() {
        // min -x0 - x1  s.t. x0 + 2 x1 <= 4, 3 x0 + x1 <= 6, x >= 0  -> (1.6, 1.2)
        let lp = ConeLp {
            c: DVector::from_vec(vec![-1.0, -1.0]),
            a: DMatrix::zeros(0, 2),
            b: DVector::zeros(0),
            blocks: vec![
                scalar_block(4.0, &[(0, 1.0), (1, 2.0)]),
                scalar_block(6.0, &[(0, 3.0), (1, 1.0)]),
                scalar_block(0.0, &[(0, -1.0)]),
                scalar_block(0.0, &[(1, -1.0)]),
            ],
        };
        let r = solve(&lp, &Settings::default());
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 1.6).abs() < 1e-7 && (r.x[1] - 1.2).abs() < 1e-7, "{:?}", r.x);
    }

    #[test]
    fn infeasible_and_unbounded_lp() {
        // x >= 1 and x <= 0
        let lp = ConeLp {
            c: DVector::from_vec(vec![1.0]),
            a: DMatrix::zeros(0, 1),
            b: DVector::zeros(0),
            blocks: vec![scalar_block(-1.0, &[(0, -1.0)]), scalar_block(0.0, &[(0, 1.0)])],
        };
        assert_eq!(solve(&lp, &Settings::default()).status, LpStatus::PrimalInfeasible);
        // min -x, x >= 0
        let lp = ConeLp {
            c: DVector::from_vec(vec![-1.0]),
            a: DMatrix::zeros(0, 1),
            b: DVector::zeros(0),
            blocks: vec![scalar_block(0.0, &[(0, -1.0)])],
        };
        assert_eq!(solve(&lp, &Settings::default()).status, LpStatus::DualInfeasible);
    }

    #[test]
    fn two_by_two_sdp() {
        // max x s.t. [[1, x], [x, 1]] >= 0  -> x = 1
        let mut b = Block::new(2);
        b.h = DMatrix::identity(2, 2);
        b.add(0, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        let lp = ConeLp {
            c: DVector::from_vec(vec![-1.0]),
            a: DMatrix::zeros(0, 1),
            b: DVector::zeros(0),
            blocks: vec![b],
        };
        let r = solve(&lp, &Settings::default());
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-7);
    }
}
