//! Hermitian semidefinite programs over a single matrix variable `V`, with
//! trace equalities and inequalities and an optional determinant-root
//! constraint `det(M(V))^(1/m) >= c s(V)`.
//!
//! Problems are lowered to a real conic program and solved by the
//! interior-point method in [`ipm`]. The complex variable is handled through
//! its real symmetric embedding; the determinant root is represented with a
//! lower-triangular factor and a tower of 2x2 geometric-mean cones.
//!
//! The solver works in absolute tolerances after normalizing every constraint
//! row, so callers should scale the variable itself to order one (for
//! instance by dividing a power budget out of `V`).

pub mod ipm;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::linalg::{hermitian_eigen, real_embedding, fro_norm, trace_prod};
use crate::model::cscg;
use crate::{CMatrix, CVector, Error, Result, C64};
use ipm::{Block, ConeLp, LpStatus, Settings};

/// Rank ratio at or below which the principal eigenvector is used directly.
pub const RANK_ONE_TOL: f64 = 1e-6;
/// Gaussian randomization draws used when the lifted solution is not rank one.
pub const RANDOMIZATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// `det(M(V))^(1/m) >= c s(V)` with `M` affine Hermitian `m x m` and
/// `s(V) = s0 + tr(V S)`.
#[derive(Debug, Clone)]
pub struct DetRootConstraint {
    pub m_const: CMatrix,
    /// Image under the linear part of `M` of each Hermitian basis element.
    pub m_lin: Vec<CMatrix>,
    pub s_const: f64,
    pub s_mat: CMatrix,
    pub c: f64,
}

impl DetRootConstraint {
    /// Build from the linear part of `M` given as a closure on `dim x dim`
    /// Hermitian matrices.
    pub fn new(
        dim: usize,
        m_const: CMatrix,
        m_linear: impl Fn(&CMatrix) -> CMatrix,
        s_const: f64,
        s_mat: CMatrix,
        c: f64,
    ) -> Self {
        let m_lin = hermitian_basis(dim).iter().map(&m_linear).collect();
        DetRootConstraint { m_const, m_lin, s_const, s_mat, c }
    }

    pub fn order(&self) -> usize {
        self.m_const.nrows()
    }

    pub fn m_at(&self, v: &CMatrix) -> CMatrix {
        let x = hermitian_coords(v);
        let mut m = self.m_const.clone();
        for (xk, mk) in x.iter().zip(&self.m_lin) {
            m += mk * C64::from(*xk);
        }
        m
    }

    pub fn s_at(&self, v: &CMatrix) -> f64 {
        self.s_const + trace_prod(v, &self.s_mat)
    }

    /// `det(M(V))^(1/m) - c s(V)`; negative when violated.
    pub fn slack(&self, v: &CMatrix) -> f64 {
        det_root(&self.m_at(v)) - self.c * self.s_at(v)
    }
}

/// `det(M)^(1/m)` of a Hermitian matrix, `0` if it is not positive definite.
pub fn det_root(m: &CMatrix) -> f64 {
    let eig = hermitian_eigen(m);
    if eig.values.iter().any(|&l| l <= 0.0) {
        return 0.0;
    }
    let n = eig.values.len() as f64;
    (eig.values.iter().map(|l| l.ln()).sum::<f64>() / n).exp()
}

#[derive(Debug, Clone)]
pub struct HermitianSdp {
    pub dim: usize,
    pub objective: CMatrix,
    pub sense: Sense,
    /// `tr(V A_k) = b_k`.
    pub eq_constraints: Vec<(CMatrix, f64)>,
    /// `tr(V A_k) <= b_k`.
    pub ineq_constraints: Vec<(CMatrix, f64)>,
    pub detroot_constraint: Option<DetRootConstraint>,
}

impl HermitianSdp {
    pub fn new(objective: CMatrix, sense: Sense) -> Self {
        HermitianSdp {
            dim: objective.nrows(),
            objective,
            sense,
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
            detroot_constraint: None,
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::Dimension("SDP dimension must be at least 1".into()));
        }
        let mats = std::iter::once(&self.objective)
            .chain(self.eq_constraints.iter().map(|(a, _)| a))
            .chain(self.ineq_constraints.iter().map(|(a, _)| a))
            .chain(self.detroot_constraint.iter().map(|d| &d.s_mat));
        for a in mats {
            if a.shape() != (n, n) {
                return Err(Error::Dimension(format!("expected {n}x{n} matrix, got {:?}", a.shape())));
            }
            if crate::linalg::hermitian_asymmetry(a) > 1e-12 * fro_norm(a).max(1.0) {
                return Err(Error::InvalidArgument("constraint matrix is not Hermitian".into()));
            }
        }
        if let Some(d) = &self.detroot_constraint {
            let m = d.order();
            if m == 0 || d.m_const.ncols() != m || d.m_lin.len() != n * n {
                return Err(Error::Dimension("malformed determinant-root constraint".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub v: CMatrix,
    pub objective_value: f64,
    pub status: SdpStatus,
    pub max_constraint_violation: f64,
    pub iterations: usize,
}

/// Hermitian basis: `E_ii`, then for `i < j` the pair `E_ij + E_ji`,
/// `i (E_ij - E_ji)`.
pub fn hermitian_basis(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut e = CMatrix::zeros(n, n);
        e[(i, i)] = C64::new(1.0, 0.0);
        out.push(e);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut re = CMatrix::zeros(n, n);
            re[(i, j)] = C64::new(1.0, 0.0);
            re[(j, i)] = C64::new(1.0, 0.0);
            out.push(re);
            let mut im = CMatrix::zeros(n, n);
            im[(i, j)] = C64::new(0.0, 1.0);
            im[(j, i)] = C64::new(0.0, -1.0);
            out.push(im);
        }
    }
    out
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn hermitian_coords(v: &CMatrix) -> Vec<f64> {
    let n = v.nrows();
    let mut x = Vec::with_capacity(n * n);
    for i in 0..n {
        x.push(v[(i, i)].re);
    }
    for i in 0..n {
        for j in i + 1..n {
            let z = 0.5 * (v[(i, j)] + v[(j, i)].conj());
            x.push(z.re);
            x.push(z.im);
        }
    }
    x
}

fn from_coords(n: usize, x: &[f64]) -> CMatrix {
    let mut v = CMatrix::zeros(n, n);
    for i in 0..n {
        v[(i, i)] = C64::new(x[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = C64::new(x[k], x[k + 1]);
            v[(i, j)] = z;
            v[(j, i)] = z.conj();
            k += 2;
        }
    }
    v
}

/// Scalar affine expression `constant + sum coef * x_var`.
#[derive(Debug, Clone, Default)]
struct Affine {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl Affine {
    fn var(v: usize) -> Self {
        Affine { constant: 0.0, terms: vec![(v, 1.0)] }
    }
}

/// Block `[[l, t], [t, r]] >= 0` with `t` a plain variable.
fn geomean_block(l: &Affine, r: &Affine, t: usize) -> Block {
    let mut b = Block::new(2);
    b.h[(0, 0)] = l.constant;
    b.h[(1, 1)] = r.constant;
    for &(v, c) in &l.terms {
        b.add(v, DMatrix::from_row_slice(2, 2, &[-c, 0.0, 0.0, 0.0]));
    }
    for &(v, c) in &r.terms {
        b.add(v, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -c]));
    }
    b.add(t, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
    b
}

fn scalar_block(a: &Affine) -> Block {
    let mut b = Block::new(1);
    b.h[(0, 0)] = a.constant;
    for &(v, c) in &a.terms {
        b.add(v, DMatrix::from_element(1, 1, -c));
    }
    b
}

/// Lower the Hermitian problem to a real cone program. Returns the program and
/// the objective scale.
fn lower(p: &HermitianSdp) -> Result<Option<ConeLp>> {
    let n = p.dim;
    let basis = hermitian_basis(n);
    let nv = basis.len();

    let det = p.detroot_constraint.as_ref();
    let m = det.map_or(0, |d| d.order());
    let leaves_pow = if m > 0 { m.next_power_of_two() } else { 0 };
    let n_delta = m * m;
    let n_nodes = if m > 1 { leaves_pow - 1 } else { 0 };
    let total = nv + n_delta + n_nodes;

    // Objective, minimized.
    let obj_scale = fro_norm(&p.objective).max(1e-300);
    let sign = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut c = DVector::zeros(total);
    for (k, bk) in basis.iter().enumerate() {
        c[k] = sign * trace_prod(bk, &p.objective) / obj_scale;
    }

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (a, b) in &p.eq_constraints {
        let norm = fro_norm(a);
        if norm == 0.0 {
            if b.abs() > 0.0 {
                return Ok(None);
            }
            continue;
        }
        let coeffs = basis.iter().map(|bk| trace_prod(bk, a) / norm).collect();
        rows.push((coeffs, b / norm));
    }
    let mut a_mat = DMatrix::zeros(rows.len(), total);
    let mut b_vec = DVector::zeros(rows.len());
    for (r, (coeffs, b)) in rows.iter().enumerate() {
        for (k, v) in coeffs.iter().enumerate() {
            a_mat[(r, k)] = *v;
        }
        b_vec[r] = *b;
    }

    let mut blocks = Vec::new();
    let mut vb = Block::new(2 * n);
    for (k, bk) in basis.iter().enumerate() {
        vb.add(k, -real_embedding(bk));
    }
    blocks.push(vb);

    for (a, b) in &p.ineq_constraints {
        let norm = fro_norm(a);
        if norm == 0.0 {
            if *b < 0.0 {
                return Ok(None);
            }
            continue;
        }
        let terms = basis.iter().enumerate().map(|(k, bk)| (k, -trace_prod(bk, a) / norm)).collect();
        blocks.push(scalar_block(&Affine { constant: b / norm, terms }));
    }

    if let Some(d) = det {
        let scale = d
            .m_lin
            .iter()
            .map(fro_norm)
            .fold(fro_norm(&d.m_const), f64::max)
            .max(1e-300);
        // [[M(V), Delta], [Delta^H, diag(Delta)]] >= 0, embedded.
        let big = 2 * m;
        let embed = |y: &CMatrix| real_embedding(y);
        let mut yb = Block::new(2 * big);
        let mut y0 = CMatrix::zeros(big, big);
        y0.view_mut((0, 0), (m, m)).copy_from(&(&d.m_const / C64::from(scale)));
        yb.h = embed(&y0);
        for (k, mk) in d.m_lin.iter().enumerate() {
            if fro_norm(mk) == 0.0 {
                continue;
            }
            let mut y = CMatrix::zeros(big, big);
            y.view_mut((0, 0), (m, m)).copy_from(&(mk / C64::from(scale)));
            yb.add(k, -embed(&y));
        }
        // Delta coordinates: diagonal first, then strictly-lower (re, im).
        let mut idx = nv;
        let mut diag_vars = Vec::with_capacity(m);
        for i in 0..m {
            let mut y = CMatrix::zeros(big, big);
            y[(i, m + i)] = C64::new(1.0, 0.0);
            y[(m + i, i)] = C64::new(1.0, 0.0);
            y[(m + i, m + i)] = C64::new(1.0, 0.0);
            yb.add(idx, -embed(&y));
            diag_vars.push(idx);
            idx += 1;
        }
        for i in 0..m {
            for j in 0..i {
                for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                    let mut y = CMatrix::zeros(big, big);
                    y[(i, m + j)] = unit;
                    y[(m + j, i)] = unit.conj();
                    yb.add(idx, -embed(&y));
                    idx += 1;
                }
            }
        }
        blocks.push(yb);

        // c s(V) / scale as an affine expression.
        let mut cs = Affine { constant: d.c * d.s_const / scale, terms: Vec::new() };
        for (k, bk) in basis.iter().enumerate() {
            let v = d.c * trace_prod(bk, &d.s_mat) / scale;
            if v != 0.0 {
                cs.terms.push((k, v));
            }
        }
        let mut level: Vec<Affine> = diag_vars.iter().map(|&v| Affine::var(v)).collect();
        if m > 1 {
            level.resize(leaves_pow, cs.clone());
        }
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len() / 2);
            for pair in level.chunks(2) {
                blocks.push(geomean_block(&pair[0], &pair[1], idx));
                next.push(Affine::var(idx));
                idx += 1;
            }
            level = next;
        }
        let mut root = level.pop().expect("tower has a root");
        root.constant -= cs.constant;
        for &(v, coef) in &cs.terms {
            root.terms.push((v, -coef));
        }
        blocks.push(scalar_block(&root));
        debug_assert_eq!(idx, total);
    }

    Ok(Some(ConeLp { c, a: a_mat, b: b_vec, blocks }))
}

fn violation(p: &HermitianSdp, v: &CMatrix) -> f64 {
    let vn = fro_norm(v);
    let mut worst: f64 = 0.0;
    for (a, b) in &p.eq_constraints {
        let scale = b.abs().max(fro_norm(a) * vn).max(1e-300);
        worst = worst.max((trace_prod(v, a) - b).abs() / scale);
    }
    for (a, b) in &p.ineq_constraints {
        let scale = b.abs().max(fro_norm(a) * vn).max(1e-300);
        worst = worst.max((trace_prod(v, a) - b).max(0.0) / scale);
    }
    if let Some(d) = &p.detroot_constraint {
        let rhs = d.c * d.s_at(v);
        let scale = rhs.abs().max(1e-300);
        worst = worst.max((-d.slack(v)).max(0.0) / scale);
    }
    worst
}

/// Solve a Hermitian SDP. Deterministic given the problem.
pub fn solve(problem: &HermitianSdp) -> Result<SdpSolution> {
    problem.check()?;
    let n = problem.dim;
    let infeasible = |iterations| SdpSolution {
        v: CMatrix::zeros(n, n),
        objective_value: f64::NAN,
        status: SdpStatus::Infeasible,
        max_constraint_violation: f64::INFINITY,
        iterations,
    };
    let Some(lp) = lower(problem)? else {
        return Ok(infeasible(0));
    };
    let res = ipm::solve(&lp, &Settings::default());
    let status = match res.status {
        LpStatus::Optimal => SdpStatus::Optimal,
        LpStatus::PrimalInfeasible => return Ok(infeasible(res.iterations)),
        LpStatus::DualInfeasible => SdpStatus::Unbounded,
        LpStatus::Failure => SdpStatus::NumericalFailure,
    };
    let v = from_coords(n, &res.x.as_slice()[..n * n]);
    let objective_value = trace_prod(&v, &problem.objective);
    let max_constraint_violation = violation(problem, &v);
    Ok(SdpSolution { v, objective_value, status, max_constraint_violation, iterations: res.iterations })
}

/// Recover a beamformer from a lifted solution. Returns `(w, lambda_2 / lambda_1)`.
///
/// A numerically rank-one `v` yields `sqrt(budget)` times its principal
/// eigenvector. Otherwise the principal eigenvector and
/// [`RANDOMIZATION_SAMPLES`] Gaussian draws with covariance `v`, each rescaled
/// to the budget, are ranked by `scorer` (`None` marks an infeasible
/// candidate); if nothing scores, the principal direction is returned.
pub fn extract_rank_one<R: Rng + ?Sized>(
    v: &CMatrix,
    budget: f64,
    scorer: impl Fn(&CVector) -> Option<f64>,
    rng: &mut R,
) -> Result<(CVector, f64)> {
    let eig = hermitian_eigen(v);
    let l1 = eig.values[0];
    if !(l1 > 0.0) {
        return Err(Error::InvalidArgument("cannot extract a beamformer from a zero matrix".into()));
    }
    let ratio = eig.values.get(1).map_or(0.0, |l2| (l2 / l1).clamp(0.0, 1.0));
    let principal: CVector = eig.vectors.column(0).into_owned() * C64::from(budget.sqrt());
    if ratio <= RANK_ONE_TOL {
        return Ok((principal, ratio));
    }
    let n = v.nrows();
    let root = {
        let mut r = eig.vectors.clone();
        for (k, &l) in eig.values.iter().enumerate() {
            let s = l.max(0.0).sqrt();
            r.column_mut(k).scale_mut(s);
        }
        r
    };
    let mut best = scorer(&principal).map(|s| (s, principal.clone()));
    for _ in 0..RANDOMIZATION_SAMPLES {
        let g = CVector::from_fn(n, |_, _| cscg(rng, 1.0));
        let xi = &root * g;
        let norm = xi.norm();
        if norm == 0.0 {
            continue;
        }
        let w = xi * C64::from(budget.sqrt() / norm);
        if let Some(score) = scorer(&w) {
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, w));
            }
        }
    }
    Ok((best.map_or(principal, |(_, w)| w), ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::outer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| cscg(rng, 1.0));
        crate::linalg::hermitian_part(&a)
    }

    #[test]
    fn basis_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_hermitian(&mut rng, 4);
        let back = from_coords(4, &hermitian_coords(&v));
        assert!(fro_norm(&(back - &v)) < 1e-14);
    }

    #[test]
    fn trace_eigen_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_hermitian(&mut rng, 4);
        let mut p = HermitianSdp::new(c.clone(), Sense::Maximize);
        p.eq_constraints.push((CMatrix::identity(4, 4), 1.0));
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let top = hermitian_eigen(&c).values[0];
        assert!((sol.objective_value - top).abs() < 1e-7, "{} vs {}", sol.objective_value, top);
        let (_, ratio) = extract_rank_one(&sol.v, 1.0, |_| Some(0.0), &mut rng).unwrap();
        assert!(ratio < 1e-6);
    }

    #[test]
    fn contradictory_traces_are_infeasible() {
        let mut p = HermitianSdp::new(CMatrix::identity(2, 2), Sense::Maximize);
        p.eq_constraints.push((CMatrix::identity(2, 2), 1.0));
        p.eq_constraints.push((CMatrix::identity(2, 2) * C64::from(2.0), 4.0));
        assert_eq!(solve(&p).unwrap().status, SdpStatus::Infeasible);
    }

    #[test]
    fn detroot_only_vacuous_at_identity_scaling() {
        // max tr(V C) s.t. det(I * (1 + tr V))^(1/2) >= (1 + tr V), tr V <= 1.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = {
            let a = random_hermitian(&mut rng, 3);
            &a * &a
        };
        let mut p = HermitianSdp::new(c.clone(), Sense::Maximize);
        p.ineq_constraints.push((CMatrix::identity(3, 3), 1.0));
        p.detroot_constraint = Some(DetRootConstraint::new(
            3,
            CMatrix::identity(2, 2),
            |v| CMatrix::identity(2, 2) * v.trace(),
            1.0,
            CMatrix::identity(3, 3),
            1.0,
        ));
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let top = hermitian_eigen(&c).values[0];
        assert!((sol.objective_value - top).abs() < 1e-6 * top);
        assert!(p.detroot_constraint.as_ref().unwrap().slack(&sol.v) > -1e-6);
    }

    #[test]
    fn detroot_binding() {
        // max tr V_11 subject to det(diag(2 - v11, 1 + v22))^(1/2) >= 1, tr V <= 1.
        let mut p = HermitianSdp::new(
            CMatrix::from_diagonal(&CVector::from_vec(vec![C64::from(1.0), C64::from(0.0)])),
            Sense::Maximize,
        );
        p.ineq_constraints.push((CMatrix::identity(2, 2), 1.0));
        p.detroot_constraint = Some(DetRootConstraint::new(
            2,
            CMatrix::from_diagonal(&CVector::from_vec(vec![C64::from(2.0), C64::from(1.0)])),
            |v| {
                CMatrix::from_diagonal(&CVector::from_vec(vec![-v[(0, 0)], v[(1, 1)]]))
            },
            1.0,
            CMatrix::zeros(2, 2),
            1.0,
        ));
        // (2 - a)(1 + b) >= 1 with a + b <= 1: b = 1 - a, (2 - a)^2 >= 1 -> a <= 1.
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-6, "{}", sol.objective_value);

        // Tighter: need (2 - a)(1 + b) >= 2.25 -> with b = 1 - a, a <= 0.5.
        p.detroot_constraint.as_mut().unwrap().c = 1.5;
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective_value - 0.5).abs() < 1e-6, "{}", sol.objective_value);
    }

    #[test]
    fn rank_one_extraction_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = CVector::from_fn(3, |_, _| cscg(&mut rng, 1.0)).normalize();
        let v = outer(&u) * C64::from(2.0);
        let (w, ratio) = extract_rank_one(&v, 2.0, |_| None, &mut rng).unwrap();
        assert!(ratio < 1e-12);
        assert!((w.dotc(&u).norm() - 2f64.sqrt()).abs() < 1e-10);

        let noisy = &v + CMatrix::identity(3, 3) * C64::from(1e-9);
        let (_, ratio) = extract_rank_one(&noisy, 2.0, |_| None, &mut rng).unwrap();
        assert!(ratio <= 1e-6);

        let mixed = CMatrix::identity(2, 2) * C64::from(0.5);
        let target = CVector::from_vec(vec![C64::from(1.0), C64::new(0.0, 1.0)]).normalize();
        let (w, ratio) =
            extract_rank_one(&mixed, 1.0, |w| Some(w.dotc(&target).norm_sqr()), &mut rng).unwrap();
        assert_eq!(ratio, 1.0);
        assert!((w.norm_squared() - 1.0).abs() < 1e-12);
        assert!(w.dotc(&target).norm_sqr() > 0.95);

        assert!(extract_rank_one(&CMatrix::zeros(2, 2), 1.0, |_| None, &mut rng).is_err());
    }
}
