//! Game instances, joint policies, value matrices and the matrix-equation
//! primitives every solver is built on.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{LqdgError, Result};
use crate::linalg::{self, SYM_TOL};

/// An N-player deterministic linear-quadratic game
/// `x⁺ = A x + Σ B^i u^i`, player `i` paying `Σ xᵀQ^i x + (u^i)ᵀR^i u^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    a: DMatrix<f64>,
    b: Vec<DMatrix<f64>>,
    q: Vec<DMatrix<f64>>,
    r: Vec<DMatrix<f64>>,
    x0: DMatrix<f64>,
}

impl GameInstance {
    /// Validates dimensions, symmetry and definiteness, then builds the
    /// instance. `x0` defaults to the identity.
    pub fn new(
        a: DMatrix<f64>,
        b: Vec<DMatrix<f64>>,
        q: Vec<DMatrix<f64>>,
        r: Vec<DMatrix<f64>>,
        x0: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(LqdgError::Dimension(format!(
                "A must be a non-empty square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let players = b.len();
        if players == 0 {
            return Err(LqdgError::InvalidInstance("at least one player required".into()));
        }
        if q.len() != players || r.len() != players {
            return Err(LqdgError::Dimension(format!(
                "{} input matrices but {} state costs and {} control costs",
                players,
                q.len(),
                r.len()
            )));
        }
        let x0 = x0.unwrap_or_else(|| DMatrix::identity(n, n));
        for (i, ((bi, qi), ri)) in b.iter().zip(&q).zip(&r).enumerate() {
            let mi = bi.ncols();
            if bi.nrows() != n || mi == 0 {
                return Err(LqdgError::Dimension(format!(
                    "B[{i}] is {}x{}, expected {n}xm with m > 0",
                    bi.nrows(),
                    mi
                )));
            }
            if qi.shape() != (n, n) {
                return Err(LqdgError::Dimension(format!("Q[{i}] must be {n}x{n}")));
            }
            if ri.shape() != (mi, mi) {
                return Err(LqdgError::Dimension(format!("R[{i}] must be {mi}x{mi}")));
            }
            if !linalg::is_psd(qi, SYM_TOL) {
                return Err(LqdgError::InvalidInstance(format!(
                    "Q[{i}] must be symmetric positive semidefinite"
                )));
            }
            if !linalg::is_symmetric(ri, SYM_TOL) || linalg::symmetrize(ri).cholesky().is_none() {
                return Err(LqdgError::InvalidInstance(format!(
                    "R[{i}] must be symmetric positive definite"
                )));
            }
        }
        if x0.shape() != (n, n) {
            return Err(LqdgError::Dimension(format!("X0 must be {n}x{n}")));
        }
        if !linalg::is_psd(&x0, SYM_TOL) {
            return Err(LqdgError::InvalidInstance(
                "X0 must be symmetric positive semidefinite".into(),
            ));
        }
        let all = std::iter::once(&a).chain(&b).chain(&q).chain(&r).chain(std::iter::once(&x0));
        if !all.into_iter().all(linalg::all_finite) {
            return Err(LqdgError::InvalidInstance("non-finite entries".into()));
        }
        Ok(Self { a, b, q, r, x0 })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn players(&self) -> usize {
        self.b.len()
    }

    /// Control dimension of each player.
    pub fn m(&self) -> Vec<usize> {
        self.b.iter().map(|b| b.ncols()).collect()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self, i: usize) -> &DMatrix<f64> {
        &self.b[i]
    }

    pub fn q(&self, i: usize) -> &DMatrix<f64> {
        &self.q[i]
    }

    pub fn r(&self, i: usize) -> &DMatrix<f64> {
        &self.r[i]
    }

    pub fn x0(&self) -> &DMatrix<f64> {
        &self.x0
    }

    pub fn with_x0(mut self, x0: DMatrix<f64>) -> Result<Self> {
        self.x0 = x0;
        Self::new(self.a, self.b, self.q, self.r, Some(self.x0))
    }

    /// The same game with players relabeled so that new player `k` is old
    /// player `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.players())?;
        Self::new(
            self.a.clone(),
            perm.iter().map(|&p| self.b[p].clone()).collect(),
            perm.iter().map(|&p| self.q[p].clone()).collect(),
            perm.iter().map(|&p| self.r[p].clone()).collect(),
            Some(self.x0.clone()),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceDoc::from(self))?)
    }

    /// JSON form with an extra `"meta"` object (used for generated instances).
    pub fn to_json_with_meta(&self, meta: serde_json::Value) -> Result<String> {
        let mut doc = InstanceDoc::from(self);
        doc.meta = Some(meta);
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

fn check_permutation(perm: &[usize], len: usize) -> Result<()> {
    let mut seen = vec![false; len];
    if perm.len() != len {
        return Err(LqdgError::InvalidArgument("permutation length mismatch".into()));
    }
    for &p in perm {
        if p >= len || std::mem::replace(&mut seen[p], true) {
            return Err(LqdgError::InvalidArgument("not a permutation".into()));
        }
    }
    Ok(())
}

type Rows = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    n: usize,
    #[serde(rename = "N")]
    players: usize,
    m: Vec<usize>,
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "B")]
    b: Vec<Rows>,
    #[serde(rename = "Q")]
    q: Vec<Rows>,
    #[serde(rename = "R")]
    r: Vec<Rows>,
    #[serde(rename = "X0", default, skip_serializing_if = "Option::is_none")]
    x0: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

impl From<&GameInstance> for InstanceDoc {
    fn from(g: &GameInstance) -> Self {
        Self {
            n: g.n(),
            players: g.players(),
            m: g.m(),
            a: linalg::to_rows(&g.a),
            b: g.b.iter().map(linalg::to_rows).collect(),
            q: g.q.iter().map(linalg::to_rows).collect(),
            r: g.r.iter().map(linalg::to_rows).collect(),
            x0: Some(linalg::to_rows(&g.x0)),
            meta: None,
        }
    }
}

fn shaped(rows: &Rows, nr: usize, nc: usize, what: &str) -> Result<DMatrix<f64>> {
    let m = linalg::from_rows(rows)?;
    if m.shape() != (nr, nc) {
        return Err(LqdgError::Dimension(format!(
            "{what} is {}x{}, expected {nr}x{nc}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

impl TryFrom<InstanceDoc> for GameInstance {
    type Error = LqdgError;

    fn try_from(d: InstanceDoc) -> Result<Self> {
        let n = d.n;
        if d.m.len() != d.players || d.b.len() != d.players {
            return Err(LqdgError::Dimension(format!(
                "N = {} but m has {} entries and B has {}",
                d.players,
                d.m.len(),
                d.b.len()
            )));
        }
        let a = shaped(&d.a, n, n, "A")?;
        let mut b = Vec::new();
        let mut q = Vec::new();
        let mut r = Vec::new();
        for i in 0..d.players {
            let mi = d.m[i];
            b.push(shaped(&d.b[i], n, mi, &format!("B[{i}]"))?);
            q.push(shaped(d.q.get(i).ok_or_else(|| missing("Q", i))?, n, n, &format!("Q[{i}]"))?);
            r.push(shaped(d.r.get(i).ok_or_else(|| missing("R", i))?, mi, mi, &format!("R[{i}]"))?);
        }
        let x0 = d.x0.as_ref().map(|x| shaped(x, n, n, "X0")).transpose()?;
        GameInstance::new(a, b, q, r, x0)
    }
}

fn missing(what: &str, i: usize) -> LqdgError {
    LqdgError::Dimension(format!("missing {what}[{i}]"))
}

/// One feedback gain per player, `u^i = K^i x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySet {
    k: Vec<DMatrix<f64>>,
}

impl PolicySet {
    pub fn new(k: Vec<DMatrix<f64>>) -> Result<Self> {
        if k.iter().any(|g| !linalg::all_finite(g)) {
            return Err(LqdgError::InvalidArgument("policy gains must be finite".into()));
        }
        Ok(Self { k })
    }

    /// Builds gains from row-major slices, one per player.
    pub fn from_gains(inst: &GameInstance, gains: &[&[f64]]) -> Result<Self> {
        if gains.len() != inst.players() {
            return Err(LqdgError::Dimension("one gain per player required".into()));
        }
        let n = inst.n();
        let k = gains
            .iter()
            .zip(inst.m())
            .map(|(g, mi)| {
                if g.len() != mi * n {
                    Err(LqdgError::Dimension(format!("gain needs {} entries", mi * n)))
                } else {
                    Ok(DMatrix::from_row_slice(mi, n, g))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(k)
    }

    pub(crate) fn from_unchecked(k: Vec<DMatrix<f64>>) -> Self {
        Self { k }
    }

    pub fn gains(&self) -> &[DMatrix<f64>] {
        &self.k
    }

    pub fn gain(&self, i: usize) -> &DMatrix<f64> {
        &self.k[i]
    }

    pub fn players(&self) -> usize {
        self.k.len()
    }

    pub fn is_finite(&self) -> bool {
        self.k.iter().all(linalg::all_finite)
    }

    /// Σ_i ‖K^i − L^i‖_F.
    pub fn distance(&self, other: &PolicySet) -> f64 {
        self.k.iter().zip(&other.k).map(|(a, b)| (a - b).norm()).sum()
    }

    pub fn max_gain_norm(&self) -> f64 {
        self.k.iter().map(|g| g.norm()).fold(0.0, f64::max)
    }

    /// All gain entries, player by player, each in row-major order.
    pub fn flat_entries(&self) -> Vec<f64> {
        self.k
            .iter()
            .flat_map(|g| g.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))
            .collect()
    }

    pub fn check_dims(&self, inst: &GameInstance) -> Result<()> {
        if self.k.len() != inst.players() {
            return Err(LqdgError::Dimension(format!(
                "policy has {} gains for {} players",
                self.k.len(),
                inst.players()
            )));
        }
        for (i, (g, mi)) in self.k.iter().zip(inst.m()).enumerate() {
            if g.shape() != (mi, inst.n()) {
                return Err(LqdgError::Dimension(format!(
                    "K[{i}] is {}x{}, expected {mi}x{}",
                    g.nrows(),
                    g.ncols(),
                    inst.n()
                )));
            }
        }
        Ok(())
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.players())?;
        Ok(Self::from_unchecked(perm.iter().map(|&p| self.k[p].clone()).collect()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&PolicyDoc {
            k: self.k.iter().map(linalg::to_rows).collect(),
        })?)
    }

    /// Accepts either `{"K": [...]}` or a bare array of row-major matrices.
    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let arr = match v.get("K") {
            Some(k) => k.clone(),
            None => v,
        };
        let rows: Vec<Rows> = serde_json::from_value(arr)?;
        Self::new(rows.iter().map(|r| linalg::from_rows(r)).collect::<Result<_>>()?)
    }
}

#[derive(Serialize, Deserialize)]
struct PolicyDoc {
    #[serde(rename = "K")]
    k: Vec<Rows>,
}

/// Per-player symmetric value matrices `P^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSet {
    p: Vec<DMatrix<f64>>,
}

impl ValueSet {
    /// Wraps the given matrices after symmetrizing them.
    pub fn new(p: Vec<DMatrix<f64>>) -> Result<Self> {
        if p.iter().any(|m| !m.is_square()) {
            return Err(LqdgError::Dimension("value matrices must be square".into()));
        }
        Ok(Self {
            p: p.iter().map(linalg::symmetrize).collect(),
        })
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.p
    }

    pub fn value(&self, i: usize) -> &DMatrix<f64> {
        &self.p[i]
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().all(linalg::all_finite)
    }

    fn check_dims(&self, inst: &GameInstance) -> Result<()> {
        if self.p.len() != inst.players() || self.p.iter().any(|m| m.nrows() != inst.n()) {
            return Err(LqdgError::Dimension("value set does not match instance".into()));
        }
        Ok(())
    }
}

/// Stability of the joint closed loop and the per-player stabilizability /
/// detectability predicates of the coupled Riccati fixed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub closed_loop_spectral_radius: f64,
    pub is_stable: bool,
    pub per_player_stabilizable: Vec<bool>,
    pub per_player_detectable: Vec<bool>,
}

/// `A + Σ_j B^j K^j`.
pub fn closed_loop_matrix(inst: &GameInstance, pol: &PolicySet) -> Result<DMatrix<f64>> {
    pol.check_dims(inst)?;
    Ok(closed_loop_unchecked(inst, pol))
}

pub(crate) fn closed_loop_unchecked(inst: &GameInstance, pol: &PolicySet) -> DMatrix<f64> {
    let mut acl = inst.a.clone();
    for (b, k) in inst.b.iter().zip(&pol.k) {
        acl += b * k;
    }
    acl
}

/// `A + Σ_{j≠i} B^j K^j`, the dynamics player `i` faces.
pub fn effective_dynamics(inst: &GameInstance, pol: &PolicySet, i: usize) -> DMatrix<f64> {
    let mut abar = inst.a.clone();
    for (j, (b, k)) in inst.b.iter().zip(&pol.k).enumerate() {
        if j != i {
            abar += b * k;
        }
    }
    abar
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    linalg::spectral_radius(m)
}

/// Unique symmetric solution of `P = W + Fᵀ P F` for Schur-stable `F`.
pub fn solve_discrete_lyapunov(f: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !linalg::is_symmetric(w, SYM_TOL) {
        return Err(LqdgError::InvalidArgument("W must be symmetric".into()));
    }
    linalg::solve_discrete_lyapunov_many(f, &[w]).map(|mut v| v.remove(0))
}

/// Stage-cost weight `Q^i + (K^i)ᵀ R^i K^i` under the joint policy.
pub fn stage_weight(inst: &GameInstance, pol: &PolicySet, i: usize) -> DMatrix<f64> {
    let k = &pol.k[i];
    linalg::symmetrize(&(&inst.q[i] + k.transpose() * &inst.r[i] * k))
}

/// Policy evaluation: solves every player's Lyapunov equation
/// `P^i = Q^i + (K^i)ᵀR^iK^i + A_clᵀ P^i A_cl` with one shared factorization.
pub fn evaluate_policies(inst: &GameInstance, pol: &PolicySet) -> Result<ValueSet> {
    let acl = closed_loop_matrix(inst, pol)?;
    evaluate_with_closed_loop(inst, pol, &acl)
}

pub(crate) fn evaluate_with_closed_loop(
    inst: &GameInstance,
    pol: &PolicySet,
    acl: &DMatrix<f64>,
) -> Result<ValueSet> {
    let ws: Vec<DMatrix<f64>> = (0..inst.players()).map(|i| stage_weight(inst, pol, i)).collect();
    let refs: Vec<&DMatrix<f64>> = ws.iter().collect();
    let p = linalg::solve_discrete_lyapunov_many(acl, &refs)?;
    Ok(ValueSet { p })
}

/// Expected infinite-horizon cost `J^i = tr(P^i X0)` of each player.
pub fn cost(inst: &GameInstance, pol: &PolicySet) -> Result<Vec<f64>> {
    let val = evaluate_policies(inst, pol)?;
    Ok(val.p.iter().map(|p| (p * &inst.x0).trace()).collect())
}

/// Aggregate state covariance `Σ = X0 + A_cl Σ A_clᵀ`.
pub fn state_covariance(inst: &GameInstance, pol: &PolicySet) -> Result<DMatrix<f64>> {
    let acl = closed_loop_matrix(inst, pol)?;
    linalg::solve_discrete_lyapunov_dual(&acl, &inst.x0)
}

/// Largest Frobenius defect of the coupled Riccati equations at `(pol, val)`:
/// both the value recursion and the best-response gain condition are
/// checked for every player.
pub fn are_residual(inst: &GameInstance, pol: &PolicySet, val: &ValueSet) -> Result<f64> {
    pol.check_dims(inst)?;
    val.check_dims(inst)?;
    let acl = closed_loop_unchecked(inst, pol);
    let mut worst = 0.0f64;
    for i in 0..inst.players() {
        let (b, k, p) = (&inst.b[i], &pol.k[i], &val.p[i]);
        let value_defect = p - stage_weight(inst, pol, i) - acl.transpose() * p * &acl;
        let abar = effective_dynamics(inst, pol, i);
        let h = &inst.r[i] + b.transpose() * p * b;
        let btpa = b.transpose() * p * &abar;
        let best = linalg::solve_dense(&h, &btpa)?;
        let gain_defect = k + best;
        worst = worst.max(value_defect.norm()).max(gain_defect.norm());
    }
    Ok(worst)
}

/// PBH tests for stabilizability of `(Ā^i, B^i)` and detectability of
/// `(Ā^i, C^i)` with `CᵀC = Q^i + (K^i)ᵀR^iK^i`, evaluated at `pol`.
pub fn check_equilibrium_conditions(
    inst: &GameInstance,
    pol: &PolicySet,
) -> Result<StabilityReport> {
    pol.check_dims(inst)?;
    let n = inst.n();
    let rho = linalg::spectral_radius(&closed_loop_unchecked(inst, pol))?;
    let mut stabilizable = Vec::with_capacity(inst.players());
    let mut detectable = Vec::with_capacity(inst.players());
    for i in 0..inst.players() {
        let abar = effective_dynamics(inst, pol, i);
        let c = linalg::psd_sqrt(&stage_weight(inst, pol, i));
        let eigs = linalg::eigenvalues(&abar)?;
        let abar_c = abar.map(|x| Complex::new(x, 0.0));
        let b_c = inst.b[i].map(|x| Complex::new(x, 0.0));
        let c_c = c.map(|x| Complex::new(x, 0.0));
        let mut stab = true;
        let mut det = true;
        for lambda in eigs.iter().filter(|l| l.norm() >= 1.0) {
            let shifted = DMatrix::<Complex<f64>>::identity(n, n) * *lambda - &abar_c;
            let mut ctrl = DMatrix::<Complex<f64>>::zeros(n, n + b_c.ncols());
            ctrl.view_mut((0, 0), (n, n)).copy_from(&shifted);
            ctrl.view_mut((0, n), (n, b_c.ncols())).copy_from(&b_c);
            stab &= linalg::complex_rank(&ctrl, linalg::RANK_TOL) == n;

            let mut obs = DMatrix::<Complex<f64>>::zeros(2 * n, n);
            obs.view_mut((0, 0), (n, n)).copy_from(&shifted);
            obs.view_mut((n, 0), (n, n)).copy_from(&c_c);
            det &= linalg::complex_rank(&obs, linalg::RANK_TOL) == n;
        }
        stabilizable.push(stab);
        detectable.push(det);
    }
    Ok(StabilityReport {
        closed_loop_spectral_radius: rho,
        is_stable: rho < 1.0,
        per_player_stabilizable: stabilizable,
        per_player_detectable: detectable,
    })
}
