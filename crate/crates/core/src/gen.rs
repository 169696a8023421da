//! Reproducible game instances and initial policies.
//!
//! Random draws use ChaCha20 (`rand_chacha`) seeded with the 64-bit seed via
//! `seed_from_u64`; each matrix is drawn from its own stream so that changing
//! one dimension does not shift the others:
//!
//! | stream            | matrix                                   |
//! |-------------------|------------------------------------------|
//! | `attempt << 32`   | `A` (attempt = redraw counter)           |
//! | `1 + 3i`          | `B^i`                                    |
//! | `2 + 3i`          | `G^i` in `Q^i = G^i(G^i)ᵀ + δI`          |
//! | `3 + 3i`          | `H^i` in `R^i = H^i(H^i)ᵀ + δI`          |
//!
//! Ball sampling uses stream `attempt` of its own seed.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{LqdgError, Result};
use crate::linalg;
use crate::model::{closed_loop_matrix, GameInstance, PolicySet};

pub const GENERATOR_FAMILY: &str = "ChaCha20 (rand_chacha 0.9), seed_from_u64, one stream per matrix";

const MAX_REDRAWS: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n: usize,
    #[serde(rename = "N")]
    pub players: usize,
    pub m: Vec<usize>,
    pub seed: u64,
    #[serde(default = "default_target_radius")]
    pub target_radius: f64,
    #[serde(default = "default_cost_shift")]
    pub cost_shift: f64,
}

fn default_target_radius() -> f64 {
    0.8
}

fn default_cost_shift() -> f64 {
    1.0
}

impl GenSpec {
    /// `players` players each with `m` controls; target radius 0.8, cost shift 1.
    pub fn uniform(n: usize, players: usize, m: usize, seed: u64) -> Self {
        Self {
            n,
            players,
            m: vec![m; players],
            seed,
            target_radius: default_target_radius(),
            cost_shift: default_cost_shift(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.players == 0 || self.m.len() != self.players || self.m.contains(&0) {
            return Err(LqdgError::InvalidArgument("inconsistent n, N, m".into()));
        }
        if !(self.target_radius > 0.0 && self.target_radius < 1.0) {
            return Err(LqdgError::InvalidArgument("target_radius must lie in (0, 1)".into()));
        }
        if self.cost_shift.is_nan() || self.cost_shift <= 0.0 {
            return Err(LqdgError::InvalidArgument("cost_shift must be positive".into()));
        }
        Ok(())
    }

    pub fn meta(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "generator": GENERATOR_FAMILY,
            "target_radius": self.target_radius,
            "cost_shift": self.cost_shift,
        })
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // row-major draw order
    let v: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &v)
}

/// Open-loop stable random game: Gaussian `A` rescaled to spectral radius
/// `target_radius`, Gaussian `B^i`, and costs `GGᵀ + δI`, `HHᵀ + δI`.
pub fn random_instance(spec: &GenSpec) -> Result<GameInstance> {
    spec.validate()?;
    let n = spec.n;
    let mut a = None;
    for attempt in 0..MAX_REDRAWS {
        let raw = normal_matrix(&mut stream_rng(spec.seed, attempt << 32), n, n);
        let rho = linalg::spectral_radius(&raw)?;
        if rho > 1e-12 {
            a = Some(raw * (spec.target_radius / rho));
            break;
        }
    }
    let a = a.ok_or_else(|| {
        LqdgError::InvalidArgument(format!("degenerate dynamics after {MAX_REDRAWS} redraws"))
    })?;
    let shift = spec.cost_shift;
    let mut b = Vec::with_capacity(spec.players);
    let mut q = Vec::with_capacity(spec.players);
    let mut r = Vec::with_capacity(spec.players);
    for (i, &mi) in spec.m.iter().enumerate() {
        let i = i as u64;
        b.push(normal_matrix(&mut stream_rng(spec.seed, 1 + 3 * i), n, mi));
        let g = normal_matrix(&mut stream_rng(spec.seed, 2 + 3 * i), n, n);
        q.push(linalg::symmetrize(&(&g * g.transpose() + DMatrix::identity(n, n) * shift)));
        let h = normal_matrix(&mut stream_rng(spec.seed, 3 + 3 * i), mi, mi);
        r.push(linalg::symmetrize(&(&h * h.transpose() + DMatrix::identity(mi, mi) * shift)));
    }
    GameInstance::new(a, b, q, r, None)
}

/// The two-player, two-state benchmark game used throughout the experiments.
pub fn paper_instance() -> GameInstance {
    GameInstance::new(
        DMatrix::from_row_slice(2, 2, &[0.588, 0.028, 0.570, 0.056]),
        vec![
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        ],
        vec![
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.01, 1.0])),
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.147])),
        ],
        vec![DMatrix::from_element(1, 1, 0.01), DMatrix::from_element(1, 1, 0.01)],
        None,
    )
    .expect("benchmark instance is valid")
}

/// Four-decimal equilibrium gains reported for [`paper_instance`].
pub fn paper_reported_equilibrium() -> PolicySet {
    PolicySet::new(vec![
        DMatrix::from_row_slice(1, 2, &[-0.5134, -0.0439]),
        DMatrix::from_row_slice(1, 2, &[-0.0525, -0.0114]),
    ])
    .expect("finite gains")
}

/// Initial gains at distance 0.1 from the equilibrium.
pub fn paper_k0_near() -> PolicySet {
    PolicySet::new(vec![
        DMatrix::from_row_slice(1, 2, &[-0.4266, -0.0938]),
        DMatrix::from_row_slice(1, 2, &[0.0342, -0.0612]),
    ])
    .expect("finite gains")
}

/// Initial gains at distance 0.5 from the equilibrium.
pub fn paper_k0_far() -> PolicySet {
    PolicySet::new(vec![
        DMatrix::from_row_slice(1, 2, &[-0.0543, 0.1541]),
        DMatrix::from_row_slice(1, 2, &[0.4066, 0.1867]),
    ])
    .expect("finite gains")
}

pub fn zero_policy(inst: &GameInstance) -> PolicySet {
    PolicySet::from_unchecked(inst.m().into_iter().map(|mi| DMatrix::zeros(mi, inst.n())).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallSpec {
    pub reference: PolicySet,
    pub radius: f64,
    pub seed: u64,
    pub max_rejections: usize,
}

#[derive(Serialize, Deserialize)]
struct BallDoc {
    reference: Vec<Vec<Vec<f64>>>,
    radius: f64,
    seed: u64,
    max_rejections: usize,
}

impl BallSpec {
    pub fn new(reference: PolicySet, radius: f64, seed: u64) -> Self {
        Self {
            reference,
            radius,
            seed,
            max_rejections: 10_000,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: BallDoc = serde_json::from_str(s)?;
        let reference = PolicySet::new(
            d.reference.iter().map(|r| linalg::from_rows(r)).collect::<Result<_>>()?,
        )?;
        Ok(Self {
            reference,
            radius: d.radius,
            seed: d.seed,
            max_rejections: d.max_rejections,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&BallDoc {
            reference: self.reference.gains().iter().map(linalg::to_rows).collect(),
            radius: self.radius,
            seed: self.seed,
            max_rejections: self.max_rejections,
        })?)
    }
}

/// Rejection-samples a stabilizing joint policy with
/// `‖K^i − K^{i*}‖_F ≤ radius` for every player: Gaussian direction, radius
/// uniform on `[0, radius]`.
pub fn sample_policy_in_ball(inst: &GameInstance, spec: &BallSpec) -> Result<PolicySet> {
    spec.reference.check_dims(inst)?;
    if spec.radius.is_nan() || spec.radius <= 0.0 {
        return Err(LqdgError::InvalidArgument("ball radius must be positive".into()));
    }
    let unit = Uniform::new_inclusive(0.0, 1.0).expect("valid range");
    for attempt in 0..spec.max_rejections {
        let mut rng = stream_rng(spec.seed, attempt as u64);
        let gains: Vec<DMatrix<f64>> = spec
            .reference
            .gains()
            .iter()
            .map(|kref| {
                let dir = normal_matrix(&mut rng, kref.nrows(), kref.ncols());
                let target = spec.radius * unit.sample(&mut rng);
                let norm = dir.norm();
                let mut delta = if norm > 0.0 { dir * (target / norm) } else { dir };
                while delta.norm() > spec.radius {
                    delta *= 1.0 - f64::EPSILON;
                }
                kref + delta
            })
            .collect();
        let candidate = PolicySet::new(gains)?;
        let rho = linalg::spectral_radius(&closed_loop_matrix(inst, &candidate)?)?;
        let inside = candidate
            .gains()
            .iter()
            .zip(spec.reference.gains())
            .all(|(k, r)| (k - r).norm() <= spec.radius);
        if rho < 1.0 && inside {
            return Ok(candidate);
        }
    }
    Err(LqdgError::SamplingFailed {
        attempts: spec.max_rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_instance_values() {
        let g = paper_instance();
        assert_eq!(g.a()[(0, 0)], 0.588);
        assert_eq!(g.r(0)[(0, 0)], 0.01);
        assert_eq!(g.r(1)[(0, 0)], 0.01);
        assert_eq!(g.x0(), &DMatrix::identity(2, 2));
        assert!(linalg::spectral_radius(g.a()).unwrap() < 1.0);
    }

    #[test]
    fn random_instance_is_deterministic_and_scaled() {
        let spec = GenSpec::uniform(4, 2, 2, 7);
        let a = random_instance(&spec).unwrap();
        let b = random_instance(&spec).unwrap();
        assert_eq!(a, b);
        let rho = linalg::spectral_radius(a.a()).unwrap();
        assert!((rho - 0.8).abs() < 1e-9);
        for i in 0..2 {
            assert!(linalg::min_sym_eigenvalue(a.r(i)) >= 1.0 - 1e-12);
            assert!(linalg::min_sym_eigenvalue(a.q(i)) >= 1.0 - 1e-12);
        }
        let other = random_instance(&GenSpec::uniform(4, 2, 2, 8)).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn invalid_gen_spec() {
        let mut spec = GenSpec::uniform(3, 2, 1, 0);
        spec.target_radius = 1.0;
        assert!(random_instance(&spec).is_err());
        spec.target_radius = 0.5;
        spec.cost_shift = 0.0;
        assert!(random_instance(&spec).is_err());
    }

    #[test]
    fn zero_policy_shapes() {
        let g = random_instance(&GenSpec {
            m: vec![1, 3],
            ..GenSpec::uniform(3, 2, 1, 4)
        })
        .unwrap();
        let z = zero_policy(&g);
        assert_eq!(z.gain(0).shape(), (1, 3));
        assert_eq!(z.gain(1).shape(), (3, 3));
        assert_eq!(closed_loop_matrix(&g, &z).unwrap(), *g.a());
    }

    #[test]
    fn tiny_ball_returns_reference() {
        let g = paper_instance();
        let spec = BallSpec::new(paper_reported_equilibrium(), 1e-12, 3);
        let k = sample_policy_in_ball(&g, &spec).unwrap();
        assert!(k.distance(&spec.reference) <= 2e-12);
    }

    #[test]
    fn ball_sampling_fails_when_nothing_is_stabilizing() {
        let s = |v| DMatrix::from_element(1, 1, v);
        let g = GameInstance::new(s(2.0), vec![s(1.0)], vec![s(1.0)], vec![s(1.0)], None).unwrap();
        let spec = BallSpec {
            max_rejections: 20,
            ..BallSpec::new(PolicySet::new(vec![s(0.0)]).unwrap(), 0.1, 0)
        };
        assert_eq!(
            sample_policy_in_ball(&g, &spec),
            Err(LqdgError::SamplingFailed { attempts: 20 })
        );
    }

    #[test]
    fn spec_json() {
        let spec: GenSpec = serde_json::from_str(r#"{"n":4,"N":2,"m":[2,2],"seed":1}"#).unwrap();
        assert_eq!(spec, GenSpec::uniform(4, 2, 2, 1));
        let ball = BallSpec::new(paper_k0_near(), 0.5, 9);
        assert_eq!(BallSpec::from_json(&ball.to_json().unwrap()).unwrap(), ball);
        let g = random_instance(&spec).unwrap();
        let text = g.to_json_with_meta(spec.meta()).unwrap();
        assert!(text.contains("\"meta\""));
        assert_eq!(GameInstance::from_json(&text).unwrap(), g);
    }
}
