//! Smoothness and reconstruction metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{JointSequence, MotionSequence, TRAJ_DIMS};
use crate::par;

/// Pooled second-difference statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterReport {
    /// Sum of joint acceleration norms.
    pub d_sum: f64,
    /// Number of (frame, joint) second-difference terms.
    pub n_count: usize,
    pub jitter: f64,
}

fn norm3(a: f64, b: f64, c: f64) -> f64 {
    (a * a + b * b + c * c).sqrt()
}

/// `(D, N)` for one sequence: the summed norms of
/// `x[t+1] - 2 x[t] + x[t-1]` over interior frames and all joints, and the
/// number of such terms, `(T - 2) * J`. Sequences under three frames give
/// `(0, 0)`.
pub fn sequence_jitter_terms(seq: &JointSequence) -> (f64, usize) {
    let t_len = seq.len();
    if t_len < 3 {
        return (0.0, 0);
    }
    let mut d = 0.0;
    for t in 1..t_len - 1 {
        let (prev, cur, next) = (seq.frame(t - 1), seq.frame(t), seq.frame(t + 1));
        for j in 0..seq.joint_count() {
            let i = 3 * j;
            let acc = |k: usize| next[i + k] - 2.0 * cur[i + k] + prev[i + k];
            d += norm3(acc(0), acc(1), acc(2));
        }
    }
    (d, (t_len - 2) * seq.joint_count())
}

/// Pooled jitter `ΣD / ΣN` over every sequence long enough to contribute.
pub fn total_jitter(sequences: &[JointSequence]) -> Result<JitterReport> {
    let terms = par::map(sequences, sequence_jitter_terms);
    let (d_sum, n_count) = terms
        .iter()
        .fold((0.0, 0usize), |(d, n), (di, ni)| (d + di, n + ni));
    if n_count == 0 {
        return Err(Error::UndefinedMetric(
            "total jitter needs at least one sequence of three or more frames".into(),
        ));
    }
    Ok(JitterReport {
        d_sum,
        n_count,
        jitter: d_sum / n_count as f64,
    })
}

/// Incremental form of [`sequence_jitter_terms`] for one stream of frames.
#[derive(Debug, Clone, Default)]
pub struct JitterAccumulator {
    prev: Option<Vec<f64>>,
    prev2: Option<Vec<f64>>,
    d_sum: f64,
    n_count: usize,
}

impl JitterAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the next frame (`J * 3` coordinates).
    pub fn push(&mut self, frame: &[f64]) {
        if let (Some(p1), Some(p2)) = (&self.prev, &self.prev2) {
            for ((x, y), z) in frame
                .chunks_exact(3)
                .zip(p1.chunks_exact(3))
                .zip(p2.chunks_exact(3))
            {
                let acc = |k: usize| x[k] - 2.0 * y[k] + z[k];
                self.d_sum += norm3(acc(0), acc(1), acc(2));
                self.n_count += 1;
            }
        }
        self.prev2 = self.prev.take();
        self.prev = Some(frame.to_vec());
    }

    pub fn extend(&mut self, seq: &JointSequence) {
        for frame in seq.frames() {
            self.push(frame);
        }
    }

    pub fn terms(&self) -> (f64, usize) {
        (self.d_sum, self.n_count)
    }

    /// `None` until three frames have been seen.
    pub fn jitter(&self) -> Option<f64> {
        (self.n_count > 0).then(|| self.d_sum / self.n_count as f64)
    }
}

/// Mean joint displacement across the given segment boundaries minus the mean
/// displacement between every other pair of consecutive frames, floored at 0.
///
/// `boundaries` lists frame indices `b` in `1..T` where a new segment starts,
/// i.e. the step from frame `b - 1` to `b` crosses a boundary.
pub fn boundary_discontinuity(seq: &JointSequence, boundaries: &[usize]) -> Result<f64> {
    let t_len = seq.len();
    if let Some(&b) = boundaries.iter().find(|&&b| b == 0 || b >= t_len) {
        return Err(Error::bounds(format!("boundary {b} outside 1..{t_len}")));
    }
    if boundaries.is_empty() || t_len < 2 {
        return Ok(0.0);
    }
    let mut is_boundary = vec![false; t_len];
    for &b in boundaries {
        is_boundary[b] = true;
    }
    let jc = seq.joint_count();
    let (mut across, mut n_across, mut within, mut n_within) = (0.0, 0usize, 0.0, 0usize);
    for (t, &crosses) in is_boundary.iter().enumerate().skip(1) {
        let (a, b) = (seq.frame(t - 1), seq.frame(t));
        let step: f64 = (0..jc)
            .map(|j| {
                norm3(
                    b[3 * j] - a[3 * j],
                    b[3 * j + 1] - a[3 * j + 1],
                    b[3 * j + 2] - a[3 * j + 2],
                )
            })
            .sum::<f64>()
            / jc as f64;
        if crosses {
            across += step;
            n_across += 1;
        } else {
            within += step;
            n_within += 1;
        }
    }
    let mean_across = across / n_across as f64;
    let mean_within = if n_within == 0 {
        0.0
    } else {
        within / n_within as f64
    };
    Ok((mean_across - mean_within).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub traj: f64,
    pub feat: f64,
    pub joints: f64,
    pub smooth_traj: f64,
    pub smooth_joints: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            traj: 2.0,
            feat: 1.0,
            joints: 1.0,
            smooth_traj: 0.1,
            smooth_joints: 0.1,
        }
    }
}

impl LossWeights {
    pub fn scaled(self, k: f64) -> Self {
        Self {
            traj: self.traj * k,
            feat: self.feat * k,
            joints: self.joints * k,
            smooth_traj: self.smooth_traj * k,
            smooth_joints: self.smooth_joints * k,
        }
    }
}

/// The five tensors a reconstruction loss compares, each flattened.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossInputs {
    pub traj: Vec<f64>,
    pub feat: Vec<f64>,
    pub joints: Vec<f64>,
    pub traj_delta: Vec<f64>,
    pub joints_delta: Vec<f64>,
}

impl LossInputs {
    /// Splits features into trajectory and local parts and computes the
    /// first-order frame differences of trajectory and joints.
    pub fn from_motion(features: &MotionSequence, joints: &JointSequence) -> Result<Self> {
        if features.len() != joints.len() {
            return Err(Error::dim("joint frames", features.len(), joints.len()));
        }
        let traj: Vec<f64> = features
            .frames()
            .flat_map(|f| f[..TRAJ_DIMS].to_vec())
            .collect();
        Ok(Self {
            traj_delta: frame_deltas(&traj, TRAJ_DIMS),
            joints_delta: frame_deltas(joints.as_flat(), joints.joint_count() * 3),
            feat: features.local_features(),
            joints: joints.as_flat().to_vec(),
            traj,
        })
    }
}

/// `x[t] - x[t-1]` for consecutive rows of width `width`.
pub fn frame_deltas(rows: &[f64], width: usize) -> Vec<f64> {
    rows.windows(width + 1).map(|w| w[width] - w[0]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub traj: f64,
    pub feat: f64,
    pub joints: f64,
    pub smooth_traj: f64,
    pub smooth_joints: f64,
}

fn mean_l1(what: &'static str, pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::dim(what, target.len(), pred.len()));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred.iter().zip(target).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// Weighted sum of per-term mean absolute errors.
pub fn vae_loss(pred: &LossInputs, target: &LossInputs, w: &LossWeights) -> Result<LossBreakdown> {
    let traj = mean_l1("trajectory", &pred.traj, &target.traj)?;
    let feat = mean_l1("features", &pred.feat, &target.feat)?;
    let joints = mean_l1("joints", &pred.joints, &target.joints)?;
    let smooth_traj = mean_l1("trajectory deltas", &pred.traj_delta, &target.traj_delta)?;
    let smooth_joints = mean_l1("joint deltas", &pred.joints_delta, &target.joints_delta)?;
    let total = w.traj * traj
        + w.feat * feat
        + w.joints * joints
        + w.smooth_traj * smooth_traj
        + w.smooth_joints * smooth_joints;
    Ok(LossBreakdown {
        total,
        traj,
        feat,
        joints,
        smooth_traj,
        smooth_joints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_joint(points: &[[f64; 3]]) -> JointSequence {
        JointSequence::from_frames(1, &points.iter().map(|p| vec![*p]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn constant_and_ramp_have_no_jitter() {
        let c = one_joint(&[[1.0, 2.0, 3.0]; 6]);
        assert_eq!(sequence_jitter_terms(&c), (0.0, 4));
        let ramp: Vec<[f64; 3]> = (0..6)
            .map(|t| [t as f64, -2.0 * t as f64, 0.5 * t as f64])
            .collect();
        assert_eq!(sequence_jitter_terms(&one_joint(&ramp)).0, 0.0);
        assert_eq!(total_jitter(&[c.clone(), c]).unwrap().jitter, 0.0);
    }

    #[test]
    fn accumulator_matches_batch_terms() {
        let pts: Vec<[f64; 3]> = (0..9)
            .map(|t| [(t * t) as f64, (t as f64).sin(), 1.0 / (1.0 + t as f64)])
            .collect();
        let seq = one_joint(&pts);
        let mut acc = JitterAccumulator::new();
        acc.push(seq.frame(0));
        assert_eq!(acc.jitter(), None);
        acc.extend(&seq.slice(1..9).unwrap());
        assert_eq!(acc.terms(), sequence_jitter_terms(&seq));
    }

    #[test]
    fn quadratic_fixture() {
        let q: Vec<[f64; 3]> = (0..4).map(|t| [(t * t) as f64; 3]).collect();
        let (d, n) = sequence_jitter_terms(&one_joint(&q));
        assert!((d - 4.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(n, 2);
        let r = total_jitter(&[one_joint(&q)]).unwrap();
        assert!((r.jitter - 3.4641016).abs() < 1e-6);
    }

    #[test]
    fn pooling_is_a_ratio_of_sums() {
        let q: Vec<[f64; 3]> = (0..4).map(|t| [(t * t) as f64; 3]).collect();
        let c = one_joint(&[[0.0; 3]; 5]);
        let single = total_jitter(&[one_joint(&q)]).unwrap().jitter;
        let twice = total_jitter(&[one_joint(&q), one_joint(&q)])
            .unwrap()
            .jitter;
        assert_eq!(single, twice);
        let mixed = total_jitter(&[one_joint(&q), c]).unwrap();
        assert_eq!(mixed.n_count, 5);
        assert!((mixed.jitter - 4.0 * 3f64.sqrt() / 5.0).abs() < 1e-12);
    }

    #[test]
    fn short_sequences_are_excluded() {
        let short = one_joint(&[[0.0; 3], [5.0; 3]]);
        assert_eq!(sequence_jitter_terms(&short), (0.0, 0));
        assert!(matches!(
            total_jitter(std::slice::from_ref(&short)),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(total_jitter(&[]).is_err());
        let q: Vec<[f64; 3]> = (0..4).map(|t| [(t * t) as f64; 3]).collect();
        let r = total_jitter(&[short, one_joint(&q)]).unwrap();
        assert_eq!(r.n_count, 2);
    }

    #[test]
    fn boundary_discontinuity_cases() {
        let c = one_joint(&[[1.0; 3]; 8]);
        assert_eq!(boundary_discontinuity(&c, &[4]).unwrap(), 0.0);
        assert_eq!(boundary_discontinuity(&c, &[]).unwrap(), 0.0);

        let g = 2.5;
        let mut pts = vec![[0.0; 3]; 8];
        for p in pts.iter_mut().skip(4) {
            *p = [g, 0.0, 0.0];
        }
        assert!((boundary_discontinuity(&one_joint(&pts), &[4]).unwrap() - g).abs() < 1e-12);

        let ramp: Vec<[f64; 3]> = (0..8).map(|t| [t as f64, 0.0, 0.0]).collect();
        assert_eq!(
            boundary_discontinuity(&one_joint(&ramp), &[2, 6]).unwrap(),
            0.0
        );

        assert!(boundary_discontinuity(&c, &[0]).is_err());
        assert!(boundary_discontinuity(&c, &[8]).is_err());
    }

    #[test]
    fn frame_deltas_are_first_differences() {
        let rows = [1.0, 10.0, 3.0, 20.0, 6.0, 40.0];
        assert_eq!(frame_deltas(&rows, 2), vec![2.0, 10.0, 3.0, 20.0]);
        assert!(frame_deltas(&rows[..2], 2).is_empty());
    }

    #[test]
    fn loss_is_zero_on_match_and_linear_in_weights() {
        let p = LossInputs {
            traj: vec![1.0, 2.0],
            feat: vec![0.5],
            joints: vec![3.0, 4.0, 5.0],
            traj_delta: vec![1.0],
            joints_delta: vec![0.0, 1.0, 2.0],
        };
        let w = LossWeights::default();
        let zero = vae_loss(&p, &p, &w).unwrap();
        assert_eq!(zero.total, 0.0);

        let mut t = p.clone();
        t.traj = vec![0.0, 1.0];
        t.joints = vec![3.0, 4.0, 8.0];
        let base = vae_loss(&p, &t, &w).unwrap();
        assert_eq!(base.traj, 1.0);
        assert_eq!(base.joints, 1.0);
        assert_eq!(base.total, 3.0);
        assert_eq!(vae_loss(&p, &t, &w.scaled(2.0)).unwrap().total, 6.0);

        t.feat = vec![];
        assert!(vae_loss(&p, &t, &w).is_err());
    }
}
