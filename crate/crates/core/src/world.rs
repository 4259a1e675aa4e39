//! Static scenario geometry and the target mobility model.

use nalgebra::{Matrix3, Matrix6};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{TargetState, Vec3, Vec6};

/// Axis-aligned box obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub min: Vec3,
    pub max: Vec3,
}

impl Obstacle {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|k| {
            self.min[k] <= self.max[k] && self.min[k].is_finite() && self.max[k].is_finite()
        })
    }

    /// True when `p` is strictly inside the box.
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] > self.min[k] && p[k] < self.max[k])
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.outside_offset(p).norm()
    }

    fn outside_offset(&self, p: &Vec3) -> Vec3 {
        Vec3::from_fn(|k, _| {
            if p[k] < self.min[k] {
                p[k] - self.min[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            }
        })
    }

    /// Distance to the box and the unit gradient of that distance.
    ///
    /// Inside (or on) the box the distance is 0 and the direction is the
    /// outward normal of the nearest face.
    pub fn distance_and_normal(&self, p: &Vec3) -> (f64, Vec3) {
        let off = self.outside_offset(p);
        let dist = off.norm();
        if dist > 0.0 {
            return (dist, off / dist);
        }
        let mut best = (f64::INFINITY, Vec3::x());
        for k in 0..3 {
            let to_min = p[k] - self.min[k];
            let to_max = self.max[k] - p[k];
            if to_min < best.0 {
                let mut n = Vec3::zeros();
                n[k] = -1.0;
                best = (to_min, n);
            }
            if to_max < best.0 {
                let mut n = Vec3::zeros();
                n[k] = 1.0;
                best = (to_max, n);
            }
        }
        (0.0, best.1)
    }

    /// Slab test against the open segment `(a, b)`: only passing through the
    /// box interior counts, so grazing a face or ending on it does not.
    pub fn blocks_segment(&self, a: &Vec3, b: &Vec3) -> bool {
        let dir = b - a;
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        for k in 0..3 {
            if dir[k] == 0.0 {
                if a[k] <= self.min[k] || a[k] >= self.max[k] {
                    return false;
                }
                continue;
            }
            let t1 = (self.min[k] - a[k]) / dir[k];
            let t2 = (self.max[k] - a[k]) / dir[k];
            let (near, far) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            lo = lo.max(near);
            hi = hi.min(far);
            if lo >= hi {
                return false;
            }
        }
        lo < hi
    }
}

/// True iff the open segment between `a` and `b` crosses no obstacle.
pub fn los_visible(a: &Vec3, b: &Vec3, obstacles: &[Obstacle]) -> bool {
    !obstacles.iter().any(|o| o.blocks_segment(a, b))
}

/// Distance from `p` to the nearest obstacle surface; `+inf` without obstacles.
pub fn clearance(p: &Vec3, obstacles: &[Obstacle]) -> f64 {
    obstacles
        .iter()
        .map(|o| o.distance(p))
        .fold(f64::INFINITY, f64::min)
}

pub fn inside_any(p: &Vec3, obstacles: &[Obstacle]) -> bool {
    obstacles.iter().any(|o| o.contains(p))
}

/// Linear-Gaussian target dynamics `s' = A s + q`, `q ~ N(0, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    pub transition: Matrix6<f64>,
    pub process_noise: Matrix6<f64>,
    /// Per-axis noise intensities used to build `process_noise`.
    pub intensity: Vec3,
    /// `L` with `L Lᵀ = Q`, from a pivoted Cholesky so singular `Q` is fine.
    noise_factor: Matrix6<f64>,
}

/// Random-walk-on-velocity model: `A = [[I, dt I], [0, I]]` and the
/// matching integrated white-noise covariance.
pub fn build_random_walk_model(dt: f64, intensity: Vec3) -> MotionModel {
    let w = Matrix3::from_diagonal(&intensity);
    let mut a = Matrix6::identity();
    a.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(Matrix3::identity() * dt));
    let mut q = Matrix6::zeros();
    q.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(w * (dt.powi(3) / 3.0)));
    q.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(w * (dt * dt / 2.0)));
    q.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(w * (dt * dt / 2.0)));
    q.fixed_view_mut::<3, 3>(3, 3).copy_from(&(w * dt));
    MotionModel::new(a, q, intensity)
}

impl MotionModel {
    pub fn new(transition: Matrix6<f64>, process_noise: Matrix6<f64>, intensity: Vec3) -> Self {
        let noise_factor = pivoted_cholesky(&process_noise);
        Self {
            transition,
            process_noise,
            intensity,
            noise_factor,
        }
    }

    pub fn noise_factor(&self) -> &Matrix6<f64> {
        &self.noise_factor
    }
}

/// Outer-product Cholesky with diagonal pivoting. Columns stop once the
/// remaining diagonal is negligible, which handles rank-deficient input.
fn pivoted_cholesky(q: &Matrix6<f64>) -> Matrix6<f64> {
    let mut a = *q;
    let mut l = Matrix6::zeros();
    let mut order: [usize; 6] = [0, 1, 2, 3, 4, 5];
    let scale = (0..6).map(|i| q[(i, i)].abs()).fold(0.0, f64::max);
    let tol = scale * 1e-14;
    for k in 0..6 {
        let (best, pivot) =
            (k..6)
                .map(|j| (j, a[(order[j], order[j])]))
                .fold(
                    (k, f64::NEG_INFINITY),
                    |acc, x| if x.1 > acc.1 { x } else { acc },
                );
        if pivot <= tol {
            break;
        }
        order.swap(k, best);
        let pk = order[k];
        let root = pivot.sqrt();
        l[(pk, k)] = root;
        for &pi in &order[k + 1..] {
            l[(pi, k)] = a[(pi, pk)] / root;
        }
        for &pi in &order[k + 1..] {
            for &pj in &order[k + 1..] {
                a[(pi, pj)] -= l[(pi, k)] * l[(pj, k)];
            }
        }
    }
    l
}

/// Advances the target by one step, drawing process noise from `rng`.
pub fn step_target<R: Rng + ?Sized>(
    state: &TargetState,
    model: &MotionModel,
    rng: &mut R,
) -> TargetState {
    let z = Vec6::from_fn(|_, _| rng.sample(StandardNormal));
    let next = model.transition * state.to_vector() + model.noise_factor * z;
    TargetState::from_vector(&next)
}
