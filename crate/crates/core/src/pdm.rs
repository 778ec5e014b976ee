//! Annealed projected-Langevin trajectory sampler ("pdm-lite").
//!
//! Stand-in for a learned projected diffusion sampler: a fixed quadratic energy
//! over planar waypoints (squared segment lengths plus attraction to the
//! straight start–goal path) sampled with annealed Langevin dynamics over `K`
//! noise levels of `L` inner steps each. Projection timing is counted at the
//! inner-step level, so the scheduling horizon is `K·L`.

use serde::{Deserialize, Serialize};

use crate::dynamics::NoiseStream;
use crate::error::{Error, Result};
use crate::geometry::{Circle, ObstacleSet, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdmParams {
    /// Outer noise levels K.
    pub levels: usize,
    /// Inner Langevin steps per level L.
    pub inner_steps: usize,
    /// Waypoint count W, endpoints included.
    pub waypoints: usize,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Langevin step size, shared by all levels.
    pub step_size: f64,
    pub smoothness_weight: f64,
    pub goal_weight: f64,
}

impl Default for PdmParams {
    fn default() -> Self {
        PdmParams {
            levels: 10,
            inner_steps: 20,
            waypoints: 32,
            start: [0.0, 0.0],
            goal: [10.0, 0.0],
            sigma_max: 0.4,
            sigma_min: 0.01,
            step_size: 0.25,
            smoothness_weight: 1.0,
            goal_weight: 2.0,
        }
    }
}

impl PdmParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("pdm: {m}")));
        if self.levels == 0 || self.inner_steps == 0 {
            return bad("levels and inner_steps must be positive");
        }
        if self.waypoints < 3 {
            return bad("at least 3 waypoints are required");
        }
        if !(self.sigma_max >= self.sigma_min && self.sigma_min >= 0.0) {
            return bad("noise scales must satisfy sigma_max >= sigma_min >= 0");
        }
        if !(self.step_size >= 0.0) || !(self.smoothness_weight >= 0.0) || !(self.goal_weight >= 0.0) {
            return bad("step size and weights must be nonnegative");
        }
        // explicit gradient step must stay stable on the stiffest mode
        if self.step_size * (4.0 * self.smoothness_weight + self.goal_weight) >= 2.0 {
            return bad("step size too large for the energy stiffness");
        }
        Ok(())
    }

    pub fn anneal(&self) -> AnnealSchedule {
        AnnealSchedule::geometric(self.levels, self.inner_steps, self.sigma_max, self.sigma_min, self.step_size)
    }

    fn goal_point(&self, i: usize) -> [f64; 2] {
        let s = i as f64 / (self.waypoints - 1) as f64;
        [
            self.start[0] + s * (self.goal[0] - self.start[0]),
            self.start[1] + s * (self.goal[1] - self.start[1]),
        ]
    }
}

/// Default obstacle layout: three circles straddling the start–goal segment,
/// alternating sides, with a small clearance so the straight path is feasible.
pub fn default_obstacles() -> ObstacleSet {
    ObstacleSet {
        circles: vec![
            Circle { center: [2.5, 0.75], radius: 0.6 },
            Circle { center: [5.0, -0.75], radius: 0.6 },
            Circle { center: [7.5, 0.75], radius: 0.6 },
        ],
        margin: 1e-3,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    pub levels: usize,
    pub inner_steps: usize,
    /// Strictly decreasing noise scales, one per level.
    pub sigmas: Vec<f64>,
    pub step_sizes: Vec<f64>,
}

impl AnnealSchedule {
    pub fn geometric(levels: usize, inner_steps: usize, sigma_max: f64, sigma_min: f64, step: f64) -> Self {
        let sigmas = (0..levels)
            .map(|k| {
                if levels == 1 || sigma_max == 0.0 {
                    sigma_max
                } else {
                    let s = k as f64 / (levels - 1) as f64;
                    sigma_max * (sigma_min / sigma_max).powf(s)
                }
            })
            .collect();
        AnnealSchedule {
            levels,
            inner_steps,
            sigmas,
            step_sizes: vec![step; levels],
        }
    }

    /// Scheduling horizon `K·L`.
    pub fn horizon(&self) -> usize {
        self.levels * self.inner_steps
    }
}

/// `½ w_s Σ ‖x_{i+1} − x_i‖² + ½ w_g Σ ‖x_i − g_i‖²` with `g` the straight
/// start–goal path.
pub fn energy(traj: &Trajectory, p: &PdmParams) -> f64 {
    let w = traj.waypoints();
    let smooth: f64 = w
        .windows(2)
        .map(|s| (s[1][0] - s[0][0]).powi(2) + (s[1][1] - s[0][1]).powi(2))
        .sum();
    let goal: f64 = w
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let g = p.goal_point(i);
            (x[0] - g[0]).powi(2) + (x[1] - g[1]).powi(2)
        })
        .sum();
    0.5 * p.smoothness_weight * smooth + 0.5 * p.goal_weight * goal
}

/// Gradient of [`energy`] with respect to the interior waypoints; endpoint
/// rows are zero.
pub fn energy_gradient(traj: &Trajectory, p: &PdmParams) -> Vec<[f64; 2]> {
    let w = traj.waypoints();
    let n = w.len();
    let mut g = vec![[0.0; 2]; n];
    for i in 1..n - 1 {
        let goal = p.goal_point(i);
        for k in 0..2 {
            g[i][k] = p.smoothness_weight * (2.0 * w[i][k] - w[i - 1][k] - w[i + 1][k]) + p.goal_weight * (w[i][k] - goal[k]);
        }
    }
    g
}

/// One inner Langevin step at `level`:
/// `x ← x − η ∇E(x) + √(2η) σ_level ξ` on interior waypoints.
pub fn langevin_update(traj: &Trajectory, level: usize, inner: usize, p: &PdmParams, noise: &NoiseStream) -> Result<Trajectory> {
    if level >= p.levels || inner >= p.inner_steps {
        return Err(Error::StepOutOfRange {
            t: level * p.inner_steps + inner,
            horizon: p.levels * p.inner_steps,
        });
    }
    if traj.len() != p.waypoints {
        return Err(Error::StateMismatch(format!(
            "pdm-lite expects {} waypoints, got {}",
            p.waypoints,
            traj.len()
        )));
    }
    let anneal = p.anneal();
    let eta = anneal.step_sizes[level];
    let sigma = anneal.sigmas[level];
    let kick = (2.0 * eta).sqrt() * sigma;
    let t = (level * p.inner_steps + inner) as u64;
    let grad = energy_gradient(traj, p);
    let mut out = traj.clone();
    let n = out.len();
    for (i, x) in out.waypoints_mut().iter_mut().enumerate().take(n - 1).skip(1) {
        for k in 0..2 {
            let xi = if kick > 0.0 { noise.normal(t, 2 * i + k) } else { 0.0 };
            x[k] += -eta * grad[i][k] + kick * xi;
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFiniteStep {
            step: t as usize,
            context: "langevin update".into(),
        });
    }
    Ok(out)
}

/// Straight start–goal path; rejected if it crosses an obstacle.
pub fn initial_trajectory(p: &PdmParams, obstacles: &ObstacleSet, _noise: &NoiseStream) -> Result<Trajectory> {
    obstacles.validate(p.start, p.goal)?;
    let traj = Trajectory::straight(p.start, p.goal, p.waypoints)?;
    if traj.waypoints().iter().any(|&w| obstacles.penetration(w) > 0.0) {
        return Err(Error::Config("straight start-goal path intersects an obstacle".into()));
    }
    Ok(traj)
}
