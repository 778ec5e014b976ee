//! Planar waypoint trajectories constrained to avoid circular obstacles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<[f64; 2]>) -> Result<Self> {
        if waypoints.len() < 3 {
            return Err(Error::Config(format!(
                "trajectory needs at least 3 waypoints, got {}",
                waypoints.len()
            )));
        }
        Ok(Trajectory { waypoints })
    }

    /// Evenly spaced waypoints on the segment from `start` to `goal`.
    pub fn straight(start: [f64; 2], goal: [f64; 2], count: usize) -> Result<Self> {
        let n = count.max(1) - 1;
        let pts = (0..count)
            .map(|i| {
                let s = i as f64 / n as f64;
                [start[0] + s * (goal[0] - start[0]), start[1] + s * (goal[1] - start[1])]
            })
            .collect();
        Trajectory::new(pts)
    }

    pub fn waypoints(&self) -> &[[f64; 2]] {
        &self.waypoints
    }

    pub fn waypoints_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn start(&self) -> [f64; 2] {
        self.waypoints[0]
    }

    pub fn goal(&self) -> [f64; 2] {
        self.waypoints[self.waypoints.len() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.waypoints.iter().flatten().all(|v| v.is_finite())
    }

    /// Euclidean norm of the stacked waypoint difference.
    pub fn distance(&self, other: &Trajectory) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::StateMismatch(format!(
                "trajectory lengths differ ({} vs {})",
                self.len(),
                other.len()
            )));
        }
        let sq: f64 = self
            .waypoints
            .iter()
            .zip(&other.waypoints)
            .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
            .sum();
        Ok(sq.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Circle {
    fn distance_to_center(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSet {
    pub circles: Vec<Circle>,
    /// Clearance added outside the boundary, as a fraction of each radius.
    pub margin: f64,
}

impl ObstacleSet {
    pub fn validate(&self, start: [f64; 2], goal: [f64; 2]) -> Result<()> {
        if !(self.margin >= 0.0) {
            return Err(Error::Config("obstacle margin must be nonnegative".into()));
        }
        for (i, c) in self.circles.iter().enumerate() {
            if !(c.radius > 0.0) || !c.center.iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!("obstacle {i} has an invalid radius or center")));
            }
            for p in [start, goal] {
                if c.distance_to_center(p) < c.radius * (1.0 + self.margin) {
                    return Err(Error::Config(format!("trajectory endpoint lies inside obstacle {i}")));
                }
            }
            // pushed-out points must not land in another circle
            for (j, d) in self.circles.iter().enumerate().skip(i + 1) {
                let gap = (c.center[0] - d.center[0]).hypot(c.center[1] - d.center[1]);
                if gap < (c.radius + d.radius) * (1.0 + self.margin) {
                    return Err(Error::Config(format!("obstacles {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Largest penetration depth of `p` over all circles (0 when outside).
    pub fn penetration(&self, p: [f64; 2]) -> f64 {
        self.circles
            .iter()
            .map(|c| (c.radius - c.distance_to_center(p)).max(0.0))
            .fold(0.0, f64::max)
    }

    fn push_out(&self, p: [f64; 2]) -> [f64; 2] {
        let mut q = p;
        for c in &self.circles {
            let r = c.distance_to_center(q);
            if r < c.radius {
                let target = c.radius * (1.0 + self.margin);
                let dir = if r > 0.0 {
                    [(q[0] - c.center[0]) / r, (q[1] - c.center[1]) / r]
                } else {
                    [1.0, 0.0]
                };
                q = [c.center[0] + target * dir[0], c.center[1] + target * dir[1]];
            }
        }
        q
    }
}

/// Pushes every interior waypoint that is strictly inside an obstacle radially
/// out to the boundary plus clearance. Endpoints are left untouched. A
/// waypoint exactly at a center moves along +u.
pub fn project_trajectory(traj: &Trajectory, obstacles: &ObstacleSet) -> Result<Trajectory> {
    if !traj.is_finite() {
        return Err(Error::non_finite("project_trajectory input"));
    }
    let n = traj.len();
    let mut out = traj.clone();
    for p in &mut out.waypoints[1..n - 1] {
        *p = obstacles.push_out(*p);
    }
    Ok(out)
}

/// `‖x − Π(x)‖` over the stacked waypoints.
pub fn trajectory_defect(traj: &Trajectory, obstacles: &ObstacleSet) -> Result<f64> {
    let proj = project_trajectory(traj, obstacles)?;
    traj.distance(&proj)
}
