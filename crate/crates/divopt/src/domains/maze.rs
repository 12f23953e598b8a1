//! Deceptive maze domain: a differential-drive robot steered by a small
//! MLP inside a walled unit square; the feature is where it ends up.
//!
//! The layout places the start inside a pocket so that greedy forward
//! motion stalls, which is what makes coverage of the square hard. The
//! simulation is kinematic: range and bump sensors feed a 5-8-2 tanh
//! network whose outputs set the wheel speeds, and wall contacts resolve
//! by pushing the robot out along the contact normal, so it slides.

use crate::domains::Domain;
use crate::{Error, Feature, Result};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Simulated control steps per evaluation.
pub const STEPS: usize = 250;
/// Integration time per control step.
pub const DT: f64 = 0.05;
/// Wheel speed bound in units per time, so one step moves at most
/// `WHEEL_SPEED_MAX * DT` = 0.025 units.
pub const WHEEL_SPEED_MAX: f64 = 0.5;
/// Robot body radius.
pub const ROBOT_RADIUS: f64 = 0.015;
/// Wheel separation for the differential drive.
pub const AXLE_LENGTH: f64 = 0.03;
/// Maximum range-sensor distance.
pub const SENSOR_RANGE: f64 = 0.2;
/// MLP weight count: (5 inputs + bias) * 8 hidden + (8 hidden + bias) * 2.
pub const WEIGHT_COUNT: usize = 66;

const RANGE_SENSOR_ANGLES: [f64; 3] = [-FRAC_PI_4, 0.0, FRAC_PI_4];
const BUMP_SENSOR_ANGLES: [f64; 2] = [-FRAC_PI_2, FRAC_PI_2];
const INPUTS: usize = 5;
const HIDDEN: usize = 8;
const OUTPUTS: usize = 2;
const SUBSTEPS: usize = 2;

/// One wall: a 2-D line segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub ax: f64,
    pub ay: f64,
    pub bx: f64,
    pub by: f64,
}

impl Segment {
    fn closest_point(&self, px: f64, py: f64) -> (f64, f64) {
        let ex = self.bx - self.ax;
        let ey = self.by - self.ay;
        let t = (((px - self.ax) * ex + (py - self.ay) * ey) / (ex * ex + ey * ey))
            .clamp(0.0, 1.0);
        (self.ax + t * ex, self.ay + t * ey)
    }

    fn distance_sq(&self, px: f64, py: f64) -> f64 {
        let (cx, cy) = self.closest_point(px, py);
        (px - cx) * (px - cx) + (py - cy) * (py - cy)
    }

    /// Distance along the ray from `(ox, oy)` in direction `(dx, dy)` to
    /// this segment, if they intersect.
    fn ray_hit(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> Option<f64> {
        let ex = self.bx - self.ax;
        let ey = self.by - self.ay;
        let det = ex * dy - ey * dx;
        if det.abs() < 1e-15 {
            return None;
        }
        let rx = self.ay - oy;
        let lx = self.ax - ox;
        let t = (ex * rx - ey * lx) / det;
        let s = (dx * rx - dy * lx) / det;
        if t >= 0.0 && (0.0..=1.0).contains(&s) {
            Some(t)
        } else {
            None
        }
    }
}

/// Maze geometry: wall segments, start pose, and a goal position (kept
/// for rendering; the feature function never uses it).
#[derive(Debug, Clone)]
pub struct MazeWorld {
    segments: Vec<Segment>,
    start: (f64, f64),
    heading: f64,
    goal: (f64, f64),
}

impl MazeWorld {
    /// Parses a plain-text layout: one `x1 y1 x2 y2` wall per line plus
    /// `start x y heading` and `goal x y` records; `#` starts a comment.
    /// The four arena boundary walls are appended automatically.
    pub fn parse(text: &str) -> Result<Self> {
        const BAD: Error = Error::InvalidConfig("malformed maze layout record");
        let mut segments = Vec::new();
        let mut start = None;
        let mut goal = (1.0, 1.0);
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let first = tokens.next().ok_or(BAD)?;
            let mut values = Vec::new();
            let numeric_first = first.parse::<f64>().ok();
            if let Some(v) = numeric_first {
                values.push(v);
            }
            for tok in tokens {
                values.push(tok.parse::<f64>().map_err(|_| BAD)?);
            }
            match (first, values.len()) {
                ("start", 3) => start = Some((values[0], values[1], values[2])),
                ("goal", 2) => goal = (values[0], values[1]),
                (_, 4) if numeric_first.is_some() => segments.push(Segment {
                    ax: values[0],
                    ay: values[1],
                    bx: values[2],
                    by: values[3],
                }),
                _ => return Err(BAD),
            }
        }
        let (sx, sy, heading) = start.ok_or(Error::InvalidConfig("maze layout needs a start"))?;
        if !heading.is_finite() {
            return Err(Error::InvalidConfig("maze start heading must be finite"));
        }
        let in_square = |x: f64, y: f64| (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y);
        if !in_square(sx, sy) || !in_square(goal.0, goal.1) {
            return Err(Error::InvalidConfig("maze start and goal must lie in the unit square"));
        }
        for s in &segments {
            if !in_square(s.ax, s.ay) || !in_square(s.bx, s.by) {
                return Err(Error::InvalidConfig("maze walls must lie in the unit square"));
            }
            if s.ax == s.bx && s.ay == s.by {
                return Err(Error::InvalidConfig("maze walls must have nonzero length"));
            }
            if s.distance_sq(sx, sy) <= ROBOT_RADIUS * ROBOT_RADIUS {
                return Err(Error::InvalidConfig("maze start intersects a wall"));
            }
        }
        segments.extend([
            Segment { ax: 0.0, ay: 0.0, bx: 1.0, by: 0.0 },
            Segment { ax: 1.0, ay: 0.0, bx: 1.0, by: 1.0 },
            Segment { ax: 1.0, ay: 1.0, bx: 0.0, by: 1.0 },
            Segment { ax: 0.0, ay: 1.0, bx: 0.0, by: 0.0 },
        ]);
        Ok(Self { segments, start: (sx, sy), heading, goal })
    }

    /// The layout bundled with the crate.
    pub fn default_layout() -> Self {
        Self::parse(include_str!("deceptive_maze.txt")).expect("bundled maze layout is valid")
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start(&self) -> (f64, f64) {
        self.start
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn goal(&self) -> (f64, f64) {
        self.goal
    }

    fn sense(&self, x: f64, y: f64, heading: f64) -> [f64; INPUTS] {
        let mut inputs = [0.0; INPUTS];
        for (i, offset) in RANGE_SENSOR_ANGLES.iter().enumerate() {
            let dir = heading + offset;
            let (dx, dy) = (dir.cos(), dir.sin());
            let mut nearest = f64::INFINITY;
            for seg in &self.segments {
                if let Some(t) = seg.ray_hit(x, y, dx, dy) {
                    nearest = nearest.min(t);
                }
            }
            if nearest <= SENSOR_RANGE {
                inputs[i] = 1.0 - nearest / SENSOR_RANGE;
            }
        }
        for (i, offset) in BUMP_SENSOR_ANGLES.iter().enumerate() {
            let dir = heading + offset;
            let qx = x + ROBOT_RADIUS * dir.cos();
            let qy = y + ROBOT_RADIUS * dir.sin();
            let contact = self
                .segments
                .iter()
                .any(|seg| seg.distance_sq(qx, qy) <= ROBOT_RADIUS * ROBOT_RADIUS);
            inputs[RANGE_SENSOR_ANGLES.len() + i] = if contact { 1.0 } else { 0.0 };
        }
        inputs
    }

    fn resolve_collisions(&self, x: &mut f64, y: &mut f64) {
        for _ in 0..3 {
            let mut moved = false;
            for seg in &self.segments {
                let (cx, cy) = seg.closest_point(*x, *y);
                let dx = *x - cx;
                let dy = *y - cy;
                let d2 = dx * dx + dy * dy;
                if d2 < ROBOT_RADIUS * ROBOT_RADIUS {
                    let d = d2.sqrt();
                    if d > 1e-12 {
                        *x = cx + dx / d * ROBOT_RADIUS;
                        *y = cy + dy / d * ROBOT_RADIUS;
                    } else {
                        let ex = seg.bx - seg.ax;
                        let ey = seg.by - seg.ay;
                        let len = (ex * ex + ey * ey).sqrt();
                        *x = cx - ey / len * ROBOT_RADIUS;
                        *y = cy + ex / len * ROBOT_RADIUS;
                    }
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        *x = x.clamp(ROBOT_RADIUS, 1.0 - ROBOT_RADIUS);
        *y = y.clamp(ROBOT_RADIUS, 1.0 - ROBOT_RADIUS);
    }

    /// Runs the controller for [`STEPS`] steps and returns the final
    /// robot position.
    pub fn final_position(&self, weights: &[f64]) -> Result<(f64, f64)> {
        if weights.len() != WEIGHT_COUNT {
            return Err(Error::DimensionMismatch {
                expected: WEIGHT_COUNT,
                actual: weights.len(),
            });
        }
        let (mut x, mut y) = self.start;
        let mut heading = self.heading;
        let dt = DT / SUBSTEPS as f64;
        for _ in 0..STEPS {
            let inputs = self.sense(x, y, heading);
            let (left, right) = control(weights, &inputs);
            let speed = 0.5 * (left + right);
            let turn_rate = (right - left) / AXLE_LENGTH;
            for _ in 0..SUBSTEPS {
                heading += turn_rate * dt;
                x += speed * heading.cos() * dt;
                y += speed * heading.sin() * dt;
                self.resolve_collisions(&mut x, &mut y);
            }
        }
        Ok((x, y))
    }
}

/// Feeds the sensor vector through the 5-8-2 tanh network and scales the
/// outputs to wheel speeds.
fn control(weights: &[f64], inputs: &[f64; INPUTS]) -> (f64, f64) {
    let mut hidden = [0.0; HIDDEN];
    for (h, out) in hidden.iter_mut().enumerate() {
        let base = h * (INPUTS + 1);
        let mut acc = weights[base + INPUTS];
        for (i, v) in inputs.iter().enumerate() {
            acc += weights[base + i] * v;
        }
        *out = acc.tanh();
    }
    let first_output = HIDDEN * (INPUTS + 1);
    let mut wheels = [0.0; OUTPUTS];
    for (o, out) in wheels.iter_mut().enumerate() {
        let base = first_output + o * (HIDDEN + 1);
        let mut acc = weights[base + HIDDEN];
        for (h, v) in hidden.iter().enumerate() {
            acc += weights[base + h] * v;
        }
        *out = acc.tanh() * WHEEL_SPEED_MAX;
    }
    (wheels[0], wheels[1])
}

/// The maze as a [`Domain`]: 66 MLP weights in, final position in the
/// unit square out.
#[derive(Debug, Clone)]
pub struct MazeDomain {
    world: MazeWorld,
}

impl MazeDomain {
    pub fn new(world: MazeWorld) -> Self {
        Self { world }
    }

    pub fn bundled() -> Self {
        Self::new(MazeWorld::default_layout())
    }

    pub fn world(&self) -> &MazeWorld {
        &self.world
    }
}

impl Domain for MazeDomain {
    fn solution_dim(&self) -> usize {
        WEIGHT_COUNT
    }

    fn feature_dim(&self) -> usize {
        2
    }

    fn feature_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0, 0.0], vec![1.0, 1.0])
    }

    fn evaluate(&self, solution: &[f64]) -> Result<Feature> {
        let (x, y) = self.world.final_position(solution)?;
        Ok(vec![x, y])
    }
}
