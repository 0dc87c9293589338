//! Longitudinal control laws shared by the baseline ego and cautious NPCs.

use crate::geometry::{wrap_angle, Polyline, Vec2};

pub(crate) const GAP_GAIN: f64 = 0.3;
pub(crate) const SPEED_GAIN: f64 = 0.8;
/// Deceleration used to plan stops and slow-downs ahead.
pub(crate) const COMFORT_DECEL: f64 = 2.0;
pub(crate) const HARD_DECEL: f64 = 6.0;
/// Gap between bumpers kept when stopped at a line.
pub(crate) const STOP_STANDOFF: f64 = 1.5;

/// Car-following acceleration: relax the gap toward `standstill + headway·v`
/// and the speed toward the leader's, with kinematic emergency braking when
/// the comfortable response would not avoid closing below 2 m.
pub fn follower_accel(gap: f64, v: f64, v_lead: f64, standstill: f64, headway: f64) -> f64 {
    let mut a = GAP_GAIN * (gap - gap_equilibrium(v, standstill, headway)) + SPEED_GAIN * (v_lead - v);
    if v > v_lead {
        let needed = -(v * v - v_lead * v_lead) / (2.0 * (gap - 2.0).max(0.1));
        if needed < -COMFORT_DECEL {
            a = a.min(needed);
        }
    }
    a
}

/// Steady-state gap of [`follower_accel`] behind a leader at constant speed `v`.
pub fn gap_equilibrium(v: f64, standstill: f64, headway: f64) -> f64 {
    standstill + headway * v
}

pub(crate) fn cruise_accel(v: f64, target: f64) -> f64 {
    (target - v).clamp(-3.0, 2.0)
}

/// Acceleration that tracks `target` while being able to slow to `v_end`
/// within `d` meters. Follows the envelope `sqrt(v_end² + 2·b·d)` with its
/// own rate of change as feedforward, so a car on the envelope brakes at
/// about `b` = [`COMFORT_DECEL`].
pub(crate) fn approach_accel(v: f64, target: f64, d: f64, v_end: f64) -> f64 {
    let d = d.max(0.0);
    let mut a = cruise_accel(v, target);
    if v > v_end {
        let envelope = (v_end * v_end + 2.0 * COMFORT_DECEL * d).sqrt();
        let track = 2.0 * (envelope - v) - COMFORT_DECEL * v / envelope.max(0.1);
        a = a.min(track);
    }
    a.max(-HARD_DECEL)
}

/// Acceleration for stopping with the front bumper `d` meters before a line.
pub(crate) fn stop_accel(v: f64, target: f64, d: f64) -> f64 {
    if d <= 0.2 {
        return if v < 0.05 { -v / 0.1 } else { -HARD_DECEL };
    }
    let a = approach_accel(v, target, d - 0.2, 0.0);
    if v < 0.05 && d < 1.0 {
        a.min(0.0)
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Body {
    pub pos: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Obstacle {
    /// Bumper-to-body gap along the path.
    pub gap: f64,
    /// Leader speed along the path (0 for crossing traffic).
    pub speed: f64,
    pub index: usize,
}

pub(crate) const PREDICTION_TIMES: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

/// Nearest body inside the corridor swept along `path` ahead of arc length
/// `s0`. Bodies crossing the path are predicted at constant velocity and
/// count as stationary obstacles where the follower would meet them.
pub(crate) fn nearest_obstacle(
    path: &Polyline,
    s0: f64,
    me: &Body,
    bodies: &[Body],
    horizon: f64,
) -> Option<Obstacle> {
    let mut best: Option<Obstacle> = None;
    let mut consider = |o: Obstacle| {
        if best.map_or(true, |b| o.gap < b.gap) {
            best = Some(o);
        }
    };
    let end = (s0 + horizon).min(path.length());
    if end <= s0 {
        return None;
    }
    for (i, b) in bodies.iter().enumerate() {
        let half = me.width / 2.0 + b.width / 2.0 + 0.3;
        let pr = path.project_within(b.pos, s0, end);
        if pr.s > s0 && pr.s < end && pr.lateral.abs() < half {
            let dh = wrap_angle(b.heading - path.heading_at(pr.s));
            let along = b.length / 2.0 * dh.cos().abs() + b.width / 2.0 * dh.sin().abs();
            let gap = pr.s - s0 - me.length / 2.0 - along;
            if gap > -me.length {
                consider(Obstacle { gap, speed: (b.speed * dh.cos()).max(0.0), index: i });
            }
            if dh.cos() > 0.85 {
                continue;
            }
        }
        if b.speed < 0.3 {
            continue;
        }
        let dir = Vec2::from_heading(b.heading);
        for &tau in &PREDICTION_TIMES {
            let p = b.pos + dir * (b.speed * tau);
            let pr = path.project_within(p, s0, end);
            if pr.s <= s0 || pr.s >= end || pr.lateral.abs() >= half {
                continue;
            }
            let dh = wrap_angle(b.heading - path.heading_at(pr.s));
            if dh.cos() > 0.85 {
                continue;
            }
            let gap = pr.s - s0 - me.length / 2.0 - b.width / 2.0;
            // only where the follower would arrive around the same time
            if gap > 0.0 && gap <= me.speed * tau + 6.0 {
                consider(Obstacle { gap, speed: 0.0, index: i });
                break;
            }
        }
    }
    best
}
