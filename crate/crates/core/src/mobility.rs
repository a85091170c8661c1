//! Per-tick 3D kinematics: Gauss-Markov and random-waypoint models with
//! speed/acceleration caps and specular reflection at the arena faces.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::model::{Arena, MobilityModel, MobilitySpec, UavState, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MobilityError {
    #[error("degenerate step: dt = {0} must be > 0")]
    DegenerateStep(f64),
}

/// Per-UAV state the random-waypoint model carries between ticks.
/// Gauss-Markov ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionMemory {
    pub waypoint: Option<Vec3>,
    pub cruise_speed: f64,
    pub pause_left: f64,
}

pub fn derive_acceleration(v_prev: Vec3, v_next: Vec3, dt: f64) -> Result<Vec3, MobilityError> {
    if !(dt > 0.0) {
        return Err(MobilityError::DegenerateStep(dt));
    }
    Ok((v_next - v_prev) / dt)
}

/// Draws a standard-normal 3-vector (x, then y, then z).
pub fn normal3<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Vec3::new(x, y, z)
}

/// Gauss-Markov target velocity `αv + (1−α)μ + σ√(1−α²)w`, where the mean
/// vector μ has magnitude `gm_mean_speed` along the current heading.
pub fn gauss_markov_target(v: Vec3, spec: &MobilitySpec, noise: Vec3) -> Vec3 {
    let a = spec.gm_alpha;
    let heading = if v.is_zero() { Vec3::ZERO } else { v / v.norm() };
    let mean = heading * spec.gm_mean_speed;
    v * a + mean * (1.0 - a) + noise * (spec.gm_sigma * (1.0 - a * a).max(0.0).sqrt())
}

/// Advances one UAV by `dt`.
///
/// The commanded velocity change is capped at `max_accel·dt`, then the speed at
/// `max_speed`; the reported acceleration is that capped change over `dt`.
/// Arena faces reflect the position and flip the matching velocity component
/// after the acceleration is derived, so a bounce is not reported as thrust.
pub fn step_kinematics<R: Rng + ?Sized>(
    state: &UavState,
    spec: &MobilitySpec,
    arena: &Arena,
    dt: f64,
    memory: &mut MotionMemory,
    rng: &mut R,
) -> UavState {
    if !(dt > 0.0) {
        return *state;
    }
    let v = state.velocity;
    let target = match spec.model {
        MobilityModel::GaussMarkov => gauss_markov_target(v, spec, normal3(rng)),
        MobilityModel::RandomWaypoint => waypoint_target(state, spec, arena, dt, memory, rng),
    };
    let dv = (target - v).clamp_norm(spec.max_accel * dt);
    let v_next = (v + dv).clamp_norm(spec.max_speed);
    let acceleration = (v_next - v) / dt;
    let (position, velocity) = reflect(state.position + v_next * dt, v_next, arena);
    UavState { position, velocity, acceleration, ..*state }
}

fn waypoint_target<R: Rng + ?Sized>(
    state: &UavState,
    spec: &MobilitySpec,
    arena: &Arena,
    dt: f64,
    memory: &mut MotionMemory,
    rng: &mut R,
) -> Vec3 {
    if memory.pause_left > 0.0 {
        memory.pause_left = (memory.pause_left - dt).max(0.0);
        return Vec3::ZERO;
    }
    let wp = match memory.waypoint {
        Some(wp) => wp,
        None => {
            let e = arena.extent();
            let wp = Vec3::new(
                arena.min.x + rng.random::<f64>() * e.x,
                arena.min.y + rng.random::<f64>() * e.y,
                arena.min.z + rng.random::<f64>() * e.z,
            );
            memory.cruise_speed = spec.max_speed * (0.5 + 0.5 * rng.random::<f64>());
            memory.waypoint = Some(wp);
            wp
        }
    };
    let to_wp = wp - state.position;
    let dist = to_wp.norm();
    if dist <= (state.speed() * dt).max(1.0) {
        memory.waypoint = None;
        memory.pause_left = spec.rwp_pause;
        return Vec3::ZERO;
    }
    to_wp / dist * memory.cruise_speed.min(dist / dt)
}

/// Specular reflection of a position back into the arena, flipping the
/// velocity component of every face crossed an odd number of times.
pub fn reflect(mut p: Vec3, mut v: Vec3, arena: &Arena) -> (Vec3, Vec3) {
    for axis in 0..3 {
        let lo = arena.min.component(axis);
        let hi = arena.max.component(axis);
        let mut x = p.component(axis);
        let mut flips = 0u32;
        // bounded: each pass moves x by at least the overshoot
        for _ in 0..64 {
            if x < lo {
                x = 2.0 * lo - x;
                flips += 1;
            } else if x > hi {
                x = 2.0 * hi - x;
                flips += 1;
            } else {
                break;
            }
        }
        *p.component_mut(axis) = x.clamp(lo, hi);
        if flips % 2 == 1 {
            *v.component_mut(axis) = -v.component(axis);
        }
    }
    (p, v)
}
