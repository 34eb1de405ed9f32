//! Two-layer digital twin of a six-motor arm.
//!
//! Motor level: each joint tracks its commanded angle through a second-order
//! servo. Faults on motors 1-4 rewrite the servo output after an onset step.
//! Kinematic level: desired and realized joint vectors go through the same
//! forward kinematics; the sample holds the desired end-effector position and
//! the residual desired − realized.
//!
//! The target ("real") domain differs from the simulator by per-motor gain
//! offsets, an extra first-order lag standing in for viscous friction, and
//! observation noise on the measured position.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ClassLabel, Dataset, DomainLabel, FaultMode, Provenance, SequenceSample};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, tag, Rng};

pub const JOINTS: usize = 6;

/// Second-order joint servo `q̈ = ω²(K·q_ref − q) − 2ζω·q̇`.
/// An infinite `natural_freq` is an ideal servo: `q = K·q_ref`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServoParams {
    #[serde(with = "maybe_infinite")]
    pub natural_freq: f64,
    pub damping: f64,
    pub gain: f64,
}

impl ServoParams {
    pub const IDEAL: ServoParams = ServoParams {
        natural_freq: f64::INFINITY,
        damping: 1.0,
        gain: 1.0,
    };
}

/// JSON has no infinity; ideal servos serialise their bandwidth as `"inf"`.
mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad frequency {t:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultConfig {
    /// Onset is drawn uniformly from this window, as fractions of the sequence.
    pub onset_window: (f64, f64),
    /// Steady-state offset as a fraction of each joint's range.
    pub steady_state_fraction: f64,
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self {
            onset_window: (0.1, 0.9),
            steady_state_fraction: 0.05,
        }
    }
}

/// Simulator-to-reality discrepancy, applied to target-domain samples only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GapConfig {
    /// Relative servo gain error per motor.
    pub gain_offsets: [f64; JOINTS],
    /// Time constant (s) of the extra friction lag; 0 disables it.
    pub lag_time_constant: f64,
    /// Std (m) of Gaussian noise on the measured end-effector position.
    pub noise_std: f64,
}

impl GapConfig {
    pub const NONE: GapConfig = GapConfig {
        gain_offsets: [0.0; JOINTS],
        lag_time_constant: 0.0,
        noise_std: 0.0,
    };

    /// Alternating `±magnitude` gain offsets.
    pub fn alternating_gains(magnitude: f64) -> [f64; JOINTS] {
        std::array::from_fn(|i| if i % 2 == 0 { magnitude } else { -magnitude })
    }

    pub fn is_none(&self) -> bool {
        self.gain_offsets.iter().all(|&g| g == 0.0)
            && self.lag_time_constant == 0.0
            && self.noise_std == 0.0
    }
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            gain_offsets: Self::alternating_gains(0.03),
            lag_time_constant: 0.05,
            noise_std: 0.001,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwinConfig {
    pub seq_len: usize,
    /// Trajectory duration in seconds; the sample step is `duration / seq_len`.
    pub duration: f64,
    pub motors: [ServoParams; JOINTS],
    pub link_lengths: [f64; JOINTS],
    /// Joint angles are sampled within `home ± half_range`.
    pub home: [f64; JOINTS],
    pub half_range: [f64; JOINTS],
    /// Waypoints per trajectory, joined by smoothstep segments.
    pub waypoints: usize,
    pub fault: FaultConfig,
    pub gap: GapConfig,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            seq_len: 1000,
            duration: 30.0,
            motors: [
                ServoParams {
                    natural_freq: 30.0,
                    damping: 0.8,
                    gain: 1.0,
                },
                ServoParams {
                    natural_freq: 28.0,
                    damping: 0.8,
                    gain: 1.0,
                },
                ServoParams {
                    natural_freq: 32.0,
                    damping: 0.75,
                    gain: 1.0,
                },
                ServoParams {
                    natural_freq: 35.0,
                    damping: 0.8,
                    gain: 1.0,
                },
                ServoParams {
                    natural_freq: 40.0,
                    damping: 0.7,
                    gain: 1.0,
                },
                ServoParams {
                    natural_freq: 45.0,
                    damping: 0.7,
                    gain: 1.0,
                },
            ],
            link_lengths: [0.3, 0.25, 0.25, 0.1, 0.1, 0.05],
            home: [0.0, 0.6, 0.0, 0.9, 0.0, 0.5],
            half_range: [1.2, 0.6, 1.2, 0.6, 1.2, 0.6],
            waypoints: 5,
            fault: FaultConfig::default(),
            gap: GapConfig::default(),
        }
    }
}

impl TwinConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seq_len < 10 {
            return bad(format!("sequence length {} is too short", self.seq_len));
        }
        if !(self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        for (i, m) in self.motors.iter().enumerate() {
            if !(m.damping > 0.0) || !(m.natural_freq > 0.0) || !m.gain.is_finite() {
                return bad(format!(
                    "motor {} has invalid servo parameters {m:?}",
                    i + 1
                ));
            }
        }
        if self.link_lengths.iter().any(|&l| !(l > 0.0)) {
            return bad("link lengths must be positive".into());
        }
        if self.half_range.iter().any(|&r| !(r > 0.0)) {
            return bad("joint ranges must be positive".into());
        }
        if self.waypoints < 2 {
            return bad("trajectories need at least two waypoints".into());
        }
        let (lo, hi) = self.fault.onset_window;
        if !(0.1 <= lo && lo <= hi && hi <= 0.9) {
            return bad(format!(
                "fault onset window {lo}..{hi} must lie within 0.1..0.9"
            ));
        }
        if !(self.fault.steady_state_fraction >= 0.0) {
            return bad("steady-state fraction must be ≥ 0".into());
        }
        let g = &self.gap;
        if !(g.noise_std >= 0.0) || !(g.lag_time_constant >= 0.0) {
            return bad("gap noise std and lag must be ≥ 0".into());
        }
        if g.gain_offsets.iter().any(|v| !v.is_finite() || *v <= -1.0) {
            return bad("gap gain offsets must be finite and > -1".into());
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.seq_len as f64
    }

    /// Onset step window `[first, last]` for this sequence length.
    pub fn onset_range(&self) -> (usize, usize) {
        let n = self.seq_len as f64;
        let (lo, hi) = self.fault.onset_window;
        ((lo * n).round() as usize, (hi * n).round() as usize)
    }
}

/// End-effector position of the serial chain. Joints alternate z, y, z, …
/// axes; every link extends along its local z.
pub fn forward_kinematics(links: &[f64; JOINTS], q: &[f64; JOINTS]) -> [f64; 3] {
    let mut rot = Rotation3::identity();
    let mut pos = Vector3::zeros();
    for i in 0..JOINTS {
        let axis = if i % 2 == 0 {
            Vector3::z_axis()
        } else {
            Vector3::y_axis()
        };
        rot *= Rotation3::from_axis_angle(&axis, q[i]);
        pos += rot * Vector3::new(0.0, 0.0, links[i]);
    }
    [pos.x, pos.y, pos.z]
}

/// Everything `simulate_sample` computes, kept for inspection.
#[derive(Clone, Debug)]
pub struct SimulationTrace {
    pub desired_joints: Vec<[f64; JOINTS]>,
    /// Servo output before fault injection.
    pub tracked_joints: Vec<[f64; JOINTS]>,
    pub realized_joints: Vec<[f64; JOINTS]>,
    pub onset: Option<usize>,
    /// Signed steady-state offset applied to the faulty motor, if any.
    pub offset: Option<f64>,
    pub sample: SequenceSample,
}

fn smoothstep(s: f64) -> f64 {
    0.5 - 0.5 * (PI * s).cos()
}

fn sample_trajectory(cfg: &TwinConfig, rng: &mut Rng) -> Vec<[f64; JOINTS]> {
    let wps: Vec<[f64; JOINTS]> = (0..cfg.waypoints)
        .map(|_| {
            std::array::from_fn(|j| cfg.home[j] + cfg.half_range[j] * rng.random_range(-1.0..=1.0))
        })
        .collect();
    let segments = (cfg.waypoints - 1) as f64;
    (0..cfg.seq_len)
        .map(|t| {
            let u = t as f64 / (cfg.seq_len - 1) as f64 * segments;
            let k = (u.floor() as usize).min(cfg.waypoints - 2);
            let s = smoothstep(u - k as f64);
            std::array::from_fn(|j| wps[k][j] + (wps[k + 1][j] - wps[k][j]) * s)
        })
        .collect()
}

/// Integrates one servo over the commanded trace with semi-implicit Euler
/// sub-steps, starting at rest on the commanded start.
fn track(servo: ServoParams, gain: f64, command: &[f64], dt: f64) -> Vec<f64> {
    if servo.natural_freq.is_infinite() {
        return command.iter().map(|&c| gain * c).collect();
    }
    let w = servo.natural_freq;
    let sub = ((w * dt) / 0.02).ceil().max(1.0) as usize;
    let h = dt / sub as f64;
    let mut q = gain * command[0];
    let mut v = 0.0;
    let mut out = Vec::with_capacity(command.len());
    for &c in command {
        out.push(q);
        for _ in 0..sub {
            let a = w * w * (gain * c - q) - 2.0 * servo.damping * w * v;
            v += h * a;
            q += h * v;
        }
    }
    out
}

fn first_order_lag(signal: &mut [f64], tau: f64, dt: f64) {
    let alpha = dt / (tau + dt);
    let mut y = signal[0];
    for s in signal.iter_mut() {
        y += alpha * (*s - y);
        *s = y;
    }
}

/// Simulates one sample and returns the internal joint traces with it.
pub fn simulate_trace(
    cfg: &TwinConfig,
    class: ClassLabel,
    domain: DomainLabel,
    seed: u64,
) -> Result<SimulationTrace> {
    cfg.validate()?;
    let n = cfg.seq_len;
    let dt = cfg.dt();
    let desired = sample_trajectory(cfg, &mut stream(seed, &[tag("trajectory")]));
    let target = domain == DomainLabel::Target;

    let mut tracked = vec![[0.0; JOINTS]; n];
    for j in 0..JOINTS {
        let command: Vec<f64> = desired.iter().map(|q| q[j]).collect();
        let gain = cfg.motors[j].gain
            * if target {
                1.0 + cfg.gap.gain_offsets[j]
            } else {
                1.0
            };
        let mut out = track(cfg.motors[j], gain, &command, dt);
        if target && cfg.gap.lag_time_constant > 0.0 {
            first_order_lag(&mut out, cfg.gap.lag_time_constant, dt);
        }
        for (t, v) in out.into_iter().enumerate() {
            tracked[t][j] = v;
        }
    }

    let mut realized = tracked.clone();
    let mut onset = None;
    let mut offset = None;
    if let Some((motor, mode)) = class.fault_spec() {
        if motor >= 4 {
            return Err(Error::Config(format!(
                "class {class} maps to undiagnosed motor"
            )));
        }
        let mut rng = stream(seed, &[tag("fault"), class.id() as u64]);
        let (lo, hi) = cfg.onset_range();
        let t0 = rng.random_range(lo..=hi).min(n - 1);
        onset = Some(t0);
        match mode {
            FaultMode::Stuck => {
                let frozen = tracked[t0][motor];
                realized[t0..].iter_mut().for_each(|q| q[motor] = frozen);
            }
            FaultMode::SteadyStateError => {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let delta = sign * cfg.fault.steady_state_fraction * 2.0 * cfg.half_range[motor];
                offset = Some(delta);
                realized[t0..].iter_mut().for_each(|q| q[motor] += delta);
            }
        }
    }

    let noise = if target && cfg.gap.noise_std > 0.0 {
        Some(Normal::new(0.0, cfg.gap.noise_std).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let mut noise_rng = stream(seed, &[tag("noise")]);
    let mut features = Vec::with_capacity(n * 6);
    for t in 0..n {
        let want = forward_kinematics(&cfg.link_lengths, &desired[t]);
        let mut got = forward_kinematics(&cfg.link_lengths, &realized[t]);
        if let Some(dist) = &noise {
            got.iter_mut()
                .for_each(|v| *v += dist.sample(&mut noise_rng));
        }
        features.extend_from_slice(&want);
        features.extend((0..3).map(|k| want[k] - got[k]));
    }
    let sample = SequenceSample::new(features, n, Some(class), domain)?;
    Ok(SimulationTrace {
        desired_joints: desired,
        tracked_joints: tracked,
        realized_joints: realized,
        onset,
        offset,
        sample,
    })
}

pub fn simulate_sample(
    cfg: &TwinConfig,
    class: ClassLabel,
    domain: DomainLabel,
    seed: u64,
) -> Result<SequenceSample> {
    simulate_trace(cfg, class, domain, seed).map(|t| t.sample)
}

/// Human-readable name of the trajectory sampler, recorded in provenance.
pub const TRAJECTORY_SAMPLER: &str =
    "uniform joint waypoints within home±half_range, smoothstep-interpolated";

/// Source: every source trajectory under all nine classes, gap off.
/// Target: one sample per target trajectory, classes round-robin, gap on.
pub fn generate_corpus(
    cfg: &TwinConfig,
    n_source_traj: usize,
    n_target_traj: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    if n_source_traj == 0 {
        return Err(Error::Config(
            "at least one source trajectory is required".into(),
        ));
    }
    let provenance = Provenance::Generated {
        root_seed: seed,
        n_source_traj,
        n_target_traj,
        twin: Box::new(cfg.clone()),
        trajectory_sampler: TRAJECTORY_SAMPLER.to_string(),
    };
    let mut source = Vec::with_capacity(n_source_traj * ClassLabel::COUNT);
    for i in 0..n_source_traj {
        let traj_seed = derive_seed(seed, &[tag("source"), i as u64]);
        for class in ClassLabel::all() {
            source.push(simulate_sample(cfg, class, DomainLabel::Source, traj_seed)?);
        }
    }
    let mut target = Vec::with_capacity(n_target_traj);
    for i in 0..n_target_traj {
        let traj_seed = derive_seed(seed, &[tag("target"), i as u64]);
        let class = ClassLabel::new(i % ClassLabel::COUNT)?;
        target.push(simulate_sample(cfg, class, DomainLabel::Target, traj_seed)?);
    }
    Ok((
        Dataset {
            samples: source,
            provenance: provenance.derived("source domain"),
        },
        Dataset {
            samples: target,
            provenance: provenance.derived("target domain"),
        },
    ))
}
