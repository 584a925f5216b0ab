//! The multi-UAV streaming environment seen by the allocator.
//!
//! Per slot: observe channels, map each UAV's command to a power, a bitrate
//! on the token grid and a flight step, compute interference-limited rates,
//! chunk delays and the team QoE, push the slot's token frame through drop
//! planning, channel loss and recovery, then move the UAVs and resample the
//! channels at their new positions.

use serde::{Deserialize, Serialize};

use crate::qoe::{qoe_slot, slot_delay, transmission_delay, QoeWeights};
use crate::recovery::{recovery_accuracy, FrameWindow, Recoverer, TemporalHold};
use crate::sim::{
    advance_position, corridor_for, distance_to_ground, downlink_rates, sample_channel, ChannelParams,
    ChannelRealization, CorridorRegion, GeometryConfig, UavState, NUM_CORRIDORS,
};
use crate::stream::{
    apply_channel_loss, bits_per_frame, bits_per_token, chunk_size, plan_drops, snap_bitrate, DropMode,
};
use crate::vq::{generate_feature_sequence, quantize, Codebook, IndexFrame};
use crate::{rng_from_seed, Error, Result, SimRng};

/// Per-UAV command: power, bitrate, then the corridor-local flight step
/// (radial, lateral, vertical).
pub const ACTION_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub h: usize,
    pub w: usize,
    /// Codebook size `S`; a power of two.
    pub codebook_size: usize,
    pub feature_dim: usize,
    pub temporal_corr: f64,
    pub ema_decay: f64,
    pub smoothing_eps: f64,
    pub lambda_commit: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            h: 16,
            w: 16,
            codebook_size: 64,
            feature_dim: 4,
            temporal_corr: 0.95,
            ema_decay: 0.9,
            smoothing_eps: 1e-5,
            lambda_commit: crate::vq::DEFAULT_LAMBDA_COMMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub drop_mode: DropMode,
    /// Independent per-index loss probability on the air interface.
    pub channel_loss_prob: f64,
    /// Frames in the recovery window `N`.
    pub window: usize,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            drop_mode: DropMode::Stride,
            channel_loss_prob: 0.05,
            window: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_uavs: usize,
    pub slots: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Adds the previous bitrate to each UAV's observation.
    pub observe_previous_bitrate: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_uavs: 4,
            slots: 50,
            p_min: 1.0,
            p_max: 5.0,
            observe_previous_bitrate: true,
        }
    }
}

/// Everything an environment instance needs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Scenario {
    pub env: EnvConfig,
    pub geometry: GeometryConfig,
    pub channel: ChannelParams,
    pub qoe: QoeWeights,
    pub codec: CodecConfig,
    pub stream: StreamConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.channel.validate()?;
        self.qoe.validate()?;
        let e = &self.env;
        if e.num_uavs == 0 || e.num_uavs > NUM_CORRIDORS {
            return Err(Error::InvalidParameter(format!(
                "env: num_uavs must be in 1..={NUM_CORRIDORS}"
            )));
        }
        if e.slots == 0 {
            return Err(Error::InvalidParameter("env: slots must be >= 1".into()));
        }
        if !(e.p_min > 0.0 && e.p_min <= e.p_max) {
            return Err(Error::InvalidParameter("env: need 0 < p_min <= p_max".into()));
        }
        let c = &self.codec;
        bits_per_token(c.codebook_size)?;
        if c.h == 0 || c.w == 0 || c.feature_dim == 0 {
            return Err(Error::InvalidParameter("codec: dims must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&c.temporal_corr) {
            return Err(Error::InvalidParameter("codec: temporal_corr must lie in [0, 1]".into()));
        }
        if !(c.ema_decay > 0.0 && c.ema_decay < 1.0) || !(c.smoothing_eps > 0.0) {
            return Err(Error::InvalidParameter("codec: need 0 < ema_decay < 1 and smoothing_eps > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.stream.channel_loss_prob) {
            return Err(Error::InvalidParameter("stream: channel_loss_prob must lie in [0, 1]".into()));
        }
        if self.stream.window == 0 {
            return Err(Error::InvalidParameter("stream: window must be >= 1".into()));
        }
        snap_bitrate(self.qoe.v_min, c.codebook_size, self.qoe.slot, self.qoe.v_min, self.qoe.v_max)?;
        Ok(())
    }

    pub fn observation_dim(&self) -> usize {
        5 + usize::from(self.env.observe_previous_bitrate)
    }

    /// Concatenated observations plus the elapsed-time fraction.
    pub fn critic_observation_dim(&self) -> usize {
        self.env.num_uavs * self.observation_dim() + 1
    }

    /// `log10` of the LoS power gain at distance `r0`; channel observations
    /// are reported relative to it.
    fn reference_log_gain(&self) -> f64 {
        let c = &self.channel;
        2.0 * (c.gain * c.free_space_factor(self.geometry.radius_r0).powf(c.exponent_los)).log10()
    }
}

/// Diagnostics of one slot, averaged over UAVs where relevant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotInfo {
    pub qoe: f64,
    pub mean_rate: f64,
    pub recovery_accuracy: f64,
    pub slot_delay: f64,
    pub rebuffer_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub info: SlotInfo,
}

struct Stream {
    truth: Vec<IndexFrame>,
    window: FrameWindow,
    recoverer: TemporalHold,
}

pub struct Environment {
    scenario: Scenario,
    corridors: Vec<CorridorRegion>,
    uavs: Vec<UavState>,
    channels: Vec<ChannelRealization>,
    previous_bitrates: Vec<f64>,
    streams: Vec<Stream>,
    slot: usize,
    rng: SimRng,
    reference_log_gain: f64,
}

impl Environment {
    /// Starts an episode. UAVs are placed uniformly in their corridors and
    /// each stream gets its own synthetic token sequence.
    pub fn new(scenario: Scenario, seed: u64) -> Result<Self> {
        use rand::Rng;
        scenario.validate()?;
        let mut rng = rng_from_seed(seed);
        let m = scenario.env.num_uavs;
        let corridors: Vec<CorridorRegion> = (1..=m)
            .map(|id| corridor_for(id, &scenario.geometry))
            .collect::<Result<_>>()?;
        let v0 = snap_bitrate(
            scenario.qoe.v_min,
            scenario.codec.codebook_size,
            scenario.qoe.slot,
            scenario.qoe.v_min,
            scenario.qoe.v_max,
        )?;
        let uavs: Vec<UavState> = corridors
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let b = c.bounds();
                let position = [0, 1, 2].map(|k| {
                    let (lo, hi) = b[k];
                    if hi > lo {
                        rng.random_range(lo..=hi)
                    } else {
                        lo
                    }
                });
                UavState {
                    uav_id: i + 1,
                    position,
                    power: scenario.env.p_max,
                    bitrate: v0,
                }
            })
            .collect();

        let c = &scenario.codec;
        let codebook = Codebook::random(&mut rng, c.codebook_size, c.feature_dim, c.ema_decay, c.smoothing_eps)?;
        let mut streams = Vec::with_capacity(m);
        for _ in 0..m {
            let features = generate_feature_sequence(
                &mut rng,
                scenario.env.slots,
                c.h,
                c.w,
                c.feature_dim,
                c.temporal_corr,
            )?;
            let truth = features
                .iter()
                .map(|f| quantize(f, &codebook).map(|(idx, _)| idx))
                .collect::<Result<_>>()?;
            streams.push(Stream {
                truth,
                window: FrameWindow::new(scenario.stream.window)?,
                recoverer: TemporalHold::new(),
            });
        }

        let mut env = Self {
            reference_log_gain: scenario.reference_log_gain(),
            scenario,
            corridors,
            previous_bitrates: vec![v0; m],
            uavs,
            channels: Vec::new(),
            streams,
            slot: 0,
            rng,
        };
        env.resample_channels()?;
        Ok(env)
    }

    fn resample_channels(&mut self) -> Result<()> {
        self.channels.clear();
        for u in &self.uavs {
            let d = distance_to_ground(u, &self.scenario.geometry)?;
            self.channels.push(sample_channel(&mut self.rng, d, &self.scenario.channel)?);
        }
        Ok(())
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.scenario.env.slots
    }

    pub fn uavs(&self) -> &[UavState] {
        &self.uavs
    }

    pub fn channels(&self) -> &[ChannelRealization] {
        &self.channels
    }

    /// Local observation of every UAV.
    pub fn observations(&self) -> Vec<Vec<f64>> {
        let e = &self.scenario.env;
        self.uavs
            .iter()
            .zip(&self.channels)
            .zip(&self.corridors)
            .zip(&self.previous_bitrates)
            .map(|(((u, ch), corridor), &v_prev)| {
                let gain = ch.power_gain().max(f64::MIN_POSITIVE);
                let mut obs = Vec::with_capacity(self.scenario.observation_dim());
                obs.push(gain.log10() - self.reference_log_gain);
                obs.push(u.power / e.p_max);
                obs.extend_from_slice(&corridor.normalized(u.position));
                if e.observe_previous_bitrate {
                    obs.push(v_prev / self.scenario.qoe.v_max);
                }
                obs
            })
            .collect()
    }

    pub fn critic_observation(&self, local: &[Vec<f64>]) -> Vec<f64> {
        let mut out: Vec<f64> = local.concat();
        out.push(self.slot as f64 / self.scenario.env.slots as f64);
        out
    }

    /// Maps a raw command to `(power, bitrate, world flight vector)`.
    pub fn map_command(&self, uav: usize, command: &[f64]) -> (f64, f64, [f64; 3]) {
        let e = &self.scenario.env;
        let q = &self.scenario.qoe;
        let unit = |v: f64| ((v + 1.0) / 2.0).clamp(0.0, 1.0);
        let power = e.p_min + (e.p_max - e.p_min) * unit(command[0]);
        let raw_rate = q.v_min + (q.v_max - q.v_min) * unit(command[1]);
        let bitrate = snap_bitrate(raw_rate, self.scenario.codec.codebook_size, q.slot, q.v_min, q.v_max)
            .expect("bounds validated at construction");
        let a_max = self.scenario.geometry.max_step_a_max;
        let local = [2, 3, 4].map(|k| a_max * command[k].clamp(-1.0, 1.0));
        (power, bitrate, self.corridors[uav].local_to_world(local))
    }

    pub fn step(&mut self, commands: &[Vec<f64>]) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::InvalidParameter("episode already finished".into()));
        }
        let m = self.uavs.len();
        if commands.len() != m || commands.iter().any(|c| c.len() != ACTION_DIM) {
            return Err(Error::ShapeMismatch(format!("expected {m} commands of length {ACTION_DIM}")));
        }
        let mapped: Vec<_> = (0..m).map(|i| self.map_command(i, &commands[i])).collect();
        let powers: Vec<f64> = mapped.iter().map(|x| x.0).collect();
        let bitrates: Vec<f64> = mapped.iter().map(|x| x.1).collect();

        let sc = self.scenario;
        let rates = downlink_rates(&powers, &self.channels, &sc.channel)?;
        let chunks: Vec<f64> = bitrates.iter().map(|&v| chunk_size(v, sc.qoe.slot)).collect();
        let delays: Vec<f64> = chunks.iter().zip(&rates).map(|(&b, &r)| transmission_delay(b, r)).collect();
        let slot_delay = slot_delay(&delays)?;
        let previous = if self.slot == 0 {
            bitrates.clone()
        } else {
            self.previous_bitrates.clone()
        };
        let qoe = qoe_slot(&bitrates, &previous, slot_delay, &sc.qoe)?;

        let full_bits = bits_per_frame(sc.codec.h, sc.codec.w, sc.codec.codebook_size)? as f64;
        let mut accuracy = 0.0;
        for i in 0..m {
            let deliverable = (rates[i] * sc.qoe.slot / chunks[i]).min(1.0);
            let stream = &mut self.streams[i];
            let truth = &stream.truth[self.slot];
            let planned = plan_drops(
                truth,
                sc.codec.codebook_size,
                full_bits * deliverable,
                sc.stream.drop_mode,
                self.slot as u64,
            )?;
            let received = apply_channel_loss(&planned, sc.stream.channel_loss_prob, &mut self.rng)?;
            let mask = received.mask().to_vec();
            stream.window.push(received)?;
            let recovered = stream.recoverer.recover(&stream.window)?;
            accuracy += recovery_accuracy(&recovered, truth, &mask)?;
        }

        for (i, (power, bitrate, step)) in mapped.into_iter().enumerate() {
            let moved = advance_position(&self.uavs[i], step, &sc.geometry)?;
            self.uavs[i] = UavState { power, bitrate, ..moved };
        }
        self.previous_bitrates = bitrates;
        self.slot += 1;
        self.resample_channels()?;

        let capped = slot_delay.min(sc.qoe.delay_cap());
        Ok(StepOutcome {
            reward: qoe,
            done: self.is_done(),
            info: SlotInfo {
                qoe,
                mean_rate: rates.iter().sum::<f64>() / m as f64,
                recovery_accuracy: accuracy / m as f64,
                slot_delay,
                rebuffer_s: (capped - sc.qoe.delay_constraint).max(0.0),
            },
        })
    }
}
