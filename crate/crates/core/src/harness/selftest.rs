//! Fast oracle and invariant checks runnable from the CLI. Each check
//! compares a library routine against a direct evaluation on seeded random
//! instances.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::Mlp;
use crate::ppo::{clip_objective, discounted_returns, gae};
use crate::recovery::{recovery_accuracy, temporal_hold_recover, FrameWindow};
use crate::sim::{downlink_rates, sample_channel, ChannelParams};
use crate::stream::{bits_per_token, plan_drops, DropMode, MaskedIndexFrame};
use crate::vq::{laplace_smooth, quantize, Codebook, FeatureGrid, IndexFrame};
use crate::{rng_from_seed, SimRng};

type Check = fn(&mut SimRng) -> Result<(), String>;

pub const CHECKS: &[(&str, Check)] = &[
    ("downlink rates vs direct SINR", check_rates),
    ("gae vs double sum", check_gae),
    ("discounted returns vs direct sum", check_returns),
    ("clipped surrogate case split", check_clip),
    ("laplace smoothing preserves total", check_laplace),
    ("ema update vs direct formula", check_ema),
    ("quantize vs exhaustive search", check_quantize),
    ("drop plan within budget on grid", check_drops),
    ("temporal hold on static content", check_hold),
    ("mlp gradient vs finite differences", check_mlp),
];

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    let err = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    if err <= tol {
        Ok(())
    } else {
        Err(format!("{what}: {a} vs {b} (rel err {err:e})"))
    }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn check_rates(rng: &mut SimRng) -> Result<(), String> {
    for _ in 0..100 {
        let p = ChannelParams {
            bandwidth_hz: rng.random_range(1e6..3e7),
            rician_factor: rng.random_range(0.5..20.0),
            ..ChannelParams::default()
        };
        let m = rng.random_range(1..=4);
        let powers: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..5.0)).collect();
        let channels = (0..m)
            .map(|_| {
                let d = rng.random_range(50.0..300.0);
                sample_channel(rng, d, &p)
            })
            .collect::<crate::Result<Vec<_>>>()
            .map_err(e)?;
        let rates = downlink_rates(&powers, &channels, &p).map_err(e)?;
        let total: f64 = powers.iter().zip(&channels).map(|(pw, c)| pw * c.coefficient.norm_sqr()).sum();
        for i in 0..m {
            let own = powers[i] * channels[i].coefficient.norm_sqr();
            let sinr = own / (p.bandwidth_hz * p.noise_psd + (total - own));
            close(rates[i], p.bandwidth_hz * (1.0 + sinr).log2(), 1e-9, "rate")?;
        }
    }
    Ok(())
}

fn check_gae(rng: &mut SimRng) -> Result<(), String> {
    for _ in 0..100 {
        let t = rng.random_range(1..=32);
        let r: Vec<f64> = (0..t).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut v: Vec<f64> = (0..=t).map(|_| rng.random_range(-5.0..5.0)).collect();
        v[t] = 0.0;
        let (g, l) = (rng.random_range(0.5..1.0), rng.random_range(0.5..1.0));
        let a = gae(&r, &v, g, l).map_err(e)?;
        for s in 0..t {
            let want: f64 = (s..t)
                .map(|k| (g * l).powi((k - s) as i32) * (r[k] + g * v[k + 1] - v[k]))
                .sum();
            close(a[s], want, 1e-9, "advantage")?;
        }
    }
    Ok(())
}

fn check_returns(rng: &mut SimRng) -> Result<(), String> {
    for _ in 0..100 {
        let t = rng.random_range(1..=32);
        let r: Vec<f64> = (0..t).map(|_| rng.random_range(-5.0..5.0)).collect();
        let g = rng.random_range(0.1..1.0);
        let out = discounted_returns(&r, g);
        for s in 0..t {
            let want: f64 = (s..t).map(|k| g.powi((k - s) as i32) * r[k]).sum();
            close(out[s], want, 1e-9, "return")?;
        }
    }
    Ok(())
}

fn check_clip(rng: &mut SimRng) -> Result<(), String> {
    for _ in 0..1000 {
        let (r, a, eps): (f64, f64, f64) = (rng.random_range(0.0..3.0), rng.random_range(-4.0..4.0), rng.random_range(0.05..0.5));
        let clipped = r.clamp(1.0 - eps, 1.0 + eps) * a;
        close(clip_objective(r, a, eps), (r * a).min(clipped), 1e-12, "clip")?;
    }
    Ok(())
}

fn check_laplace(rng: &mut SimRng) -> Result<(), String> {
    for _ in 0..100 {
        let k = rng.random_range(2..=64);
        let c: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..10.0)).collect();
        let eps = rng.random_range(1e-6..1e-2);
        let s = laplace_smooth(&c, eps).map_err(e)?;
        let n: f64 = c.iter().sum();
        close(s.iter().sum(), n, 1e-9, "smoothed total")?;
        for (si, ci) in s.iter().zip(&c) {
            close(*si, (ci + eps) / (n + k as f64 * eps) * n, 1e-9, "smoothed count")?;
        }
    }
    Ok(())
}

fn check_ema(rng: &mut SimRng) -> Result<(), String> {
    for _ in 0..100 {
        let (k, dim, h, w) = (rng.random_range(2..=8), rng.random_range(1..=3), rng.random_range(1..=5), 3);
        let (decay, eps) = (rng.random_range(0.5..0.99), 1e-5);
        let mut cb = Codebook::random(rng, k, dim, decay, eps).map_err(e)?;
        let before = cb.clone();
        let values: Vec<f64> = (0..h * w * dim).map(|_| rng.sample(StandardNormal)).collect();
        let z = FeatureGrid::new(h, w, dim, values).map_err(e)?;
        let idx = IndexFrame::new(h, w, (0..h * w).map(|_| rng.random_range(0..k as u32)).collect()).map_err(e)?;
        cb.ema_update(&z, &idx).map_err(e)?;
        let mut counts = vec![0.0; k];
        let mut sums = vec![vec![0.0; dim]; k];
        for (pos, &j) in idx.indices().iter().enumerate() {
            counts[j as usize] += 1.0;
            for (s, x) in sums[j as usize].iter_mut().zip(z.cell(pos)) {
                *s += x;
            }
        }
        let c: Vec<f64> = (0..k)
            .map(|j| decay * before.cluster_size()[j] + (1.0 - decay) * counts[j])
            .collect();
        let n: f64 = c.iter().sum();
        for j in 0..k {
            let smoothed = (c[j] + eps) / (n + k as f64 * eps) * n;
            for d in 0..dim {
                let wsum = decay * before.embedding_sum(j)[d] + (1.0 - decay) * sums[j][d];
                close(cb.entry(j)[d], wsum / smoothed, 1e-9, "codebook entry")?;
            }
        }
    }
    Ok(())
}

fn check_quantize(rng: &mut SimRng) -> Result<(), String> {
    for _ in 0..100 {
        let (h, w, k, dim) = (rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(2..=64), 2);
        let cb = Codebook::random(rng, k, dim, 0.9, 1e-5).map_err(e)?;
        let values: Vec<f64> = (0..h * w)
            .flat_map(|_| {
                if rng.random_bool(0.3) {
                    cb.entry(rng.random_range(0..k)).to_vec()
                } else {
                    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
                }
            })
            .collect();
        let z = FeatureGrid::new(h, w, dim, values).map_err(e)?;
        let (idx, _) = quantize(&z, &cb).map_err(e)?;
        for pos in 0..h * w {
            let d = |j: usize| -> f64 { z.cell(pos).iter().zip(cb.entry(j)).map(|(a, b)| (a - b).powi(2)).sum() };
            let best = (0..k).fold(0, |b, j| if d(j) < d(b) { j } else { b });
            if idx.indices()[pos] as usize != best {
                return Err(format!("position {pos}: got {} expected {best}", idx.indices()[pos]));
            }
        }
    }
    Ok(())
}

fn check_drops(rng: &mut SimRng) -> Result<(), String> {
    for _ in 0..500 {
        let (h, w) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let s = 1usize << rng.random_range(1..=10);
        let frame = IndexFrame::filled(h, w, 0);
        let target = rng.random_range(0.0..(h * w) as f64 * 12.0);
        let mode = if rng.random_bool(0.5) { DropMode::Stride } else { DropMode::Random };
        let planned = plan_drops(&frame, s, target, mode, rng.random()).map_err(e)?;
        let bits = planned.payload_bits();
        let step = bits_per_token(s).map_err(e)? as u64;
        if bits as f64 > target || bits % step != 0 {
            return Err(format!("{bits} bits for target {target} with step {step}"));
        }
    }
    Ok(())
}

fn check_hold(rng: &mut SimRng) -> Result<(), String> {
    for _ in 0..100 {
        let (h, w, s) = (rng.random_range(1..=8), rng.random_range(1..=8), 16usize);
        let truth = IndexFrame::new(h, w, (0..h * w).map(|_| rng.random_range(0..s as u32)).collect()).map_err(e)?;
        let n = h * w;
        let mut frames = Vec::new();
        let newest_mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let covering: Vec<bool> = newest_mask.iter().map(|&d| !d && rng.random_bool(0.5)).collect();
        frames.push(MaskedIndexFrame::with_mask(&truth, s, covering).map_err(e)?);
        frames.push(MaskedIndexFrame::with_mask(&truth, s, newest_mask.clone()).map_err(e)?);
        let window = FrameWindow::from_frames(frames).map_err(e)?;
        let rec = temporal_hold_recover(&window, None).map_err(e)?;
        let acc = recovery_accuracy(&rec, &truth, &newest_mask).map_err(e)?;
        if acc != 1.0 {
            return Err(format!("accuracy {acc} on static content"));
        }
    }
    Ok(())
}

fn check_mlp(rng: &mut SimRng) -> Result<(), String> {
    for _ in 0..5 {
        let net = Mlp::new(&[3, 5, 2], rng).map_err(e)?;
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let up = [0.7, -1.3];
        let trace = net.forward_trace(&x).map_err(e)?;
        let mut grad = vec![0.0; net.param_count()];
        net.backward(&trace, &up, &mut grad).map_err(e)?;
        let base = net.params();
        let loss = |p: &[f64]| -> Result<f64, String> {
            let mut n = net.clone();
            n.set_params(p).map_err(e)?;
            let y = n.forward(&x).map_err(e)?;
            Ok(y[0] * up[0] + y[1] * up[1])
        };
        for i in 0..base.len() {
            let h = 1e-6;
            let mut p = base.clone();
            p[i] += h;
            let plus = loss(&p)?;
            p[i] -= 2.0 * h;
            let fd = (plus - loss(&p)?) / (2.0 * h);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            if err > 1e-4 {
                return Err(format!("parameter {i}: analytic {} vs numeric {fd}", grad[i]));
            }
        }
    }
    Ok(())
}

/// Runs every check, printing one line each; true when all pass.
pub fn run(out: &mut dyn Write) -> std::io::Result<bool> {
    let mut all = true;
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        let mut rng = rng_from_seed(1000 + i as u64);
        match check(&mut rng) {
            Ok(()) => writeln!(out, "PASS  {name}")?,
            Err(msg) => {
                all = false;
                writeln!(out, "FAIL  {name}: {msg}")?;
            }
        }
    }
    Ok(all)
}
