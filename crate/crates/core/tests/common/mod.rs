//! Random instances that are feasible by construction: a witness schedule is
//! drawn first and the demand is read off it.

#![allow(dead_code)]

use dedpoz::instance::{GeneratingUnit, LossModel, ProhibitedZone, SystemInstance};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All lossless data sits on a 0.05 MW lattice so that a grid of that step
/// contains the segment endpoints and ramp limits exactly.
pub const LATTICE: f64 = 0.05;

fn lat(k: i64) -> f64 {
    k as f64 / 20.0
}

struct Shape {
    p_min: (i64, i64),
    width: (i64, i64),
    zone_width: (i64, i64),
    ramp: (i64, i64),
    beta: (f64, f64),
    gamma: (f64, f64),
}

const TINY: Shape = Shape {
    p_min: (100, 1000),
    width: (80, 180),
    zone_width: (10, 30),
    ramp: (20, 100),
    beta: (1.0, 10.0),
    gamma: (0.001, 0.05),
};

const LARGE: Shape = Shape {
    p_min: (1000, 3000),
    width: (2000, 5000),
    zone_width: (200, 600),
    ramp: (600, 1600),
    beta: (1.5, 6.0),
    gamma: (0.0005, 0.006),
};

/// Unit in lattice steps, with zones kept at least 10 steps apart and from
/// the range ends.
fn random_unit(rng: &mut ChaCha8Rng, shape: &Shape, max_zones: usize) -> GeneratingUnit {
    let lo = rng.gen_range(shape.p_min.0..=shape.p_min.1);
    let width = rng.gen_range(shape.width.0..=shape.width.1);
    let hi = lo + width;
    let mut zones = Vec::new();
    let wanted = rng.gen_range(0..=max_zones);
    let mut cursor = lo + 10;
    for z in 0..wanted {
        let remaining = (wanted - z) as i64;
        let room = hi - 10 - cursor - remaining * (shape.zone_width.0 + 10);
        if room <= 0 {
            break;
        }
        let start = cursor + rng.gen_range(0..=room / remaining);
        let zw = rng.gen_range(shape.zone_width.0..=shape.zone_width.1).min(hi - 10 - start);
        if zw < 1 {
            break;
        }
        zones.push(ProhibitedZone::new(lat(start), lat(start + zw)));
        cursor = start + zw + 10;
    }
    let ramp = rng.gen_range(shape.ramp.0..=shape.ramp.1);
    let ramp_down = rng.gen_range(shape.ramp.0..=shape.ramp.1);
    GeneratingUnit {
        id: 0,
        alpha: (rng.gen_range(0.0..50.0_f64) * 100.0).round() / 100.0,
        beta: (rng.gen_range(shape.beta.0..shape.beta.1) * 1000.0).round() / 1000.0,
        gamma: (rng.gen_range(shape.gamma.0..shape.gamma.1) * 1e5).round() / 1e5,
        p_min: lat(lo),
        p_max: lat(hi),
        ramp_up: lat(ramp),
        ramp_down: lat(ramp_down),
        prohibited_zones: zones,
        p_initial: None,
    }
}

/// Lattice points (in steps) of a unit's allowed region.
fn allowed(unit: &GeneratingUnit) -> Vec<i64> {
    let k = |v: f64| (v * 20.0).round() as i64;
    let mut out = Vec::new();
    let mut start = k(unit.p_min);
    for z in &unit.prohibited_zones {
        out.extend(start..=k(z.lo));
        start = k(z.hi);
    }
    out.extend(start..=k(unit.p_max));
    out
}

/// Witness outputs `[t][i]` in lattice steps following ramp limits.
fn witness(rng: &mut ChaCha8Rng, units: &[GeneratingUnit], periods: usize) -> Vec<Vec<i64>> {
    let grids: Vec<Vec<i64>> = units.iter().map(allowed).collect();
    let mut rows: Vec<Vec<i64>> = Vec::with_capacity(periods);
    for t in 0..periods {
        let row = units
            .iter()
            .zip(&grids)
            .enumerate()
            .map(|(i, (u, g))| {
                if t == 0 {
                    return g[rng.gen_range(0..g.len())];
                }
                let prev = rows[t - 1][i];
                let (up, dn) = ((u.ramp_up * 20.0).round() as i64, (u.ramp_down * 20.0).round() as i64);
                let reach: Vec<i64> = g.iter().copied().filter(|&p| p - prev <= up && prev - p <= dn).collect();
                reach[rng.gen_range(0..reach.len())]
            })
            .collect();
        rows.push(row);
    }
    rows
}

fn reserve_for(units: &[GeneratingUnit], p: &[f64], demand: f64) -> f64 {
    let headroom: f64 = units.iter().zip(p).map(|(u, &x)| u.reserve_headroom(x)).sum();
    ((0.05 * demand).min(0.9 * headroom) * 100.0).floor() / 100.0
}

/// Lossless instance with `N` in 1..=3, `T` in 2..=4 and at most two zones per unit.
pub fn tiny_lossless(rng: &mut ChaCha8Rng) -> SystemInstance {
    let n = rng.gen_range(1..=3);
    let periods = rng.gen_range(2..=4);
    tiny_lossless_sized(rng, n, periods)
}

pub fn tiny_lossless_sized(rng: &mut ChaCha8Rng, n: usize, periods: usize) -> SystemInstance {
    let mut units: Vec<GeneratingUnit> = (0..n).map(|_| random_unit(rng, &TINY, 2)).collect();
    for (i, u) in units.iter_mut().enumerate() {
        u.id = i + 1;
    }
    let w = witness(rng, &units, periods);
    if rng.gen_bool(0.3) {
        for (u, &p) in units.iter_mut().zip(&w[0]) {
            u.p_initial = Some(lat(p));
        }
    }
    let mut demand = Vec::new();
    let mut reserve = Vec::new();
    for row in &w {
        let p: Vec<f64> = row.iter().map(|&k| lat(k)).collect();
        let d = lat(row.iter().sum());
        reserve.push(reserve_for(&units, &p, d));
        demand.push(d);
    }
    SystemInstance {
        units,
        demand,
        reserve,
        loss_model: None,
    }
}

/// Random symmetric PSD matrix `(MᵀM + c I) / n`.
fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let m: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            b[i][j] = (0..n).map(|k| m[k][i] * m[k][j]).sum::<f64>() / n as f64;
        }
        b[i][i] += 0.2;
    }
    b
}

/// Lossy instance with `N` in 2..=4 and losses of at most 1–3 % of demand at the
/// witness, which balances exactly against the true loss.
pub fn lossy(rng: &mut ChaCha8Rng) -> SystemInstance {
    let n = rng.gen_range(2..=4);
    let periods = rng.gen_range(2..=3);
    let mut units: Vec<GeneratingUnit> = (0..n).map(|_| random_unit(rng, &LARGE, 2)).collect();
    for (i, u) in units.iter_mut().enumerate() {
        u.id = i + 1;
    }
    let w = witness(rng, &units, periods);
    let outputs: Vec<Vec<f64>> = w.iter().map(|r| r.iter().map(|&k| lat(k)).collect()).collect();

    let base = 100.0;
    let mut b = random_psd(rng, n);
    let b0: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.002..0.002)).collect();
    let b00 = rng.gen_range(0.0..0.0005);
    let mut loss = LossModel {
        b00,
        b0,
        b_matrix: b.clone(),
        base_mva: base,
    };
    // Scale B so the total loss stays within the target share in every period.
    let target = rng.gen_range(0.01..0.03);
    let scale = outputs
        .iter()
        .map(|p| {
            let total: f64 = p.iter().sum();
            let linear = base * b00 + p.iter().zip(&loss.b0).map(|(x, c)| x * c).sum::<f64>();
            (target * total - linear).max(0.002 * total) / loss.quadratic_loss_mw(p)
        })
        .fold(f64::INFINITY, f64::min);
    for row in &mut b {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    loss.b_matrix = b;

    let mut demand = Vec::new();
    let mut reserve = Vec::new();
    for p in &outputs {
        let l = dedpoz::evaluate_loss_mw(&loss, p).unwrap();
        let d = p.iter().sum::<f64>() - l;
        reserve.push(reserve_for(&units, p, d));
        demand.push(d);
    }
    SystemInstance {
        units,
        demand,
        reserve,
        loss_model: Some(loss),
    }
}

/// Benchmark 6-unit, 24-period optimal outputs (MW), rounded to 0.01 MW.
pub const REFERENCE_SCHEDULE: [[f64; 6]; 24] = [
    [383.75, 121.25, 210.00, 76.25, 113.75, 50.00],
    [380.00, 121.25, 208.25, 68.75, 113.75, 50.00],
    [380.00, 121.25, 205.00, 68.75, 110.00, 50.00],
    [380.00, 116.25, 205.00, 68.75, 110.00, 50.00],
    [380.00, 121.25, 205.00, 68.75, 110.00, 50.00],
    [391.75, 121.25, 210.00, 76.25, 113.75, 50.00],
    [395.00, 128.75, 210.00, 80.00, 125.25, 50.00],
    [395.00, 139.25, 210.00, 92.50, 136.25, 50.00],
    [425.00, 140.00, 247.50, 104.12, 150.00, 59.38],
    [425.00, 160.00, 247.50, 107.50, 150.62, 59.38],
    [425.00, 165.00, 262.50, 120.00, 156.63, 71.88],
    [440.00, 165.00, 262.50, 123.75, 168.75, 75.00],
    [425.00, 165.00, 251.88, 120.00, 156.25, 71.88],
    [455.00, 166.00, 262.50, 123.75, 168.75, 75.00],
    [455.00, 168.00, 262.50, 123.75, 168.75, 85.00],
    [455.00, 165.00, 262.50, 123.75, 168.75, 75.00],
    [429.75, 165.00, 262.50, 120.00, 168.75, 75.00],
    [425.00, 165.00, 262.50, 120.00, 157.63, 71.88],
    [425.00, 160.00, 247.50, 107.50, 156.25, 62.75],
    [425.00, 140.00, 240.00, 97.50, 139.50, 50.00],
    [395.00, 139.25, 210.00, 92.50, 136.25, 50.00],
    [395.00, 128.75, 210.00, 79.00, 121.25, 50.00],
    [395.00, 128.75, 210.00, 76.25, 115.00, 50.00],
    [388.75, 121.25, 210.00, 76.25, 113.75, 50.00],
];
