//! Closed-form models written out independently of the library, used as
//! oracles by the integration tests and the acceptance run.
#![allow(dead_code)]

pub const K_B: f64 = 1.380649e-23;
pub const H: f64 = 6.62607015e-34;
pub const MU_B: f64 = 9.2740100783e-24;

pub fn zeeman_hz(g: f64, b: f64) -> f64 {
    g * MU_B * b / H
}

pub fn lorentzian(f: f64, center: f64, fwhm: f64, amp: f64) -> f64 {
    let hw = fwhm / 2.0;
    amp * hw * hw / ((f - center).powi(2) + hw * hw)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// x = g μ_B B / (2 k_B Ts)
fn half_x(g: f64, b: f64, ts: f64) -> f64 {
    g * MU_B * b / (2.0 * K_B * ts)
}

pub fn flip_flop(g: f64, b: f64, ts: f64, w_ff: f64) -> f64 {
    w_ff * half_x(g, b, ts).tanh().powi(2)
}

pub fn direct(g: f64, b: f64, ts: f64, w_d: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    w_d * (g * b).powi(5) / half_x(g, b, ts).tanh()
}

pub fn spin_temperature(t: f64, t_min: f64) -> f64 {
    (t_min * t_min + t * t).sqrt()
}

pub fn rate(g: f64, b: f64, ts: f64, w_ff: f64, w_d: f64) -> f64 {
    flip_flop(g, b, ts, w_ff) + direct(g, b, ts, w_d)
}

/// Logistic line area, scale · e^x / (1 + e^x) with x = g μ_B B / (k_B Ts).
pub fn logistic_area(g: f64, b: f64, ts: f64, scale: f64) -> f64 {
    let x = g * MU_B * b / (K_B * ts);
    scale / (1.0 + (-x).exp())
}

pub fn fraction_within(values: &[(f64, f64)], truth: f64, k: f64) -> f64 {
    let hits = values
        .iter()
        .filter(|(v, s)| (v - truth).abs() <= k * s)
        .count();
    hits as f64 / values.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Gaussian noise from a small xorshift + Box-Muller generator, so the test
/// draws do not share code with the library's noise source.
pub struct Noise(u64);

impl Noise {
    pub fn new(seed: u64) -> Self {
        Noise(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) | 1)
    }

    pub fn uniform(&mut self) -> f64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        ((x >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn gauss(&mut self) -> f64 {
        let (u, v) = (self.uniform(), self.uniform());
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }

    /// y + σ·N(0,1) with σ = fraction · max|y|
    pub fn peak_scaled(&mut self, y: &[f64], fraction: f64) -> Vec<f64> {
        let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        y.iter()
            .map(|v| v + fraction * peak * self.gauss())
            .collect()
    }

    /// y + σ_i·N(0,1) with σ_i = fraction · |y_i|
    pub fn relative(&mut self, y: &[f64], fraction: f64) -> Vec<f64> {
        y.iter()
            .map(|v| v + fraction * v.abs() * self.gauss())
            .collect()
    }
}
