//! Adaptive 8(5,3) Dormand–Prince integrator for small fixed-size systems.
//!
//! Used for every radial integration in the crate. States are plain arrays so
//! the hot loop stays allocation free.

use crate::error::{numerical, Result};

const C: [f64; 12] = [
    0.0,
    5.260_015_195_876_773e-2,
    7.890_022_793_815_16e-2,
    1.183_503_419_072_274e-1,
    2.816_496_580_927_726e-1,
    3.333_333_333_333_333e-1,
    0.25,
    3.076_923_076_923_077e-1,
    6.512_820_512_820_513e-1,
    0.6,
    8.571_428_571_428_571e-1,
    1.0,
];

const A: [[f64; 11]; 12] = [
    [0.0; 11],
    [5.260_015_195_876_773e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.972_505_698_453_79e-2, 5.917_517_095_361_37e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.958_758_547_680_685e-2, 0.0, 8.876_275_643_042_054e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        2.413_651_341_592_667e-1,
        0.0,
        -8.845_494_793_282_861e-1,
        9.248_340_032_617_92e-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.703_703_703_703_703_5e-2,
        0.0,
        0.0,
        1.708_286_087_294_738_6e-1,
        1.254_676_875_668_224_2e-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.710_937_5e-2,
        0.0,
        0.0,
        1.702_522_110_195_440_5e-1,
        6.021_653_898_045_596e-2,
        -1.757_812_5e-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.709_200_011_850_479e-2,
        0.0,
        0.0,
        1.703_839_257_122_399_8e-1,
        1.072_620_304_463_732_8e-1,
        -1.531_943_774_862_440_2e-2,
        8.273_789_163_814_023e-3,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        6.241_109_587_160_757e-1,
        0.0,
        0.0,
        -3.360_892_629_446_941_4,
        -8.682_193_468_417_26e-1,
        2.759_209_969_944_671e1,
        2.015_406_755_047_789_4e1,
        -4.348_988_418_106_996e1,
        0.0,
        0.0,
        0.0,
    ],
    [
        4.776_625_364_382_643_4e-1,
        0.0,
        0.0,
        -2.488_114_619_971_667_7,
        -5.902_908_268_368_43e-1,
        2.123_005_144_818_119_3e1,
        1.527_923_363_288_242_3e1,
        -3.328_821_096_898_486e1,
        -2.033_120_170_850_862_7e-2,
        0.0,
        0.0,
    ],
    [
        -9.371_424_300_859_873e-1,
        0.0,
        0.0,
        5.186_372_428_844_064,
        1.091_437_348_996_729_5,
        -8.149_787_010_746_927,
        -1.852_006_565_999_696e1,
        2.273_948_709_935_050_5e1,
        2.493_605_552_679_652_3,
        -3.046_764_471_898_219_6,
        0.0,
    ],
    [
        2.273_310_147_516_538,
        0.0,
        0.0,
        -1.053_449_546_673_725e1,
        -2.000_872_058_224_862_5,
        -1.795_893_186_311_88e1,
        2.794_888_452_941_996e1,
        -2.858_998_277_135_023_5,
        -8.872_856_933_530_63,
        1.236_056_717_579_430_3e1,
        6.433_927_460_157_636e-1,
    ],
];

const B: [f64; 12] = [
    5.429_373_411_656_876_5e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199e-1,
    -1.521_609_496_625_161e-1,
    2.013_654_008_040_303_4e-1,
    4.471_061_572_777_259e-2,
];

const ER: [f64; 12] = [
    1.312_004_499_419_488e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502e-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6e-1,
    3.341_791_187_130_175e-1,
    8.192_320_648_511_571e-2,
    -2.235_530_786_388_629_4e-2,
];

const BHH: [f64; 3] = [
    2.440_944_881_889_764e-1,
    7.338_466_882_816_118e-1,
    2.205_882_352_941_176_6e-2,
];

/// Returned by step observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome<const N: usize> {
    pub x: f64,
    pub y: [f64; N],
    /// Step size the controller would try next; reuse it when continuing.
    pub h_next: f64,
    pub stats: Stats,
    pub stopped: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Dop853 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for Dop853 {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, max_steps: 200_000, h_max: f64::INFINITY }
    }
}

fn rms<const N: usize>(v: &[f64; N], sk: &[f64; N]) -> f64 {
    let s: f64 = v.iter().zip(sk).map(|(a, s)| (a / s).powi(2)).sum();
    (s / N as f64).sqrt()
}

impl Dop853 {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    fn scales<const N: usize>(&self, a: &[f64; N], b: &[f64; N]) -> [f64; N] {
        let mut s = [0.0; N];
        for i in 0..N {
            s[i] = self.atol + self.rtol * a[i].abs().max(b[i].abs());
        }
        s
    }

    fn initial_step<const N: usize, F>(&self, f: &F, x: f64, y: &[f64; N], f0: &[f64; N], dir: f64) -> f64
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let sk = self.scales(y, y);
        let d0 = rms(y, &sk);
        let d1 = rms(f0, &sk);
        let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.h_max);
        let mut y1 = *y;
        for i in 0..N {
            y1[i] += dir * h0 * f0[i];
        }
        let f1 = f(x + dir * h0, &y1);
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = f1[i] - f0[i];
        }
        let d2 = rms(&diff, &sk) / h0;
        let m = d1.max(d2);
        let h1 = if m <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / m).powf(1.0 / 8.0) };
        (100.0 * h0).min(h1).min(self.h_max)
    }

    /// Integrate from `x0` to `x1` (either direction), calling `observe` after
    /// every accepted step. The observer may end the run early.
    pub fn integrate<const N: usize, F, O>(
        &self,
        f: F,
        x0: f64,
        y0: [f64; N],
        x1: f64,
        h_start: Option<f64>,
        mut observe: O,
    ) -> Result<Outcome<N>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        O: FnMut(f64, &[f64; N]) -> Control,
    {
        let mut stats = Stats::default();
        let mut x = x0;
        let mut y = y0;
        if x1 == x0 {
            return Ok(Outcome { x, y, h_next: h_start.unwrap_or(0.0), stats, stopped: false });
        }
        let dir = (x1 - x0).signum();
        let mut k1 = f(x, &y);
        stats.evals += 1;
        let mut h = match h_start {
            Some(h) if h > 0.0 => h.min(self.h_max),
            _ => {
                stats.evals += 1;
                self.initial_step(&f, x, &y, &k1, dir)
            }
        };
        let mut last_rejected = false;
        let mut k = [[0.0; N]; 12];
        loop {
            if (x1 - x) * dir <= 4.0 * f64::EPSILON * x.abs().max(x1.abs()) {
                return Ok(Outcome { x: x1, y, h_next: h, stats, stopped: false });
            }
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(numerical(format!("ODE step budget exhausted at x = {x}")));
            }
            let mut last = false;
            if (x + dir * h - x1) * dir >= 0.0 {
                h = (x1 - x).abs();
                last = true;
            }
            if h <= 1e-15 * x.abs().max(1e-300) {
                return Err(numerical(format!("ODE step size underflow at x = {x}")));
            }
            let hs = dir * h;
            k[0] = k1;
            for s in 1..12 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += hs * a * kj[i];
                        }
                    }
                }
                k[s] = f(x + C[s] * hs, &ys);
            }
            stats.evals += 11;
            let mut incr = [0.0; N];
            let mut e5 = [0.0; N];
            for (s, ks) in k.iter().enumerate() {
                for i in 0..N {
                    incr[i] += B[s] * ks[i];
                    e5[i] += ER[s] * ks[i];
                }
            }
            let mut y_new = y;
            let mut e3 = [0.0; N];
            for i in 0..N {
                y_new[i] += hs * incr[i];
                e3[i] = incr[i] - BHH[0] * k[0][i] - BHH[1] * k[8][i] - BHH[2] * k[11][i];
            }
            if y_new.iter().any(|v| !v.is_finite()) {
                stats.rejected += 1;
                h *= 0.25;
                last_rejected = true;
                continue;
            }
            let sk = self.scales(&y, &y_new);
            let mut err5 = 0.0;
            let mut err3 = 0.0;
            for i in 0..N {
                err5 += (e5[i] / sk[i]).powi(2);
                err3 += (e3[i] / sk[i]).powi(2);
            }
            let deno = err5 + 0.01 * err3;
            let err = if deno > 0.0 { h * err5 * (1.0 / (N as f64 * deno)).sqrt() } else { 0.0 };
            if err <= 1.0 {
                stats.accepted += 1;
                x = if last { x1 } else { x + hs };
                y = y_new;
                k1 = f(x, &y);
                stats.evals += 1;
                let mut fac = if err > 0.0 { 0.9 * err.powf(-1.0 / 8.0) } else { 6.0 };
                fac = fac.clamp(0.333, 6.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                last_rejected = false;
                let h_used = h;
                h = (h * fac).min(self.h_max);
                if observe(x, &y) == Control::Stop {
                    return Ok(Outcome { x, y, h_next: h, stats, stopped: true });
                }
                if last {
                    return Ok(Outcome { x, y, h_next: h.max(h_used), stats, stopped: false });
                }
            } else {
                stats.rejected += 1;
                last_rejected = true;
                let fac = (0.9 * err.powf(-1.0 / 8.0)).max(0.333);
                h *= fac;
            }
        }
    }

    /// Integrate through an ordered list of output abscissae, returning the
    /// state at each one.
    pub fn integrate_points<const N: usize, F>(&self, f: F, x0: f64, y0: [f64; N], xs: &[f64]) -> Result<Vec<[f64; N]>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut out = Vec::with_capacity(xs.len());
        let mut x = x0;
        let mut y = y0;
        let mut h = None;
        for &t in xs {
            let o = self.integrate(&f, x, y, t, h, |_, _| Control::Continue)?;
            x = t;
            y = o.y;
            if o.h_next > 0.0 {
                h = Some(o.h_next);
            }
            out.push(y);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_rows_sum_to_nodes() {
        for s in 0..12 {
            let sum: f64 = A[s].iter().sum();
            assert!((sum - C[s]).abs() < 1e-12, "row {s}: {sum} vs {}", C[s]);
        }
        let bsum: f64 = B.iter().sum();
        assert!((bsum - 1.0).abs() < 1e-13);
        let esum: f64 = ER.iter().sum();
        assert!(esum.abs() < 1e-13);
    }

    #[test]
    fn exponential_growth() {
        let o = Dop853::default()
            .integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 2.0, None, |_, _| Control::Continue)
            .unwrap();
        assert!((o.y[0] - 2f64.exp()).abs() < 1e-11 * 2f64.exp());
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let o = Dop853::default()
            .integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 10.0, [10f64.sin(), 10f64.cos()], 0.5, None, |_, _| Control::Continue)
            .unwrap();
        assert!((o.y[0] - 0.5f64.sin()).abs() < 1e-11);
        assert!((o.y[1] - 0.5f64.cos()).abs() < 1e-11);
    }

    #[test]
    fn eighth_order_convergence_on_fixed_steps() {
        // Loose tolerance and a capped step: halving the cap should shrink the
        // error by roughly 2^8.
        let run = |hmax: f64| {
            let s = Dop853 { rtol: 1.0, atol: 1.0, h_max: hmax, max_steps: 100_000 };
            let o = s
                .integrate(|x, y: &[f64; 1]| [y[0] * x.cos()], 0.0, [1.0], 3.0, Some(hmax), |_, _| Control::Continue)
                .unwrap();
            (o.y[0] - 3f64.sin().exp()).abs()
        };
        let e1 = run(0.3);
        let e2 = run(0.15);
        let order = (e1 / e2).log2();
        assert!(order > 6.5, "observed order {order}");
    }

    #[test]
    fn observer_can_stop() {
        let o = Dop853::default()
            .integrate(|_, _y: &[f64; 1]| [1.0], 0.0, [0.0], 100.0, None, |x, _| if x > 1.0 { Control::Stop } else { Control::Continue })
            .unwrap();
        assert!(o.stopped && o.x > 1.0 && o.x < 100.0);
    }

    #[test]
    fn output_points() {
        let ys = Dop853::default()
            .integrate_points(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], &[0.5, 1.0, 2.0])
            .unwrap();
        for (x, y) in [0.5f64, 1.0, 2.0].iter().zip(&ys) {
            assert!((y[0] - (-x).exp()).abs() < 1e-12);
        }
    }
}
