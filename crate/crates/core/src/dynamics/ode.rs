//! Dormand-Prince 8(5,3) with Hairer's step control, on complex state slices.

use crate::{Error, Result, C64};

/// Relative and absolute tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.rtol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must satisfy 0 < rtol < 1, atol > 0 (got rtol={}, atol={})",
                self.rtol, self.atol
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Tolerances { rtol: self.rtol * factor, atol: self.atol * factor }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const MAX_STEPS: usize = 2_000_000;

const C: [f64; 12] = [
    0.0,
    0.05260015195876773,
    0.0789002279381516,
    0.1183503419072274,
    0.2816496580927726,
    0.3333333333333333,
    0.25,
    0.3076923076923077,
    0.6512820512820513,
    0.6,
    0.8571428571428571,
    1.0,
];

// nonzero lower-triangular entries, (column, value)
const A: [&[(usize, f64)]; 12] = [
    &[],
    &[(0, 0.05260015195876773)],
    &[(0, 0.0197250569845379), (1, 0.0591751709536137)],
    &[(0, 0.02958758547680685), (2, 0.08876275643042054)],
    &[(0, 0.2413651341592667), (2, -0.8845494793282861), (3, 0.924834003261792)],
    &[(0, 0.037037037037037035), (3, 0.17082860872947386), (4, 0.12546768756682242)],
    &[
        (0, 0.037109375),
        (3, 0.17025221101954405),
        (4, 0.06021653898045596),
        (5, -0.017578125),
    ],
    &[
        (0, 0.03709200011850479),
        (3, 0.17038392571223998),
        (4, 0.10726203044637328),
        (5, -0.015319437748624402),
        (6, 0.008273789163814023),
    ],
    &[
        (0, 0.6241109587160757),
        (3, -3.3608926294469414),
        (4, -0.868219346841726),
        (5, 27.59209969944671),
        (6, 20.154067550477894),
        (7, -43.48988418106996),
    ],
    &[
        (0, 0.47766253643826434),
        (3, -2.4881146199716677),
        (4, -0.590290826836843),
        (5, 21.230051448181193),
        (6, 15.279233632882423),
        (7, -33.28821096898486),
        (8, -0.020331201708508627),
    ],
    &[
        (0, -0.9371424300859873),
        (3, 5.186372428844064),
        (4, 1.0914373489967295),
        (5, -8.149787010746927),
        (6, -18.52006565999696),
        (7, 22.739487099350505),
        (8, 2.4936055526796523),
        (9, -3.0467644718982196),
    ],
    &[
        (0, 2.273310147516538),
        (3, -10.53449546673725),
        (4, -2.0008720582248625),
        (5, -17.9589318631188),
        (6, 27.94888452941996),
        (7, -2.8589982771350235),
        (8, -8.87285693353063),
        (9, 12.360567175794303),
        (10, 0.6433927460157636),
    ],
];

const B: [(usize, f64); 8] = [
    (0, 0.054293734116568765),
    (5, 4.450312892752409),
    (6, 1.8915178993145003),
    (7, -5.801203960010585),
    (8, 0.3111643669578199),
    (9, -0.1521609496625161),
    (10, 0.20136540080403034),
    (11, 0.04471061572777259),
];

const ER: [(usize, f64); 8] = [
    (0, 0.01312004499419488),
    (5, -1.2251564463762044),
    (6, -0.4957589496572502),
    (7, 1.6643771824549864),
    (8, -0.35032884874997366),
    (9, 0.3341791187130175),
    (10, 0.08192320648511571),
    (11, -0.022355307863886294),
];

const BHH: [f64; 3] = [0.2440944881889764, 0.7338466882816118, 0.022058823529411766];

const SAFE: f64 = 0.9;
const FAC_GROW: f64 = 6.0;
const FAC_SHRINK: f64 = 0.333;

fn scale(tol: &Tolerances, a: C64, b: C64) -> (f64, f64) {
    (
        tol.atol + tol.rtol * a.re.abs().max(b.re.abs()),
        tol.atol + tol.rtol * a.im.abs().max(b.im.abs()),
    )
}

fn weighted_norm(tol: &Tolerances, y: &[C64], v: &[C64]) -> f64 {
    let mut s = 0.0;
    for (yi, vi) in y.iter().zip(v) {
        let (sr, si) = scale(tol, *yi, *yi);
        s += (vi.re / sr).powi(2) + (vi.im / si).powi(2);
    }
    (s / (2 * y.len()) as f64).sqrt()
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` in place.
///
/// `post` runs on every accepted state before the next derivative is taken;
/// the Lindblad propagator uses it to restore Hermiticity.
pub fn integrate<F, P>(
    mut rhs: F,
    mut post: P,
    t0: f64,
    t1: f64,
    y: &mut [C64],
    tol: Tolerances,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    P: FnMut(&mut [C64]),
{
    tol.validate()?;
    let mut stats = OdeStats::default();
    let span = t1 - t0;
    if !span.is_finite() || !t0.is_finite() {
        return Err(Error::Integration { t: t0, reason: "non-finite time interval".into() });
    }
    if span == 0.0 || y.is_empty() {
        return Ok(stats);
    }
    let dir = span.signum();
    let n = y.len();
    let zero = C64::new(0.0, 0.0);
    let mut k: Vec<Vec<C64>> = (0..12).map(|_| vec![zero; n]).collect();
    let mut y_stage = vec![zero; n];
    let mut y_new = vec![zero; n];

    rhs(t0, y, &mut k[0]);
    stats.evaluations += 1;

    let mut h = initial_step(&mut rhs, t0, y, &k[0], span, &tol, &mut y_stage, &mut y_new);
    stats.evaluations += 1;
    let mut t = t0;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= MAX_STEPS {
            return Err(Error::Integration { t, reason: format!("exceeded {MAX_STEPS} steps") });
        }
        let remaining = t1 - t;
        let last = (h.abs() >= remaining.abs()) || (remaining.abs() - h.abs()).abs() <= 1e-14 * t1.abs().max(1.0);
        if last {
            h = remaining;
        }
        if h.abs() <= 1e-14 * t.abs().max(1.0) || !h.is_finite() {
            return Err(Error::Integration {
                t,
                reason: format!("step size underflow (h = {h:e}, t1 = {t1})"),
            });
        }

        for s in 1..12 {
            for i in 0..n {
                let mut acc = zero;
                for &(j, a) in A[s] {
                    acc += k[j][i] * a;
                }
                y_stage[i] = y[i] + acc * h;
            }
            rhs(t + C[s] * h, &y_stage, &mut k[s]);
        }
        stats.evaluations += 11;

        let mut err5 = 0.0;
        let mut err3 = 0.0;
        for i in 0..n {
            let mut incr = zero;
            for &(j, b) in &B {
                incr += k[j][i] * b;
            }
            let mut e5 = zero;
            for &(j, e) in &ER {
                e5 += k[j][i] * e;
            }
            let e3 = incr - k[0][i] * BHH[0] - k[8][i] * BHH[1] - k[11][i] * BHH[2];
            y_new[i] = y[i] + incr * h;
            let (sr, si) = scale(&tol, y[i], y_new[i]);
            err5 += (e5.re / sr).powi(2) + (e5.im / si).powi(2);
            err3 += (e3.re / sr).powi(2) + (e3.im / si).powi(2);
        }
        let mut deno = err5 + 0.01 * err3;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err5 * (1.0 / ((2 * n) as f64 * deno)).sqrt();
        if !err.is_finite() {
            return Err(Error::Integration { t, reason: "non-finite error estimate".into() });
        }

        let fac11 = err.powf(0.125);
        let fac = (fac11 / SAFE).clamp(1.0 / FAC_GROW, 1.0 / FAC_SHRINK);
        let mut h_new = h / fac;

        if err <= 1.0 {
            post(&mut y_new);
            y.copy_from_slice(&y_new);
            t = if last { t1 } else { t + h };
            stats.accepted += 1;
            if last {
                return Ok(stats);
            }
            rhs(t, y, &mut k[0]);
            stats.evaluations += 1;
            if last_rejected {
                h_new = dir * h_new.abs().min(h.abs());
            }
            last_rejected = false;
        } else {
            h_new = h / (fac11 / SAFE).min(1.0 / FAC_SHRINK);
            last_rejected = true;
            stats.rejected += 1;
        }
        h = h_new;
    }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y: &[C64],
    f0: &[C64],
    span: f64,
    tol: &Tolerances,
    y1: &mut [C64],
    f1: &mut [C64],
) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let dir = span.signum();
    let d0 = weighted_norm(tol, y, y);
    let d1 = weighted_norm(tol, y, f0);
    let mut h = if d0 <= 1e-10 || d1 <= 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span.abs());
    for i in 0..y.len() {
        y1[i] = y[i] + f0[i] * (dir * h);
    }
    rhs(t0 + dir * h, y1, f1);
    let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = weighted_norm(tol, y, &diff) / h;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / dm).powf(1.0 / 8.0) };
    dir * (100.0 * h).min(h1).min(span.abs())
}
