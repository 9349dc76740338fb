//! Straight-line transcription of the plug-in influence function, used as an
//! independent oracle. Every risk set and count is recomputed by brute force
//! over all subjects; nothing here shares code with the library.
//!
//! Readings adopted (the same ones the library documents):
//! * the indicator term uses the treated at-risk fraction at the subject's own
//!   observed time;
//! * the two centering sums (the `Y1/n` and `Y0/n` terms) run over every event
//!   time, because their population counterparts are integrated over the whole
//!   follow-up window rather than against the subject's own at-risk process.

#![allow(dead_code)]

pub struct Toy {
    pub arm: Vec<u8>,
    pub time: Vec<f64>,
    pub status: Vec<u8>,
}

fn at_risk(toy: &Toy, arm: u8, t: f64) -> f64 {
    let mut c = 0.0;
    for i in 0..toy.arm.len() {
        if toy.arm[i] == arm && toy.time[i] >= t {
            c += 1.0;
        }
    }
    c
}

fn failures(toy: &Toy, arm: u8, t: f64) -> f64 {
    let mut c = 0.0;
    for i in 0..toy.arm.len() {
        if toy.arm[i] == arm && toy.time[i] == t && toy.status[i] == 1 {
            c += 1.0;
        }
    }
    c
}

fn event_times(toy: &Toy) -> Vec<f64> {
    let mut ts: Vec<f64> = Vec::new();
    for i in 0..toy.arm.len() {
        if toy.status[i] == 1 && !ts.contains(&toy.time[i]) {
            ts.push(toy.time[i]);
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts
}

fn increment(d: f64, y: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        d / y
    }
}

/// Unstandardized plug-in influence values, one per subject.
pub fn raw_influence(toy: &Toy) -> Vec<f64> {
    let n = toy.arm.len() as f64;
    let ts = event_times(toy);
    let mut out = Vec::new();
    for i in 0..toy.arm.len() {
        let a = toy.arm[i] as f64;
        let ti = toy.time[i];

        let y0_own = at_risk(toy, 0, ti);
        let y1_own = at_risk(toy, 1, ti);
        let e_own = y1_own / (y0_own + y1_own);
        let first = (a - e_own) * toy.status[i] as f64;

        let mut s_a = 0.0; // A_i * sum dG0
        let mut s_b = 0.0; // sum e dG0
        let mut s_c = 0.0; // A_i * sum (1-e) D
        let mut s_d = 0.0; // A_i * sum (1-e)^2 D
        let mut s_e = 0.0; // sum Y1/n (1-e)^2 D, all t
        let mut s_f = 0.0; // (1-A_i) * sum e^2 D
        let mut s_g = 0.0; // sum Y0/n e^2 D, all t
        for &t in &ts {
            let y0 = at_risk(toy, 0, t);
            let y1 = at_risk(toy, 1, t);
            let e = y1 / (y0 + y1);
            let g0 = increment(failures(toy, 0, t), y0);
            let g1 = increment(failures(toy, 1, t), y1);
            let diff = g1 - g0;
            if t <= ti {
                s_a += a * g0;
                s_b += e * g0;
                s_c += a * (1.0 - e) * diff;
                s_d += a * (1.0 - e) * (1.0 - e) * diff;
                s_f += (1.0 - a) * e * e * diff;
            }
            s_e += y1 / n * (1.0 - e) * (1.0 - e) * diff;
            s_g += y0 / n * e * e * diff;
        }
        out.push(first - s_a + s_b - s_c + s_d - s_e + s_f - s_g);
    }
    out
}

/// Standardized values: raw values divided by sqrt(pi (1 - pi) d / n).
pub fn influence(toy: &Toy) -> Vec<f64> {
    let n = toy.arm.len() as f64;
    let n1: f64 = toy.arm.iter().map(|&a| a as f64).sum();
    let pi = n1 / n;
    let d: f64 = toy.status.iter().map(|&s| s as f64).sum();
    let scale = (pi * (1.0 - pi) * d / n).sqrt();
    raw_influence(toy).into_iter().map(|v| v / scale).collect()
}

/// Log-rank numerator G from the per-subject definition.
pub fn numerator(toy: &Toy) -> f64 {
    let n = toy.arm.len() as f64;
    let mut g = 0.0;
    for i in 0..toy.arm.len() {
        if toy.status[i] == 1 {
            let t = toy.time[i];
            let e = at_risk(toy, 1, t) / (at_risk(toy, 0, t) + at_risk(toy, 1, t));
            g += toy.arm[i] as f64 - e;
        }
    }
    g / n
}

/// Plug-in non-centrality (1/n) sum_t Y1 (1 - e) (dG1 - dG0).
pub fn expected_numerator(toy: &Toy) -> f64 {
    let n = toy.arm.len() as f64;
    let mut s = 0.0;
    for t in event_times(toy) {
        let y0 = at_risk(toy, 0, t);
        let y1 = at_risk(toy, 1, t);
        let e = y1 / (y0 + y1);
        let diff = increment(failures(toy, 1, t), y1) - increment(failures(toy, 0, t), y0);
        s += y1 * (1.0 - e) * diff;
    }
    s / n
}

/// The hand-specified six-subject dataset (three per arm, one tie across arms).
pub fn toy_six() -> Toy {
    Toy {
        arm: vec![0, 0, 0, 1, 1, 1],
        time: vec![1.0, 3.0, 4.0, 2.0, 3.0, 5.0],
        status: vec![1, 1, 0, 1, 0, 1],
    }
}

/// Twenty fixed toy datasets with ties, censoring and unbalanced arms,
/// generated by a tiny LCG so they do not depend on any library RNG.
pub fn fixed_toys() -> Vec<Toy> {
    let mut state: u64 = 0x2545_f491_4f6c_dd1d;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 33) as u32
    };
    let mut toys = vec![toy_six()];
    while toys.len() < 20 {
        let n = 4 + (next() % 27) as usize;
        let grid = 3 + next() % 10;
        let mut toy = Toy {
            arm: Vec::new(),
            time: Vec::new(),
            status: Vec::new(),
        };
        for i in 0..n {
            toy.arm.push(if i < 2 { i as u8 } else { (next() % 2) as u8 });
            toy.time.push((next() % grid) as f64 * 0.5);
            toy.status.push((next() % 3 != 0) as u8);
        }
        if toy.status.iter().any(|&s| s == 1) {
            toys.push(toy);
        }
    }
    toys
}
