//! Monotone piecewise-cubic (Fritsch–Carlson) interpolation of positive data in
//! log-log coordinates, with power-law continuation beyond both ends and exact
//! tail integrals.

use crate::error::{Error, Result};

// 8-point Gauss–Legendre on [-1, 1]
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];
const SUBDIVISIONS: usize = 4;

#[derive(Debug, Clone)]
pub struct LogLogTable {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
    // ∫_{t_0}^{t_j} of the interpolant in linear coordinates
    cumulative: Vec<f64>,
    // ∫_{t_j}^{t_last}
    remaining: Vec<f64>,
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

impl LogLogTable {
    pub fn new(t: &[f64], values: &[f64]) -> Result<Self> {
        if t.len() != values.len() || t.len() < 2 {
            return Err(Error::Domain(
                "table needs at least two (abscissa, value) pairs of equal length".into(),
            ));
        }
        if t.iter().any(|&v| !(v > 0.0 && v.is_finite())) || values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(
                "table abscissae and values must be positive and finite".into(),
            ));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("table abscissae must be strictly increasing".into()));
        }
        let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let slope = pchip_slopes(&x, &y);
        let mut table = Self {
            x,
            y,
            slope,
            cumulative: Vec::new(),
            remaining: Vec::new(),
        };
        let n = table.x.len();
        let segments: Vec<f64> = (0..n - 1)
            .map(|k| table.segment_integral(k, table.x[k], table.x[k + 1]))
            .collect();
        let mut cumulative = vec![0.0; n];
        for k in 0..n - 1 {
            cumulative[k + 1] = cumulative[k] + segments[k];
        }
        let mut remaining = vec![0.0; n];
        for k in (0..n - 1).rev() {
            remaining[k] = remaining[k + 1] + segments[k];
        }
        table.cumulative = cumulative;
        table.remaining = remaining;
        Ok(table)
    }

    pub fn left_exponent(&self) -> f64 {
        self.slope[0]
    }

    pub fn right_exponent(&self) -> f64 {
        *self.slope.last().expect("non-empty")
    }

    fn log_eval(&self, lx: f64) -> f64 {
        let n = self.x.len();
        if lx <= self.x[0] {
            return self.y[0] + self.slope[0] * (lx - self.x[0]);
        }
        if lx >= self.x[n - 1] {
            return self.y[n - 1] + self.slope[n - 1] * (lx - self.x[n - 1]);
        }
        let k = self.segment(lx);
        self.hermite(k, lx)
    }

    fn segment(&self, lx: f64) -> usize {
        match self.x.binary_search_by(|v| v.partial_cmp(&lx).expect("finite")) {
            Ok(k) => k.min(self.x.len() - 2),
            Err(k) => k - 1,
        }
    }

    fn hermite(&self, k: usize, lx: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let s = (lx - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.slope[k] + h01 * self.y[k + 1] + h11 * h * self.slope[k + 1]
    }

    /// ∫ exp(P(y)) e^y dy over [a, b] inside segment k.
    fn segment_integral(&self, k: usize, a: f64, b: f64) -> f64 {
        let width = (b - a) / SUBDIVISIONS as f64;
        let mut total = 0.0;
        for j in 0..SUBDIVISIONS {
            let lo = a + j as f64 * width;
            let mid = lo + 0.5 * width;
            for (node, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let yv = mid + 0.5 * width * node;
                total += w * 0.5 * width * (self.hermite(k, yv) + yv).exp();
            }
        }
        total
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.log_eval(t.ln()).exp()
    }

    /// `∫_0^t` of the interpolant. Requires a left exponent above −1.
    pub fn integral_from_zero(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let lx = t.ln();
        let s0 = self.slope[0];
        if lx <= self.x[0] {
            return self.eval(t) * t / (s0 + 1.0);
        }
        let t0 = self.x[0].exp();
        let head = self.y[0].exp() * t0 / (s0 + 1.0);
        head + self.integral_from_first(lx)
    }

    /// `∫_t^∞` of the interpolant. Requires a right exponent below −1.
    pub fn integral_to_infinity(&self, t: f64) -> f64 {
        let n = self.x.len();
        let sn = self.slope[n - 1];
        let lx = t.ln();
        if lx >= self.x[n - 1] {
            return self.eval(t) * t / (-sn - 1.0);
        }
        let tn = self.x[n - 1].exp();
        let tail = self.y[n - 1].exp() * tn / (-sn - 1.0);
        let total = self.remaining[0];
        if lx <= self.x[0] {
            let s0 = self.slope[0];
            // ∫_t^{t0} c τ^{s0} dτ
            let t0 = self.x[0].exp();
            let head = if (s0 + 1.0).abs() < 1e-14 {
                self.y[0].exp() * t0 * (self.x[0] - lx)
            } else {
                (self.y[0].exp() * t0 - self.eval(t) * t) / (s0 + 1.0)
            };
            return head + total + tail;
        }
        let k = self.segment(lx);
        self.segment_integral(k, lx, self.x[k + 1]) + self.remaining[k + 1] + tail
    }

    // ∫_{t_0}^{e^{lx}} for lx within the table range
    fn integral_from_first(&self, lx: f64) -> f64 {
        let n = self.x.len();
        if lx >= self.x[n - 1] {
            let tn = self.x[n - 1].exp();
            let sn = self.slope[n - 1];
            let t = lx.exp();
            let extra = if (sn + 1.0).abs() < 1e-14 {
                self.y[n - 1].exp() * tn * (lx - self.x[n - 1])
            } else {
                (self.eval(t) * t - self.y[n - 1].exp() * tn) / (sn + 1.0)
            };
            return self.cumulative[n - 1] + extra;
        }
        let k = self.segment(lx);
        self.cumulative[k] + self.segment_integral(k, self.x[k], lx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_power_laws_exactly() {
        // t^3 on a few points: log-log data is linear, so the cubic is exact
        let t = [0.1, 0.5, 1.0, 2.0, 10.0];
        let v: Vec<f64> = t.iter().map(|x: &f64| x.powi(3)).collect();
        let tab = LogLogTable::new(&t, &v).unwrap();
        for &x in &[0.01, 0.3, 1.7, 50.0] {
            assert!((tab.eval(x) / x.powi(3) - 1.0).abs() < 1e-12);
            let exact = x.powi(4) / 4.0;
            assert!((tab.integral_from_zero(x) / exact - 1.0).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn tail_integral_of_inverse_square() {
        let s = [1e-4, 1e-2, 1.0, 1e2];
        let v: Vec<f64> = s.iter().map(|x: &f64| x.powi(-2)).collect();
        let tab = LogLogTable::new(&s, &v).unwrap();
        for &x in &[1e-6, 1e-3, 0.5, 3.0, 1e4] {
            let exact = 1.0 / x;
            assert!((tab.integral_to_infinity(x) / exact - 1.0).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn monotone_data_stays_monotone() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        let v = [1.0, 1.1, 5.0, 5.1, 9.0];
        let tab = LogLogTable::new(&t, &v).unwrap();
        let mut prev = 0.0;
        for i in 0..400 {
            let x = 1.0 + 4.0 * i as f64 / 399.0;
            let y = tab.eval(x);
            assert!(y >= prev - 1e-12);
            prev = y;
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(LogLogTable::new(&[1.0], &[1.0]).is_err());
        assert!(LogLogTable::new(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(LogLogTable::new(&[1.0, 2.0], &[0.0, 2.0]).is_err());
    }
}
