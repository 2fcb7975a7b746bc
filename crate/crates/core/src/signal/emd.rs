//! Empirical mode decomposition by cubic-spline sifting.
//!
//! Envelopes interpolate the local maxima and minima with natural cubic
//! splines; the two extrema nearest each boundary are mirrored across it so
//! the envelopes cover the whole sequence. Sifting stops when the normalised
//! squared difference between iterations drops below 0.3 or after 10
//! passes. Decomposition stops after 6 IMFs or once the residual has fewer
//! than 4 extrema.

/// Upper bound on the number of extracted IMFs.
pub const MAX_IMFS: usize = 6;
const MAX_SIFTS: usize = 10;
const SD_STOP: f64 = 0.3;
const MIN_EXTREMA: usize = 4;

/// IMFs plus residual; their elementwise sum reconstructs the input.
#[derive(Clone, Debug, PartialEq)]
pub struct ImfSet {
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
}

impl ImfSet {
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }
}

/// Indices of strict local maxima and minima. A plateau counts once, at its
/// first sample.
pub fn local_extrema(x: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    if x.len() < 3 {
        return (maxima, minima);
    }
    for i in 1..x.len() - 1 {
        let prev = x[i - 1];
        if x[i] == prev {
            continue;
        }
        // look past a plateau starting at i
        let mut j = i + 1;
        while j < x.len() - 1 && x[j] == x[i] {
            j += 1;
        }
        let next = x[j];
        if x[i] > prev && x[i] > next {
            maxima.push(i);
        } else if x[i] < prev && x[i] < next {
            minima.push(i);
        }
    }
    (maxima, minima)
}

pub fn emd(x: &[f64]) -> ImfSet {
    emd_with_limit(x, MAX_IMFS)
}

pub fn emd_with_limit(x: &[f64], max_imfs: usize) -> ImfSet {
    let mut residual = x.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < max_imfs {
        let (mx, mn) = local_extrema(&residual);
        if mx.len() + mn.len() < MIN_EXTREMA {
            break;
        }
        let Some(imf) = sift(&residual) else { break };
        for (r, v) in residual.iter_mut().zip(&imf) {
            *r -= v;
        }
        imfs.push(imf);
    }
    ImfSet { imfs, residual }
}

fn sift(x: &[f64]) -> Option<Vec<f64>> {
    let mut h = x.to_vec();
    let mut moved = false;
    for _ in 0..MAX_SIFTS {
        let Some(mean) = envelope_mean(&h) else { break };
        let mut num = 0.0;
        let mut den = 0.0;
        for (hv, m) in h.iter_mut().zip(&mean) {
            num += m * m;
            den += *hv * *hv;
            *hv -= m;
        }
        moved = true;
        if den == 0.0 || num / den < SD_STOP {
            break;
        }
    }
    moved.then_some(h)
}

fn envelope_mean(h: &[f64]) -> Option<Vec<f64>> {
    let (mx, mn) = local_extrema(h);
    if mx.len() < 2 || mn.len() < 2 {
        return None;
    }
    let upper = envelope(h, &mx)?;
    let lower = envelope(h, &mn)?;
    Some(upper.iter().zip(&lower).map(|(u, l)| 0.5 * (u + l)).collect())
}

/// Spline through the given extrema, mirrored at both ends.
fn envelope(h: &[f64], idx: &[usize]) -> Option<Vec<f64>> {
    let last = (h.len() - 1) as f64;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(idx.len() + 4);
    for &i in idx.iter().take(2).rev() {
        if i > 0 {
            pts.push((-(i as f64), h[i]));
        }
    }
    pts.extend(idx.iter().map(|&i| (i as f64, h[i])));
    for &i in idx.iter().rev().take(2) {
        let t = i as f64;
        if t < last {
            pts.push((2.0 * last - t, h[i]));
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let spline = NaturalSpline::fit(&xs, &ys)?;
    Some((0..h.len()).map(|i| spline.eval(i as f64)).collect())
}

/// Natural cubic spline over strictly increasing knots.
struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalSpline {
    fn fit(xs: &[f64], ys: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n < 2 {
            return None;
        }
        let mut second = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas)
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for k in 0..m {
                let i = k + 1;
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[k] = 2.0 * (h0 + h1);
                upper[k] = h1;
                rhs[k] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for k in 1..m {
                let lower = xs[k + 1] - xs[k];
                let w = lower / diag[k - 1];
                diag[k] -= w * upper[k - 1];
                rhs[k] -= w * rhs[k - 1];
            }
            let mut sol = vec![0.0; m];
            sol[m - 1] = rhs[m - 1] / diag[m - 1];
            for k in (0..m - 1).rev() {
                sol[k] = (rhs[k] - upper[k] * sol[k + 1]) / diag[k];
            }
            second[1..n - 1].copy_from_slice(&sol);
        }
        Some(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            second,
        })
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&x| x <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }
}
