//! Full-depth orthonormal Haar transform.
//!
//! Output layout for `L = 2^m`: `[approx, detail_m, detail_{m-1}, …, detail_1]`
//! where `detail_j` holds `L / 2^j` coefficients and `detail_1` is the finest
//! scale.

use std::f64::consts::FRAC_1_SQRT_2;

use super::SignalError;

fn check(len: usize) -> Result<(), SignalError> {
    if len < 2 || !len.is_power_of_two() {
        return Err(SignalError::InvalidLength {
            method: "dwt".into(),
            length: len,
            reason: "the Haar DWT needs a power-of-two length",
        });
    }
    Ok(())
}

pub fn dwt_haar(x: &[f64]) -> Result<Vec<f64>, SignalError> {
    check(x.len())?;
    let n = x.len();
    let mut out = vec![0.0; n];
    let mut approx = x.to_vec();
    // finest details land at the tail, coarser ones move toward the front
    let mut end = n;
    while approx.len() > 1 {
        let half = approx.len() / 2;
        let mut next = Vec::with_capacity(half);
        for i in 0..half {
            let (a, b) = (approx[2 * i], approx[2 * i + 1]);
            next.push((a + b) * FRAC_1_SQRT_2);
            out[end - half + i] = (a - b) * FRAC_1_SQRT_2;
        }
        end -= half;
        approx = next;
    }
    out[0] = approx[0];
    Ok(out)
}

pub fn idwt_haar(c: &[f64]) -> Result<Vec<f64>, SignalError> {
    check(c.len())?;
    let mut approx = vec![c[0]];
    let mut start = 1;
    while approx.len() < c.len() {
        let half = approx.len();
        let detail = &c[start..start + half];
        let mut next = Vec::with_capacity(2 * half);
        for (a, d) in approx.iter().zip(detail) {
            next.push((a + d) * FRAC_1_SQRT_2);
            next.push((a - d) * FRAC_1_SQRT_2);
        }
        start += half;
        approx = next;
    }
    Ok(approx)
}
