use crate::error::{Error, Result};

/// `1/eps` as an integer; every block and rounding size assumes it is one.
pub fn eps_reciprocal(eps: f64) -> Result<i64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1], got {eps}")));
    }
    let k = (1.0 / eps).round();
    if ((1.0 / eps) - k).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("1/eps must be an integer, got eps = {eps}")));
    }
    Ok(k as i64)
}

/// Window threshold `H` and accuracy `eps` for the throughput pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThroughputParams {
    eps_inv: i64,
    h: i64,
}

impl ThroughputParams {
    /// Requires `2H/eps`, `eps*H` and `eps^2*H` to be integers.
    pub fn new(eps: f64, h: i64) -> Result<Self> {
        let k = eps_reciprocal(eps)?;
        if h < 1 {
            return Err(Error::InvalidArgument(format!("H must be positive, got {h}")));
        }
        if h % (k * k) != 0 {
            return Err(Error::InvalidArgument(format!(
                "eps^2 * H must be an integer (H = {h}, 1/eps = {k})"
            )));
        }
        Ok(ThroughputParams { eps_inv: k, h })
    }

    /// `H = 1/eps^3`, the smallest value the guarantees assume.
    pub fn default_h(eps: f64) -> Result<Self> {
        let k = eps_reciprocal(eps)?;
        Self::new(eps, k * k * k)
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.eps_inv as f64
    }

    pub fn eps_inv(&self) -> i64 {
        self.eps_inv
    }

    pub fn h(&self) -> i64 {
        self.h
    }

    /// Regular interval length `2H/eps`.
    pub fn interval_len(&self) -> i64 {
        2 * self.h * self.eps_inv
    }

    /// Small/large window cut-off `2H`.
    pub fn large_window(&self) -> i64 {
        2 * self.h
    }

    /// Minimum boundary sub-window `2 eps H`.
    pub fn min_boundary(&self) -> i64 {
        2 * self.h / self.eps_inv
    }

    /// Relocation block length `eps H`.
    pub fn block_len(&self) -> i64 {
        self.h / self.eps_inv
    }

    /// Slots freed at the end of each block, `eps^2 H`.
    pub fn freed_len(&self) -> i64 {
        self.h / (self.eps_inv * self.eps_inv)
    }
}
