//! User deployment with path loss, Rayleigh fading draws and the uplink
//! superposition `y_k = sum_j h_{j,k} sqrt(p_j) s_{j,k} + n_k`.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codebook::CodebookSet;
use crate::error::{Error, Result};
use crate::scalar::{complex_gaussian, Real};

pub const DEFAULT_D_MIN: f64 = 1.0;
pub const DEFAULT_D_MAX: f64 = 5.0;

/// User distances (cell-radius units) and the path-loss exponent.
///
/// Distances below `d_min` are raised to `d_min`; distances above `d_max` are
/// rejected. Users are stored farthest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment<T> {
    distances: Vec<T>,
    alpha: T,
    d_min: T,
    d_max: T,
}

impl<T: Real> Deployment<T> {
    pub fn new(distances: Vec<T>, alpha: T) -> Result<Self> {
        Self::with_bounds(distances, alpha, T::lit(DEFAULT_D_MIN), T::lit(DEFAULT_D_MAX))
    }

    pub fn with_bounds(distances: Vec<T>, alpha: T, d_min: T, d_max: T) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::InvalidArgument("deployment has no users".into()));
        }
        if !(alpha >= T::one()) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("path-loss exponent {alpha} must be >= 1")));
        }
        if !(d_min > T::zero()) || !(d_max >= d_min) || !d_max.is_finite() {
            return Err(Error::InvalidArgument(format!("bad distance bounds [{d_min}, {d_max}]")));
        }
        let mut d = Vec::with_capacity(distances.len());
        for x in distances {
            if !(x > T::zero()) || x > d_max {
                return Err(Error::InvalidArgument(format!(
                    "distance {x} outside (0, {d_max}]"
                )));
            }
            d.push(x.max(d_min));
        }
        d.sort_by(|a, b| b.partial_cmp(a).expect("finite distances"));
        Ok(Self {
            distances: d,
            alpha,
            d_min,
            d_max,
        })
    }

    /// `users` users at the reference distance 1.
    pub fn equal(users: usize, alpha: T) -> Result<Self> {
        Self::new(vec![T::one(); users], alpha)
    }

    pub fn distances(&self) -> &[T] {
        &self.distances
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn d_min(&self) -> T {
        self.d_min
    }

    pub fn d_max(&self) -> T {
        self.d_max
    }

    pub fn users(&self) -> usize {
        self.distances.len()
    }

    /// Large-scale gain `d_j^-alpha`.
    pub fn path_gain(&self, j: usize) -> T {
        self.distances[j].powf(-self.alpha)
    }

    /// `d_j^alpha`.
    pub fn path_loss(&self, j: usize) -> T {
        self.distances[j].powf(self.alpha)
    }
}

/// One fading draw: `h[j][k] = g_{j,k} d_j^(-alpha/2)` with `g ~ CN(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    pub h: Vec<Vec<Complex<T>>>,
}

impl<T: Real> ChannelRealization<T> {
    /// Unit-gain channel, handy for noiseless fixtures.
    pub fn flat(users: usize, resources: usize) -> Self {
        Self {
            h: vec![vec![Complex::new(T::one(), T::zero()); resources]; users],
        }
    }

    pub fn users(&self) -> usize {
        self.h.len()
    }

    pub fn resources(&self) -> usize {
        self.h.first().map_or(0, Vec::len)
    }
}

/// Draws i.i.d. Rayleigh coefficients over `resources` RNs for every user.
pub fn draw_channel<T: Real, R: Rng + ?Sized>(
    dep: &Deployment<T>,
    resources: usize,
    rng: &mut R,
) -> ChannelRealization<T> {
    let h = (0..dep.users())
        .map(|j| {
            let amp = dep.distances[j].powf(-dep.alpha / T::lit(2.0));
            (0..resources).map(|_| complex_gaussian(rng, T::one()) * amp).collect()
        })
        .collect();
    ChannelRealization { h }
}

/// Noiseless superposition of the codewords `symbols[j]` of every user.
pub fn superpose<T: Real>(
    cbs: &CodebookSet<T>,
    symbols: &[usize],
    h: &ChannelRealization<T>,
) -> Result<Vec<Complex<T>>> {
    let k_count = cbs.resources();
    let j_count = cbs.users();
    if symbols.len() != j_count {
        return Err(Error::DimensionMismatch(format!("{} symbols for {j_count} users", symbols.len())));
    }
    if h.users() != j_count || h.resources() != k_count {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}x{}, expected {j_count}x{k_count}",
            h.users(),
            h.resources()
        )));
    }
    let mut y = vec![Complex::new(T::zero(), T::zero()); k_count];
    for (j, &m) in symbols.iter().enumerate() {
        let cb = cbs.user_codebook(j);
        if m >= cb.order() {
            return Err(Error::IndexOutOfRange {
                what: "codeword",
                index: m,
                limit: cb.order(),
            });
        }
        let amp = cbs.powers()[j].sqrt();
        for &k in cb.support() {
            y[k] = y[k] + h.h[j][k] * cb.entry(k, m) * amp;
        }
    }
    Ok(y)
}

/// Received observations for `symbols`, with noise `n_k ~ CN(0, n0)`.
pub fn transmit<T: Real, R: Rng + ?Sized>(
    cbs: &CodebookSet<T>,
    symbols: &[usize],
    h: &ChannelRealization<T>,
    n0: T,
    rng: &mut R,
) -> Result<Vec<Complex<T>>> {
    if n0 < T::zero() {
        return Err(Error::InvalidArgument(format!("noise power {n0} is negative")));
    }
    let mut y = superpose(cbs, symbols, h)?;
    if n0 > T::zero() {
        for v in &mut y {
            *v = *v + complex_gaussian(rng, n0);
        }
    }
    Ok(y)
}

/// `N0` for an SNR in dB, `SNR = 10 log10(1 / N0)`.
pub fn n0_from_snr_db<T: Real>(snr_db: T) -> T {
    T::lit(10.0).powf(-snr_db / T::lit(10.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn deployment_clamps_and_sorts() {
        let d = Deployment::new(vec![0.5, 3.0, 1.5], 2.0).unwrap();
        assert_eq!(d.distances(), &[3.0, 1.5, 1.0]);
        assert!(Deployment::new(vec![6.0], 2.0).is_err());
        assert!(Deployment::new(vec![1.0], 0.5).is_err());
        assert!(Deployment::<f64>::new(vec![], 2.0).is_err());
    }

    #[test]
    fn path_gain_matches_distance() {
        let d = Deployment::new(vec![2.0, 1.0], 2.0).unwrap();
        assert_eq!(d.path_gain(0), 0.25);
        assert_eq!(d.path_loss(0), 4.0);
    }

    #[test]
    fn fading_power_follows_path_loss() {
        let dep = Deployment::new(vec![2.0, 1.0], 2.0).unwrap();
        let mut rng = stream_rng(7, &[1], 0);
        let n = 50_000;
        let mut acc = [0.0f64; 2];
        for _ in 0..n {
            let h = draw_channel(&dep, 2, &mut rng);
            for j in 0..2 {
                acc[j] += h.h[j].iter().map(|x| x.norm_sqr()).sum::<f64>() / 2.0;
            }
        }
        assert!((acc[0] / n as f64 - 0.25).abs() < 0.25 * 0.02);
        assert!((acc[1] / n as f64 - 1.0).abs() < 0.02);
    }

    #[test]
    fn snr_to_noise() {
        assert!((n0_from_snr_db(10.0f64) - 0.1).abs() < 1e-15);
        assert_eq!(n0_from_snr_db(0.0f64), 1.0);
    }
}
