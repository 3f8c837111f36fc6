//! Field amplitudes for displaced thermal light.
//!
//! Thermal and displaced thermal states have a positive, Gaussian P-function,
//! so a classical complex-Gaussian draw of the field amplitude followed by
//! additive detection noise reproduces heterodyne statistics exactly.
//!
//! Units: amplitudes and quadratures are in shot-noise units, where one vacuum
//! unit of heterodyne noise has variance 1 per quadrature. A thermal source of
//! mean photon number `nbar` has per-quadrature amplitude variance `nbar`.
//! [`GaussianMode`] uses the symmetric-quadrature convention in which the
//! vacuum covariance is the identity and a thermal mode has `(2 nbar + 1) I`;
//! [`GaussianMode::heterodyne_moments`] maps between the two.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};

/// Per-symbol field amplitude in the positive-P representation.
pub type ComplexAmplitude = Complex64;

/// One heterodyne outcome.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadraturePair {
    pub x: f64,
    pub p: f64,
}

impl QuadraturePair {
    pub const fn new(x: f64, p: f64) -> Self {
        QuadraturePair { x, p }
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.x, self.p)
    }

    pub fn from_complex(c: Complex64) -> Self {
        QuadraturePair { x: c.re, p: c.im }
    }

    /// Instantaneous intensity `x^2 + p^2`.
    pub fn intensity(self) -> f64 {
        self.x * self.x + self.p * self.p
    }
}

/// Thermal source displaced onto a ring of radius `d0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams {
    /// Mean thermal photon number.
    pub nbar: f64,
    /// Displacement ring radius.
    pub d0: f64,
}

impl SourceParams {
    pub fn new(nbar: f64, d0: f64) -> Result<Self> {
        let params = SourceParams { nbar, d0 };
        let errors = params.validate("source");
        if errors.is_empty() {
            Ok(params)
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn validate(&self, prefix: &str) -> Vec<FieldError> {
        let mut errors = Vec::new();
        if !(self.nbar.is_finite() && self.nbar >= 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.nbar"),
                format!("must be finite and >= 0, got {}", self.nbar),
            ));
        }
        if !(self.d0.is_finite() && self.d0 >= 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.d0"),
                format!("must be finite and >= 0, got {}", self.d0),
            ));
        }
        errors
    }
}

/// Single-mode Gaussian state: quadrature means and 2x2 covariance, with the
/// vacuum covariance equal to the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMode {
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
}

impl GaussianMode {
    pub fn determinant(&self) -> f64 {
        let c = &self.covariance;
        c[0][0] * c[1][1] - c[0][1] * c[1][0]
    }

    /// Symmetric, positive definite, and above the uncertainty bound.
    pub fn is_physical(&self) -> bool {
        let c = &self.covariance;
        let tol = 1e-12;
        (c[0][1] - c[1][0]).abs() <= tol
            && c[0][0] > 0.0
            && self.determinant() > 0.0
            && self.determinant() >= 1.0 - tol
    }

    /// Displaces the mode by a field amplitude given in shot-noise units.
    pub fn displaced(mut self, alpha: ComplexAmplitude) -> Self {
        // symmetric quadratures carry sqrt(2) times the heterodyne amplitude
        self.mean[0] += std::f64::consts::SQRT_2 * alpha.re;
        self.mean[1] += std::f64::consts::SQRT_2 * alpha.im;
        self
    }

    /// Mean and covariance of an ideal heterodyne outcome on this mode, in
    /// the shot-noise units used by [`heterodyne`].
    pub fn heterodyne_moments(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = &self.covariance;
        (
            [self.mean[0] * s, self.mean[1] * s],
            [
                [(c[0][0] + 1.0) / 2.0, c[0][1] / 2.0],
                [c[1][0] / 2.0, (c[1][1] + 1.0) / 2.0],
            ],
        )
    }
}

/// Undisplaced thermal state with mean photon number `nbar`.
pub fn make_thermal(nbar: f64) -> Result<GaussianMode> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::domain(format!("nbar must be >= 0, got {nbar}")));
    }
    let v = 2.0 * nbar + 1.0;
    Ok(GaussianMode {
        mean: [0.0, 0.0],
        covariance: [[v, 0.0], [0.0, v]],
    })
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Circular complex Gaussian with the given per-quadrature variance.
pub fn circular_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> ComplexAmplitude {
    if variance == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let sd = variance.sqrt();
    let re = standard_normal(rng) * sd;
    let im = standard_normal(rng) * sd;
    Complex64::new(re, im)
}

/// Draws one positive-P field amplitude `d0 e^{i phase} + s`, where `s` is
/// circular Gaussian with per-quadrature variance `nbar`.
pub fn sample_source_field<R: Rng + ?Sized>(
    params: &SourceParams,
    symbol_phase: f64,
    rng: &mut R,
) -> ComplexAmplitude {
    Complex64::from_polar(params.d0, symbol_phase) + circular_gaussian(params.nbar, rng)
}

fn check_transmittance(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "transmittance must lie in [0, 1], got {t}"
        )))
    }
}

/// Lossless beam splitter of intensity transmittance `t`.
///
/// `out1 = sqrt(t) a + sqrt(1-t) b`, `out2 = sqrt(1-t) a - sqrt(t) b`. A vacuum
/// port is the zero amplitude.
pub fn apply_beamsplitter(
    a: ComplexAmplitude,
    b: ComplexAmplitude,
    t: f64,
) -> Result<(ComplexAmplitude, ComplexAmplitude)> {
    check_transmittance(t)?;
    let (st, sr) = (t.sqrt(), (1.0 - t).sqrt());
    Ok((a * st + b * sr, a * sr - b * st))
}

/// Heterodyne detection adding independent Gaussian noise of variance
/// `noise_var` to each quadrature.
pub fn heterodyne<R: Rng + ?Sized>(
    a: ComplexAmplitude,
    noise_var: f64,
    rng: &mut R,
) -> Result<QuadraturePair> {
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::domain(format!(
            "noise variance must be >= 0, got {noise_var}"
        )));
    }
    Ok(QuadraturePair::from_complex(
        a + circular_gaussian(noise_var, rng),
    ))
}

/// Linear link seen by one party: intensity transmittance and total additive
/// noise variance per quadrature at its detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub transmittance: f64,
    pub noise_var: f64,
}

/// The three-party network: source, 50:50 split to Alice and the broadcast
/// path, Eve's tap of transmittance `eve_transmittance` on the broadcast path,
/// then one link per party.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topology {
    pub eve_transmittance: f64,
    pub alice: Link,
    pub bob: Link,
    pub eve: Link,
}

impl Topology {
    /// Amplitude gain from the source to each detector, in (A, B, E) order.
    pub fn path_gains(&self) -> Result<[f64; 3]> {
        check_transmittance(self.eve_transmittance)?;
        for link in [self.alice, self.bob, self.eve] {
            check_transmittance(link.transmittance)?;
            if !(link.noise_var.is_finite() && link.noise_var >= 0.0) {
                return Err(Error::domain(format!(
                    "noise variance must be >= 0, got {}",
                    link.noise_var
                )));
            }
        }
        let split = 0.5f64.sqrt();
        let t = self.eve_transmittance;
        Ok([
            split * self.alice.transmittance.sqrt(),
            split * t.sqrt() * self.bob.transmittance.sqrt(),
            split * (1.0 - t).sqrt() * self.eve.transmittance.sqrt(),
        ])
    }
}

/// Analytic covariance of `(x_A, p_A, x_B, p_B, x_E, p_E)` for an undisplaced
/// thermal source propagated through `topology`.
pub fn joint_covariance_oracle(topology: &Topology, nbar: f64) -> Result<[[f64; 6]; 6]> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::domain(format!("nbar must be >= 0, got {nbar}")));
    }
    let gains = topology.path_gains()?;
    let noise = [
        topology.alice.noise_var,
        topology.bob.noise_var,
        topology.eve.noise_var,
    ];
    let mut cov = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            let shared = gains[i] * gains[j] * nbar;
            let local = if i == j { noise[i] } else { 0.0 };
            // x and p decouple; both see the same variance
            cov[2 * i][2 * j] = shared + local;
            cov[2 * i + 1][2 * j + 1] = shared + local;
        }
    }
    Ok(cov)
}

/// One round through `topology`: returns the six heterodyne quadratures.
pub fn sample_topology_round<R: Rng + ?Sized>(
    topology: &Topology,
    source: &SourceParams,
    symbol_phase: f64,
    rng: &mut R,
) -> Result<[f64; 6]> {
    let field = sample_source_field(source, symbol_phase, rng);
    let zero = Complex64::new(0.0, 0.0);
    let (alice, broadcast) = apply_beamsplitter(field, zero, 0.5)?;
    let (bob, eve) = apply_beamsplitter(broadcast, zero, topology.eve_transmittance)?;
    let mut out = [0.0; 6];
    for (k, (amp, link)) in [
        (alice, topology.alice),
        (bob, topology.bob),
        (eve, topology.eve),
    ]
    .into_iter()
    .enumerate()
    {
        check_transmittance(link.transmittance)?;
        let q = heterodyne(amp * link.transmittance.sqrt(), link.noise_var, rng)?;
        out[2 * k] = q.x;
        out[2 * k + 1] = q.p;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn thermal_covariance_convention() {
        for (nbar, v) in [(0.0, 1.0), (1.0, 3.0), (0.5, 2.0)] {
            let mode = make_thermal(nbar).unwrap();
            assert_eq!(mode.mean, [0.0, 0.0]);
            assert_eq!(mode.covariance, [[v, 0.0], [0.0, v]]);
            assert!(mode.is_physical());
        }
        assert!(matches!(make_thermal(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn heterodyne_moments_match_sampler_convention() {
        // (V + I)/2 with V = 2 nbar + 1 gives nbar + 1 per quadrature
        let mode = make_thermal(2.0)
            .unwrap()
            .displaced(Complex64::new(0.0, 3.0));
        let (mean, cov) = mode.heterodyne_moments();
        assert!((mean[0]).abs() < 1e-12 && (mean[1] - 3.0).abs() < 1e-12);
        assert!((cov[0][0] - 3.0).abs() < 1e-12 && (cov[1][1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn source_without_noise_is_exact() {
        let params = SourceParams::new(0.0, 1.0).unwrap();
        let a = sample_source_field(&params, 0.0, &mut rng(1));
        assert_eq!(a, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn source_moments() {
        let n = 1_000_000;
        let mut r = rng(2);
        let params = SourceParams::new(2.0, 0.0).unwrap();
        let (mut sx, mut sxx, mut sp, mut spp) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let a = sample_source_field(&params, 0.0, &mut r);
            sx += a.re;
            sxx += a.re * a.re;
            sp += a.im;
            spp += a.im * a.im;
        }
        let nf = n as f64;
        let var_x = sxx / nf - (sx / nf).powi(2);
        let var_p = spp / nf - (sp / nf).powi(2);
        assert!((var_x - 2.0).abs() < 0.02, "{var_x}");
        assert!((var_p - 2.0).abs() < 0.02, "{var_p}");

        let params = SourceParams::new(2.0, 3.0).unwrap();
        let phase = std::f64::consts::FRAC_PI_2;
        let mean = (0..n).fold(Complex64::new(0.0, 0.0), |acc, _| {
            acc + sample_source_field(&params, phase, &mut r)
        }) / nf;
        assert!(
            mean.re.abs() < 0.01 && (mean.im - 3.0).abs() < 0.01,
            "{mean}"
        );
    }

    #[test]
    fn beamsplitter_examples() {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(apply_beamsplitter(one, zero, 1.0).unwrap(), (one, zero));
        let (o1, o2) = apply_beamsplitter(one, zero, 0.5).unwrap();
        assert!((o1.re - 0.70711).abs() < 1e-5 && (o2.re - 0.70711).abs() < 1e-5);
        assert!(apply_beamsplitter(one, zero, 1.5).is_err());
        assert!(apply_beamsplitter(one, zero, -0.1).is_err());
    }

    #[test]
    fn heterodyne_examples() {
        let mut r = rng(3);
        let q = heterodyne(Complex64::new(1.0, 1.0), 0.0, &mut r).unwrap();
        assert_eq!(q, QuadraturePair::new(1.0, 1.0));
        assert!(heterodyne(Complex64::new(0.0, 0.0), -1.0, &mut r).is_err());

        let n = 1_000_000;
        let nf = n as f64;
        let (mut s, mut ss) = ([0.0; 2], [0.0; 2]);
        for _ in 0..n {
            let q = heterodyne(Complex64::new(0.0, 0.0), 1.0, &mut r).unwrap();
            s[0] += q.x;
            s[1] += q.p;
            ss[0] += q.x * q.x;
            ss[1] += q.p * q.p;
        }
        for k in 0..2 {
            let var = ss[k] / nf - (s[k] / nf).powi(2);
            assert!((var - 1.0).abs() < 0.01, "{var}");
        }
        let mut mean = [0.0; 2];
        for _ in 0..n {
            let q = heterodyne(Complex64::new(5.0, 0.0), 1.0, &mut r).unwrap();
            mean[0] += q.x / nf;
            mean[1] += q.p / nf;
        }
        assert!((mean[0] - 5.0).abs() < 0.01 && mean[1].abs() < 0.01);
    }

    fn topo(t: f64, ta: f64, tb: f64, te: f64, noise: f64) -> Topology {
        Topology {
            eve_transmittance: t,
            alice: Link {
                transmittance: ta,
                noise_var: noise,
            },
            bob: Link {
                transmittance: tb,
                noise_var: noise,
            },
            eve: Link {
                transmittance: te,
                noise_var: noise,
            },
        }
    }

    #[test]
    fn oracle_without_thermal_light_is_noise_only() {
        let cov = joint_covariance_oracle(&topo(0.3, 0.8, 0.6, 0.4, 1.0), 0.0).unwrap();
        for (i, row) in cov.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn oracle_cross_covariance_by_hand() {
        // A path: 0.5 * eta_a; B path: 0.5 * T * eta_b
        let (ta, tb, t, nbar) = (0.9, 0.7, 0.5, 2.0);
        let cov = joint_covariance_oracle(&topo(t, ta, tb, 1.0, 1.0), nbar).unwrap();
        let eta_a = 0.5 * ta;
        let eta_b = 0.5 * t * tb;
        let expect = (eta_a * eta_b).sqrt() * nbar;
        assert!((cov[0][2] - expect).abs() < 1e-12);
        assert!((cov[1][3] - expect).abs() < 1e-12);
        assert_eq!(cov[0][3], 0.0);
        assert!((cov[0][0] - (eta_a * nbar + 1.0)).abs() < 1e-12);
        assert!(joint_covariance_oracle(&topo(1.2, ta, tb, 1.0, 1.0), nbar).is_err());
    }

    #[test]
    fn covariance_is_independent_of_displacement() {
        let n = 200_000;
        let t = topo(0.5, 0.9, 0.8, 0.8, 1.0);
        let mut covs = Vec::new();
        for d0 in [0.0, 10.0] {
            let mut r = rng(9);
            let src = SourceParams::new(2.0, d0).unwrap();
            let rows: Vec<[f64; 6]> = (0..n)
                .map(|_| sample_topology_round(&t, &src, 0.3, &mut r).unwrap())
                .collect();
            covs.push(sample_covariance(&rows));
        }
        for (row0, row1) in covs[0].iter().zip(&covs[1]) {
            for (c0, c1) in row0.iter().zip(row1) {
                assert!((c0 - c1).abs() < 0.02);
            }
        }
    }

    fn sample_covariance(rows: &[[f64; 6]]) -> [[f64; 6]; 6] {
        let n = rows.len() as f64;
        let mut mean = [0.0; 6];
        for r in rows {
            for k in 0..6 {
                mean[k] += r[k] / n;
            }
        }
        let mut cov = [[0.0; 6]; 6];
        for r in rows {
            for i in 0..6 {
                for j in 0..6 {
                    cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n;
                }
            }
        }
        cov
    }
}
