//! Physical parameters, the circuit-power model and the mapping between
//! physical and normalized energy efficiency.
//!
//! With normalized transmit power `Q = psi P / (N0 W)` the physical EE
//! `W C / P_total` equals `(psi eta / N0) * rate / (Q + alpha)` where
//! `alpha = psi eta (M P_dyn + P_sta) / (N0 W)`. Channel matrices carry only
//! the small-scale fading; the common large-scale gain lives in `alpha`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_kernel::{sample_complex_gaussian, ComplexMatrix};

/// Physical system parameters in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystemConfig", deny_unknown_fields)]
pub struct SystemConfig {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub users: usize,
    pub bandwidth_hz: f64,
    #[serde(rename = "noise_density_w_per_hz")]
    pub noise_density: f64,
    #[serde(rename = "pathloss_linear")]
    pub pathloss: f64,
    pub pa_efficiency: f64,
    pub p_dyn_watts: f64,
    pub p_sta_watts: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystemConfig {
    tx_antennas: usize,
    rx_antennas: usize,
    users: usize,
    bandwidth_hz: f64,
    noise_density_w_per_hz: f64,
    pathloss_linear: f64,
    pa_efficiency: f64,
    p_dyn_watts: f64,
    p_sta_watts: f64,
}

impl TryFrom<RawSystemConfig> for SystemConfig {
    type Error = Error;

    fn try_from(r: RawSystemConfig) -> Result<Self> {
        let cfg = SystemConfig {
            tx_antennas: r.tx_antennas,
            rx_antennas: r.rx_antennas,
            users: r.users,
            bandwidth_hz: r.bandwidth_hz,
            noise_density: r.noise_density_w_per_hz,
            pathloss: r.pathloss_linear,
            pa_efficiency: r.pa_efficiency,
            p_dyn_watts: r.p_dyn_watts,
            p_sta_watts: r.p_sta_watts,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn bad(key: &str, why: &str) -> Error {
    Error::Config(format!("`{key}` {why}"))
}

impl SystemConfig {
    /// Unit configuration: `M = N = K = 1`, all physical constants 1, no
    /// circuit power.
    pub fn unit() -> Self {
        SystemConfig {
            tx_antennas: 1,
            rx_antennas: 1,
            users: 1,
            bandwidth_hz: 1.0,
            noise_density: 1.0,
            pathloss: 1.0,
            pa_efficiency: 1.0,
            p_dyn_watts: 0.0,
            p_sta_watts: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_antennas == 0 {
            return Err(bad("tx_antennas", "must be at least 1"));
        }
        if self.rx_antennas == 0 {
            return Err(bad("rx_antennas", "must be at least 1"));
        }
        if self.users == 0 {
            return Err(bad("users", "must be at least 1"));
        }
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_density_w_per_hz", self.noise_density),
            ("pathloss_linear", self.pathloss),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(key, "must be positive and finite"));
            }
        }
        if !(self.pa_efficiency > 0.0 && self.pa_efficiency <= 1.0) {
            return Err(bad("pa_efficiency", "must lie in (0, 1]"));
        }
        for (key, v) in [("p_dyn_watts", self.p_dyn_watts), ("p_sta_watts", self.p_sta_watts)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(key, "must be nonnegative and finite"));
            }
        }
        Ok(())
    }

    /// Transmit-independent power `M P_dyn + P_sta` in watts.
    pub fn circuit_power(&self) -> f64 {
        self.tx_antennas as f64 * self.p_dyn_watts + self.p_sta_watts
    }

    /// Physical transmit power corresponding to a normalized power `q`.
    pub fn physical_power(&self, q: f64) -> f64 {
        q * self.noise_density * self.bandwidth_hz / self.pathloss
    }

    /// Normalized power corresponding to a physical transmit power.
    pub fn normalized_power(&self, p_tx_watts: f64) -> f64 {
        p_tx_watts * self.pathloss / (self.noise_density * self.bandwidth_hz)
    }
}

/// Normalized transmit-independent power
/// `alpha = psi eta (M P_dyn + P_sta) / (N0 W)`.
pub fn normalized_alpha(cfg: &SystemConfig) -> f64 {
    cfg.pathloss * cfg.pa_efficiency * cfg.circuit_power() / (cfg.noise_density * cfg.bandwidth_hz)
}

/// Total consumed power `P/eta + M P_dyn + P_sta` in watts.
pub fn total_power(cfg: &SystemConfig, p_tx_watts: f64) -> Result<f64> {
    if !(p_tx_watts >= 0.0) {
        return Err(Error::Domain {
            func: "total_power",
            value: p_tx_watts,
        });
    }
    Ok(p_tx_watts / cfg.pa_efficiency + cfg.circuit_power())
}

/// Physical EE in bits/Joule for a normalized EE `xi`.
pub fn denormalize_ee(cfg: &SystemConfig, xi: f64) -> f64 {
    cfg.pathloss * cfg.pa_efficiency / cfg.noise_density * xi
}

/// One realization of the `K` user channels, each `N x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    tx_antennas: usize,
    rx_antennas: usize,
    matrices: Vec<ComplexMatrix>,
}

impl ChannelSet {
    pub fn new(tx_antennas: usize, rx_antennas: usize, matrices: Vec<ComplexMatrix>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::Shape("a channel set needs at least one user".into()));
        }
        if let Some(h) = matrices
            .iter()
            .find(|h| h.rows() != rx_antennas || h.cols() != tx_antennas)
        {
            return Err(Error::Shape(format!(
                "expected {rx_antennas}x{tx_antennas} user channels, found {}x{}",
                h.rows(),
                h.cols()
            )));
        }
        Ok(ChannelSet {
            tx_antennas,
            rx_antennas,
            matrices,
        })
    }

    /// Scalar channels `H_k = h_k` for `M = N = 1`.
    pub fn siso(gains: &[crate::matrix_kernel::C64]) -> Result<Self> {
        let matrices = gains
            .iter()
            .map(|&h| ComplexMatrix::from_row_major(1, 1, vec![h]))
            .collect::<Result<Vec<_>>>()?;
        ChannelSet::new(1, 1, matrices)
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx_antennas
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx_antennas
    }

    pub fn users(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    /// Every antenna row `g_j^i` of every user, in (user, antenna) order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, Vec<crate::matrix_kernel::C64>)> + '_ {
        self.matrices
            .iter()
            .enumerate()
            .flat_map(|(k, h)| (0..h.rows()).map(move |j| (k, j, h.row(j))))
    }
}

/// Draws `K` independent Rayleigh-fading channels for `cfg`.
pub fn draw_channels<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelSet {
    let matrices = (0..cfg.users)
        .map(|_| sample_complex_gaussian(rng, cfg.rx_antennas, cfg.tx_antennas))
        .collect();
    ChannelSet {
        tx_antennas: cfg.tx_antennas,
        rx_antennas: cfg.rx_antennas,
        matrices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_math::golden_section_max;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base() -> SystemConfig {
        SystemConfig {
            tx_antennas: 2,
            rx_antennas: 1,
            users: 3,
            bandwidth_hz: 1.0,
            noise_density: 1.0,
            pathloss: 1.0,
            pa_efficiency: 1.0,
            p_dyn_watts: 0.5,
            p_sta_watts: 1.0,
        }
    }

    #[test]
    fn alpha_values() {
        assert!((normalized_alpha(&base()) - 2.0).abs() < 1e-15);
        let idle = SystemConfig {
            p_dyn_watts: 0.0,
            p_sta_watts: 0.0,
            ..base()
        };
        assert_eq!(normalized_alpha(&idle), 0.0);
        let doubled = SystemConfig {
            pathloss: 2.0,
            ..base()
        };
        assert!((normalized_alpha(&doubled) - 2.0 * normalized_alpha(&base())).abs() < 1e-15);
    }

    #[test]
    fn alpha_monotone_in_each_parameter() {
        let b = base();
        let a0 = normalized_alpha(&b);
        let up = |c: SystemConfig| normalized_alpha(&c) > a0;
        let down = |c: SystemConfig| normalized_alpha(&c) < a0;
        assert!(up(SystemConfig {
            tx_antennas: 3,
            ..b.clone()
        }));
        assert!(up(SystemConfig {
            p_dyn_watts: 0.6,
            ..b.clone()
        }));
        assert!(up(SystemConfig {
            p_sta_watts: 1.1,
            ..b.clone()
        }));
        assert!(up(SystemConfig {
            pathloss: 1.1,
            ..b.clone()
        }));
        assert!(down(SystemConfig {
            pa_efficiency: 0.9,
            ..b.clone()
        }));
        assert!(down(SystemConfig {
            noise_density: 1.1,
            ..b.clone()
        }));
        assert!(down(SystemConfig { bandwidth_hz: 1.1, ..b }));
    }

    #[test]
    fn total_power_model() {
        let b = base();
        assert_eq!(total_power(&b, 0.0).unwrap(), 2.0);
        let cfg = SystemConfig {
            pa_efficiency: 0.5,
            p_dyn_watts: 0.0,
            p_sta_watts: 0.0,
            tx_antennas: 7,
            ..b
        };
        assert_eq!(total_power(&cfg, 1.0).unwrap(), 2.0);
        let slope = total_power(&cfg, 3.0).unwrap() - total_power(&cfg, 2.0).unwrap();
        assert!((slope - 2.0).abs() < 1e-15);
        assert!(total_power(&cfg, -1.0).is_err());
    }

    #[test]
    fn denormalize_values() {
        assert_eq!(denormalize_ee(&base(), 0.0), 0.0);
        assert_eq!(denormalize_ee(&SystemConfig::unit(), 3.0), 3.0);
    }

    #[test]
    fn physical_and_normalized_optima_agree() {
        let cfg = SystemConfig {
            tx_antennas: 1,
            rx_antennas: 1,
            users: 1,
            bandwidth_hz: 1e6,
            noise_density: 4e-21,
            pathloss: 1e-12,
            pa_efficiency: 0.35,
            p_dyn_watts: 0.2,
            p_sta_watts: 5.0,
        };
        let gain = 1.7;
        let alpha = normalized_alpha(&cfg);
        let norm = golden_section_max(|q| (1.0 + gain * q).log2() / (q + alpha), 0.0, 1e3, 1e-10).unwrap();
        let phys_scale = cfg.physical_power(1.0);
        let phys = golden_section_max(
            |p| {
                let rate = cfg.bandwidth_hz * (1.0 + gain * cfg.normalized_power(p)).log2();
                rate / total_power(&cfg, p).unwrap()
            },
            0.0,
            1e3 * phys_scale,
            1e-10 * phys_scale,
        )
        .unwrap();
        assert!((phys.x_star / phys_scale - norm.x_star).abs() < 1e-6);
        assert!((phys.f_star - denormalize_ee(&cfg, norm.f_star)).abs() <= 1e-12 * phys.f_star);
    }

    #[test]
    fn json_ingestion() {
        let doc = r#"{"tx_antennas":2,"rx_antennas":1,"users":4,"bandwidth_hz":1.0,
            "noise_density_w_per_hz":1.0,"pathloss_linear":1.0,"pa_efficiency":0.5,
            "p_dyn_watts":0.1,"p_sta_watts":1.0}"#;
        let cfg: SystemConfig = serde_json::from_str(doc).unwrap();
        assert_eq!(cfg.users, 4);
        let back: SystemConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);

        let unknown = doc.replace("\"users\"", "\"bogus\":1,\"users\"");
        let err = serde_json::from_str::<SystemConfig>(&unknown).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");

        let bad_eta = doc.replace("\"pa_efficiency\":0.5", "\"pa_efficiency\":1.5");
        let err = serde_json::from_str::<SystemConfig>(&bad_eta).unwrap_err().to_string();
        assert!(err.contains("pa_efficiency"), "{err}");
    }

    #[test]
    fn channel_draws() {
        let cfg = SystemConfig {
            tx_antennas: 3,
            rx_antennas: 2,
            users: 5,
            ..SystemConfig::unit()
        };
        let a = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a.users(), 5);
        assert!(a.matrices().iter().all(|h| h.rows() == 2 && h.cols() == 3));
        let b = draw_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let one = SystemConfig { users: 1, ..cfg };
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| draw_channels(&one, &mut rng).matrices()[0].norm_sq())
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 6.0).abs() < 0.12, "mean {mean}");
    }

    #[test]
    fn channel_set_shape_checks() {
        let h = ComplexMatrix::zeros(2, 3);
        assert!(ChannelSet::new(3, 2, vec![h.clone()]).is_ok());
        assert!(ChannelSet::new(2, 2, vec![h]).is_err());
        assert!(ChannelSet::new(2, 2, vec![]).is_err());
    }

    proptest! {
        #[test]
        fn normalized_and_physical_objectives_coincide(
            m in 1usize..8,
            w in 1e3f64..1e8,
            n0 in 1e-22f64..1e-18,
            psi in 1e-14f64..1e-8,
            eta in 0.05f64..1.0,
            pdyn in 0.0f64..2.0,
            psta in 0.0f64..20.0,
            q in 0.0f64..100.0,
            rate in 0.0f64..50.0,
        ) {
            let cfg = SystemConfig {
                tx_antennas: m, rx_antennas: 1, users: 1,
                bandwidth_hz: w, noise_density: n0, pathloss: psi,
                pa_efficiency: eta, p_dyn_watts: pdyn, p_sta_watts: psta,
            };
            let alpha = normalized_alpha(&cfg);
            prop_assume!(q + alpha > 0.0);
            let lhs = rate * w / total_power(&cfg, cfg.physical_power(q)).unwrap();
            let rhs = denormalize_ee(&cfg, rate / (q + alpha));
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-300));
        }
    }
}
