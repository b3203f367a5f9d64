//! Nominal operating point and admissible deviation interval for each of
//! the five operating scenarios.
//!
//! | Scenario | P0 | deviation |
//! |---|---|---|
//! | S1 max flex, no curtailment | `p_pv - P_cl/2` | `±(P_b + P_cl/2)` |
//! | S2 sustainable load | `min(p_pv, P_cl)/2` | `±(P_b + min(p_pv, P_cl)/2)` |
//! | S3 battery only | `0` | `±P_b` |
//! | S4 symmetric with curtailment | `(p_pv - P_cl)/2` | `±(P_b + (p_pv + P_cl)/2)` |
//! | S5 asymmetric with curtailment | `0` | `[-P_b - P_cl, P_b + p_pv]` |
//!
//! State of charge is assumed non-binding here; energy limits are enforced
//! by [`crate::soc_guard`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::assets::AssetFleet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlexError {
    #[error("PV power must be finite and non-negative, got {0}")]
    NegativePv(f64),
    #[error("unknown scenario `{0}` (expected S1..S5)")]
    UnknownScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::S5];

    /// Whether the scenario may discard PV output.
    pub fn allows_curtailment(self) -> bool {
        matches!(self, Scenario::S4 | Scenario::S5)
    }

    pub fn is_symmetric(self) -> bool {
        self != Scenario::S5
    }

    pub fn label(self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
            Scenario::S4 => "S4",
            Scenario::S5 => "S5",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = FlexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" | "1" => Ok(Scenario::S1),
            "S2" | "2" => Ok(Scenario::S2),
            "S3" | "3" => Ok(Scenario::S3),
            "S4" | "4" => Ok(Scenario::S4),
            "S5" | "5" => Ok(Scenario::S5),
            _ => Err(FlexError::UnknownScenario(s.to_string())),
        }
    }
}

/// Nominal power and the closed interval of admissible deviations around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlexEnvelope {
    pub p0: f64,
    pub dp_lo: f64,
    pub dp_hi: f64,
}

impl FlexEnvelope {
    pub fn width(&self) -> f64 {
        self.dp_hi - self.dp_lo
    }

    /// Largest symmetric half-width contained in the envelope.
    pub fn half_width(&self) -> f64 {
        self.dp_hi.min(-self.dp_lo)
    }

    pub fn clamp(&self, dp: f64) -> f64 {
        dp.clamp(self.dp_lo, self.dp_hi)
    }
}

pub fn envelope(scenario: Scenario, fleet: &AssetFleet, p_pv: f64) -> Result<FlexEnvelope, FlexError> {
    if !(p_pv >= 0.0) || !p_pv.is_finite() {
        return Err(FlexError::NegativePv(p_pv));
    }
    let pb = fleet.battery.p_max;
    let pcl = fleet.load.p_max;
    let sym = |p0: f64, half: f64| FlexEnvelope {
        p0,
        dp_lo: -half,
        dp_hi: half,
    };
    Ok(match scenario {
        Scenario::S1 => sym(p_pv - 0.5 * pcl, pb + 0.5 * pcl),
        Scenario::S2 => {
            let green = p_pv.min(pcl);
            sym(0.5 * green, pb + 0.5 * green)
        }
        Scenario::S3 => sym(0.0, pb),
        Scenario::S4 => sym(0.5 * (p_pv - pcl), pb + 0.5 * (p_pv + pcl)),
        Scenario::S5 => FlexEnvelope {
            p0: 0.0,
            dp_lo: -pb - pcl,
            dp_hi: pb + p_pv,
        },
    })
}

pub fn contains(env: &FlexEnvelope, dp: f64) -> bool {
    env.dp_lo <= dp && dp <= env.dp_hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fleet() -> AssetFleet {
        AssetFleet::reference_plant()
    }

    #[test]
    fn s1_half_width_is_six_and_a_half() {
        for p_pv in [0.0, 1.3, 3.0] {
            let env = envelope(Scenario::S1, &fleet(), p_pv).unwrap();
            assert_eq!(env.dp_hi, 6.5);
            assert_eq!(env.dp_lo, -6.5);
            assert_eq!(env.p0, p_pv - 1.5);
        }
    }

    #[test]
    fn s3_is_battery_only() {
        let env = envelope(Scenario::S3, &fleet(), 2.2).unwrap();
        assert_eq!(
            env,
            FlexEnvelope {
                p0: 0.0,
                dp_lo: -5.0,
                dp_hi: 5.0
            }
        );
    }

    #[test]
    fn s2_without_sun_collapses_to_s3() {
        let s2 = envelope(Scenario::S2, &fleet(), 0.0).unwrap();
        let s3 = envelope(Scenario::S3, &fleet(), 0.0).unwrap();
        assert_eq!(s2, s3);
    }

    #[test]
    fn s2_uses_green_share_of_pv() {
        let env = envelope(Scenario::S2, &fleet(), 2.0).unwrap();
        assert_eq!(
            env,
            FlexEnvelope {
                p0: 1.0,
                dp_lo: -6.0,
                dp_hi: 6.0
            }
        );
        // Above the load rating only P_cl counts.
        let env = envelope(Scenario::S2, &fleet(), 4.0).unwrap();
        assert_eq!(
            env,
            FlexEnvelope {
                p0: 1.5,
                dp_lo: -6.5,
                dp_hi: 6.5
            }
        );
    }

    #[test]
    fn s4_symmetric_curtailment() {
        let env = envelope(Scenario::S4, &fleet(), 2.0).unwrap();
        assert_eq!(
            env,
            FlexEnvelope {
                p0: -0.5,
                dp_lo: -7.5,
                dp_hi: 7.5
            }
        );
    }

    #[test]
    fn s5_asymmetric() {
        let env = envelope(Scenario::S5, &fleet(), 3.0).unwrap();
        assert_eq!(
            env,
            FlexEnvelope {
                p0: 0.0,
                dp_lo: -8.0,
                dp_hi: 8.0
            }
        );
        let env = envelope(Scenario::S5, &fleet(), 1.0).unwrap();
        assert_eq!((env.dp_lo, env.dp_hi), (-8.0, 6.0));
        assert_eq!(env.half_width(), 6.0);
    }

    #[test]
    fn negative_pv_rejected() {
        assert_eq!(envelope(Scenario::S1, &fleet(), -0.1), Err(FlexError::NegativePv(-0.1)));
    }

    #[test]
    fn contains_is_closed() {
        let env = FlexEnvelope {
            p0: 0.0,
            dp_lo: -6.5,
            dp_hi: 6.5,
        };
        assert!(contains(&env, 6.5));
        assert!(!contains(&env, 6.5 + 1e-6));
        let env = FlexEnvelope {
            p0: 0.0,
            dp_lo: -8.0,
            dp_hi: 8.0,
        };
        assert!(contains(&env, -8.0));
    }

    #[test]
    fn scenario_parsing() {
        assert_eq!("s4".parse::<Scenario>().unwrap(), Scenario::S4);
        assert_eq!(" S1 ".parse::<Scenario>().unwrap(), Scenario::S1);
        assert!("S6".parse::<Scenario>().is_err());
    }
}
