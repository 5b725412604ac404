//! Analytic store-and-forward timing for asymmetric client links.
//!
//! A transfer of `b` bytes over a link of `bw` bits/s with one-way latency
//! `lat` takes `lat + 8·b/bw` seconds. Clients run in parallel; a round
//! lasts as long as its slowest client.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MBPS: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub name: String,
    pub uplink_bps: f64,
    pub downlink_bps: f64,
    pub latency_s: f64,
}

impl NetworkScenario {
    pub fn new(name: impl Into<String>, uplink_bps: f64, downlink_bps: f64, latency_s: f64) -> Result<Self> {
        let s = Self {
            name: name.into(),
            uplink_bps,
            downlink_bps,
            latency_s,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("uplink_bps", self.uplink_bps),
            ("downlink_bps", self.downlink_bps),
            ("latency_s", self.latency_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "network {field} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Named preset `"up/down"` in Mbps with 50 ms latency.
    pub fn preset(name: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(n, _, _)| *n == name)
            .map(|&(n, up, down)| Self {
                name: n.to_string(),
                uplink_bps: up * MBPS,
                downlink_bps: down * MBPS,
                latency_s: PRESET_LATENCY_S,
            })
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown network scenario {name:?}; presets are {}",
                    PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
                ))
            })
    }

    /// The four preset scenarios, slowest first.
    pub fn presets() -> Vec<Self> {
        PRESETS
            .iter()
            .map(|p| Self::preset(p.0).expect("preset exists"))
            .collect()
    }
}

impl Default for NetworkScenario {
    fn default() -> Self {
        Self::preset("1/5").expect("preset exists")
    }
}

impl FromStr for NetworkScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::preset(s)
    }
}

impl fmt::Display for NetworkScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} / {} Mbps, {} ms)",
            self.name,
            self.uplink_bps / MBPS,
            self.downlink_bps / MBPS,
            self.latency_s * 1e3
        )
    }
}

const PRESET_LATENCY_S: f64 = 0.05;
const PRESETS: [(&str, f64, f64); 4] = [
    ("0.2/1", 0.2, 1.0),
    ("1/5", 1.0, 5.0),
    ("2/10", 2.0, 10.0),
    ("5/25", 5.0, 25.0),
];

pub fn transfer_time(bytes: u64, bandwidth_bps: f64, latency_s: f64) -> f64 {
    latency_s + 8.0 * bytes as f64 / bandwidth_bps
}

/// What one participant moves and computes in a round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientTraffic {
    pub upload_bytes: u64,
    pub download_bytes: u64,
    pub compute_s: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientTime {
    pub download_s: f64,
    pub compute_s: f64,
    pub upload_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeBreakdown {
    pub clients: Vec<ClientTime>,
    pub round_total_s: f64,
}

impl TimeBreakdown {
    /// Longest pure communication time (download + upload) of any client.
    pub fn max_communication_s(&self) -> f64 {
        self.clients
            .iter()
            .map(|c| c.download_s + c.upload_s)
            .fold(0.0, f64::max)
    }
}

pub fn round_time(traffic: &[ClientTraffic], scenario: &NetworkScenario) -> TimeBreakdown {
    let clients: Vec<ClientTime> = traffic
        .iter()
        .map(|t| {
            let download_s = transfer_time(t.download_bytes, scenario.downlink_bps, scenario.latency_s);
            let upload_s = transfer_time(t.upload_bytes, scenario.uplink_bps, scenario.latency_s);
            ClientTime {
                download_s,
                compute_s: t.compute_s,
                upload_s,
                total_s: download_s + t.compute_s + upload_s,
            }
        })
        .collect();
    let round_total_s = clients.iter().map(|c| c.total_s).fold(0.0, f64::max);
    TimeBreakdown {
        clients,
        round_total_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_only_for_empty_payload() {
        assert_eq!(transfer_time(0, 1e6, 0.05), 0.05);
    }

    #[test]
    fn one_megabyte_at_one_megabit() {
        assert_eq!(transfer_time(1_000_000, 1e6, 0.05), 8.05);
    }

    #[test]
    fn slow_uplink_ratio() {
        let slow = transfer_time(2_500_000, 0.2e6, 0.0);
        let fast = transfer_time(2_500_000, 5e6, 0.0);
        assert!((slow / fast - 25.0).abs() < 1e-12);
    }

    #[test]
    fn presets_parse() {
        let s: NetworkScenario = "0.2/1".parse().unwrap();
        assert_eq!(s.uplink_bps, 200_000.0);
        assert_eq!(s.downlink_bps, 1_000_000.0);
        assert_eq!(s.latency_s, 0.05);
        assert!("3/3".parse::<NetworkScenario>().is_err());
        assert_eq!(NetworkScenario::presets().len(), 4);
    }

    #[test]
    fn invalid_scenario_rejected() {
        assert!(NetworkScenario::new("x", 0.0, 1.0, 0.1).is_err());
        assert!(NetworkScenario::new("x", 1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn round_is_slowest_client() {
        let s = NetworkScenario::default();
        let traffic = [
            ClientTraffic {
                upload_bytes: 1000,
                download_bytes: 5000,
                compute_s: 1.0,
            },
            ClientTraffic {
                upload_bytes: 100_000,
                download_bytes: 0,
                compute_s: 0.5,
            },
        ];
        let t = round_time(&traffic, &s);
        let expect1 = 0.05 + 8.0 * 5000.0 / 5e6 + 1.0 + 0.05 + 8.0 * 1000.0 / 1e6;
        let expect2 = 0.05 + 0.5 + 0.05 + 0.8;
        assert!((t.clients[0].total_s - expect1).abs() < 1e-12);
        assert!((t.round_total_s - expect2).abs() < 1e-12);
    }

    #[test]
    fn single_and_equal_clients() {
        let s = NetworkScenario::default();
        let c = ClientTraffic {
            upload_bytes: 123,
            download_bytes: 456,
            compute_s: 0.25,
        };
        let one = round_time(&[c], &s);
        assert_eq!(one.round_total_s, one.clients[0].total_s);
        let many = round_time(&[c, c, c], &s);
        assert_eq!(many.round_total_s, one.round_total_s);
    }
}
