//! Run configuration: built-in defaults, overridden by a TOML file, overridden
//! by command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use skytrack_core::backend::{OracleNoise, DEFAULT_MARGIN};
use skytrack_core::protocol::LinkModel;
use skytrack_core::TrackerKind;

use crate::clock::Timing;

pub const SEED_ENV: &str = "SKYTRACK_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub timing: Option<Timing>,
    pub mission: MissionSection,
    pub link: LinkSection,
    pub noise: NoiseSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionSection {
    pub tracker: Option<TrackerKind>,
    pub t_c: Option<f64>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub bandwidth: Option<f64>,
    pub latency: Option<f64>,
    pub downlink_bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub miss_rate: Option<f64>,
    pub spurious_rate: Option<f64>,
    pub jitter_sigma: Option<f64>,
    pub verify_flip_rate: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    /// Fields set in `over` win.
    pub fn overlay(mut self, over: &ConfigFile) -> Self {
        fn pick<T: Clone>(base: &mut Option<T>, over: &Option<T>) {
            if over.is_some() {
                base.clone_from(over);
            }
        }
        pick(&mut self.seed, &over.seed);
        pick(&mut self.timing, &over.timing);
        pick(&mut self.mission.tracker, &over.mission.tracker);
        pick(&mut self.mission.t_c, &over.mission.t_c);
        pick(&mut self.mission.margin, &over.mission.margin);
        pick(&mut self.link.bandwidth, &over.link.bandwidth);
        pick(&mut self.link.latency, &over.link.latency);
        pick(&mut self.link.downlink_bandwidth, &over.link.downlink_bandwidth);
        pick(&mut self.noise.miss_rate, &over.noise.miss_rate);
        pick(&mut self.noise.spurious_rate, &over.noise.spurious_rate);
        pick(&mut self.noise.jitter_sigma, &over.noise.jitter_sigma);
        pick(&mut self.noise.verify_flip_rate, &over.noise.verify_flip_rate);
        self
    }

    pub fn resolve(&self) -> Settings {
        let d = Settings::default();
        let link = LinkModel {
            bandwidth: self.link.bandwidth.unwrap_or(d.link.bandwidth),
            latency: self.link.latency.unwrap_or(d.link.latency),
            symmetric: self.link.downlink_bandwidth.is_none(),
            downlink_bandwidth: self.link.downlink_bandwidth,
        };
        let seed = self.seed.unwrap_or(d.seed);
        let noise = OracleNoise {
            miss_rate: self.noise.miss_rate.unwrap_or(0.0),
            spurious_rate: self.noise.spurious_rate.unwrap_or(0.0),
            jitter_sigma: self.noise.jitter_sigma.unwrap_or(0.0),
            verify_flip_rate: self.noise.verify_flip_rate.unwrap_or(0.0),
            seed,
        };
        Settings {
            seed,
            timing: self.timing.unwrap_or(d.timing),
            tracker: self.mission.tracker.unwrap_or(d.tracker),
            t_c: self.mission.t_c.unwrap_or(d.t_c),
            margin: self.mission.margin.unwrap_or(d.margin),
            link,
            noise,
        }
    }
}

/// Fully resolved settings, recorded in every run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    pub timing: Timing,
    pub tracker: TrackerKind,
    pub t_c: f64,
    pub margin: f64,
    pub link: LinkModel,
    pub noise: OracleNoise,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            timing: Timing::Modeled,
            tracker: TrackerKind::Mosse,
            t_c: 0.7,
            margin: DEFAULT_MARGIN,
            link: LinkModel::default(),
            noise: OracleNoise::none(),
        }
    }
}

impl Settings {
    /// The same settings as a config file, so a run can be repeated from its manifest.
    pub fn to_config_file(&self) -> ConfigFile {
        ConfigFile {
            seed: Some(self.seed),
            timing: Some(self.timing),
            mission: MissionSection { tracker: Some(self.tracker), t_c: Some(self.t_c), margin: Some(self.margin) },
            link: LinkSection {
                bandwidth: Some(self.link.bandwidth),
                latency: Some(self.link.latency),
                downlink_bandwidth: if self.link.symmetric { None } else { self.link.downlink_bandwidth },
            },
            noise: NoiseSection {
                miss_rate: Some(self.noise.miss_rate),
                spurious_rate: Some(self.noise.spurious_rate),
                jitter_sigma: Some(self.noise.jitter_sigma),
                verify_flip_rate: Some(self.noise.verify_flip_rate),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: ConfigFile =
            toml::from_str("seed = 5\n[mission]\nt_c = 0.5\ntracker = \"ncc\"\n[link]\nlatency = 0.2\n").unwrap();
        let flags =
            ConfigFile { mission: MissionSection { t_c: Some(0.9), ..Default::default() }, ..Default::default() };
        let s = file.overlay(&flags).resolve();
        assert_eq!(s.t_c, 0.9);
        assert_eq!(s.tracker, TrackerKind::Ncc);
        assert_eq!(s.link.latency, 0.2);
        assert_eq!(s.link.bandwidth, 5e6);
        assert_eq!((s.seed, s.noise.seed), (5, 5));
    }

    #[test]
    fn snapshot_round_trips() {
        let mut s = Settings::default();
        s.link.downlink_bandwidth = Some(1e6);
        s.link.symmetric = false;
        s.noise.miss_rate = 0.25;
        let text = toml::to_string(&s.to_config_file()).unwrap();
        let back: ConfigFile = toml::from_str(&text).unwrap();
        assert_eq!(back.resolve(), s);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("[link]\nbandwith = 3\n").is_err());
    }
}
