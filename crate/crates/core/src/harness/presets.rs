//! Bundled experiment presets.
//!
//! The same files live in the repository's `presets/` directory; the copies
//! compiled in here let `fedelastic run --config mnist_alg3` work from any
//! working directory.

use std::path::{Path, PathBuf};

use super::config::LoadedConfig;
use crate::error::{Error, Result};

pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($name:literal) => {
        Preset {
            name: $name,
            text: include_str!(concat!("../../../../presets/", $name, ".toml")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("mnist_fedavg"),
    preset!("mnist_fedprox"),
    preset!("mnist_alg1"),
    preset!("mnist_scaffold"),
    preset!("mnist_alg2"),
    preset!("mnist_feddyn"),
    preset!("mnist_alg3"),
    preset!("synth_convex"),
    preset!("synth_quadratic"),
    preset!("synth_mlp"),
];

impl Preset {
    /// First sentence of the leading comment block.
    pub fn description(&self) -> String {
        let comment: Vec<&str> = self
            .text
            .lines()
            .map_while(|l| l.strip_prefix('#'))
            .map(str::trim)
            .collect();
        let joined = comment.join(" ");
        match joined.find(". ") {
            Some(end) => joined[..=end].to_string(),
            None => joined,
        }
    }
}

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Directory the bundled presets' relative data paths refer to.
fn bundled_base() -> PathBuf {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    if dir.is_dir() {
        dir
    } else {
        PathBuf::from(".")
    }
}

/// Resolves `spec` as a file path, the same path with `.toml` appended, a
/// path whose file stem names a bundled preset, or a bare preset name.
pub fn resolve(spec: &str) -> Result<LoadedConfig> {
    let path = Path::new(spec);
    if path.is_file() {
        return LoadedConfig::from_path(path);
    }
    let with_ext = path.with_extension("toml");
    if path.extension().is_none() && with_ext.is_file() {
        return LoadedConfig::from_path(&with_ext);
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(spec);
    match find(stem) {
        Some(p) => LoadedConfig::from_str(p.text, bundled_base()),
        None => Err(Error::Config(format!(
            "no config file or preset named '{spec}' (presets: {})",
            PRESETS.iter().map(|p| p.name).collect::<Vec<_>>().join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Variant;

    #[test]
    fn every_preset_parses_and_validates() {
        for p in PRESETS {
            let cfg = LoadedConfig::from_str(p.text, ".").unwrap().config;
            let errors = cfg.validate();
            assert!(errors.is_empty(), "{}: {errors:?}", p.name);
            assert_eq!(cfg.name.as_deref(), Some(p.name));
            assert!(!p.description().is_empty());
        }
    }

    #[test]
    fn mnist_alg3_carries_tuned_penalties() {
        let cfg = resolve("presets/mnist_alg3").unwrap().config;
        assert_eq!(cfg.algorithm.variant, Variant::FeddynEn);
        assert_eq!(cfg.algorithm.lambda1, 1e-4);
        assert_eq!(cfg.algorithm.lambda2, 5e-2);
        assert_eq!(cfg.algorithm.epsilon, 5e-3);
    }

    #[test]
    fn paired_presets_share_everything_but_the_algorithm() {
        for (a, b) in [
            ("mnist_feddyn", "mnist_alg3"),
            ("mnist_fedprox", "mnist_alg1"),
            ("mnist_scaffold", "mnist_alg2"),
        ] {
            let mut ca = resolve(a).unwrap().config;
            let cb = resolve(b).unwrap().config;
            assert_eq!(ca.algorithm.local_lr, cb.algorithm.local_lr);
            ca.algorithm = cb.algorithm.clone();
            ca.name = cb.name.clone();
            ca.output = cb.output.clone();
            assert_eq!(ca, cb, "{a} vs {b}");
        }
    }

    #[test]
    fn bundled_data_paths_exist() {
        let loaded = resolve("mnist_alg3").unwrap();
        if let crate::harness::config::DataConfig::Mnist { train_images, .. } = &loaded.config.data {
            assert!(loaded.base_dir.join(train_images).is_file());
        } else {
            panic!("mnist preset without mnist data");
        }
    }

    #[test]
    fn unknown_preset_lists_the_choices() {
        let err = resolve("nope").unwrap_err().to_string();
        assert!(err.contains("mnist_alg3"), "{err}");
    }
}
