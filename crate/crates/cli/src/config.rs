//! Resolves the flat key=value dialect into the typed module configs.
//! Every key is consumed exactly once and unknown keys are rejected, so a
//! typo fails the run instead of silently using a default. `echo()` returns
//! the fully resolved map, which the run manifest stores; feeding that
//! manifest back through `--config` reproduces the run.

use std::collections::BTreeSet;
use std::str::FromStr;

use sirst_core::io::KvMap;
use sirst_core::net::{Attention, NetworkSpec, Variant};
use sirst_core::synth::{default_size_table, SceneKind, SizeEntry, SynthConfig, TargetKind};
use sirst_core::train::{AugmentFlags, TrainConfig};
use sirst_core::{Error, Result};

pub const DEFAULT_WINDOW: usize = 9;
pub const DEFAULT_D_THRESH: f64 = 3.0;
pub const DEFAULT_THRESHOLDS: usize = 41;

/// Every section resolved, whichever command is running; one config file
/// drives a whole pipeline and any run.json can seed any command.
pub struct RunConfig {
    pub synth: SynthConfig,
    pub net: NetworkSpec,
    pub train: TrainConfig,
    pub d_thresh: f64,
    pub window: usize,
    pub thresholds: usize,
    pub normalize: bool,
    /// Fully resolved flat map; the manifest echo.
    pub echo: KvMap,
}

pub struct Resolver {
    map: KvMap,
    used: BTreeSet<String>,
    resolved: KvMap,
}

fn parse_as<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("key {key}: cannot parse {raw:?}")))
}

impl Resolver {
    pub fn new(map: KvMap) -> Resolver {
        Resolver { map, used: BTreeSet::new(), resolved: KvMap::new() }
    }

    /// Force a key to `value` before resolution; CLI flags land here.
    pub fn set(&mut self, key: &str, value: String) {
        self.map.insert(key.to_string(), value);
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    /// Scalar with default; the resolved value is recorded for the echo.
    fn get<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T> {
        let v = match self.raw(key) {
            Some(raw) => parse_as(key, &raw)?,
            None => default,
        };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    fn get_list<T: FromStr>(&mut self, key: &str, default: &str) -> Result<Vec<T>> {
        let raw = self.raw(key).unwrap_or_else(|| default.to_string());
        let mut out = Vec::new();
        for part in raw.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            out.push(parse_as(key, part)?);
        }
        if out.is_empty() {
            return Err(Error::Config(format!("key {key}: empty list")));
        }
        self.resolved.insert(key.to_string(), raw);
        Ok(out)
    }

    /// Resolves all sections and rejects anything left over.
    pub fn resolve(mut self) -> Result<RunConfig> {
        let synth = self.synth()?;
        let net = self.net()?;
        let train = self.train()?;
        let d_thresh = self.d_thresh()?;
        let window = self.window()?;
        let thresholds = self.thresholds()?;
        let normalize = self.normalize()?;
        let echo = self.echo()?;
        Ok(RunConfig { synth, net, train, d_thresh, window, thresholds, normalize, echo })
    }

    pub fn synth(&mut self) -> Result<SynthConfig> {
        let count = self.get("synth.count", 500usize)?;
        let height = self.get("synth.height", 256usize)?;
        let width = self.get("synth.width", 256usize)?;
        let scr_values = self.get_list("synth.scr", "3,4,5,6")?;
        let blur_sigmas = self.get_list("synth.blur", "0.2,0.5,1.0")?;
        let count_weights = self.count_weights()?;
        let scenes: Vec<SceneKind> = self.get_list("synth.scenes", "cloud,city,sea,field,highlight")?;
        let size_table = self.size_table(&scenes)?;
        let ring_width = self.get("synth.ring_width", 10usize)?;
        let seed = self.get("synth.seed", 0u64)?;
        let cfg = SynthConfig {
            count,
            height,
            width,
            scr_values,
            blur_sigmas,
            count_weights,
            scenes,
            size_table,
            ring_width,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `n:weight` pairs, e.g. `1:0.63,2:0.22,3:0.15`.
    fn count_weights(&mut self) -> Result<Vec<(usize, f64)>> {
        let key = "synth.count_weights";
        let raw = self.raw(key).unwrap_or_else(|| "1:0.63,2:0.22,3:0.15".to_string());
        let mut out = Vec::new();
        for part in raw.split(',') {
            let part = part.trim();
            let Some((n, w)) = part.split_once(':') else {
                return Err(Error::Config(format!("key {key}: expected n:weight, got {part:?}")));
            };
            out.push((parse_as(key, n.trim())?, parse_as(key, w.trim())?));
        }
        self.resolved.insert(key.to_string(), raw);
        Ok(out)
    }

    /// `synth.kinds` filters the built-in per-scene distribution down to the
    /// named target kinds, renormalizing weights within each scene.
    fn size_table(&mut self, scenes: &[SceneKind]) -> Result<Vec<(SceneKind, Vec<SizeEntry>)>> {
        let key = "synth.kinds";
        let raw = self.raw(key).unwrap_or_else(|| "point,spot,extended".to_string());
        let mut kinds = Vec::new();
        for part in raw.split(',') {
            let kind = match part.trim() {
                "point" | "point_gaussian" => TargetKind::PointGaussian,
                "spot" => TargetKind::Spot,
                "extended" => TargetKind::Extended,
                other => {
                    return Err(Error::Config(format!("key {key}: unknown target kind {other:?}")))
                }
            };
            if !kinds.contains(&kind) {
                kinds.push(kind);
            }
        }
        let mut table = Vec::new();
        for (scene, entries) in default_size_table() {
            let mut kept: Vec<SizeEntry> =
                entries.into_iter().filter(|e| kinds.contains(&e.kind)).collect();
            let total: f64 = kept.iter().map(|e| e.weight).sum();
            if scenes.contains(&scene) && kept.is_empty() {
                return Err(Error::Config(format!(
                    "key {key}: scene {scene} has no targets of kinds {raw:?}"
                )));
            }
            for e in &mut kept {
                e.weight /= total;
            }
            table.push((scene, kept));
        }
        self.resolved.insert(key.to_string(), raw);
        Ok(table)
    }

    pub fn net(&mut self) -> Result<NetworkSpec> {
        let depth = self.get("net.depth", 3usize)?;
        let channels = self.get_list("net.channels", "8,16,32,64")?;
        let mlp_reduction = self.get("net.mlp_reduction", 4usize)?;
        let variant: Variant = self.get("net.variant", Variant::Full)?;
        let attention: Attention = self.get("net.attention", Attention::Full)?;
        let default_heads: String =
            (0..=depth).map(|l| l.to_string()).collect::<Vec<_>>().join(",");
        let head_levels = self.get_list("net.head_levels", &default_heads)?;
        let seed = self.get("net.seed", 0u64)?;
        let spec = NetworkSpec {
            depth,
            channels,
            mlp_reduction,
            variant,
            attention,
            head_levels,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn train(&mut self) -> Result<TrainConfig> {
        let learning_rate = self.get("train.learning_rate", 0.05f64)?;
        let batch_size = self.get("train.batch_size", 16usize)?;
        let epochs = self.get("train.epochs", 10usize)?;
        let augment = self.augment()?;
        let seed = self.get("train.seed", 0u64)?;
        let checkpoint_every = self.get("train.checkpoint_every", 0usize)?;
        let cfg = TrainConfig {
            learning_rate,
            batch_size,
            epochs,
            augment,
            seed,
            checkpoint_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `all`, `none`, or a comma list of flip,blur,crop,normalize.
    fn augment(&mut self) -> Result<AugmentFlags> {
        let key = "train.augment";
        let raw = self.raw(key).unwrap_or_else(|| "all".to_string());
        let flags = match raw.as_str() {
            "all" => AugmentFlags::ALL,
            "none" => AugmentFlags::NONE,
            list => {
                let mut f = AugmentFlags::NONE;
                for part in list.split(',') {
                    match part.trim() {
                        "flip" => f.flip = true,
                        "blur" => f.blur = true,
                        "crop" => f.crop = true,
                        "normalize" => f.normalize = true,
                        other => {
                            return Err(Error::Config(format!(
                                "key {key}: unknown augmentation {other:?}"
                            )))
                        }
                    }
                }
                f
            }
        };
        self.resolved.insert(key.to_string(), raw);
        Ok(flags)
    }

    pub fn d_thresh(&mut self) -> Result<f64> {
        let d = self.get("eval.d_thresh", DEFAULT_D_THRESH)?;
        if !(d > 0.0) {
            return Err(Error::Config("eval.d_thresh must be positive".into()));
        }
        Ok(d)
    }

    pub fn window(&mut self) -> Result<usize> {
        let w = self.get("eval.window", DEFAULT_WINDOW)?;
        if w < 3 || w % 2 == 0 {
            return Err(Error::Config(format!("eval.window must be odd and >= 3, got {w}")));
        }
        Ok(w)
    }

    pub fn thresholds(&mut self) -> Result<usize> {
        let n = self.get("eval.thresholds", DEFAULT_THRESHOLDS)?;
        if n < 2 {
            return Err(Error::Config("eval.thresholds must be at least 2".into()));
        }
        Ok(n)
    }

    /// Whether network inference replays the training-time normalization.
    pub fn normalize(&mut self) -> Result<bool> {
        self.get("eval.normalize", true)
    }

    /// Rejects unused keys and hands back the fully resolved map.
    pub fn echo(self) -> Result<KvMap> {
        let unused: Vec<&String> =
            self.map.keys().filter(|k| !self.used.contains(*k)).collect();
        if !unused.is_empty() {
            return Err(Error::Config(format!(
                "unknown config keys: {}",
                unused.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(self.resolved)
    }
}
