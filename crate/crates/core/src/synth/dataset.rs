//! On-disk dataset layout:
//!
//! ```text
//! root/images/NNNNN.png   8-bit grayscale
//! root/masks/NNNNN.png    strictly {0, 255}
//! root/meta/NNNNN.json    per-target metadata
//! root/manifest.json      config echo, seed, sample names
//! root/stats.json         distribution histograms
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{generate_sample, SampleRecord, SynthConfig, TargetKind};
use crate::error::{Error, Result};
use crate::io::{read_gray8, read_mask, write_gray8, write_mask};
use crate::parallel;
use crate::postproc::Mask;
use crate::raster::ImageBase;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetStats {
    pub count: usize,
    pub targets: usize,
    /// Fraction of images holding two or more targets.
    pub multi_target_fraction: f64,
    /// (targets in image, image count), ascending.
    pub count_hist: Vec<(usize, usize)>,
    pub kind_hist: Vec<(String, usize)>,
    pub scene_hist: Vec<(String, usize)>,
    /// (inclusive area bin label, targets).
    pub area_hist: Vec<(String, usize)>,
    /// Peak-brightness deciles, (bin label, targets).
    pub peak_hist: Vec<(String, usize)>,
    pub spie_fraction: f64,
    pub unclipped_fraction: f64,
    /// Among unclipped targets, fraction within 5% of requested SCR.
    pub scr_ok_unclipped_fraction: f64,
    pub std_floored: usize,
}

/// Top-level record of a generated dataset; written once per directory and
/// consulted by every reader.
#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub seed: u64,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub synth: SynthConfig,
    pub samples: Vec<String>,
}

fn sample_name(i: usize) -> String {
    format!("{i:05}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("json encode: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::decode(path, format!("json parse: {e}")))
}

fn area_bin(area: usize) -> &'static str {
    match area {
        0..=2 => "1-2",
        3..=5 => "3-5",
        6..=10 => "6-10",
        11..=20 => "11-20",
        21..=40 => "21-40",
        41..=80 => "41-80",
        _ => "81+",
    }
}

const AREA_BINS: [&str; 7] = ["1-2", "3-5", "6-10", "11-20", "21-40", "41-80", "81+"];

fn collect_stats(config: &SynthConfig, samples: &[SampleRecord]) -> DatasetStats {
    let spie_bound = config.spie_area_bound();
    let mut targets = 0usize;
    let mut multi = 0usize;
    let mut count_hist: Vec<(usize, usize)> = Vec::new();
    let mut kind_counts = [0usize; 3];
    let mut scene_hist: Vec<(String, usize)> = Vec::new();
    let mut area_counts = [0usize; AREA_BINS.len()];
    let mut peak_counts = [0usize; 10];
    let mut spie_ok = 0usize;
    let mut unclipped = 0usize;
    let mut scr_ok_unclipped = 0usize;
    let mut floored = 0usize;

    for s in samples {
        let n = s.meta.targets.len();
        targets += n;
        if n >= 2 {
            multi += 1;
        }
        match count_hist.iter_mut().find(|(k, _)| *k == n) {
            Some((_, c)) => *c += 1,
            None => count_hist.push((n, 1)),
        }
        let scene = s.meta.scene.to_string();
        match scene_hist.iter_mut().find(|(k, _)| *k == scene) {
            Some((_, c)) => *c += 1,
            None => scene_hist.push((scene, 1)),
        }
        for t in &s.meta.targets {
            let slot = match t.kind {
                TargetKind::PointGaussian => 0,
                TargetKind::Spot => 1,
                TargetKind::Extended => 2,
            };
            kind_counts[slot] += 1;
            let bin = area_bin(t.area);
            let idx = AREA_BINS.iter().position(|b| *b == bin).expect("bin covered");
            area_counts[idx] += 1;
            let decile = ((t.peak * 10.0).floor() as usize).min(9);
            peak_counts[decile] += 1;
            if (t.area as f64) < spie_bound {
                spie_ok += 1;
            }
            if !t.clipped {
                unclipped += 1;
                if (t.scr_measured - t.scr_requested).abs() / t.scr_requested <= 0.05 {
                    scr_ok_unclipped += 1;
                }
            }
            if t.std_floored {
                floored += 1;
            }
        }
    }
    count_hist.sort_unstable();
    scene_hist.sort();

    let tf = targets.max(1) as f64;
    DatasetStats {
        count: samples.len(),
        targets,
        multi_target_fraction: multi as f64 / samples.len().max(1) as f64,
        count_hist,
        kind_hist: vec![
            ("point_gaussian".into(), kind_counts[0]),
            ("spot".into(), kind_counts[1]),
            ("extended".into(), kind_counts[2]),
        ],
        scene_hist,
        area_hist: AREA_BINS.iter().zip(area_counts).map(|(b, c)| (b.to_string(), c)).collect(),
        peak_hist: (0..10)
            .map(|d| (format!("{:.1}-{:.1}", d as f64 / 10.0, (d + 1) as f64 / 10.0), peak_counts[d]))
            .collect(),
        spie_fraction: spie_ok as f64 / tf,
        unclipped_fraction: unclipped as f64 / tf,
        scr_ok_unclipped_fraction: if unclipped == 0 {
            1.0
        } else {
            scr_ok_unclipped as f64 / unclipped as f64
        },
        std_floored: floored,
    }
}

/// Generate `config.count` samples and write the dataset layout under
/// `out`. Refuses a directory that already holds a dataset unless `force`.
pub fn synth_dataset(config: &SynthConfig, out: &Path, force: bool) -> Result<DatasetStats> {
    config.validate()?;
    let manifest_path = out.join("manifest.json");
    if manifest_path.exists() && !force {
        return Err(Error::Config(format!(
            "{} already holds a dataset (pass force to overwrite)",
            out.display()
        )));
    }
    for sub in ["images", "masks", "meta"] {
        std::fs::create_dir_all(out.join(sub)).map_err(|e| Error::io(&out.join(sub), e))?;
    }

    let results = parallel::ordered_map(config.count, |i| generate_sample(config, i));
    let mut samples = Vec::with_capacity(config.count);
    for r in results {
        samples.push(r?);
    }

    let mut names = Vec::with_capacity(samples.len());
    for s in &samples {
        let name = sample_name(s.meta.index);
        write_gray8(&out.join("images").join(format!("{name}.png")), &s.image)?;
        write_mask(&out.join("masks").join(format!("{name}.png")), &s.mask)?;
        write_json(&out.join("meta").join(format!("{name}.json")), &s.meta)?;
        names.push(name);
    }

    let stats = collect_stats(config, &samples);
    write_json(&out.join("stats.json"), &stats)?;
    write_json(
        &manifest_path,
        &Manifest {
            kind: "dataset".into(),
            seed: config.seed,
            count: config.count,
            height: config.height,
            width: config.width,
            synth: config.clone(),
            samples: names,
        },
    )?;
    Ok(stats)
}

/// Image/mask pairs in manifest order.
pub fn load_dataset(root: &Path) -> Result<Vec<(ImageBase<f64>, Mask)>> {
    let manifest: Manifest = read_json(&root.join("manifest.json"))?;
    let mut out = Vec::with_capacity(manifest.samples.len());
    for name in &manifest.samples {
        let img = read_gray8(&root.join("images").join(format!("{name}.png")))?;
        let mask = read_mask(&root.join("masks").join(format!("{name}.png")))?;
        if img.h != mask.h || img.w != mask.w {
            return Err(Error::decode(
                &root.join("masks").join(format!("{name}.png")),
                "mask extents differ from image",
            ));
        }
        out.push((img, mask));
    }
    Ok(out)
}

/// Paths of one sample, for tools that work file-by-file.
pub fn sample_paths(root: &Path, index: usize) -> (PathBuf, PathBuf, PathBuf) {
    let name = sample_name(index);
    (
        root.join("images").join(format!("{name}.png")),
        root.join("masks").join(format!("{name}.png")),
        root.join("meta").join(format!("{name}.json")),
    )
}
