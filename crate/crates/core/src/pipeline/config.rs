//! Flat `key = value` run configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_tangent::{Alpha, DimMode, WeightConfig};
use crate::outlier::OutlierMode;
use crate::spectral::ClusterConfig;
use crate::synthetic::Generator;

/// Ordered `key = value` pairs.
pub type Pairs = Vec<(String, String)>;

/// Where the points come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Input {
    /// Synthetic data, regenerated per trial with the trial seed.
    Generator(Generator),
    /// One point per row; an optional trailing integer label column
    /// (negative = outlier) and an optional header row.
    Csv {
        path: PathBuf,
        has_labels: bool,
        header: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Input,
    pub k: usize,
    pub k_sigma: usize,
    /// Tangent neighborhood size; `None` uses `k`.
    pub k_tangent: Option<usize>,
    pub dim: DimMode,
    pub weights: WeightConfig,
    pub sigma_c: f64,
    pub n_c: usize,
    pub outlier: Option<OutlierMode>,
    pub kmeans_replicates: usize,
    pub seed: u64,
    pub trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = ClusterConfig::default();
        Self {
            input: Input::Generator(Generator::intersecting_spheres()),
            k: c.k,
            k_sigma: c.k_sigma,
            k_tangent: c.k_tangent,
            dim: c.dim,
            weights: c.weights,
            sigma_c: c.sigma_c,
            n_c: c.n_c,
            outlier: c.outlier,
            kmeans_replicates: c.kmeans_replicates,
            seed: c.seed,
            trials: 1,
        }
    }
}

/// Every key understood by [`RunConfig::from_pairs`], in serialization order.
pub const RUN_KEYS: &[&str] = &[
    "generator",
    "input",
    "has_labels",
    "header",
    "n_per",
    "r_small",
    "r_big",
    "radius",
    "center_offset",
    "extent",
    "dihedral_angle",
    "n_roll",
    "n_plane",
    "n_outliers",
    "noise_sigma",
    "k",
    "k_sigma",
    "k_tangent",
    "d",
    "sigma_n",
    "sigma_e",
    "alpha",
    "sigma_c",
    "n_c",
    "outlier",
    "kmeans_replicates",
    "seed",
    "trials",
];

pub const GENERATOR_KEYS: &[&str] = &[
    "n_per",
    "r_small",
    "r_big",
    "radius",
    "center_offset",
    "extent",
    "dihedral_angle",
    "n_roll",
    "n_plane",
    "n_outliers",
    "noise_sigma",
];

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_pairs(text: &str) -> Result<Pairs> {
    let mut out: Pairs = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key = value, got `{line}`", no + 1)));
        };
        let key = key.trim().to_string();
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", no + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Overlays `overrides` on `base`; later values replace earlier ones.
pub fn merge_pairs(base: Pairs, overrides: Pairs) -> Pairs {
    let mut out = base;
    for (k, v) in overrides {
        match out.iter_mut().find(|(key, _)| *key == k) {
            Some(slot) => slot.1 = v,
            None => out.push((k, v)),
        }
    }
    out
}

pub fn format_pairs(pairs: &Pairs) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub(crate) fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

/// Round-trippable decimal.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_outlier(value: &str) -> Result<Option<OutlierMode>> {
    match value {
        "off" => Ok(None),
        "auto" => Ok(Some(OutlierMode::AutoKMeans)),
        other => match other.strip_prefix("ratio:") {
            Some(r) => Ok(Some(OutlierMode::GivenRatio(parse_value("outlier", r)?))),
            None => Err(Error::Config(format!(
                "invalid outlier mode `{other}` (expected off, auto or ratio:<float>)"
            ))),
        },
    }
}

fn format_outlier(mode: Option<OutlierMode>) -> String {
    match mode {
        None => "off".into(),
        Some(OutlierMode::AutoKMeans) => "auto".into(),
        Some(OutlierMode::GivenRatio(r)) => format!("ratio:{}", fmt_f64(r)),
    }
}

/// Sets one generator parameter; `Ok(false)` if the key does not apply.
fn set_generator_param(g: &mut Generator, key: &str, value: &str) -> Result<bool> {
    let float = |v: &mut f64| -> Result<bool> {
        *v = parse_value(key, value)?;
        Ok(true)
    };
    let int = |v: &mut usize| -> Result<bool> {
        *v = parse_value(key, value)?;
        Ok(true)
    };
    match (g, key) {
        (Generator::NestedSpheres { n_per, .. }, "n_per")
        | (Generator::IntersectingSpheres { n_per, .. }, "n_per")
        | (Generator::IntersectingPlanes { n_per, .. }, "n_per") => int(n_per),
        (Generator::NestedSpheres { noise_sigma, .. }, "noise_sigma")
        | (Generator::IntersectingSpheres { noise_sigma, .. }, "noise_sigma")
        | (Generator::IntersectingPlanes { noise_sigma, .. }, "noise_sigma")
        | (Generator::SwissrollPlaneOutliers { noise_sigma, .. }, "noise_sigma") => float(noise_sigma),
        (Generator::NestedSpheres { r_small, .. }, "r_small") => float(r_small),
        (Generator::NestedSpheres { r_big, .. }, "r_big") => float(r_big),
        (Generator::IntersectingSpheres { radius, .. }, "radius") => float(radius),
        (Generator::IntersectingSpheres { center_offset, .. }, "center_offset") => float(center_offset),
        (Generator::IntersectingPlanes { extent, .. }, "extent") => float(extent),
        (Generator::IntersectingPlanes { dihedral_angle, .. }, "dihedral_angle") => float(dihedral_angle),
        (Generator::SwissrollPlaneOutliers { n_roll, .. }, "n_roll") => int(n_roll),
        (Generator::SwissrollPlaneOutliers { n_plane, .. }, "n_plane") => int(n_plane),
        (Generator::SwissrollPlaneOutliers { n_outliers, .. }, "n_outliers") => int(n_outliers),
        _ => Ok(false),
    }
}

/// `generator = name` followed by that generator's parameters.
pub fn generator_pairs(g: &Generator) -> Pairs {
    let mut out = vec![("generator".to_string(), g.name().to_string())];
    let mut push = |k: &str, v: String| out.push((k.to_string(), v));
    match *g {
        Generator::NestedSpheres {
            n_per,
            r_small,
            r_big,
            noise_sigma,
        } => {
            push("n_per", n_per.to_string());
            push("r_small", fmt_f64(r_small));
            push("r_big", fmt_f64(r_big));
            push("noise_sigma", fmt_f64(noise_sigma));
        }
        Generator::IntersectingSpheres {
            n_per,
            radius,
            center_offset,
            noise_sigma,
        } => {
            push("n_per", n_per.to_string());
            push("radius", fmt_f64(radius));
            push("center_offset", fmt_f64(center_offset));
            push("noise_sigma", fmt_f64(noise_sigma));
        }
        Generator::IntersectingPlanes {
            n_per,
            extent,
            dihedral_angle,
            noise_sigma,
        } => {
            push("n_per", n_per.to_string());
            push("extent", fmt_f64(extent));
            push("dihedral_angle", fmt_f64(dihedral_angle));
            push("noise_sigma", fmt_f64(noise_sigma));
        }
        Generator::SwissrollPlaneOutliers {
            n_roll,
            n_plane,
            n_outliers,
            noise_sigma,
        } => {
            push("n_roll", n_roll.to_string());
            push("n_plane", n_plane.to_string());
            push("n_outliers", n_outliers.to_string());
            push("noise_sigma", fmt_f64(noise_sigma));
        }
    }
    out
}

/// Builds a generator from `generator = name` plus parameter keys; other keys
/// are ignored.
pub fn generator_from_pairs(pairs: &Pairs) -> Result<Generator> {
    let name = pairs
        .iter()
        .find(|(k, _)| k == "generator")
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Config("missing `generator`".into()))?;
    let mut g = Generator::by_name(name)?;
    for (k, v) in pairs {
        if GENERATOR_KEYS.contains(&k.as_str()) && !set_generator_param(&mut g, k, v)? {
            return Err(Error::Config(format!("`{k}` does not apply to generator {name}")));
        }
    }
    Ok(g)
}

impl RunConfig {
    /// Starts from the defaults and applies every pair. Unknown keys, bad
    /// values and generator parameters that do not fit the input are errors.
    pub fn from_pairs(pairs: &Pairs) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        for (k, _) in pairs {
            if !RUN_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown key `{k}`")));
            }
        }
        match (get("generator"), get("input")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("`generator` and `input` are mutually exclusive".into()))
            }
            (Some(_), None) => cfg.input = Input::Generator(generator_from_pairs(pairs)?),
            (None, Some(path)) => {
                if let Some((k, _)) = pairs.iter().find(|(k, _)| GENERATOR_KEYS.contains(&k.as_str())) {
                    return Err(Error::Config(format!("`{k}` needs a generator input")));
                }
                cfg.input = Input::Csv {
                    path: PathBuf::from(path),
                    has_labels: get("has_labels").map(|v| parse_bool("has_labels", v)).transpose()?.unwrap_or(false),
                    header: get("header").map(|v| parse_bool("header", v)).transpose()?.unwrap_or(false),
                };
            }
            (None, None) => {
                let mut with_default: Pairs = vec![("generator".into(), "intersecting_spheres".into())];
                with_default.extend(pairs.iter().cloned());
                cfg.input = Input::Generator(generator_from_pairs(&with_default)?);
            }
        }
        if matches!(cfg.input, Input::Generator(_)) {
            for key in ["has_labels", "header"] {
                if get(key).is_some() {
                    return Err(Error::Config(format!("`{key}` only applies to CSV input")));
                }
            }
        }
        for (k, v) in pairs {
            match k.as_str() {
                "k" => cfg.k = parse_value(k, v)?,
                "k_sigma" => cfg.k_sigma = parse_value(k, v)?,
                "k_tangent" => cfg.k_tangent = Some(parse_value(k, v)?),
                "d" => {
                    cfg.dim = if v == "auto" {
                        DimMode::Auto
                    } else {
                        DimMode::Fixed(parse_value(k, v)?)
                    }
                }
                "sigma_n" => cfg.weights.sigma_n = parse_value(k, v)?,
                "sigma_e" => cfg.weights.sigma_e = parse_value(k, v)?,
                "alpha" => cfg.weights.alpha = v.parse::<Alpha>()?,
                "sigma_c" => cfg.sigma_c = parse_value(k, v)?,
                "n_c" => cfg.n_c = parse_value(k, v)?,
                "outlier" => cfg.outlier = parse_outlier(v)?,
                "kmeans_replicates" => cfg.kmeans_replicates = parse_value(k, v)?,
                "seed" => cfg.seed = parse_value(k, v)?,
                "trials" => cfg.trials = parse_value(k, v)?,
                _ => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Fully resolved pairs; `from_pairs(to_pairs())` reproduces `self`.
    pub fn to_pairs(&self) -> Pairs {
        let mut out = match &self.input {
            Input::Generator(g) => generator_pairs(g),
            Input::Csv {
                path,
                has_labels,
                header,
            } => vec![
                ("input".into(), path.display().to_string()),
                ("has_labels".into(), has_labels.to_string()),
                ("header".into(), header.to_string()),
            ],
        };
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push("k", self.k.to_string());
        push("k_sigma", self.k_sigma.to_string());
        if let Some(m) = self.k_tangent {
            push("k_tangent", m.to_string());
        }
        push(
            "d",
            match self.dim {
                DimMode::Fixed(d) => d.to_string(),
                DimMode::Auto => "auto".into(),
            },
        );
        push("sigma_n", fmt_f64(self.weights.sigma_n));
        push("sigma_e", fmt_f64(self.weights.sigma_e));
        push("alpha", self.weights.alpha.name().into());
        push("sigma_c", fmt_f64(self.sigma_c));
        push("n_c", self.n_c.to_string());
        push("outlier", format_outlier(self.outlier));
        push("kmeans_replicates", self.kmeans_replicates.to_string());
        push("seed", self.seed.to_string());
        push("trials", self.trials.to_string());
        out
    }

    pub fn to_text(&self) -> String {
        format_pairs(&self.to_pairs())
    }

    /// Clustering parameters for one trial.
    pub fn cluster_config(&self, seed: u64) -> ClusterConfig {
        ClusterConfig {
            k: self.k,
            k_sigma: self.k_sigma,
            k_tangent: self.k_tangent,
            dim: self.dim,
            weights: self.weights,
            sigma_c: self.sigma_c,
            n_c: self.n_c,
            outlier: self.outlier,
            kmeans_replicates: self.kmeans_replicates,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        self.cluster_config(self.seed).validate()
    }
}
