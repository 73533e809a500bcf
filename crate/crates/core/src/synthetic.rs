//! Deterministic synthetic datasets shaped like the registry schemas.
//!
//! Labels are assigned by ranking a latent merit score that is shifted down
//! for the protected group, so baseline models inherit a between-group gap.
//! The number of favorable labels is `round(rate * rows)`, which makes the
//! base rate exact to four decimals whenever `rows` is a multiple of 10,000.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Dataset, DatasetSpec, FeatureColumn, FeatureKind, FeatureSpec, Group};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub rows: usize,
    pub seed: u64,
    /// Probability that a row belongs to the protected group.
    pub protected_share: f64,
    /// Shift of the latent merit against the protected group, in standard deviations.
    pub group_gap: f64,
    /// Fraction of numeric features whose distribution also shifts with the group.
    pub proxy_strength: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            rows: 10_000,
            seed: 2024,
            protected_share: 0.4,
            group_gap: 0.8,
            proxy_strength: 0.5,
        }
    }
}

const LEVELS: usize = 4;

pub fn generate(spec: &DatasetSpec, cfg: &SyntheticConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.rows;
    let rate = spec.expected_base_rate.unwrap_or(0.5);

    let groups: Vec<Group> = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < cfg.protected_share {
                Group::Protected
            } else {
                Group::Privileged
            }
        })
        .collect();

    let mut latent: Vec<f64> = groups
        .iter()
        .map(|&g| match g {
            Group::Protected => -cfg.group_gap,
            Group::Privileged => 0.0,
        })
        .collect();

    let mut columns = Vec::with_capacity(spec.features.len());
    for (j, f) in spec.features.iter().enumerate() {
        let weight = 0.4 + 0.8 * rng.gen::<f64>();
        match f.kind {
            FeatureKind::Numeric => {
                let is_proxy = (j as f64 + 0.5) / (spec.features.len() as f64) < cfg.proxy_strength;
                let scale = 1.0 + 9.0 * rng.gen::<f64>();
                let offset = 10.0 * rng.gen::<f64>();
                let mut values = Vec::with_capacity(n);
                for i in 0..n {
                    let mut z: f64 = StandardNormal.sample(&mut rng);
                    if is_proxy && groups[i] == Group::Protected {
                        z -= 0.5;
                    }
                    latent[i] += weight * z;
                    values.push(((offset + scale * z) * 1000.0).round() / 1000.0);
                }
                columns.push(FeatureColumn::Numeric {
                    name: f.name.clone(),
                    values,
                });
            }
            FeatureKind::Categorical => {
                let effects: Vec<f64> = (0..LEVELS).map(|_| weight * (rng.gen::<f64>() - 0.5)).collect();
                let codes: Vec<u32> = (0..n)
                    .map(|i| {
                        let code = rng.gen_range(0..LEVELS);
                        latent[i] += effects[code];
                        code as u32
                    })
                    .collect();
                columns.push(FeatureColumn::Categorical {
                    name: f.name.clone(),
                    codes,
                    levels: (0..LEVELS).map(|k| format!("L{k}")).collect(),
                });
            }
        }
    }
    for z in latent.iter_mut() {
        let noise: f64 = StandardNormal.sample(&mut rng);
        *z += 0.7 * noise;
    }

    let positives = (rate * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| latent[b].total_cmp(&latent[a]).then(a.cmp(&b)));
    let mut label = vec![0u8; n];
    for &i in order.iter().take(positives) {
        label[i] = 1;
    }

    Dataset::from_parts(spec.clone(), columns, groups, label)
}

fn toy_spec(features: &[&str]) -> DatasetSpec {
    DatasetSpec {
        name: "toy".into(),
        protected_attribute_column: "group".into(),
        protected_value: "protected".into(),
        target_column: "label".into(),
        favorable_value: "1".into(),
        expected_base_rate: None,
        privileged_value: Some("privileged".into()),
        unfavorable_value: Some("0".into()),
        missing_markers: vec![String::new()],
        features: features
            .iter()
            .map(|name| FeatureSpec {
                name: name.to_string(),
                kind: FeatureKind::Numeric,
            })
            .collect(),
    }
}

/// Small dataset with one numeric feature `x` equal to the row index.
pub fn toy_dataset(rows: &[(Group, u8)]) -> Dataset {
    let x = (0..rows.len()).map(|i| i as f64).collect();
    toy_with_features(rows, vec![("x", x)])
}

/// Small dataset with caller-supplied numeric features.
pub fn toy_with_features(rows: &[(Group, u8)], features: Vec<(&str, Vec<f64>)>) -> Dataset {
    let names: Vec<&str> = features.iter().map(|(n, _)| *n).collect();
    let spec = toy_spec(&names);
    let columns = features
        .into_iter()
        .map(|(name, values)| FeatureColumn::Numeric {
            name: name.to_string(),
            values,
        })
        .collect();
    Dataset::from_parts(
        spec,
        columns,
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
    )
    .expect("toy dataset is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ingest_reader, registry, verify_base_rate};

    #[test]
    fn synthetic_rates_match_registry_exactly() {
        for spec in registry::all() {
            let d = generate(&spec, &SyntheticConfig::default()).unwrap();
            let check = verify_base_rate(&d);
            assert_eq!(check.matches_to_4_decimals, Some(true), "{}", spec.name);
            let mut buf = Vec::new();
            d.export_csv(&mut buf).unwrap();
            let back = ingest_reader(buf.as_slice(), &spec).unwrap();
            assert_eq!(back.labels(), d.labels());
            assert_eq!(back.groups(), d.groups());
            assert_eq!(back.columns(), d.columns());
        }
    }

    #[test]
    fn generation_is_seeded() {
        let spec = registry::get("compas").unwrap();
        let cfg = SyntheticConfig {
            rows: 500,
            ..SyntheticConfig::default()
        };
        assert_eq!(generate(&spec, &cfg).unwrap(), generate(&spec, &cfg).unwrap());
    }
}
