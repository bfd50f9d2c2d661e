//! Synthetic cities with planted cluster structure.
//!
//! Each cluster has a prototype signature. A zone draws its true signature
//! from a Dirichlet centred on its cluster's prototype, draws its permits
//! categorically from that signature, and draws incident response times
//! around a known function of the true signature. Everything derives from
//! one seed, so a city is a reproducible ground truth for the pipeline.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveTime};
use pathfinding::prelude::{kuhn_munkres, Matrix};
use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusteringModel;
use crate::error::{Error, Result};
use crate::ingestion::{DateWindow, IncidentRecord, PermitRecord, WorkType, ZoneId};
use crate::numeric::euclidean;
use crate::rng::{derive_seed, stream, task_rng, TaskRng};
use crate::signature::Signature;
use crate::WORK_TYPE_COUNT;

/// Ground-truth mean response time as a function of the true signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ResponseFn {
    /// `base + weights · signature`.
    Linear {
        base: f64,
        weights: [f64; WORK_TYPE_COUNT],
    },
    /// `base + delta` when the new-building plus demolition share exceeds
    /// `threshold`, else `base`.
    Step { base: f64, delta: f64, threshold: f64 },
}

impl ResponseFn {
    /// Evaluated value, floored at 0 seconds.
    pub fn eval(&self, s: &Signature) -> f64 {
        let v = match self {
            ResponseFn::Linear { base, weights } => {
                base + weights.iter().zip(s).map(|(w, x)| w * x).sum::<f64>()
            }
            ResponseFn::Step {
                base,
                delta,
                threshold,
            } => {
                let exterior =
                    s[WorkType::NewBuilding.index()] + s[WorkType::Demolition.index()];
                if exterior > *threshold {
                    base + delta
                } else {
                    *base
                }
            }
        };
        v.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_zones: usize,
    pub n_clusters: usize,
    /// Dirichlet concentration around each prototype; `f64::INFINITY` makes
    /// every zone's signature equal its prototype.
    pub concentration: f64,
    /// Inclusive range of permits drawn per zone.
    pub permits_per_zone: (usize, usize),
    /// Inclusive range of incidents drawn per zone.
    pub incidents_per_zone: (usize, usize),
    pub response_fn: ResponseFn,
    pub noise_sd: f64,
    pub seed: u64,
    /// Overrides the minimum pairwise prototype distance, which otherwise is
    /// `4 / sqrt(concentration + 1)`.
    #[serde(default)]
    pub min_separation: Option<f64>,
    /// Fixed prototypes instead of random ones.
    #[serde(default)]
    pub prototypes: Option<Vec<Signature>>,
    pub window: DateWindow,
}

impl SyntheticSpec {
    /// 150 zones in 5 well-separated clusters, 300 s base response with 30 s
    /// noise.
    pub fn planted(seed: u64) -> Self {
        SyntheticSpec {
            n_zones: 150,
            n_clusters: 5,
            concentration: 400.0,
            permits_per_zone: (300, 600),
            incidents_per_zone: (50, 80),
            response_fn: ResponseFn::Linear {
                base: 300.0,
                weights: [400.0, 150.0, 60.0, 300.0, -40.0, -60.0, 20.0, 0.0],
            },
            noise_sd: 30.0,
            seed,
            min_separation: None,
            prototypes: None,
            window: DateWindow::study_period(),
        }
    }

    /// Zero-noise linear response over broad clusters, with enough permits
    /// per zone that empirical signatures sit within about 0.01 of the
    /// true ones.
    pub fn exact_linear(seed: u64) -> Self {
        SyntheticSpec {
            concentration: 40.0,
            permits_per_zone: (10_000, 15_000),
            noise_sd: 0.0,
            ..SyntheticSpec::planted(seed)
        }
    }

    /// 300 zones whose response jumps by 120 s once new building plus
    /// demolition passes 30% of permits. Every prototype sits exactly on
    /// the threshold, so each cluster straddles the step.
    pub fn step(seed: u64) -> Self {
        let prototypes = [1, 2, 4, 5, 6]
            .map(|dominant| {
                let mut p = [0.04; WORK_TYPE_COUNT];
                p[WorkType::NewBuilding.index()] = 0.3;
                p[WorkType::Demolition.index()] = 0.0;
                p[dominant] = 0.5;
                p
            })
            .to_vec();
        SyntheticSpec {
            n_zones: 300,
            concentration: 15.0,
            permits_per_zone: (3_000, 4_500),
            response_fn: ResponseFn::Step {
                base: 300.0,
                delta: 120.0,
                threshold: 0.3,
            },
            prototypes: Some(prototypes),
            ..SyntheticSpec::planted(seed)
        }
    }

    pub fn separation_floor(&self) -> f64 {
        self.min_separation.unwrap_or_else(|| {
            if self.concentration.is_infinite() {
                0.0
            } else {
                4.0 / (self.concentration + 1.0).sqrt()
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.n_clusters == 0 || self.n_clusters > self.n_zones {
            return bad("need 1 <= n_clusters <= n_zones");
        }
        if self.n_zones > 89_999 {
            return bad("at most 89999 zones");
        }
        if !(self.concentration > 0.0) {
            return bad("concentration must be positive");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and >= 0");
        }
        let (p0, p1) = self.permits_per_zone;
        let (i0, i1) = self.incidents_per_zone;
        if p0 == 0 || p0 > p1 || i0 > i1 {
            return bad("per-zone ranges must be non-empty with at least one permit");
        }
        if let Some(protos) = &self.prototypes {
            if protos.len() != self.n_clusters {
                return bad("prototype count must equal n_clusters");
            }
            for p in protos {
                if p.iter().any(|x| !(*x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad("prototypes must lie on the simplex");
                }
            }
            for (i, a) in protos.iter().enumerate() {
                if protos[..i].contains(a) {
                    return bad("prototypes must be pairwise distinct");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneTruth {
    pub zone_id: ZoneId,
    pub true_cluster: usize,
    pub true_signature: Signature,
    pub true_mean_response: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCity {
    pub permits: Vec<PermitRecord>,
    pub incidents: Vec<IncidentRecord>,
    pub truth: Vec<ZoneTruth>,
    pub prototypes: Vec<Signature>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCity> {
    spec.validate()?;
    let prototypes = match &spec.prototypes {
        Some(p) => p.clone(),
        None => draw_prototypes(spec)?,
    };

    let mut labels: Vec<usize> = (0..spec.n_zones).map(|i| i % spec.n_clusters).collect();
    labels.shuffle(&mut task_rng(derive_seed(spec.seed, stream::ZONES)));

    let zones: Vec<ZoneDraw> = labels
        .par_iter()
        .enumerate()
        .map(|(z, &cluster)| {
            let mut rng = task_rng(derive_seed(spec.seed ^ stream::ZONES, z as u64));
            draw_zone(spec, z, cluster, &prototypes[cluster], &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut city = SyntheticCity {
        permits: Vec::new(),
        incidents: Vec::new(),
        truth: Vec::with_capacity(zones.len()),
        prototypes,
    };
    for z in zones {
        city.permits.extend(z.permits);
        city.incidents.extend(z.incidents);
        city.truth.push(z.truth);
    }
    Ok(city)
}

fn draw_prototypes(spec: &SyntheticSpec) -> Result<Vec<Signature>> {
    const MAX_ATTEMPTS: usize = 100_000;
    let floor = spec.separation_floor();
    if spec.n_clusters > 1 && floor >= std::f64::consts::SQRT_2 {
        return Err(Error::CannotSeparate(format!(
            "separation floor {floor:.3} exceeds the simplex diameter"
        )));
    }
    let mut rng = task_rng(derive_seed(spec.seed, stream::PROTOTYPES));
    let flat = [1.0; WORK_TYPE_COUNT];
    let mut out: Vec<Signature> = Vec::with_capacity(spec.n_clusters);
    for _ in 0..MAX_ATTEMPTS {
        if out.len() == spec.n_clusters {
            break;
        }
        let candidate = dirichlet(&flat, &mut rng);
        if out.iter().all(|p| euclidean(p, &candidate) >= floor) {
            out.push(candidate);
        }
    }
    if out.len() < spec.n_clusters {
        return Err(Error::CannotSeparate(format!(
            "placed {} of {} prototypes at separation {floor:.3}",
            out.len(),
            spec.n_clusters
        )));
    }
    Ok(out)
}

/// Dirichlet draw via normalized Gamma variates; zero alphas give zero
/// components.
fn dirichlet(alpha: &[f64; WORK_TYPE_COUNT], rng: &mut TaskRng) -> Signature {
    loop {
        let mut g = [0.0; WORK_TYPE_COUNT];
        for (x, a) in g.iter_mut().zip(alpha) {
            if *a > 0.0 {
                *x = Gamma::new(*a, 1.0).expect("positive shape").sample(rng);
            }
        }
        let sum: f64 = g.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return g.map(|x| x / sum);
        }
    }
}

struct ZoneDraw {
    permits: Vec<PermitRecord>,
    incidents: Vec<IncidentRecord>,
    truth: ZoneTruth,
}

fn draw_zone(
    spec: &SyntheticSpec,
    index: usize,
    cluster: usize,
    prototype: &Signature,
    rng: &mut TaskRng,
) -> Result<ZoneDraw> {
    let zone_id: ZoneId = format!("{:05}", 10_001 + index)
        .parse()
        .expect("five digits");
    let signature = if spec.concentration.is_infinite() {
        *prototype
    } else {
        dirichlet(&prototype.map(|p| p * spec.concentration), rng)
    };
    let mean = spec.response_fn.eval(&signature);
    let window = spec.window;
    let days = (window.end - window.start).num_days();

    let weights = WeightedIndex::new(signature).map_err(|e| Error::Config(e.to_string()))?;
    let n_permits = rng.random_range(spec.permits_per_zone.0..=spec.permits_per_zone.1);
    let permits = (0..n_permits)
        .map(|_| {
            let work_type = WorkType::ALL[weights.sample(rng)];
            let start_date = window.start + Duration::days(rng.random_range(0..=days));
            let expiration_date = start_date + Duration::days(rng.random_range(30..=365));
            PermitRecord {
                zone_id: zone_id.clone(),
                borough: Some("SYNTH".to_string()),
                work_type,
                work_subtype: None,
                start_date,
                expiration_date: Some(expiration_date),
            }
        })
        .collect();

    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let n_incidents = rng.random_range(spec.incidents_per_zone.0..=spec.incidents_per_zone.1);
    let seconds_in_window = (days + 1) * 86_400;
    let incidents = (0..n_incidents)
        .map(|_| {
            let offset = rng.random_range(0..seconds_in_window);
            let timestamp = window.start.and_time(NaiveTime::MIN) + Duration::seconds(offset);
            IncidentRecord {
                zone_id: zone_id.clone(),
                timestamp,
                response_time_s: truncated_normal(mean, spec.noise_sd, &noise, rng),
            }
        })
        .collect();

    Ok(ZoneDraw {
        permits,
        incidents,
        truth: ZoneTruth {
            zone_id,
            true_cluster: cluster,
            true_signature: signature,
            true_mean_response: mean,
        },
    })
}

/// Gaussian around `mean` conditioned on being >= 0 (clamped to 0 if no
/// non-negative draw turns up after many tries).
fn truncated_normal(mean: f64, sd: f64, noise: &Normal<f64>, rng: &mut TaskRng) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    for _ in 0..1000 {
        let v = mean + noise.sample(rng);
        if v >= 0.0 {
            return v;
        }
    }
    0.0
}

/// Fraction of points whose predicted label matches the true label under
/// the best one-to-one relabelling (optimal assignment on the confusion
/// matrix).
pub fn best_match_accuracy(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::ZoneMismatch("no zones to score".into()));
    }
    let k = truth.iter().chain(predicted).max().expect("non-empty") + 1;
    let mut confusion = Matrix::new(k, k, 0i64);
    for (t, p) in truth.iter().zip(predicted) {
        confusion[(*t, *p)] += 1;
    }
    let (matched, _) = kuhn_munkres(&confusion);
    Ok(matched as f64 / truth.len() as f64)
}

/// Recovery of the planted clusters by a fitted model whose rows are
/// `zone_ids`.
pub fn score_recovery(truth: &[ZoneTruth], zone_ids: &[ZoneId], model: &ClusteringModel) -> Result<f64> {
    if zone_ids.len() != model.assignments.len() {
        return Err(Error::LengthMismatch(zone_ids.len(), model.assignments.len()));
    }
    let by_zone: BTreeMap<&ZoneId, usize> =
        truth.iter().map(|t| (&t.zone_id, t.true_cluster)).collect();
    if by_zone.len() != zone_ids.len() {
        return Err(Error::ZoneMismatch(format!(
            "{} truth zones vs {} clustered zones",
            by_zone.len(),
            zone_ids.len()
        )));
    }
    let labels = zone_ids
        .iter()
        .map(|z| {
            by_zone
                .get(z)
                .copied()
                .ok_or_else(|| Error::ZoneMismatch(format!("zone {z} missing from truth")))
        })
        .collect::<Result<Vec<_>>>()?;
    best_match_accuracy(&labels, &model.assignments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::signatures_from_permits;

    fn small(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_zones: 20,
            n_clusters: 3,
            permits_per_zone: (50, 80),
            incidents_per_zone: (5, 10),
            ..SyntheticSpec::planted(seed)
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SyntheticSpec::planted(42);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_ne!(generate(&spec).unwrap(), generate(&SyntheticSpec::planted(43)).unwrap());
    }

    #[test]
    fn prototypes_respect_floor() {
        let spec = SyntheticSpec::planted(1);
        let city = generate(&spec).unwrap();
        let floor = spec.separation_floor();
        for (i, a) in city.prototypes.iter().enumerate() {
            for b in &city.prototypes[..i] {
                assert!(euclidean(a, b) >= floor);
            }
        }
    }

    #[test]
    fn records_satisfy_ingestion_invariants() {
        let spec = small(5);
        let city = generate(&spec).unwrap();
        for p in &city.permits {
            p.validate().unwrap();
            assert!(spec.window.contains(p.start_date));
        }
        for i in &city.incidents {
            i.validate().unwrap();
            assert!(spec.window.contains(i.timestamp.date()));
        }
        assert_eq!(city.truth.len(), 20);
        let sizes = (0..3).map(|c| city.truth.iter().filter(|t| t.true_cluster == c).count());
        assert!(sizes.into_iter().all(|s| s == 6 || s == 7));
    }

    #[test]
    fn zero_noise_gives_exact_means() {
        let spec = SyntheticSpec {
            noise_sd: 0.0,
            ..small(9)
        };
        let city = generate(&spec).unwrap();
        for t in &city.truth {
            let xs: Vec<f64> = city
                .incidents
                .iter()
                .filter(|i| i.zone_id == t.zone_id)
                .map(|i| i.response_time_s)
                .collect();
            assert!(!xs.is_empty());
            assert!(xs.iter().all(|x| *x == t.true_mean_response));
            assert_eq!(crate::numeric::shifted_mean(xs), Some(t.true_mean_response));
        }
    }

    #[test]
    fn infinite_concentration_uses_prototypes() {
        let spec = SyntheticSpec {
            concentration: f64::INFINITY,
            ..small(3)
        };
        let city = generate(&spec).unwrap();
        for t in &city.truth {
            assert_eq!(t.true_signature, city.prototypes[t.true_cluster]);
        }
    }

    #[test]
    fn empirical_signature_converges() {
        let spec = SyntheticSpec {
            n_zones: 6,
            n_clusters: 2,
            permits_per_zone: (10_000, 10_000),
            incidents_per_zone: (1, 1),
            ..SyntheticSpec::planted(21)
        };
        let city = generate(&spec).unwrap();
        let m = signatures_from_permits(&city.permits).unwrap();
        for t in &city.truth {
            let row = &m.rows[m.position(&t.zone_id).unwrap()];
            let l1: f64 = row.iter().zip(&t.true_signature).map(|(a, b)| (a - b).abs()).sum();
            assert!(l1 < 0.05, "zone {} l1 {l1}", t.zone_id);
        }
    }

    #[test]
    fn impossible_separation() {
        let spec = SyntheticSpec {
            concentration: 1.0,
            ..small(0)
        };
        assert!(matches!(generate(&spec), Err(Error::CannotSeparate(_))));
        let crowded = SyntheticSpec {
            n_zones: 60,
            n_clusters: 60,
            min_separation: Some(1.0),
            ..small(0)
        };
        assert!(matches!(generate(&crowded), Err(Error::CannotSeparate(_))));
    }

    #[test]
    fn step_response() {
        let f = ResponseFn::Step {
            base: 300.0,
            delta: 60.0,
            threshold: 0.1,
        };
        let mut s = [0.0; 8];
        s[0] = 0.06;
        s[3] = 0.05;
        s[5] = 0.89;
        assert_eq!(f.eval(&s), 360.0);
        s[0] = 0.04;
        s[5] = 0.91;
        assert_eq!(f.eval(&s), 300.0);
    }

    #[test]
    fn recovery_scores() {
        let truth = [0, 0, 1, 1, 2, 2, 2, 1, 0, 2];
        let relabelled: Vec<usize> = truth.iter().map(|t| (t + 1) % 3).collect();
        assert_eq!(best_match_accuracy(&truth, &relabelled).unwrap(), 1.0);
        let mut one_off = relabelled.clone();
        one_off[4] = (one_off[4] + 1) % 3;
        assert_eq!(best_match_accuracy(&truth, &one_off).unwrap(), 0.9);
        assert!(best_match_accuracy(&truth, &truth[..3]).is_err());
    }
}
