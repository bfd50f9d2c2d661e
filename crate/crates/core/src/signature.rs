//! Per-zone construction signatures.
//!
//! A zone's signature is the share of each work type among all permits issued
//! in that zone. Zones without permits have no signature and are left out.
//! Values are kept at full precision; rounding happens only when reports are
//! rendered.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{PermitRecord, WorkType, ZoneId, WORK_TYPE_COUNT};

/// Work-type proportions in [`WorkType::ALL`] order.
pub type Signature = [f64; WORK_TYPE_COUNT];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneCounts {
    pub zone_id: ZoneId,
    pub counts: [u64; WORK_TYPE_COUNT],
    pub total: u64,
}

impl ZoneCounts {
    pub fn new(zone_id: ZoneId, counts: [u64; WORK_TYPE_COUNT]) -> Self {
        ZoneCounts {
            zone_id,
            total: counts.iter().sum(),
            counts,
        }
    }

    pub fn count(&self, t: WorkType) -> u64 {
        self.counts[t.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSignature {
    pub zone_id: ZoneId,
    pub proportions: Signature,
    pub total_permits: u64,
}

/// Zones in lexicographic order with one signature row each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignatureMatrix {
    pub zone_ids: Vec<ZoneId>,
    pub rows: Vec<Signature>,
    pub totals: Vec<u64>,
}

impl SignatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn signatures(&self) -> impl Iterator<Item = ZoneSignature> + '_ {
        self.zone_ids
            .iter()
            .zip(&self.rows)
            .zip(&self.totals)
            .map(|((z, r), t)| ZoneSignature {
                zone_id: z.clone(),
                proportions: *r,
                total_permits: *t,
            })
    }

    pub fn position(&self, zone: &ZoneId) -> Option<usize> {
        self.zone_ids.binary_search(zone).ok()
    }

    /// Matrix from raw rows with synthetic zone ids `00000, 00001, ...`.
    /// Intended for numerical tests of the clustering code.
    pub fn from_rows(rows: Vec<Signature>) -> Self {
        SignatureMatrix {
            zone_ids: (0..rows.len())
                .map(|i| format!("{i:05}").parse().expect("five digits"))
                .collect(),
            totals: vec![1; rows.len()],
            rows,
        }
    }
}

/// Counts permits per zone and work type. Zones appear in sorted order.
pub fn tally(permits: &[PermitRecord]) -> Vec<ZoneCounts> {
    let mut by_zone: BTreeMap<&ZoneId, [u64; WORK_TYPE_COUNT]> = BTreeMap::new();
    for p in permits {
        by_zone.entry(&p.zone_id).or_default()[p.work_type.index()] += 1;
    }
    by_zone
        .into_iter()
        .map(|(z, counts)| ZoneCounts::new(z.clone(), counts))
        .collect()
}

pub fn signature_of(counts: &ZoneCounts) -> Result<ZoneSignature> {
    let total: u64 = counts.counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyZone(counts.zone_id.to_string()));
    }
    let denom = total as f64;
    let mut proportions = [0.0; WORK_TYPE_COUNT];
    for (p, c) in proportions.iter_mut().zip(counts.counts) {
        *p = c as f64 / denom;
    }
    Ok(ZoneSignature {
        zone_id: counts.zone_id.clone(),
        proportions,
        total_permits: total,
    })
}

pub fn build_matrix(mut signatures: Vec<ZoneSignature>) -> Result<SignatureMatrix> {
    signatures.sort_by(|a, b| a.zone_id.cmp(&b.zone_id));
    if let Some(w) = signatures.windows(2).find(|w| w[0].zone_id == w[1].zone_id) {
        return Err(Error::DuplicateZone(w[0].zone_id.to_string()));
    }
    let mut m = SignatureMatrix::default();
    for s in signatures {
        m.zone_ids.push(s.zone_id);
        m.rows.push(s.proportions);
        m.totals.push(s.total_permits);
    }
    Ok(m)
}

/// tally → signature_of → build_matrix, skipping zones with no permits.
pub fn signatures_from_permits(permits: &[PermitRecord]) -> Result<SignatureMatrix> {
    let sigs = tally(permits)
        .iter()
        .filter(|c| c.total > 0)
        .map(signature_of)
        .collect::<Result<Vec<_>>>()?;
    build_matrix(sigs)
}

/// Proportion rendered as a percentage at 0.1% precision, e.g. `16.1%`.
pub fn render_percent(p: f64) -> String {
    format!("{:.1}%", p * 100.0)
}
