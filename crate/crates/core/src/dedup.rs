//! Near-duplicate detection with MinHash signatures and LSH banding.
//!
//! Shingles are k-grams of whitespace tokens hashed with FNV-1a; the
//! per-permutation hash family and its seeds are fixed functions of the
//! configured seed (splitmix64), so signatures are stable across runs and
//! machines. Buckets from LSH are only candidates: every candidate pair is
//! verified against the signature-estimated Jaccard before clustering.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SourceUnit;

/// Sentinel filling the signature of empty content.
pub const EMPTY_SLOT: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinHashParams {
    pub num_perms: usize,
    pub shingle_k: usize,
    pub seed: u64,
}

impl Default for MinHashParams {
    fn default() -> Self {
        MinHashParams {
            num_perms: 128,
            shingle_k: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub unit_id: String,
    pub signature: Vec<u64>,
    pub shingle_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DupCluster {
    pub representative: String,
    pub members: BTreeSet<String>,
}

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// (multiplier, offset) pairs for the permutation family. Multipliers are
/// forced odd so the map is a bijection on u64.
fn perm_coefficients(params: &MinHashParams) -> Vec<(u64, u64)> {
    let mut state = params.seed ^ 0x5851_F42D_4C95_7F2D;
    (0..params.num_perms)
        .map(|_| {
            let a = splitmix64(&mut state) | 1;
            let b = splitmix64(&mut state);
            (a, b)
        })
        .collect()
}

/// Hashes of the distinct k-gram token shingles of `content`. Content with
/// fewer than k tokens (but at least one) yields a single shingle covering
/// all of its tokens; content with no tokens yields none.
pub fn shingle_hashes(content: &str, k: usize) -> HashSet<u64> {
    let tokens: Vec<&str> = content.split_whitespace().collect();
    let mut out = HashSet::new();
    if tokens.is_empty() {
        return out;
    }
    let k = k.max(1);
    if tokens.len() < k {
        out.insert(hash_window(&tokens));
        return out;
    }
    for window in tokens.windows(k) {
        out.insert(hash_window(window));
    }
    out
}

fn hash_window(tokens: &[&str]) -> u64 {
    let mut buf = Vec::with_capacity(tokens.iter().map(|t| t.len() + 1).sum());
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            buf.push(0x1F);
        }
        buf.extend_from_slice(t.as_bytes());
    }
    fnv1a64(&buf)
}

/// Computes the MinHash signature for one unit. Empty content gets a
/// sentinel signature (every slot `EMPTY_SLOT`) so byte-identical empty
/// units still collide with each other and nothing else.
pub fn fingerprint(unit: &SourceUnit, params: &MinHashParams) -> Fingerprint {
    let shingles = shingle_hashes(&unit.content, params.shingle_k);
    let coeffs = perm_coefficients(params);
    let mut signature = vec![EMPTY_SLOT; params.num_perms];
    for &shingle in &shingles {
        for (slot, &(a, b)) in signature.iter_mut().zip(&coeffs) {
            let h = a.wrapping_mul(shingle).wrapping_add(b);
            if h < *slot {
                *slot = h;
            }
        }
    }
    Fingerprint {
        unit_id: unit.id.clone(),
        signature,
        shingle_count: shingles.len() as u64,
    }
}

/// Fraction of signature slots that agree; an unbiased estimate of the
/// Jaccard similarity of the underlying shingle sets.
pub fn estimate_jaccard(a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
    if a.signature.len() != b.signature.len() || a.signature.is_empty() {
        return Err(Error::config(format!(
            "signature length mismatch: {} vs {}",
            a.signature.len(),
            b.signature.len()
        )));
    }
    let equal = a
        .signature
        .iter()
        .zip(&b.signature)
        .filter(|(x, y)| x == y)
        .count();
    Ok(equal as f64 / a.signature.len() as f64)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Groups fingerprints into duplicate clusters.
///
/// LSH splits each signature into `bands` bands of `rows` rows; any pair
/// sharing a band bucket becomes a candidate and is kept only if the
/// estimated Jaccard is at least `threshold`. The representative of each
/// cluster is the member with the most lines (per `line_counts`), breaking
/// ties by lexicographically smallest id. Only clusters with two or more
/// members are returned, ordered by representative id.
pub fn cluster(
    fingerprints: &[Fingerprint],
    threshold: f64,
    bands: usize,
    rows: usize,
    line_counts: &BTreeMap<String, u64>,
) -> Result<Vec<DupCluster>> {
    if bands == 0 || rows == 0 {
        return Err(Error::config("bands and rows must be positive"));
    }
    let expected = bands * rows;
    for fp in fingerprints {
        if fp.signature.len() != expected {
            return Err(Error::config(format!(
                "fingerprint '{}' has {} slots, expected bands*rows = {}",
                fp.unit_id,
                fp.signature.len(),
                expected
            )));
        }
    }

    let mut uf = UnionFind::new(fingerprints.len());
    let mut checked: HashSet<(usize, usize)> = HashSet::new();
    for band in 0..bands {
        let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
        for (idx, fp) in fingerprints.iter().enumerate() {
            let slice = &fp.signature[band * rows..(band + 1) * rows];
            let mut bytes = Vec::with_capacity(rows * 8 + 8);
            bytes.extend_from_slice(&(band as u64).to_le_bytes());
            for v in slice {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            buckets.entry(fnv1a64(&bytes)).or_default().push(idx);
        }
        for members in buckets.values() {
            if members.len() < 2 {
                continue;
            }
            for i in 0..members.len() {
                for j in (i + 1)..members.len() {
                    let pair = (members[i].min(members[j]), members[i].max(members[j]));
                    if !checked.insert(pair) {
                        continue;
                    }
                    let est = estimate_jaccard(&fingerprints[pair.0], &fingerprints[pair.1])?;
                    if est >= threshold {
                        uf.union(pair.0, pair.1);
                    }
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for idx in 0..fingerprints.len() {
        groups.entry(uf.find(idx)).or_default().push(idx);
    }

    let mut clusters = Vec::new();
    for indices in groups.values() {
        if indices.len() < 2 {
            continue;
        }
        let members: BTreeSet<String> = indices
            .iter()
            .map(|&i| fingerprints[i].unit_id.clone())
            .collect();
        let representative = members
            .iter()
            .max_by(|a, b| {
                let la = line_counts.get(*a).copied().unwrap_or(0);
                let lb = line_counts.get(*b).copied().unwrap_or(0);
                // Prefer more lines; on ties prefer the smaller id, which
                // means it must compare as "greater" here.
                la.cmp(&lb).then_with(|| b.cmp(a))
            })
            .expect("cluster has members")
            .clone();
        clusters.push(DupCluster {
            representative,
            members,
        });
    }
    clusters.sort_by(|a, b| a.representative.cmp(&b.representative));
    Ok(clusters)
}

/// End-to-end dedup over a corpus: fingerprint, cluster, and drop every
/// cluster member except its representative. Survivors keep input order.
pub fn dedup_corpus(
    units: &[SourceUnit],
    params: &MinHashParams,
    threshold: f64,
    bands: usize,
    rows: usize,
) -> Result<(Vec<SourceUnit>, Vec<DupCluster>)> {
    if bands * rows != params.num_perms {
        return Err(Error::config(format!(
            "bands ({bands}) * rows ({rows}) must equal num_perms ({})",
            params.num_perms
        )));
    }
    let fingerprints: Vec<Fingerprint> = units.iter().map(|u| fingerprint(u, params)).collect();
    let line_counts: BTreeMap<String, u64> =
        units.iter().map(|u| (u.id.clone(), u.line_count)).collect();
    let clusters = cluster(&fingerprints, threshold, bands, rows, &line_counts)?;

    let mut dropped: HashSet<&str> = HashSet::new();
    for cl in &clusters {
        for member in &cl.members {
            if member != &cl.representative {
                dropped.insert(member.as_str());
            }
        }
    }
    let kept = units
        .iter()
        .filter(|u| !dropped.contains(u.id.as_str()))
        .cloned()
        .collect();
    Ok((kept, clusters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Language, SourceUnit};

    fn unit(path: &str, content: &str) -> SourceUnit {
        SourceUnit::synthetic(path, Language::Cobol, content)
    }

    fn params() -> MinHashParams {
        MinHashParams::default()
    }

    #[test]
    fn signatures_are_stable_across_calls() {
        let u = unit("a.cbl", "MOVE A TO B\nDISPLAY B\nSTOP RUN");
        let f1 = fingerprint(&u, &params());
        let f2 = fingerprint(&u, &params());
        assert_eq!(f1, f2);
    }

    #[test]
    fn empty_content_gets_sentinel_signature() {
        let u = unit("e.cbl", "");
        let fp = fingerprint(&u, &params());
        assert_eq!(fp.shingle_count, 0);
        assert!(fp.signature.iter().all(|&s| s == EMPTY_SLOT));
        assert_eq!(fp.signature.len(), 128);
    }

    #[test]
    fn short_content_yields_single_shingle() {
        let u = unit("s.cbl", "ONLY TWO");
        let fp = fingerprint(&u, &params());
        assert_eq!(fp.shingle_count, 1);
    }

    #[test]
    fn jaccard_estimate_tracks_true_similarity() {
        // With k=1 the shingle sets are exactly the token sets:
        // {a,b,c,d} vs {a,b,c,e}, true Jaccard 3/5 = 0.6.
        let p = MinHashParams {
            shingle_k: 1,
            ..params()
        };
        let fa = fingerprint(&unit("a", "a b c d"), &p);
        let fb = fingerprint(&unit("b", "a b c e"), &p);
        let est = estimate_jaccard(&fa, &fb).unwrap();
        assert!(
            (est - 0.6).abs() <= 0.15,
            "estimate {est} too far from true Jaccard 0.6"
        );
    }

    #[test]
    fn estimate_errors_on_length_mismatch() {
        let fa = fingerprint(&unit("a", "x y z"), &params());
        let fb = fingerprint(
            &unit("b", "x y z"),
            &MinHashParams {
                num_perms: 64,
                ..params()
            },
        );
        assert!(estimate_jaccard(&fa, &fb).is_err());
    }

    fn body(lines: usize) -> String {
        (0..lines)
            .map(|i| format!("COMPUTE TOTAL-{i} = PRICE-{i} * QTY-{i} + TAX-{i}"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn byte_identical_units_always_cluster() {
        let a = unit("a.cbl", &body(30));
        let b = unit("b.cbl", &body(30));
        let c = unit("c.cbl", "SOMETHING COMPLETELY DIFFERENT ENTIRELY UNRELATED HERE");
        let (kept, clusters) = dedup_corpus(&[a, b, c], &params(), 0.85, 16, 8).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].members.len(), 2);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn near_duplicates_cluster_and_distinct_units_do_not() {
        let base = body(60);
        let mut edited = base.clone();
        edited.push_str("\nDISPLAY \"EXTRA LINE\"");
        let a = unit("a.cbl", &base);
        let b = unit("b.cbl", &edited);
        let c = unit(
            "c.cbl",
            &(0..60)
                .map(|i| format!("ADD BALANCE-{i} TO LEDGER-{i} GIVING RESULT-{i}"))
                .collect::<Vec<_>>()
                .join("\n"),
        );
        let (kept, clusters) = dedup_corpus(&[a.clone(), b, c.clone()], &params(), 0.85, 16, 8).unwrap();
        assert_eq!(clusters.len(), 1, "near-duplicates should form one cluster");
        assert!(kept.iter().any(|u| u.id == c.id));
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn representative_prefers_line_count_then_smallest_id() {
        let content = body(40);
        let a = unit("a.cbl", &content);
        let b = unit("b.cbl", &content);
        let fps = vec![fingerprint(&a, &params()), fingerprint(&b, &params())];

        // Same content means same line counts; tie resolves to smaller id.
        let mut counts = BTreeMap::new();
        counts.insert(a.id.clone(), a.line_count);
        counts.insert(b.id.clone(), b.line_count);
        let clusters = cluster(&fps, 0.85, 16, 8, &counts).unwrap();
        assert_eq!(clusters.len(), 1);
        let expected = a.id.clone().min(b.id.clone());
        assert_eq!(clusters[0].representative, expected);

        // Give the other member more lines; it must win regardless of id.
        let loser = expected.clone();
        let winner = if clusters[0].members.iter().next().unwrap() == &loser {
            clusters[0].members.iter().nth(1).unwrap().clone()
        } else {
            clusters[0].members.iter().next().unwrap().clone()
        };
        counts.insert(winner.clone(), 1000);
        let clusters = cluster(&fps, 0.85, 16, 8, &counts).unwrap();
        assert_eq!(clusters[0].representative, winner);
    }

    #[test]
    fn cluster_rejects_wrong_band_geometry() {
        let fp = fingerprint(&unit("a", "x y z w v"), &params());
        let err = cluster(&[fp], 0.85, 10, 10, &BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("bands*rows"));
    }

    #[test]
    fn dedup_corpus_validates_geometry_against_params() {
        let u = unit("a", "x y z");
        assert!(dedup_corpus(&[u], &params(), 0.85, 16, 9).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn token_content(tokens: &[u8]) -> String {
            tokens
                .iter()
                .map(|t| format!("tok{t}"))
                .collect::<Vec<_>>()
                .join(" ")
        }

        proptest! {
            #[test]
            fn estimate_is_reflexive_symmetric_bounded(
                ta in proptest::collection::vec(0u8..40, 1..60),
                tb in proptest::collection::vec(0u8..40, 1..60),
            ) {
                let p = MinHashParams { num_perms: 32, shingle_k: 2, seed: 7 };
                let fa = fingerprint(&unit("a", &token_content(&ta)), &p);
                let fb = fingerprint(&unit("b", &token_content(&tb)), &p);
                let self_sim = estimate_jaccard(&fa, &fa).unwrap();
                prop_assert!((self_sim - 1.0).abs() < 1e-12);
                let ab = estimate_jaccard(&fa, &fb).unwrap();
                let ba = estimate_jaccard(&fb, &fa).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&ab));
            }

            #[test]
            fn identical_content_clusters_at_any_threshold(
                tokens in proptest::collection::vec(0u8..40, 6..60),
                threshold in 0.0f64..=1.0,
            ) {
                let p = MinHashParams { num_perms: 32, shingle_k: 3, seed: 1 };
                let content = token_content(&tokens);
                let a = unit("a.cbl", &content);
                let b = unit("b.cbl", &content);
                let fps = vec![fingerprint(&a, &p), fingerprint(&b, &p)];
                let mut counts = BTreeMap::new();
                counts.insert(a.id.clone(), a.line_count);
                counts.insert(b.id.clone(), b.line_count);
                let clusters = cluster(&fps, threshold, 8, 4, &counts).unwrap();
                prop_assert_eq!(clusters.len(), 1);
                prop_assert_eq!(clusters[0].members.len(), 2);
            }
        }
    }
}
