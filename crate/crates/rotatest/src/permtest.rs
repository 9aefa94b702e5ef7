//! Two-sample randomization p-values between EDF samples.
//!
//! The distance between two empirical distribution functions is the
//! maximum vertical gap between them. The randomization p-value pools the
//! two samples, repeatedly resplits the pool at random into parts of the
//! original sizes, and reports the proportion of resplit distances at
//! least as large as the observed one. The raw proportion is the default
//! so a reported `0.000` is exactly reachable; the `(count+1)/(N+1)`
//! convention is available behind [`PValueConvention`].
//!
//! Distances are tracked as integer counts scaled by `n1 * n2`, so ties
//! between permuted and observed distances resolve exactly.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::montecarlo::EDFSample;
use crate::rng::RngFactory;

/// How the proportion of exceeding distances becomes a p-value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PValueConvention {
    /// `count / N`; can reach exactly zero.
    #[default]
    Raw,
    /// `(count + 1) / (N + 1)`; never zero.
    PlusOne,
}

/// Maximum vertical distance between the two sample EDFs, computed exactly
/// by a merge scan of the sorted values.
pub fn two_sample_ks_distance(g1: &EDFSample, g2: &EDFSample) -> f64 {
    let (n1, n2) = (g1.values.len(), g2.values.len());
    distance_units(&g1.values, &g2.values) as f64 / (n1 as f64 * n2 as f64)
}

/// Merge-scan distance in integer units of `1 / (n1 * n2)`. Equal values
/// in both samples advance together before the gap is measured.
fn distance_units(a: &[f64], b: &[f64]) -> i64 {
    let (n1, n2) = (a.len() as i64, b.len() as i64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0i64;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < a.len() && a[i] == t {
            i += 1;
        }
        while j < b.len() && b[j] == t {
            j += 1;
        }
        best = best.max((i as i64 * n2 - j as i64 * n1).abs());
    }
    best
}

/// Distance of one random resplit: `labels[k]` marks pool position `k` as
/// belonging to the first pseudo-sample.
fn labeled_distance_units(pool: &[f64], labels: &[bool], n1: i64, n2: i64) -> i64 {
    let mut count1 = 0i64;
    let mut count2 = 0i64;
    let mut best = 0i64;
    let mut idx = 0usize;
    while idx < pool.len() {
        let t = pool[idx];
        while idx < pool.len() && pool[idx] == t {
            if labels[idx] {
                count1 += 1;
            } else {
                count2 += 1;
            }
            idx += 1;
        }
        best = best.max((count1 * n2 - count2 * n1).abs());
    }
    best
}

/// Randomization p-value with the default raw-proportion convention.
///
/// `tag` addresses the permutation streams, so repeated calls with the same
/// factory and tag are deterministic and swapping the two samples changes
/// nothing.
pub fn randomization_pvalue(
    g1: &EDFSample,
    g2: &EDFSample,
    n_permutations: usize,
    factory: &RngFactory,
    tag: u32,
) -> f64 {
    randomization_pvalue_with(g1, g2, n_permutations, factory, tag, PValueConvention::Raw)
}

pub fn randomization_pvalue_with(
    g1: &EDFSample,
    g2: &EDFSample,
    n_permutations: usize,
    factory: &RngFactory,
    tag: u32,
    convention: PValueConvention,
) -> f64 {
    assert!(n_permutations >= 1);
    assert!(!g1.values.is_empty() && !g2.values.is_empty());
    let observed = distance_units(&g1.values, &g2.values);

    // Merge the sorted samples once; a permutation assigns pool positions
    // to pseudo-samples, which is a Fisher-Yates shuffle of the label
    // vector. Labelling the smaller count keeps the split symmetric in
    // (g1, g2).
    let mut pool = Vec::with_capacity(g1.values.len() + g2.values.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < g1.values.len() || j < g2.values.len() {
        match (g1.values.get(i), g2.values.get(j)) {
            (Some(&x), Some(&y)) if x <= y => {
                pool.push(x);
                i += 1;
            }
            (Some(_), Some(&y)) => {
                pool.push(y);
                j += 1;
            }
            (Some(&x), None) => {
                pool.push(x);
                i += 1;
            }
            (None, Some(&y)) => {
                pool.push(y);
                j += 1;
            }
            (None, None) => break,
        }
    }
    let n_small = g1.values.len().min(g2.values.len()) as i64;
    let n_large = g1.values.len().max(g2.values.len()) as i64;
    let mut template = vec![false; pool.len()];
    for flag in template.iter_mut().take(n_small as usize) {
        *flag = true;
    }

    let exceeding: usize = (0..n_permutations)
        .into_par_iter()
        .map(|perm| {
            let mut rng = factory.permutation(tag, perm as u32);
            let mut labels = template.clone();
            labels.shuffle(&mut rng);
            usize::from(labeled_distance_units(&pool, &labels, n_small, n_large) >= observed)
        })
        .sum();

    match convention {
        PValueConvention::Raw => exceeding as f64 / n_permutations as f64,
        PValueConvention::PlusOne => (exceeding + 1) as f64 / (n_permutations + 1) as f64,
    }
}

/// Pairwise randomization p-values between same-`m` cells, laid out like
/// the experiment tables: every `(generator, m)` cell is a label, and entries
/// exist for pairs sharing `m`.
#[derive(Clone, Debug, Serialize)]
pub struct PValueMatrix {
    /// `(generator, m)` for each cell, in input order.
    pub labels: Vec<(String, usize)>,
    /// Upper triangle: `p[i][k]` pairs cell `i` with cell `i + 1 + k`.
    /// `None` marks pairs with different group sizes (not compared).
    pub p: Vec<Vec<Option<f64>>>,
    /// Observed distances, same layout.
    pub observed_d: Vec<Vec<Option<f64>>>,
    pub n_permutations: usize,
}

impl PValueMatrix {
    /// Symmetric lookup by cell indices.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.p[i][j - i - 1],
            std::cmp::Ordering::Greater => self.p[j][i - j - 1],
            std::cmp::Ordering::Equal => None,
        }
    }

    /// Lookup by generator names and group size.
    pub fn get_by_name(&self, gen_a: &str, gen_b: &str, m: usize) -> Option<f64> {
        let find = |g: &str| {
            self.labels
                .iter()
                .position(|(name, mm)| name == g && *mm == m)
        };
        self.get(find(gen_a)?, find(gen_b)?)
    }

    /// CSV in the experiment-table layout: one row per (model, m) with
    /// columns for the later models; cells outside the upper triangle or
    /// across group sizes stay empty.
    pub fn to_csv(&self) -> String {
        let mut generators: Vec<&str> = Vec::new();
        for (g, _) in &self.labels {
            if !generators.contains(&g.as_str()) {
                generators.push(g);
            }
        }
        let mut m_values: Vec<usize> = self.labels.iter().map(|&(_, m)| m).collect();
        m_values.sort_unstable();
        m_values.dedup();

        let mut out = String::from("model,m");
        for g in generators.iter().skip(1) {
            out.push(',');
            out.push_str(g);
        }
        out.push('\n');
        for (a, gen_a) in generators.iter().enumerate().take(generators.len() - 1) {
            for &m in &m_values {
                out.push_str(gen_a);
                out.push(',');
                out.push_str(&m.to_string());
                for gen_b in generators.iter().skip(1) {
                    out.push(',');
                    let later = generators.iter().position(|g| g == gen_b).unwrap() > a;
                    if later {
                        if let Some(p) = self.get_by_name(gen_a, gen_b, m) {
                            out.push_str(&format!("{p:.3}"));
                        }
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serialization cannot fail")
    }
}

/// Compute the p-value matrix over all same-`m` pairs of cells. Permutation
/// streams are tagged by pair ordinal in scan order, so the matrix is
/// deterministic given the factory.
pub fn pvalue_matrix(
    cells: &[EDFSample],
    n_permutations: usize,
    factory: &RngFactory,
) -> PValueMatrix {
    pvalue_matrix_with(cells, n_permutations, factory, PValueConvention::Raw)
}

pub fn pvalue_matrix_with(
    cells: &[EDFSample],
    n_permutations: usize,
    factory: &RngFactory,
    convention: PValueConvention,
) -> PValueMatrix {
    let labels: Vec<(String, usize)> = cells
        .iter()
        .map(|c| (c.generator.clone(), c.m))
        .collect();
    let mut p = Vec::with_capacity(cells.len());
    let mut observed = Vec::with_capacity(cells.len());
    let mut tag = 0u32;
    for i in 0..cells.len() {
        let mut row_p = Vec::new();
        let mut row_d = Vec::new();
        for j in i + 1..cells.len() {
            if cells[i].m == cells[j].m {
                row_d.push(Some(two_sample_ks_distance(&cells[i], &cells[j])));
                row_p.push(Some(randomization_pvalue_with(
                    &cells[i],
                    &cells[j],
                    n_permutations,
                    factory,
                    tag,
                    convention,
                )));
                tag += 1;
            } else {
                row_p.push(None);
                row_d.push(None);
            }
        }
        p.push(row_p);
        observed.push(row_d);
    }
    PValueMatrix {
        labels,
        p,
        observed_d: observed,
        n_permutations,
    }
}
