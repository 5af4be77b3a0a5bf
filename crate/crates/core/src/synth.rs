//! Synthetic catalogs, pools and program instances for benchmarks, the
//! gap-check harness and tests.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::DppKernel;
use crate::catalog::{Catalog, Item};
use crate::diversity::{build_qp, compute_weights, QuadraticProgram};
use crate::relevance::CandidatePool;

/// A pool covering every catalog item with the given raw scores (position i
/// scores `scores[i]`), sorted and normalized the same way search pools are.
pub fn pool_from_scores(catalog: &Catalog, query: &str, scores: &[f64]) -> CandidatePool {
    assert_eq!(scores.len(), catalog.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let raw_scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    let max = raw_scores.first().copied().unwrap_or(0.0);
    let min = raw_scores.last().copied().unwrap_or(0.0);
    let norm_scores = if max == min {
        vec![1.0; raw_scores.len()]
    } else {
        raw_scores.iter().map(|&s| (s - min) / (max - min)).collect()
    };
    CandidatePool { query: query.to_string(), items: order, raw_scores, norm_scores }
}

/// A random catalog of `n` items with `n_aspects` categorical aspects (small
/// vocabularies, occasional missing values) and a random-score pool over it.
pub fn random_pool(n: usize, n_aspects: usize, seed: u64) -> (Catalog, CandidatePool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));
    let vocab_sizes: Vec<usize> = (0..n_aspects).map(|_| rng.gen_range(2..=4)).collect();
    let mut items = Vec::with_capacity(n);
    for i in 0..n {
        let mut aspects = BTreeMap::new();
        for (p, &vocab) in vocab_sizes.iter().enumerate() {
            if rng.gen::<f64>() < 0.85 {
                aspects.insert(format!("a{p}"), format!("v{}", rng.gen_range(0..vocab)));
            }
        }
        items.push(Item { id: format!("item{i}"), text: String::new(), aspects });
    }
    let catalog = Catalog::from_items(items).unwrap();
    let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
    let pool = pool_from_scores(&catalog, "synthetic", &scores);
    (catalog, pool)
}

/// A single-aspect pool whose value classes have the given sizes, laid out
/// round-robin across classes in relevance order so the top of the ranking
/// mixes classes.
pub fn single_aspect_pool(class_sizes: &[usize], seed: u64) -> (Catalog, CandidatePool) {
    let mut remaining: Vec<usize> = class_sizes.to_vec();
    let n: usize = class_sizes.iter().sum();
    let mut sequence = Vec::with_capacity(n);
    while sequence.len() < n {
        for (class, left) in remaining.iter_mut().enumerate() {
            if *left > 0 {
                sequence.push(class);
                *left -= 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<Item> = sequence
        .iter()
        .enumerate()
        .map(|(i, &class)| Item {
            id: format!("item{i}"),
            text: String::new(),
            aspects: BTreeMap::from([(
                "a0".to_string(),
                format!("v{class}"),
            )]),
        })
        .collect();
    let catalog = Catalog::from_items(items).unwrap();
    // strictly decreasing scores keep the round-robin order as the ranking
    let scores: Vec<f64> = (0..n).map(|i| (n - i) as f64 + rng.gen_range(0.0..0.5)).collect();
    let pool = pool_from_scores(&catalog, "synthetic", &scores);
    (catalog, pool)
}

/// A full program instance over a random pool: 3 aspects, random relevance,
/// the given trade-off.
pub fn random_instance(n: usize, k: usize, theta: f64, seed: u64) -> QuadraticProgram {
    let (catalog, pool) = random_pool(n, 3, seed);
    let weights = compute_weights(&catalog, &pool, k).expect("valid instance dimensions");
    build_qp(&catalog, &pool, &weights, k, theta).expect("valid instance parameters")
}

/// A random symmetric PSD kernel `A A^T / n + 1e-6 I`.
pub fn random_psd_kernel(n: usize, seed: u64) -> DppKernel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545f4914f6cdd1d).wrapping_add(7));
    let a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    gram_kernel(n, &a)
}

/// Like [`random_psd_kernel`] but with item 1 an exact copy of item 0, making
/// that pair singular.
pub fn kernel_with_duplicate_rows(n: usize, seed: u64) -> DppKernel {
    assert!(n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for j in 0..n {
        a[n + j] = a[j];
    }
    gram_kernel(n, &a)
}

fn gram_kernel(n: usize, a: &[f64]) -> DppKernel {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mut dot = 0.0;
            for t in 0..n {
                dot += a[i * n + t] * a[j * n + t];
            }
            let mut v = dot / n as f64;
            if i == j {
                v += 1e-6;
            }
            l[i * n + j] = v;
            l[j * n + i] = v;
        }
    }
    DppKernel::from_dense(l).unwrap()
}

/// A kernel with the given diagonal and zero off-diagonal entries.
pub fn diagonal_kernel(diag: &[f64]) -> DppKernel {
    let n = diag.len();
    let mut l = vec![0.0; n * n];
    for (i, &d) in diag.iter().enumerate() {
        l[i * n + i] = d;
    }
    DppKernel::from_dense(l).unwrap()
}

/// Options for [`skewed_catalog`].
#[derive(Debug, Clone)]
pub struct SkewedCatalogSpec {
    /// Items per class of the `class` aspect, e.g. `[1000, 500, 500]`.
    pub class_counts: Vec<usize>,
    /// Vocabulary size of the uniform `style` aspect; 0 omits the aspect.
    pub n_styles: usize,
    /// Number of query topics; items are assigned round-robin so each topic
    /// matches exactly `total / n_topics` items (up to remainder).
    pub n_topics: usize,
    pub seed: u64,
}

impl Default for SkewedCatalogSpec {
    fn default() -> Self {
        Self { class_counts: vec![1000, 500, 500], n_styles: 0, n_topics: 20, seed: 42 }
    }
}

/// A synthetic catalog with one skewed `class` aspect (optionally a uniform
/// `style` aspect) and topic-tagged text, so that `topic<t>` queries pull
/// disjoint pools. Within a topic most items are equally relevant; a few
/// score higher or lower (term frequency 3 or 1 instead of 2), which keeps
/// the ranking meaningful without letting relevance dominate the class mix.
pub fn skewed_catalog(spec: &SkewedCatalogSpec) -> Catalog {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total: usize = spec.class_counts.iter().sum();
    let mut classes: Vec<usize> = spec
        .class_counts
        .iter()
        .enumerate()
        .flat_map(|(c, &count)| std::iter::repeat(c).take(count))
        .collect();
    classes.shuffle(&mut rng);

    let mut items = Vec::with_capacity(total);
    for (i, &class) in classes.iter().enumerate() {
        let topic = i % spec.n_topics.max(1);
        let roll: f64 = rng.gen();
        let repeats = if roll < 0.03 {
            3
        } else if roll < 0.10 {
            1
        } else {
            2
        };
        let mut words = vec![format!("topic{topic}"); repeats];
        words.extend(std::iter::repeat("shoe".to_string()).take(2));
        let mut aspects =
            BTreeMap::from([("class".to_string(), format!("class{class}"))]);
        if spec.n_styles > 0 {
            let style = rng.gen_range(0..spec.n_styles);
            aspects.insert("style".to_string(), format!("style{style}"));
        }
        items.push(Item { id: format!("item{i:05}"), text: words.join(" "), aspects });
    }
    Catalog::from_items_ordered(items, &["class".to_string(), "style".to_string()]).unwrap()
}

/// The query strings matching [`skewed_catalog`] topics.
pub fn topic_queries(n_topics: usize) -> Vec<String> {
    (0..n_topics).map(|t| format!("topic{t}")).collect()
}
