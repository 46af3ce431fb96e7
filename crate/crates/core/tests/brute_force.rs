//! Retrieval and mining against exhaustive oracles on small batches.

use metric_surgery::evaluation::{recall_at_k, triplet_diagram, Split};
use metric_surgery::geometry::{normalize, Embedding};
use metric_surgery::mining::ephn_triplets;
use proptest::prelude::*;

/// Coordinates on a coarse grid so that exact similarity ties occur.
fn batch() -> impl Strategy<Value = (Vec<Embedding>, Vec<usize>)> {
    (2usize..=5, 2usize..=3)
        .prop_filter("at most 10 samples", |(c, per)| c * per <= 10)
        .prop_flat_map(|(classes, per)| {
            let n = classes * per;
            (
                prop::collection::vec(prop::collection::vec(-2i32..=2, 3), n),
                Just(classes),
                Just(per),
            )
        })
        .prop_filter_map("nonzero vectors", |(raw, classes, per)| {
            let emb: Option<Vec<Embedding>> = raw
                .iter()
                .map(|v| normalize(&v.iter().map(|&x| x as f64).collect::<Vec<_>>()).ok())
                .collect();
            let labels = (0..classes).flat_map(|c| std::iter::repeat(c).take(per)).collect();
            Some((emb?, labels))
        })
}

fn sim(a: &Embedding, b: &Embedding) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .sum::<f64>()
        .clamp(-1.0, 1.0)
}

/// Others sorted by descending similarity, ties by index.
fn ranking(emb: &[Embedding], q: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..emb.len()).filter(|&j| j != q).collect();
    // IEEE order: -0.0 and 0.0 tie, so the lower index wins
    others.sort_by(|&i, &j| {
        let (si, sj) = (sim(&emb[q], &emb[i]), sim(&emb[q], &emb[j]));
        sj.partial_cmp(&si).expect("finite similarities").then(i.cmp(&j))
    });
    others
}

fn recall_oracle(emb: &[Embedding], labels: &[usize], k: usize) -> f64 {
    let hits = (0..emb.len())
        .filter(|&q| ranking(emb, q).iter().take(k).any(|&j| labels[j] == labels[q]))
        .count();
    hits as f64 / emb.len() as f64
}

fn ephn_oracle(emb: &[Embedding], labels: &[usize]) -> Vec<(usize, usize, usize)> {
    (0..emb.len())
        .map(|a| {
            let order = ranking(emb, a);
            let p = *order.iter().find(|&&j| labels[j] == labels[a]).unwrap();
            let n = *order.iter().find(|&&j| labels[j] != labels[a]).unwrap();
            (a, p, n)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn recall_matches_oracle((emb, labels) in batch()) {
        let ks: Vec<usize> = (1..emb.len()).collect();
        let report = recall_at_k(&emb, &labels, &ks, Split::Train).unwrap();
        let mut previous = 0.0;
        for &k in &ks {
            let got = report.at(k).unwrap();
            prop_assert_eq!(got, recall_oracle(&emb, &labels, k));
            prop_assert!(got >= previous);
            previous = got;
        }
    }

    #[test]
    fn ephn_matches_oracle((emb, labels) in batch()) {
        prop_assert_eq!(ephn_triplets(&emb, &labels).unwrap(), ephn_oracle(&emb, &labels));
    }

    #[test]
    fn diagram_matches_mined_pairs((emb, labels) in batch()) {
        let rows = triplet_diagram(&emb, &labels).unwrap();
        prop_assert_eq!(rows.len(), emb.len());
        for ((a, p, n), row) in ephn_oracle(&emb, &labels).into_iter().zip(rows) {
            prop_assert_eq!(row.anchor, a);
            prop_assert_eq!(row.s_np, sim(&emb[a], &emb[p]));
            prop_assert_eq!(row.s_nn, sim(&emb[a], &emb[n]));
        }
    }
}

#[test]
fn duplicated_sample_has_unit_nearest_positive() {
    let emb: Vec<Embedding> = [[1.0, 0.3, 0.2], [1.0, 0.3, 0.2], [-0.4, 1.0, 0.0], [0.0, 0.2, 1.0]]
        .iter()
        .map(|v| normalize(v).unwrap())
        .collect();
    let rows = triplet_diagram(&emb, &[0, 0, 1, 1]).unwrap();
    assert!((rows[0].s_np - 1.0).abs() < 1e-9);
    assert!((rows[1].s_np - 1.0).abs() < 1e-9);
}
