//! End-to-end runs through the public API: config text in, trained model out.

use metric_surgery::evaluation::Split;
use metric_surgery::parse_config;
use metric_surgery::surgery::PairWeightKind;
use metric_surgery::training::train;

const SMALL: &str = "
dataset.num_classes = 6
dataset.samples_per_class = 5
dataset.input_dim = 10
dataset.holdout_classes = 2
encoder.embed_dim = 4
train.epochs = 12
train.classes_per_batch = 3
train.samples_per_class = 3
eval.ks = 1, 2
run.seeds = 7
";

#[test]
fn every_pair_weight_trains_finitely() {
    for kind in PairWeightKind::ALL {
        let run = parse_config(&format!("{SMALL}surgery.pair_weight = {kind}\n")).unwrap();
        let out = train(&run.for_seed(7)).unwrap();
        assert_eq!(out.log.epochs.len(), 12);
        for rec in &out.log.epochs {
            assert!(rec.mean_loss_proxy.is_finite());
            let train_r = &rec.train_recall;
            assert!(train_r.at(1).unwrap() <= train_r.at(2).unwrap());
            assert!(rec.holdout_recall.is_some());
        }
        assert_eq!(out.diagram(Split::Holdout).unwrap().len(), 10);
    }
}

#[test]
fn lr_steps_at_milestone() {
    let run = parse_config(&format!("{SMALL}train.base_lr = 0.2\n")).unwrap();
    let out = train(&run).unwrap();
    let lrs: Vec<f64> = out.log.epochs.iter().map(|r| r.lr).collect();
    // floor(12 * 0.6) = 7
    assert!(lrs[..7].iter().all(|&lr| lr == 0.2));
    assert!(lrs[7..].iter().all(|&lr| (lr - 0.02).abs() < 1e-15));
}

#[test]
fn sum_aggregation_differs_from_mean() {
    let mean = train(&parse_config(SMALL).unwrap()).unwrap();
    let sum = train(&parse_config(&format!("{SMALL}train.aggregate = sum\n")).unwrap()).unwrap();
    assert_ne!(mean.log, sum.log);
}
