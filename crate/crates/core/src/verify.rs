//! Self-checks comparing the surgical components against independent
//! oracles: finite differences of the reference losses, direct scalar
//! evaluation, and exact algebraic identities.
//!
//! Each suite reports the largest error it observed and the tolerance it
//! was held to. All sampling is seeded, so reports are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{
    dot, effective_strength, norm, normalize, parallel_length, sub, Embedding, MetricKind, PairRole, SimilarityPair,
};
use crate::losses::{numeric_gradient, softplus, ReferenceLoss, TripletMember};
use crate::surgery::{
    compose, pair_weights, positive_mask, relative_stats, triplet_weight, unit_directions, DirectionKind, MaskDecision,
    MaskKind, PairWeightKind, RelativeStats, StatsForm, SurgeryConfig, TripletUpdate, TripletWeightKind,
};

/// Finite-difference step used by the gradient suites.
pub const FD_STEP: f64 = 1e-5;
/// Dimensions sampled by the gradient and orthogonality suites.
pub const DIMS: [usize; 3] = [3, 16, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    /// `0.0` marks a bitwise suite: the only passing error is exactly zero.
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        if self.tolerance == 0.0 {
            self.max_error == 0.0
        } else {
            self.max_error < self.tolerance
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Embedding {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(e) = normalize(&v) {
            return e;
        }
    }
}

fn random_triplet(rng: &mut ChaCha8Rng, d: usize) -> [Embedding; 3] {
    [random_unit(rng, d), random_unit(rng, d), random_unit(rng, d)]
}

fn relative_error(got: &[f64], want: &[f64]) -> f64 {
    norm(&sub(got, want)) / norm(want).max(f64::MIN_POSITIVE)
}

fn member(u: &TripletUpdate, m: TripletMember) -> &[f64] {
    match m {
        TripletMember::Anchor => &u.g_a,
        TripletMember::Positive => &u.g_p,
        TripletMember::Negative => &u.g_n,
    }
}

/// Largest per-member relative error between `compose(cfg)` and
/// `numeric_gradient(loss) * scale` over the given triplets.
fn fd_max_error(cfg: &SurgeryConfig, loss: ReferenceLoss, scale: f64, triplets: &[[Embedding; 3]]) -> f64 {
    let mut worst: f64 = 0.0;
    for [a, p, n] in triplets {
        let update = match compose(cfg, a, p, n, &cfg.neutral_stats()) {
            Ok(u) => u,
            Err(_) => return f64::INFINITY,
        };
        for m in TripletMember::ALL {
            let fd = match numeric_gradient(loss, [a.as_slice(), p.as_slice(), n.as_slice()], m, FD_STEP) {
                Ok(g) => g,
                Err(_) => return f64::INFINITY,
            };
            let want: Vec<f64> = fd.iter().map(|x| x * scale).collect();
            worst = worst.max(relative_error(member(&update, m), &want));
        }
    }
    worst
}

/// `(euclidean, euclidean, constant)` against a quarter of the hinge-loss
/// gradient, on triplets whose hinge is active by at least `1e-3` (so the
/// difference stencil never straddles the kink).
pub fn fd_euclidean_suite(per_dim: usize, seed: u64) -> SuiteReport {
    let cfg = SurgeryConfig::with_components(
        DirectionKind::Euclidean,
        PairWeightKind::Euclidean,
        TripletWeightKind::Constant,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets = Vec::with_capacity(per_dim * DIMS.len());
    for d in DIMS {
        let mut kept = 0;
        while kept < per_dim {
            let t = random_triplet(&mut rng, d);
            let Ok(s) = SimilarityPair::of(&t[0], &t[1], &t[2]) else {
                continue;
            };
            if s.d_ap().powi(2) - s.d_an().powi(2) + cfg.margin > 1e-3 {
                triplets.push(t);
                kept += 1;
            }
        }
    }
    SuiteReport {
        name: "fd_euclidean",
        cases: triplets.len(),
        max_error: fd_max_error(&cfg, ReferenceLoss::Euclidean { margin: cfg.margin }, 0.25, &triplets),
        tolerance: 1e-4,
    }
}

/// `(cosine, constant, cosine)` against the NCA-loss gradient over `tau`,
/// for `tau` in {1, 5}.
pub fn fd_cosine_suite(per_dim: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for tau in [1.0, 5.0] {
        let cfg = SurgeryConfig {
            tau,
            ..SurgeryConfig::with_components(
                DirectionKind::Cosine,
                PairWeightKind::Constant,
                TripletWeightKind::Cosine,
            )
        };
        let triplets: Vec<_> = DIMS
            .iter()
            .flat_map(|&d| (0..per_dim).map(|_| random_triplet(&mut rng, d)).collect::<Vec<_>>())
            .collect();
        cases += triplets.len();
        worst = worst.max(fd_max_error(&cfg, ReferenceLoss::Cosine { tau }, 1.0 / tau, &triplets));
    }
    SuiteReport {
        name: "fd_cosine",
        cases,
        max_error: worst,
        tolerance: 1e-4,
    }
}

/// Orthogonalized `e_n` (and `e_an`) are perpendicular to `f_a - f_p` and
/// unit length. Triplets where the component vanishes are counted out.
pub fn orthogonality_suite(per_dim: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d in DIMS {
        for _ in 0..per_dim {
            let [a, p, n] = random_triplet(&mut rng, d);
            let axis = sub(a.as_slice(), p.as_slice());
            for kind in [DirectionKind::EuclideanOrthogonal, DirectionKind::CosineOrthogonal] {
                let Ok(set) = unit_directions(kind, &a, &p, &n, true) else {
                    worst = f64::INFINITY;
                    continue;
                };
                for e in [&set.e_n, &set.e_an] {
                    let len = norm(e);
                    if len == 0.0 {
                        continue;
                    }
                    worst = worst.max(dot(e, &axis).abs()).max((len - 1.0).abs());
                }
                cases += 1;
            }
        }
    }
    SuiteReport {
        name: "orthogonality",
        cases,
        max_error: worst,
        tolerance: 1e-9,
    }
}

/// `parallel_length^2 + effective_strength^2 = 1` on a grid over
/// `(-1, 1 - 1e-6)`, and the two strengths meet at `s = 0.5`.
pub fn projection_suite(grid: usize) -> SuiteReport {
    let lo = -1.0 + 1e-6;
    let hi = 1.0 - 1e-6;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for i in 0..grid {
        let s = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
        for kind in [MetricKind::Euclidean, MetricKind::Cosine] {
            for role in [PairRole::Positive, PairRole::Negative] {
                match (parallel_length(kind, role, s), effective_strength(kind, s)) {
                    (Ok(par), Ok(eff)) => worst = worst.max((par * par + eff * eff - 1.0).abs()),
                    _ => worst = f64::INFINITY,
                }
                cases += 1;
            }
        }
    }
    match (
        effective_strength(MetricKind::Euclidean, 0.5),
        effective_strength(MetricKind::Cosine, 0.5),
    ) {
        (Ok(e), Ok(c)) => worst = worst.max((e - c).abs()),
        _ => worst = f64::INFINITY,
    }
    SuiteReport {
        name: "projection",
        cases: cases + 1,
        max_error: worst,
        tolerance: 1e-9,
    }
}

/// Closed-form weight values, recomputed with an independent scalar
/// evaluation and frozen here.
pub fn closed_form_weights_suite() -> SuiteReport {
    let cfg = SurgeryConfig::default();
    let sims = |ap: f64, an: f64| SimilarityPair { s_ap: ap, s_an: an };
    let linear = |m_pos: f64, m_neg: f64| RelativeStats {
        m_pos,
        m_neg,
        form: StatsForm::Linear,
    };
    let sigmoid = |m_pos: f64, m_neg: f64| RelativeStats {
        m_pos,
        m_neg,
        form: StatsForm::Sigmoid,
    };
    let neutral = cfg.neutral_stats();
    let pw = |kind, s, rel: &RelativeStats| pair_weights(kind, s, &cfg, rel).map(|w| (w.p_pos, w.p_neg));

    let mut checks: Vec<(f64, f64)> = Vec::new();
    let mut push = |got: crate::error::Result<(f64, f64)>, want: (f64, f64)| match got {
        Ok(g) => {
            checks.push((g.0, want.0));
            checks.push((g.1, want.1));
        }
        Err(_) => checks.push((f64::INFINITY, 0.0)),
    };
    push(pw(PairWeightKind::Constant, sims(0.9, -0.2), &neutral), (1.0, 1.0));
    push(pw(PairWeightKind::Euclidean, sims(0.5, 0.5), &neutral), (1.0, 1.0));
    push(
        pw(PairWeightKind::Linear, sims(0.8, 0.6), &neutral),
        (0.19999999999999996, 0.6),
    );
    push(
        pw(PairWeightKind::Sigmoid, sims(0.8, 0.3), &neutral),
        (0.35434369377420455, 0.11920292202211755),
    );
    let m_pos = 0.6f64.exp();
    push(
        pw(PairWeightKind::SigmoidMs, sims(0.8, 0.3), &sigmoid(m_pos, 1.0)).map(|w| (w.0, 0.0)),
        (0.27440581804701325, 0.0),
    );
    push(
        pw(PairWeightKind::LinearMs, sims(0.8, 0.6), &linear(0.3, -0.05)),
        (0.13999999999999999, 0.57),
    );
    let rel = relative_stats(StatsForm::Linear, sims(0.8, 0.6), &[0.5], &[0.65], &cfg);
    push(Ok((rel.m_pos, rel.m_neg)), (0.30000000000000004, -0.05000000000000004));

    let t = |kind, ap, an| triplet_weight(kind, sims(ap, an), 1.0);
    checks.push((t(TripletWeightKind::Constant, 0.1, 0.9), 0.5));
    checks.push((t(TripletWeightKind::Cosine, 0.4, 0.4), 0.5));
    checks.push((t(TripletWeightKind::Cosine, 0.8, 0.3), 0.3775406687981454));
    checks.push((t(TripletWeightKind::Circle, 0.8, 0.3), 0.295254302001909));

    SuiteReport {
        name: "closed_form_weights",
        cases: checks.len(),
        max_error: checks.iter().map(|(g, w)| (g - w).abs()).fold(0.0, f64::max),
        tolerance: 1e-9,
    }
}

/// The cosine triplet weight against `(1/tau) dL/dS_an` of the NCA loss
/// `softplus(tau (S_an - S_ap))`, taken by central differences in `S_an`.
///
/// `weight` is the function under test, so a corrupted variant can be
/// checked to fail.
pub fn triplet_weight_cosine_suite(weight: impl Fn(SimilarityPair, f64) -> f64, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let cases = 1000;
    for i in 0..cases {
        let tau = [1.0, 5.0, 10.0][i % 3];
        let s = SimilarityPair {
            s_ap: rng.random_range(-1.0..1.0),
            s_an: rng.random_range(-1.0..1.0),
        };
        let loss = |an: f64| softplus(tau * (an - s.s_ap));
        let oracle = (loss(s.s_an + h) - loss(s.s_an - h)) / (2.0 * h) / tau;
        worst = worst.max((weight(s, tau) - oracle).abs());
    }
    SuiteReport {
        name: "triplet_weight_cosine",
        cases,
        max_error: worst,
        tolerance: 1e-6,
    }
}

/// With empty relative sets, `sigmoid_ms` and `linear_ms` give bitwise the
/// same weights and updates as `sigmoid` and `linear`. The error counts
/// mismatching cases.
pub fn reduction_suite(cases: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    for i in 0..cases {
        let cfg = SurgeryConfig {
            alpha: rng.random_range(0.5..20.0),
            beta: rng.random_range(0.5..60.0),
            lambda: rng.random_range(0.0..1.0),
            ..SurgeryConfig::default()
        };
        let [a, p, n] = random_triplet(&mut rng, DIMS[i % DIMS.len()]);
        let Ok(sims) = SimilarityPair::of(&a, &p, &n) else {
            mismatches += 1;
            continue;
        };
        for (ms, plain, form) in [
            (PairWeightKind::SigmoidMs, PairWeightKind::Sigmoid, StatsForm::Sigmoid),
            (PairWeightKind::LinearMs, PairWeightKind::Linear, StatsForm::Linear),
        ] {
            let rel = relative_stats(form, sims, &[], &[], &cfg);
            let same_weights = match (
                pair_weights(ms, sims, &cfg, &rel),
                pair_weights(plain, sims, &cfg, &rel),
            ) {
                (Ok(x), Ok(y)) => x.p_pos.to_bits() == y.p_pos.to_bits() && x.p_neg.to_bits() == y.p_neg.to_bits(),
                _ => false,
            };
            let with = |kind| SurgeryConfig {
                pair_weight: kind,
                ..cfg.clone()
            };
            let same_updates = match (
                compose(&with(ms), &a, &p, &n, &rel),
                compose(&with(plain), &a, &p, &n, &rel),
            ) {
                (Ok(x), Ok(y)) => x == y,
                _ => false,
            };
            if !(same_weights && same_updates) {
                mismatches += 1;
            }
        }
    }
    SuiteReport {
        name: "reduction",
        cases: 2 * cases,
        max_error: mismatches as f64,
        tolerance: 0.0,
    }
}

/// Under `sc1`/`sc2`, `g_p` is the exact zero vector whenever the mask
/// condition holds, and `g_n` matches the unmasked update bitwise. The error
/// counts violations; a run that never triggers a mask also fails.
pub fn mask_suite(cases: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    let mut triggered = [0usize; 2];
    for i in 0..cases {
        let [a, p, n] = random_triplet(&mut rng, DIMS[i % DIMS.len()]);
        let Ok(sims) = SimilarityPair::of(&a, &p, &n) else {
            violations += 1;
            continue;
        };
        let base = SurgeryConfig::with_components(
            DirectionKind::ALL[i % 4],
            PairWeightKind::Linear,
            TripletWeightKind::Circle,
        );
        let Ok(open) = compose(&base, &a, &p, &n, &base.neutral_stats()) else {
            violations += 1;
            continue;
        };
        for (slot, mask) in [MaskKind::Sc1, MaskKind::Sc2].into_iter().enumerate() {
            let cfg = SurgeryConfig { mask, ..base.clone() };
            let Ok(u) = compose(&cfg, &a, &p, &n, &cfg.neutral_stats()) else {
                violations += 1;
                continue;
            };
            let fires = match mask {
                MaskKind::Sc1 => sims.s_an > sims.s_ap,
                _ => sims.s_ap * (2.0 - sims.s_ap) - sims.s_an * sims.s_an > 0.5,
            };
            if fires != (positive_mask(mask, sims) == MaskDecision::Zero) {
                violations += 1;
            }
            if u.g_n != open.g_n {
                violations += 1;
            }
            if fires {
                triggered[slot] += 1;
                if u.g_p.iter().any(|x| x.to_bits() != 0) {
                    violations += 1;
                }
            } else if u.g_p != open.g_p {
                violations += 1;
            }
        }
    }
    violations += triggered.iter().filter(|&&t| t == 0).count();
    SuiteReport {
        name: "masks",
        cases: 2 * cases,
        max_error: violations as f64,
        tolerance: 0.0,
    }
}

/// Every suite at its default size (1000 triplets per dimension for the
/// gradient and orthogonality suites).
pub fn run_all() -> VerifyReport {
    VerifyReport {
        suites: vec![
            fd_euclidean_suite(1000, 1),
            fd_cosine_suite(1000, 2),
            orthogonality_suite(1000, 3),
            projection_suite(20_001),
            closed_form_weights_suite(),
            triplet_weight_cosine_suite(|s, tau| triplet_weight(TripletWeightKind::Cosine, s, tau), 4),
            reduction_suite(2000, 5),
            mask_suite(2000, 6),
        ],
    }
}
