use aitd_core::corpus::Label;
use aitd_core::metrics::{auc, confusion, prf, roc_curve};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

fn label(rng: &mut SplitMix64, p: f64) -> Label {
    if rng.random_bool(p) {
        Label::Ai
    } else {
        Label::Human
    }
}

#[test]
fn confusion_and_prf_match_hand_recount() {
    let mut rng = SplitMix64::seed_from_u64(42);
    for _ in 0..50 {
        let n = rng.random_range(1..200);
        let bias = rng.random_range(0.05..0.95);
        let y: Vec<Label> = (0..n).map(|_| label(&mut rng, bias)).collect();
        let pred: Vec<Label> = (0..n).map(|_| label(&mut rng, 0.5)).collect();
        let cm = confusion(&y, &pred).unwrap();

        let count = |t: Label, p: Label| y.iter().zip(&pred).filter(|&(a, b)| *a == t && *b == p).count() as u64;
        assert_eq!(cm.tp, count(Label::Ai, Label::Ai));
        assert_eq!(cm.fp, count(Label::Human, Label::Ai));
        assert_eq!(cm.fn_, count(Label::Ai, Label::Human));
        assert_eq!(cm.tn, count(Label::Human, Label::Human));

        let r = prf(&cm).unwrap();
        for (class, m) in [(Label::Ai, r.ai), (Label::Human, r.human)] {
            let tp = count(class, class) as f64;
            let predicted = pred.iter().filter(|&&p| p == class).count() as f64;
            let actual = y.iter().filter(|&&t| t == class).count() as f64;
            let precision = if predicted == 0.0 { 0.0 } else { tp / predicted };
            let recall = if actual == 0.0 { 0.0 } else { tp / actual };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            assert!((m.precision - precision).abs() < 1e-12);
            assert!((m.recall - recall).abs() < 1e-12);
            assert!((m.f1 - f1).abs() < 1e-12);
            assert_eq!(m.support, actual as u64);
        }
        let acc = y.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / n as f64;
        assert!((r.accuracy - acc).abs() < 1e-12);
    }
}

fn pairwise_auc(y: &[Label], s: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == Label::Ai && y[j] == Label::Human {
                pairs += 1.0;
                if s[i] > s[j] {
                    wins += 1.0;
                } else if s[i] == s[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

#[test]
fn auc_matches_pairwise_count_with_ties() {
    let mut rng = SplitMix64::seed_from_u64(3);
    for round in 0..20 {
        let mut y: Vec<Label> = (0..200).map(|_| label(&mut rng, 0.4)).collect();
        y[0] = Label::Ai;
        y[1] = Label::Human;
        // coarse grid so ties are common
        let levels = if round % 2 == 0 { 10 } else { 1000 };
        let s: Vec<f64> = y
            .iter()
            .map(|l| {
                let shift = if *l == Label::Ai { 2 } else { 0 };
                (rng.random_range(0..levels) + shift) as f64 / levels as f64
            })
            .collect();
        let expected = pairwise_auc(&y, &s);
        assert!((auc(&y, &s).unwrap() - expected).abs() < 1e-12);
        let roc = roc_curve(&y, &s).unwrap();
        assert!((roc.trapezoid_area() - expected).abs() < 1e-12);
        assert_eq!(roc.auc, auc(&y, &s).unwrap());
        let last = roc.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert!(roc
            .points
            .windows(2)
            .all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));
    }
}

#[test]
fn perfect_and_inverted_rankings() {
    let y = [Label::Human, Label::Human, Label::Ai, Label::Ai];
    assert_eq!(auc(&y, &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
    assert_eq!(auc(&y, &[0.9, 0.8, 0.2, 0.1]).unwrap(), 0.0);
    assert_eq!(auc(&y, &[0.5; 4]).unwrap(), 0.5);
}
