//! Success rates should fall with k at fixed m. Raw columns are noisy at
//! small trial counts, so the check is a rank trend on smoothed columns.

use noisefold::harness::{phase_transition, Method, TrialConfig};

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        for &t in &idx[i..=j] {
            out[t] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(&ranks(a), &ranks(b))
}

fn smooth(xs: &[f64]) -> Vec<f64> {
    (0..xs.len())
        .map(|i| {
            let w = &xs[i.saturating_sub(1)..(i + 2).min(xs.len())];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect()
}

#[test]
fn spearman_helper_matches_hand_values() {
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
    assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]), Some(1.0));
    assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
    assert_eq!(smooth(&[0.0, 3.0, 0.0]), vec![1.5, 1.0, 1.5]);
}

#[test]
fn success_rate_decreases_with_k() {
    let cfg = TrialConfig {
        phase_n: 16,
        ..TrialConfig::default()
    };
    let grid = &phase_transition(&cfg, &[Method::L1Eq], 6).unwrap()[0];
    let coeffs: Vec<f64> = grid
        .success
        .iter()
        .filter(|col| col.len() >= 4)
        .filter_map(|col| {
            let ks: Vec<f64> = (1..=col.len()).map(|k| k as f64).collect();
            spearman(&ks, &smooth(col))
        })
        .collect();
    assert!(!coeffs.is_empty());
    let nonpositive = coeffs.iter().filter(|&&c| c <= 0.0).count();
    assert_eq!(nonpositive, coeffs.len(), "{coeffs:?}");
}
