use blockterm::dataset::{synthetic_color_ensemble, ColorTruth};
use blockterm::decomp::matching::greedy_match;
use blockterm::features::{common_basis_qr, CommonBasisConfig};
use blockterm::{
    build_feature_bank, ll1_nn, ll1_nn_best, split_features, DecompConfig, Fitted, LL1Factors, Matrix, Reconstruct,
    SubsetRule, Tensor,
};

fn color_fit() -> (Tensor, ColorTruth<f64>, Fitted<LL1Factors<f64>, f64>) {
    let (ds, truth) = synthetic_color_ensemble::<f64>(16, 16, 7).unwrap();
    let cfg = DecompConfig { max_sweeps: 2000, rel_tol: 1e-12, seed: 1, ..Default::default() };
    let f = ll1_nn_best(&ds.tensor, &[1, 1, 1], &cfg, 20).unwrap();
    (ds.tensor, truth, f)
}

fn vectorised(ms: &[Matrix<f64>]) -> Matrix<f64> {
    Matrix::from_columns(&ms.iter().map(|m| m.data().to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn color_bank_holds_the_base_colours() {
    let (t, truth, f) = color_fit();
    assert!(f.trace.final_fit() < 1e-6, "fit {}", f.trace.final_fit());
    let bank = build_feature_bank(&f.model).unwrap();
    let matches = greedy_match(&vectorised(&bank.slices), &vectorised(&truth.bases)).unwrap();
    assert!(matches.iter().all(|m| m.cosine > 1.0 - 1e-9), "{matches:?}");

    // observation 2 has no green; it must not pick up the green slice
    let green = matches[1].estimate;
    for tau in [1e-6, 0.1, 0.5] {
        let s = split_features(&t, &bank, &SubsetRule::new(tau).unwrap()).unwrap();
        assert!(!s.selected[2].contains(&green), "tau {tau}: {:?}", s.selected[2]);
    }
    let diff = bank.reconstruct().unwrap().sub(&f.model.reconstruct().unwrap()).unwrap().norm_frobenius();
    assert!(diff <= 1e-10 * t.norm_frobenius());
}

#[test]
fn identical_slices_leave_nothing_individual() {
    let base = Matrix::from_fn(6, 5, |i, j| ((i * 3 + j * 5) % 7) as f64 + 0.5);
    let t = Tensor::from_frontal_slices(&vec![base; 4]).unwrap();
    let f = ll1_nn(&t, &[5], &DecompConfig::default()).unwrap().model;
    let s = split_features(&t, &build_feature_bank(&f).unwrap(), &SubsetRule::default()).unwrap();
    for n in 0..4 {
        let x = t.frontal_slice(n).unwrap();
        assert!(s.individual[n].norm_frobenius() <= 1e-6 * x.norm_frobenius());
        assert_eq!(s.common[n].add(&s.individual[n]).unwrap(), x);
    }
}

#[test]
fn tau_zero_gives_the_residual_and_larger_tau_shrinks() {
    let t = Tensor::from_fn(&[5, 4, 6], |i| ((i[0] * 7 + i[1] * 11 + i[2] * 5) % 9) as f64 / 4.0 + 0.1).unwrap();
    let f = ll1_nn(&t, &[2, 1, 1], &DecompConfig { max_sweeps: 50, ..Default::default() }).unwrap().model;
    let bank = build_feature_bank(&f).unwrap();
    let residual = t.sub(&f.reconstruct().unwrap()).unwrap();
    let s0 = split_features(&t, &bank, &SubsetRule::default()).unwrap();
    for n in 0..6 {
        let diff = s0.individual[n].sub(&residual.frontal_slice(n).unwrap()).unwrap().max_abs();
        assert!(diff < 1e-12, "{diff}");
    }
    let mut prev = s0.selected.clone();
    for tau in [0.25, 0.5, 0.75, 1.0, 1.1] {
        let s = split_features(&t, &bank, &SubsetRule::new(tau).unwrap()).unwrap();
        for (now, before) in s.selected.iter().zip(&prev) {
            assert!(now.iter().all(|k| before.contains(k)));
        }
        prev = s.selected;
    }
    let high = split_features(&t, &bank, &SubsetRule::new(1.1).unwrap()).unwrap();
    for n in 0..6 {
        assert_eq!(high.common[n].max_abs(), 0.0);
        assert_eq!(high.individual[n], t.frontal_slice(n).unwrap());
    }
}

#[test]
fn common_basis_costs_never_increase() {
    let v: Vec<f64> = (0..12).map(|i| ((i * 5) % 7) as f64 - 3.0).collect();
    let blocks: Vec<Matrix<f64>> = (0..4)
        .map(|n| Matrix::from_fn(12, 3, |i, j| if j == 0 { v[i] } else { ((i * (n + 2) + j * 7) % 11) as f64 - 5.0 }))
        .collect();
    let b = common_basis_qr(&blocks, &CommonBasisConfig { m_max: 3, seed: 4, ..Default::default() }).unwrap();
    assert!(!b.is_empty());
    assert!(b.residual_costs[0] < 1e-10);
    for h in &b.cost_history {
        assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{h:?}");
    }
}
