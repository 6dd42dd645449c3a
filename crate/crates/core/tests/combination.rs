use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tpml_core::index_sets::{combination_pairs, enumerate_index_set, enumerate_surface, lambda_max};
use tpml_core::{Matrix, WeightVector};

fn in_set(omega: &[f64], lambda: &[usize], threshold: f64) -> bool {
    let s: f64 = lambda.iter().zip(omega).map(|(&l, &w)| (l as f64 - 1.0) * w).sum();
    threshold >= 0.0 && s <= threshold * omega.iter().copied().fold(f64::INFINITY, f64::min)
}

/// All multi-indices in the box `[1, ell + 1]^d`, lexicographic.
fn box_indices(d: usize, top: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (1..=top).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

type Pairs = Vec<(Vec<usize>, Vec<u8>, i8)>;

fn brute(omega: &[f64], ell: i64) -> (Vec<Vec<usize>>, Vec<Vec<usize>>, Pairs) {
    let d = omega.len();
    let wmin = omega.iter().copied().fold(f64::INFINITY, f64::min);
    let inner = ell as f64 - omega.iter().sum::<f64>() / wmin;
    let all = box_indices(d, ell.max(0) as usize + 2);
    let set: Vec<_> = all.iter().filter(|l| in_set(omega, l, ell as f64)).cloned().collect();
    let surface: Vec<_> = set.iter().filter(|l| !in_set(omega, l, inner)).cloned().collect();
    let mut pairs = Vec::new();
    for l in &surface {
        for beta in box_indices(d, 2) {
            let beta: Vec<u8> = beta.iter().map(|&b| (b - 1) as u8).collect();
            let shifted: Vec<usize> = l.iter().zip(&beta).map(|(&a, &b)| a + b as usize).collect();
            if in_set(omega, &shifted, ell as f64) {
                let ones = beta.iter().filter(|&&b| b == 1).count();
                pairs.push((l.clone(), beta, if ones % 2 == 0 { 1 } else { -1 }));
            }
        }
    }
    (set, surface, pairs)
}

#[test]
fn index_sets_match_brute_force_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let d = rng.gen_range(1..=4);
        let omega: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..3.0)).collect();
        let ell = rng.gen_range(0..=6);
        let w = WeightVector::new(omega.clone()).unwrap();
        let (set, surface, pairs) = brute(&omega, ell);
        assert_eq!(enumerate_index_set(&w, ell), set);
        assert_eq!(enumerate_surface(&w, ell), surface);
        let got: Vec<_> = combination_pairs(&w, ell)
            .into_iter()
            .map(|p| (p.lambda, p.beta, p.sign))
            .collect();
        assert_eq!(got, pairs);
        for j in 1..=d {
            let top = set.iter().map(|l| l[j - 1]).max().unwrap();
            assert_eq!(lambda_max(&w, ell, j).unwrap(), top);
        }
    }
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows() * b.rows(), a.cols() * b.cols(), |i, j| {
        a.get(i / b.rows(), j / b.cols()) * b.get(i % b.rows(), j % b.cols())
    })
}

fn tensor(factors: &[&Matrix]) -> Matrix {
    factors[1..].iter().fold(factors[0].clone(), |acc, m| kron(&acc, m))
}

#[test]
fn combination_technique_equals_telescoping_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in [2usize, 3] {
        for ell in 0..=4i64 {
            for _ in 0..3 {
                let omega: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..3.0)).collect();
                let w = WeightVector::new(omega).unwrap();
                // ops[j][i] for levels i = 0..=top, level 0 the zero operator
                let ops: Vec<Vec<Matrix>> = (0..d)
                    .map(|j| {
                        let top = lambda_max(&w, ell, j + 1).unwrap() + 1;
                        let mut v = vec![Matrix::zeros(3, 3)];
                        v.extend((0..top).map(|_| Matrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0))));
                        v
                    })
                    .collect();
                let mut telescoping = Matrix::zeros(3usize.pow(d as u32), 3usize.pow(d as u32));
                for lambda in enumerate_index_set(&w, ell) {
                    let deltas: Vec<Matrix> = (0..d)
                        .map(|j| {
                            let mut m = ops[j][lambda[j]].clone();
                            m.add_scaled(-1.0, &ops[j][lambda[j] - 1]);
                            m
                        })
                        .collect();
                    telescoping.add_scaled(1.0, &tensor(&deltas.iter().collect::<Vec<_>>()));
                }
                let mut combined = Matrix::zeros(telescoping.rows(), telescoping.cols());
                for p in combination_pairs(&w, ell) {
                    let factors: Vec<&Matrix> = (0..d).map(|j| &ops[j][p.lambda[j]]).collect();
                    combined.add_scaled(f64::from(p.sign), &tensor(&factors));
                }
                assert!(
                    combined.max_abs_diff(&telescoping) <= 1e-12,
                    "d={d} ell={ell}: {}",
                    combined.max_abs_diff(&telescoping)
                );
            }
        }
    }
}

proptest! {
    #[test]
    fn surface_is_subset_and_pairs_are_sound(
        omega in proptest::collection::vec(0.5f64..3.0, 1..4),
        ell in 0i64..6,
    ) {
        let w = WeightVector::new(omega.clone()).unwrap();
        let set = enumerate_index_set(&w, ell);
        let surface = enumerate_surface(&w, ell);
        prop_assert!(surface.iter().all(|l| set.contains(l)));
        // every index of the set lies below some surface index
        prop_assert!(set.iter().all(|l| surface.iter().any(|s| s.iter().zip(l).all(|(a, b)| a >= b))));
        for p in combination_pairs(&w, ell) {
            prop_assert!(surface.contains(&p.lambda));
            let ones = p.beta.iter().filter(|&&b| b == 1).count() as i32;
            prop_assert_eq!(i32::from(p.sign), (-1i32).pow(ones as u32));
        }
        // the combination coefficients of the constant sequence sum to one
        let total: i64 = combination_pairs(&w, ell).iter().map(|p| i64::from(p.sign)).sum();
        prop_assert_eq!(total, 1);
    }
}
