//! Block structure of the factor and positive definiteness of Ω.

mod common;

use blmm_core::block::{Block, BlockTag, Dense};
use blmm_core::reference::{cholesky, dense_gram, dense_omega, matmul, transpose};
use blmm_core::{parse_formula, Column, Criterion, DataTable, LinearMixedModel};
use common::{max_abs_diff, random_instance, random_theta, rng};

fn same_structure(a: &Block, b: &Block) -> bool {
    match (a, b) {
        (Block::Diagonal(x), Block::Diagonal(y)) => x.len() == y.len(),
        (Block::BlockDiagonal(x), Block::BlockDiagonal(y)) => x.p() == y.p() && x.nblocks() == y.nblocks(),
        (Block::Sparse(x), Block::Sparse(y)) => x.same_pattern(y),
        (Block::Dense(x), Block::Dense(y)) => x.nrows() == y.nrows() && x.ncols() == y.ncols(),
        _ => false,
    }
}

#[test]
fn first_column_keeps_the_pattern_of_a() {
    let mut checked = 0;
    for seed in 0..150 {
        let mut r = rng(seed);
        let inst = random_instance(&mut r);
        let mut m = inst.model(true);
        if m.reterms()[0].p() != 1 {
            continue;
        }
        let theta = random_theta(&m, &mut r);
        m.evaluate(&theta, Criterion::Ml).unwrap();
        let (a, l) = (m.gram(), m.factor());
        assert_eq!(l.block(0, 0).tag(), BlockTag::Diagonal, "seed {seed}");
        for i in 0..a.nblocks() {
            assert!(same_structure(a.block(i, 0), l.block(i, 0)), "seed {seed}: block ({i}, 0)");
        }
        for j in 1..a.nblocks() {
            for i in j..a.nblocks() {
                assert_eq!(l.block(i, j).tag(), BlockTag::Dense, "seed {seed}: block ({i}, {j})");
            }
        }
        checked += 1;
    }
    assert!(checked >= 50, "only {checked} instances had a scalar first term");
}

#[test]
fn leading_block_of_omega_is_positive_definite() {
    let mut r = rng(7);
    let inst = random_instance(&mut r);
    let mut m = inst.model(true);
    let (x, z) = (m.x_dense(), m.z_dense());
    let a = dense_gram(&z, &x, m.y());
    let q = m.dims().q;
    for trial in 0..20 {
        let theta = if trial == 0 { vec![0.0; m.theta().len()] } else { random_theta(&m, &mut r) };
        m.set_theta(&theta).unwrap();
        let omega = dense_omega(&a, &m.lambda_dense());
        let lead = Dense::from_col_major(q, q, (0..q * q).map(|k| omega.get(k % q, k / q)).collect());
        assert!(cholesky(&lead).is_some(), "trial {trial}: leading block not positive definite");
        m.update_l().unwrap();
        assert!(m.factor().logdet_re().is_finite());
    }
}

#[test]
fn factor_reproduces_omega() {
    for seed in 300..340 {
        let mut r = rng(seed);
        let inst = random_instance(&mut r);
        let mut m = inst.model(true);
        let theta = random_theta(&m, &mut r);
        m.evaluate(&theta, Criterion::Ml).unwrap();
        let a = dense_gram(&m.z_dense(), &m.x_dense(), m.y());
        let l = m.factor().to_dense();
        let llt = matmul(&l, &transpose(&l));
        let omega = dense_omega(&a, &m.lambda_dense());
        let scale = omega.as_slice().iter().fold(1.0f64, |s, v| s.max(v.abs()));
        assert!(max_abs_diff(&llt, &omega) <= 1e-12 * scale, "seed {seed}");
    }
}

fn one_term_table(n: usize, levels: usize) -> DataTable {
    let g = (0..n).map(|i| format!("L{:03}", i % levels)).collect();
    let x = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let y = (0..n).map(|i| (i as f64 * 0.11).cos() + (i % levels) as f64 * 0.1).collect();
    DataTable::new(vec![
        ("g".into(), Column::Categorical(g)),
        ("x".into(), Column::Numeric(x)),
        ("y".into(), Column::Numeric(y)),
    ])
    .unwrap()
}

#[test]
fn single_scalar_term_counts() {
    let t = one_term_table(60, 7);
    let m = LinearMixedModel::new(&parse_formula("y ~ 1 + x + (1|g)").unwrap(), &t).unwrap();
    let (q, p) = (7, 2);
    assert_eq!(m.nnz_l(), q + (p + 1) * q + (p + 1) * (p + 2) / 2);
    assert_eq!(m.factor().tags(), vec![BlockTag::Diagonal, BlockTag::Dense, BlockTag::Dense]);
    let desc = m.block_description();
    assert_eq!(desc.lines().count(), 3);
    assert!(desc.lines().nth(1).unwrap().contains("Diagonal"));
}

#[test]
fn swapped_order_fills_in() {
    let n = 400;
    let s: Vec<String> = (0..n).map(|i| format!("S{:03}", i % 40)).collect();
    let d: Vec<String> = (0..n).map(|i| format!("D{:03}", (i * 7 + i / 40) % 25)).collect();
    let y: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
    let t = DataTable::new(vec![
        ("s".into(), Column::Categorical(s)),
        ("d".into(), Column::Categorical(d)),
        ("y".into(), Column::Numeric(y)),
    ])
    .unwrap();
    let f = parse_formula("y ~ 1 + (1|d) + (1|s)").unwrap();
    let sorted = LinearMixedModel::with_order(&f, &t, true).unwrap();
    let swapped = LinearMixedModel::with_order(&f, &t, false).unwrap();
    assert_eq!(sorted.reterms()[0].grouping, "s");
    assert_eq!(swapped.reterms()[0].grouping, "d");
    assert_eq!(sorted.nnz_a(), swapped.nnz_a());
    assert!(sorted.nnz_l() < swapped.nnz_l());
}
