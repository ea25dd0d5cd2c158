use rwre::{ConductanceLaw, Edge, Environment, EnvironmentField, LatticePoint};

const EDGES: i64 = 1000;

fn edge(i: i64, j: i64, axis: usize) -> Edge {
    Edge::new(LatticePoint::from_coords(&[i, j]), axis)
}

#[test]
fn two_point_frequency_and_mean() {
    let law = ConductanceLaw::symmetric_two_point_1_4();
    let f = EnvironmentField::new(&law, 2, 2024, 0).unwrap();
    let (mut ones, mut sum, mut n) = (0u64, 0.0, 0u64);
    for i in 0..EDGES {
        for j in 0..EDGES / 2 {
            for axis in 0..2 {
                let c = f.conductance(&edge(i - 500, j - 250, axis));
                assert!(c == 1.0 || c == 4.0);
                ones += (c == 1.0) as u64;
                sum += c;
                n += 1;
            }
        }
    }
    let nf = n as f64;
    let freq = ones as f64 / nf;
    assert!((freq - 0.5).abs() < 5.0 * (0.25 / nf).sqrt(), "{freq}");
    let mean = sum / nf;
    assert!((mean - 2.5).abs() < 5.0 * (law.marginal(0).variance() / nf).sqrt(), "{mean}");
}

#[test]
fn uniform_law_moments() {
    let law = ConductanceLaw::uniform(1.0, 3.0).unwrap();
    let f = EnvironmentField::new(&law, 3, 5, 9).unwrap();
    let mut xs = Vec::new();
    for i in 0..100 {
        for j in 0..100 {
            for k in 0..34 {
                xs.push(f.conductance(&Edge::new(LatticePoint::from_coords(&[i, j, k]), (i + j + k) as usize % 3)));
            }
        }
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(xs.iter().all(|&x| (1.0..3.0).contains(&x)));
    assert!((mean - 2.0).abs() < 5.0 * (1.0 / 3.0 / n).sqrt(), "{mean}");
    // Var of the sample variance for U(1,3): (μ4 − σ⁴)/n with μ4 = 1/5, σ² = 1/3.
    assert!((var - 1.0 / 3.0).abs() < 5.0 * ((0.2 - 1.0 / 9.0) / n).sqrt(), "{var}");
}

#[test]
fn environments_and_neighbouring_edges_are_uncorrelated() {
    let law = ConductanceLaw::symmetric_two_point_1_4();
    let a = EnvironmentField::new(&law, 2, 77, 0).unwrap();
    let b = a.with_env_index(1);
    let other_seed = EnvironmentField::new(&law, 2, 78, 0).unwrap();
    let n = 250_000;
    let (mut cross_env, mut cross_seed, mut neighbour) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (i, j) = (k % 500, k / 500);
        let e = edge(i, j, 0);
        let ua = a.edge_uniform(&e) - 0.5;
        cross_env += ua * (b.edge_uniform(&e) - 0.5);
        cross_seed += ua * (other_seed.edge_uniform(&e) - 0.5);
        neighbour += ua * (a.edge_uniform(&edge(i, j, 1)) - 0.5);
    }
    // Each product of independent centred U(0,1) has variance 1/144.
    let bound = 5.0 * (1.0 / 144.0 / n as f64).sqrt();
    for c in [cross_env, cross_seed, neighbour] {
        assert!((c / n as f64).abs() < bound, "{}", c / n as f64);
    }
}

#[test]
fn site_weight_is_sum_of_incident_edges() {
    let law = ConductanceLaw::symmetric_two_point_1_4();
    let f = EnvironmentField::new(&law, 2, 3, 4).unwrap();
    for i in -5..5 {
        for j in -5..5 {
            let x = LatticePoint::from_coords(&[i, j]);
            let by_hand = f.conductance(&edge(i, j, 0))
                + f.conductance(&edge(i - 1, j, 0))
                + f.conductance(&edge(i, j, 1))
                + f.conductance(&edge(i, j - 1, 1));
            assert_eq!(f.site_weight(&x), by_hand);
            assert!((4.0..=16.0).contains(&by_hand));
        }
    }
}

#[test]
fn mean_site_weight_matches_empirical_origin_weights() {
    let law = ConductanceLaw::two_point(1.0, 4.0, 0.3).unwrap();
    let f = EnvironmentField::new(&law, 2, 12, 0).unwrap();
    let origin = LatticePoint::origin(2);
    let n = 200_000u64;
    let ws: Vec<f64> = (0..n).map(|i| f.with_env_index(i).site_weight(&origin)).collect();
    let mean = ws.iter().sum::<f64>() / n as f64;
    let expected = 4.0 * (0.3 + 0.7 * 4.0);
    assert!((law.mean_site_weight(2) - expected).abs() < 1e-12);
    let se = (law.site_weight_variance(2) / n as f64).sqrt();
    assert!((mean - expected).abs() < 5.0 * se, "{mean} vs {expected}");
}
