use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wsqaoa::encoding::{alpha_min, cost_table, ConstraintScheme, CostTable};
use wsqaoa::portfolio::{random_instance, ProblemInstance, RandomInstanceConfig};
use wsqaoa::quality::{ncwd, rank_solutions, wasserstein_work, RankingMode};
use wsqaoa::simulator::{
    apply_x_mixer, apply_xy_mixer, edges, estimate_expectation, evolve_ansatz, exact_expectation, init_state,
    measure_counts, probabilities, AnsatzConfig, InitKind, Params, Statevector, Topology,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> Statevector {
    let amps = (0..1usize << n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    Statevector::from_amplitudes(amps).unwrap()
}

/// Dense `exp(−iβH)·ψ` for a real symmetric `H`.
fn dense_evolve(h: DMatrix<f64>, amps: &[Complex64], beta: f64) -> Vec<Complex64> {
    let dim = amps.len();
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let mut out = vec![c(0.0, 0.0); dim];
    for k in 0..dim {
        let overlap: Complex64 = (0..dim).map(|l| amps[l] * v[(l, k)]).sum();
        let phase = Complex64::from_polar(1.0, -beta * eig.eigenvalues[k]);
        for (l, o) in out.iter_mut().enumerate() {
            *o += v[(l, k)] * phase * overlap;
        }
    }
    out
}

fn xy_hamiltonian(n: usize, topology: Topology) -> DMatrix<f64> {
    let dim = 1usize << n;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (i, j) in edges(n, topology) {
        for l in 0..dim {
            if (l >> i & 1) != (l >> j & 1) {
                h[(l ^ (1 << i) ^ (1 << j), l)] += 2.0;
            }
        }
    }
    h
}

fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
}

#[test]
fn x_mixer_matches_dense_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=4 {
        let dim = 1usize << n;
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            for l in 0..dim {
                h[(l ^ (1 << i), l)] += 1.0;
            }
        }
        let start = random_state(n, &mut rng);
        let beta = rng.random_range(-3.0..3.0);
        let expected = dense_evolve(h, start.amplitudes(), beta);
        let mut s = start.clone();
        apply_x_mixer(&mut s, beta);
        for (a, b) in s.amplitudes().iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn single_edge_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let beta = rng.random_range(-7.0..7.0);
        let start = random_state(2, &mut rng);
        let exact = dense_evolve(xy_hamiltonian(2, Topology::Ring), start.amplitudes(), beta);
        for topology in [Topology::Ring, Topology::Complete] {
            let mut s = start.clone();
            apply_xy_mixer(&mut s, topology, beta, 0.25).unwrap();
            assert!((fidelity(s.amplitudes(), &exact) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn ring_trotter_error_is_first_order() {
    // n = 3 ring, β = 0.7, from a weight-1 basis state.
    let start = Statevector::basis(3, 1).unwrap();
    let exact = dense_evolve(xy_hamiltonian(3, Topology::Ring), start.amplitudes(), 0.7);
    let infidelity = |eps: f64| {
        let mut s = start.clone();
        apply_xy_mixer(&mut s, Topology::Ring, 0.7, eps).unwrap();
        1.0 - fidelity(s.amplitudes(), &exact)
    };
    let coarse = infidelity(0.25);
    assert!(coarse < 0.06, "{coarse}");
    // Halving the step halves the amplitude error, quartering the infidelity.
    let ratio = infidelity(0.01) / infidelity(0.005);
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn shot_estimate_converges_to_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let state = random_state(6, &mut rng);
    let costs: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let table = CostTable::from_costs(6, 3, costs).unwrap();
    let exact = exact_expectation(&state, &table).unwrap();
    let second: f64 = probabilities(&state).iter().zip(&table.costs).map(|(p, c)| p * c * c).sum();
    let sigma = (second - exact * exact).sqrt();
    let shots = 1_000_000;
    let counts = measure_counts(&state, shots, 17).unwrap();
    let estimate = estimate_expectation(&counts, &table).unwrap();
    assert!((estimate - exact).abs() < 3.0 * sigma / (shots as f64).sqrt());
}

#[test]
fn plus_state_coin_flips_are_fair() {
    let plus = init_state(1, InitKind::Plus).unwrap();
    let good = (0..100u64)
        .filter(|&seed| {
            let counts = measure_counts(&plus, 100_000, seed).unwrap();
            let zeros = counts.counts.get(&0).copied().unwrap_or(0) as f64;
            (zeros / 1e5 - 0.5).abs() < 0.01
        })
        .count();
    assert!(good >= 99);
}

fn eta_of(state: &Statevector, table: &CostTable) -> f64 {
    let ranking = rank_solutions(table, RankingMode::TwoSet);
    ncwd(wasserstein_work(&probabilities(state), &ranking).unwrap(), table.n).unwrap()
}

#[test]
fn complement_symmetry_of_soft_ansatz() {
    // With Σ = 0, flipping every bit maps (B, μ) to (n − B, −μ) up to a
    // constant, and the x-mixer commutes with the flip.
    let mu = vec![0.31, -0.17, 0.53, 0.07];
    let zero = vec![vec![0.0; 4]; 4];
    let a = ProblemInstance::new(1, 0.6, mu.clone(), zero.clone()).unwrap();
    let b = ProblemInstance::new(3, 0.6, mu.iter().map(|m| -m).collect(), zero).unwrap();
    let scheme = ConstraintScheme::Soft { alpha: 0.7 };
    let (ta, tb) = (cost_table(&a, &scheme).unwrap(), cost_table(&b, &scheme).unwrap());
    for (g, beta) in [(0.7, 0.3), (2.0, 1.1), (5.0, 2.5)] {
        let params = Params::new(vec![g], vec![beta]).unwrap();
        let sa = evolve_ansatz(&AnsatzConfig::for_table(&ta, 1).unwrap(), &params, &ta).unwrap();
        let sb = evolve_ansatz(&AnsatzConfig::for_table(&tb, 1).unwrap(), &params, &tb).unwrap();
        assert!((eta_of(&sa, &ta) - eta_of(&sb, &tb)).abs() < 1e-12);
    }
}

#[test]
fn grid_point_eta_scan_for_n2() {
    let inst = random_instance(2, 5, &RandomInstanceConfig::with_budget(1)).unwrap();
    let table = cost_table(&inst, &ConstraintScheme::Soft { alpha: alpha_min(&inst).unwrap() }).unwrap();
    let cfg = AnsatzConfig::for_table(&table, 1).unwrap();
    let (mut best_energy, mut at_best_energy) = (f64::INFINITY, 0.0);
    let mut best_eta: f64 = 0.0;
    for k in 0..50 {
        for m in 0..25 {
            let params = Params::new(vec![2.0 * PI * k as f64 / 50.0], vec![PI * m as f64 / 25.0]).unwrap();
            let s = evolve_ansatz(&cfg, &params, &table).unwrap();
            let e = exact_expectation(&s, &table).unwrap();
            let eta = eta_of(&s, &table);
            best_eta = best_eta.max(eta);
            if e < best_energy {
                best_energy = e;
                at_best_energy = eta;
            }
        }
    }
    // The energy minimizer need not maximize η in general; at n = 2 the
    // two coincide to grid resolution.
    assert!(best_eta - at_best_energy < 0.05, "{best_eta} vs {at_best_energy}");
}

#[test]
fn violation_ranking_is_a_full_sort_at_large_alpha() {
    let mut agreed = 0;
    for seed in 0..20 {
        let inst = random_instance(4, seed, &RandomInstanceConfig::default()).unwrap();
        let table = cost_table(&inst, &ConstraintScheme::Soft { alpha: 100.0 }).unwrap();
        let mut full: Vec<usize> = (0..16).collect();
        full.sort_by(|&a, &b| table.costs[a].total_cmp(&table.costs[b]).then(a.cmp(&b)));
        if rank_solutions(&table, RankingMode::ByViolationMagnitude).sequence() == full {
            agreed += 1;
        }
    }
    assert_eq!(agreed, 20);
}

#[test]
fn soft_rankings_agree_above_alpha_min() {
    for seed in 0..20 {
        let inst = random_instance(5, seed, &RandomInstanceConfig::default()).unwrap();
        let alpha = alpha_min(&inst).unwrap();
        let low = cost_table(&inst, &ConstraintScheme::Soft { alpha: alpha * 1.01 }).unwrap();
        let high = cost_table(&inst, &ConstraintScheme::Soft { alpha: 100.0 }).unwrap();
        let (rl, rh) = (
            rank_solutions(&low, RankingMode::TwoSet),
            rank_solutions(&high, RankingMode::TwoSet),
        );
        assert_eq!(rl, rh);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = probabilities(&random_state(5, &mut rng));
        assert_eq!(wasserstein_work(&dist, &rl).unwrap(), wasserstein_work(&dist, &rh).unwrap());
    }
}
