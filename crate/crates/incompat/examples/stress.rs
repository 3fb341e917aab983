use incompat::linalg::{haar_unitary, HermitianMatrix};
use incompat::noise::NoiseModelKind;
use incompat::povm::{apply_post_processing, MeasurementSet, PostProcessing, Povm};
use incompat::robustness::{solve_robustness, verify_result, SolveOptions};
use incompat::search::{sample_set, Restriction, SearchConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn main() {
    let opts = SolveOptions::default();
    let mut failures = 0u32;
    let mut worst_gap: f64 = 0.0;
    let mut count = 0u32;
    let mut rng = ChaCha12Rng::seed_from_u64(31_337);

    // family 1: random sets across shapes and restrictions
    let shapes: [(usize, usize, Restriction); 6] = [
        (2, 2, Restriction::RankOneProjective),
        (2, 4, Restriction::RankOne),
        (3, 3, Restriction::RankOneProjective),
        (3, 2, Restriction::GeneralExtremalFree),
        (4, 4, Restriction::RankOneProjective),
        (4, 2, Restriction::GeneralExtremalFree),
    ];
    for (si, &(d, n, restriction)) in shapes.iter().enumerate() {
        let mut cfg = SearchConfig::new(d, vec![n, n], vec![]);
        cfg.restriction = restriction;
        cfg.seed = 777 + si as u64;
        for i in 0..150u64 {
            let s = sample_set(&cfg, i).unwrap();
            for kind in NoiseModelKind::ALL {
                count += 1;
                match solve_robustness(&s, kind, &opts) {
                    Ok(r) => {
                        let rep = verify_result(&s, &r);
                        let w = rep.primal_marginal
                            .max(rep.parent_psd)
                            .max(rep.dual_feasibility)
                            .max(rep.dual_scalar)
                            .max(rep.gap);
                        worst_gap = worst_gap.max(w);
                        if w > 1e-7 {
                            failures += 1;
                            println!("RESIDUAL d={d} n={n} {restriction:?} #{i} {kind}: {w:.2e}");
                        }
                    }
                    Err(e) => {
                        failures += 1;
                        println!("FAIL d={d} n={n} {restriction:?} #{i} {kind}: {e}");
                    }
                }
            }
        }
    }

    // family 2: degenerate constructions
    let mut degenerate: Vec<MeasurementSet> = Vec::new();
    // identical measurements
    let u = haar_unitary(3, &mut rng);
    let p = Povm::from_basis(&u);
    degenerate.push(MeasurementSet::pair(p.clone(), p.clone()).unwrap());
    // one trivial measurement
    degenerate.push(MeasurementSet::pair(p.clone(), Povm::trivial(3, 3)).unwrap());
    // near-compatible: tiny rotation
    let mut h = incompat::linalg::CMat::zeros(3, 3);
    h[(0, 1)] = incompat::linalg::C64::new(0.0, 1e-4);
    h[(1, 0)] = incompat::linalg::C64::new(0.0, -1e-4);
    let rot = HermitianMatrix::symmetrize(h).exp_i(1.0);
    degenerate.push(MeasurementSet::pair(p.clone(), p.conjugate_by(&rot)).unwrap());
    // zero elements in both measurements
    let pad = |q: &Povm| {
        let mut e = q.elements().to_vec();
        e.push(HermitianMatrix::zeros(3));
        e.push(HermitianMatrix::zeros(3));
        Povm::new_unchecked(3, e).unwrap()
    };
    degenerate.push(MeasurementSet::pair(pad(&p), pad(&Povm::from_basis(&haar_unitary(3, &mut rng)))).unwrap());
    // heavily split outcomes (many tiny elements)
    let split = PostProcessing::new(vec![
        vec![0.05, 0.0, 0.0],
        vec![0.95, 0.0, 0.0],
        vec![0.0, 0.5, 0.03],
        vec![0.0, 0.5, 0.97],
    ])
    .unwrap();
    let q = apply_post_processing(&p, &split).unwrap();
    degenerate.push(MeasurementSet::pair(q, Povm::from_basis(&haar_unitary(3, &mut rng))).unwrap());
    // rank-deficient general POVM (binned projective)
    let bin = PostProcessing::new(vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
    let binned = apply_post_processing(&Povm::from_basis(&haar_unitary(3, &mut rng)), &bin).unwrap();
    degenerate.push(MeasurementSet::pair(binned, Povm::from_basis(&haar_unitary(3, &mut rng))).unwrap());
    // qubit triplets and quadruples
    for k in [3usize, 4] {
        let ms: Vec<Povm> = (0..k).map(|_| Povm::from_basis(&haar_unitary(2, &mut rng))).collect();
        degenerate.push(MeasurementSet::new(ms).unwrap());
    }
    // mixtures extremely close to the compatibility boundary
    let mub = incompat::povm::mub_pair(2).unwrap();
    let noise = incompat::noise::canonical_noise(NoiseModelKind::Depolarising, &mub).measurements;
    for eps in [1e-5, 1e-7, 0.0] {
        let at = incompat::noise::mix(&mub, &noise, std::f64::consts::FRAC_1_SQRT_2 - eps).unwrap();
        degenerate.push(at);
    }

    for (di, s) in degenerate.iter().enumerate() {
        for kind in NoiseModelKind::ALL {
            count += 1;
            match solve_robustness(s, kind, &opts) {
                Ok(r) => {
                    let rep = verify_result(s, &r);
                    let w = rep.primal_marginal
                        .max(rep.parent_psd)
                        .max(rep.dual_feasibility)
                        .max(rep.dual_scalar)
                        .max(rep.gap);
                    worst_gap = worst_gap.max(w);
                    if w > 1e-7 {
                        failures += 1;
                        println!("RESIDUAL degenerate #{di} {kind}: {w:.2e}");
                    }
                }
                Err(e) => {
                    failures += 1;
                    println!("FAIL degenerate #{di} {kind}: {e}");
                }
            }
        }
    }

    // family 3: random perturbations of spec landmarks under all measures
    for i in 0..40u64 {
        let theta = (i as f64 / 39.0) * std::f64::consts::FRAC_PI_4;
        let s = incompat::povm::qubit_theta_pair(theta).unwrap();
        for kind in NoiseModelKind::ALL {
            count += 1;
            if let Err(e) = solve_robustness(&s, kind, &opts) {
                failures += 1;
                println!("FAIL theta {theta}: {kind}: {e}");
            }
        }
    }
    let _ = rng.gen_range(0..2);
    println!("stress: {count} solves, {failures} failures, worst residual {worst_gap:.3e}");
}
