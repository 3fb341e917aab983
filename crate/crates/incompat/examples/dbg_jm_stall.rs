use incompat::noise::NoiseModelKind;
use incompat::robustness::lower_program;
use incompat::search::{sample_set, Restriction, SearchConfig};
use incompat::sdp;

fn main() {
    let mut cfg = SearchConfig::new(3, vec![3, 3], vec![]);
    cfg.restriction = Restriction::RankOneProjective;
    cfg.seed = 777 + 2;
    let s = sample_set(&cfg, 56).unwrap();
    let lowered = lower_program(&s, NoiseModelKind::JointlyMeasurable).unwrap();
    let sol = sdp::solve(&lowered.program, &sdp::SolverOptions::default()).unwrap();
    println!("status {:?} obj {:.10} gap {:.2e} iters {}", sol.status, sol.objective, sol.residuals.gap, sol.iterations);
}
