//! Minimal tour: sample a two-regime coin process, trace two predictors
//! along it, and recover the discount factor from one of the traces.
//!
//!     cargo run -p coinfer-core --example changepoint_demo

use coinfer_core::fitting::{fit_gamma, GammaFitOptions};
use coinfer_core::oracle::BetaParams;
use coinfer_core::predictors::{trace_predictor, DiscountedBayes, ExactBayes};
use coinfer_core::trajectory::{default_changepoint, sample_trajectory, OutcomeSpace};

fn main() {
    let space = OutcomeSpace::coin();
    let spec = default_changepoint(); // 50 steps at 0.75, then 50 at 0.25
    let trajectory = sample_trajectory(&spec, &space, 42).expect("valid spec");

    let exact = ExactBayes::from_beta(BetaParams::uniform());
    let discounted = DiscountedBayes::from_beta(BetaParams::uniform(), 0.5).expect("valid gamma");

    let exact_trace = trace_predictor(&exact, &trajectory, &space).expect("trace");
    let disc_trace = trace_predictor(&discounted, &trajectory, &space).expect("trace");

    println!("step  obs  P(heads) exact  P(heads) gamma=0.5");
    for t in (9..100).step_by(10) {
        println!(
            "{:>4}  {}    {:>14.3}  {:>18.3}",
            t + 1,
            if trajectory.outcomes()[t] == 0 { "H" } else { "T" },
            exact_trace.p_first(t),
            disc_trace.p_first(t),
        );
    }

    let fit = fit_gamma(
        &disc_trace,
        &trajectory,
        BetaParams::uniform(),
        GammaFitOptions::default(),
    )
    .expect("identifiable trace");
    println!(
        "\nrecovered gamma = {:.4} (objective {:.2e}, {} evaluations)",
        fit.gamma_star, fit.objective_value, fit.evaluations
    );
}
