//! Constants and right-hand sides of the moment bounds for a Poisson
//! average.

use ulln::bounds::{self, BoundParams, Hypotheses};
use ulln::Result;

pub fn run_example() -> Result<()> {
    for q in [3.0, 4.0, 6.0] {
        let h = Hypotheses::poisson(1.0, 1.0, q);
        println!(
            "q={q}: C_q={:.4} N_0={} exponent={:.4} summable={}",
            bounds::cq_constant(q)?,
            bounds::n0_threshold(q, h.r)?,
            bounds::rate_exponent(q, h.r),
            bounds::complete_lln_condition(q, h.r)
        );
        for n in [64u64, 1024, 1 << 16] {
            let p = BoundParams {
                q,
                r: h.r,
                gamma: None,
                p: None,
                horizon: 1.0,
                moment_scale: h.moment_scale,
                wbar: h.wbar,
                n,
            };
            println!("  N={n:<6} E[sup^q] <= {:.4e}", bounds::main_bound_rhs(&p)?);
        }
    }
    let p = BoundParams {
        q: 0.0,
        r: 1.0,
        gamma: Some(0.4),
        p: Some(2.0),
        horizon: 1.0,
        moment_scale: 1.0,
        wbar: 1.0,
        n: 1 << 20,
    };
    println!(
        "rate form: q={} ||sup||_2 <= {:.4e}",
        bounds::choose_q(2.0, 0.4, 1.0)?,
        bounds::main2_bound_rhs(&p)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
