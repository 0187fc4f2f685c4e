//! Solve the two portfolio programs on a small instance and show how
//! transaction costs reshape the trade.
//!
//!     cargo run -p factordiff --example portfolio_qp

use nalgebra::{DMatrix, DVector};

use factordiff::optimizer::{
    brute_oracle, solve_mv, solve_mv_tc, MvProblem, DEFAULT_BUY_FEE, DEFAULT_SELL_FEE,
};

fn main() -> factordiff::Result<()> {
    // Four assets: expected daily returns and a correlated covariance.
    let mu = DVector::from_column_slice(&[0.0012, 0.0007, 0.0002, -0.0003]);
    let vols = [0.018, 0.022, 0.015, 0.020];
    let corr = 0.35;
    let sigma = DMatrix::from_fn(4, 4, |i, j| {
        if i == j {
            vols[i] * vols[i]
        } else {
            corr * vols[i] * vols[j]
        }
    });
    let gamma = 100.0;

    let plain = MvProblem::new(mu.clone(), sigma.clone(), gamma);
    let sol = solve_mv(&plain)?;
    println!("plain mean-variance (gamma = {gamma}):");
    println!("  weights     {:?}", fmt(&sol.weights));
    println!("  objective   {:.6e}", sol.objective);
    println!("  kkt residual {:.2e} in {} iterations", sol.kkt_residual, sol.iterations);

    let grid = brute_oracle(&plain, 200)?;
    println!("  1/200 grid oracle objective {:.6e} (gap {:.2e})",
        grid.objective, sol.objective - grid.objective);

    // Rebalancing away from a stale book under asymmetric fees.
    let prior = DVector::from_column_slice(&[0.10, 0.15, 0.40, 0.35]);
    let tc = MvProblem::with_fees(
        mu,
        sigma,
        gamma,
        DEFAULT_BUY_FEE,
        DEFAULT_SELL_FEE,
        prior.clone(),
    );
    let sol_tc = solve_mv_tc(&tc)?;
    println!("\nwith 7.5/12.5 bps fees from prior {:?}:", fmt(&prior));
    println!("  weights     {:?}", fmt(&sol_tc.weights));
    println!("  buys        {:?}", fmt(&sol_tc.buys));
    println!("  sells       {:?}", fmt(&sol_tc.sells));
    println!("  objective   {:.6e}", sol_tc.objective);
    let cost = DEFAULT_BUY_FEE * sol_tc.buys.sum() + DEFAULT_SELL_FEE * sol_tc.sells.sum();
    println!("  fee drag    {:.2} bps of wealth", cost * 1e4);

    // Scaling fees up pulls the solution toward the prior.
    println!("\nfee scaling vs turnover:");
    for scale in [0.0, 1.0, 10.0, 100.0] {
        let p = MvProblem::with_fees(
            tc.expected_returns.clone(),
            tc.covariance.clone(),
            gamma,
            DEFAULT_BUY_FEE * scale,
            DEFAULT_SELL_FEE * scale,
            prior.clone(),
        );
        let s = solve_mv_tc(&p)?;
        let turnover = s.buys.sum() + s.sells.sum();
        println!("  {:>5}x fees -> turnover {:.4}", scale, turnover);
    }
    Ok(())
}

fn fmt(v: &DVector<f64>) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
