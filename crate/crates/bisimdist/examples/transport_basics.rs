//! Couplings and optimal transport on bare probability vectors.
//!
//! Builds two small distributions over points on a six-hour clock face,
//! couples them with the northwest-corner rule, solves the transportation
//! problem exactly, and shows the optimum is what the Kantorovich helper
//! reports. The ground cost wraps around the clock, so the greedy
//! northwest guess pays for crossings the optimum avoids.

use bisimdist::{kantorovich, northwest_coupling, solve_tp, TransportProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Ring distance between hours 0..5, scaled into [0, 1].
    let cost = |u: usize, v: usize| {
        let d = u.abs_diff(v);
        d.min(6 - d) as f64 / 3.0
    };
    let mu = [(0, 0.4), (2, 0.6)];
    let nu = [(1, 0.3), (5, 0.7)];

    let nw = northwest_coupling(&mu, &nu)?;
    nw.check(&mu, &nu)?;
    println!("northwest coupling ({} cells):", nw.len());
    for (u, v, w) in nw.support() {
        println!("  {u} -> {v}  mass {w:.2}  cost {:.3}", cost(u, v));
    }
    println!("cost: {:.6}", nw.cost_under(cost));

    let tp = TransportProblem::new(&mu, &nu, cost)?;
    let sol = solve_tp(&tp);
    println!();
    println!("optimal coupling ({} cells, {} pivots):", sol.coupling.len(), sol.pivots);
    for (u, v, w) in sol.coupling.support() {
        println!("  {u} -> {v}  mass {w:.2}  cost {:.3}", cost(u, v));
    }
    println!("cost: {:.6}", sol.value);

    let k = kantorovich(cost, &mu, &nu)?;
    println!();
    println!("kantorovich(mu, nu) = {k:.6}");
    println!("northwest overpays by {:.6}", nw.cost_under(cost) - k);
    Ok(())
}
