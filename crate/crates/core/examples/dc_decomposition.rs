//! Splitting the social cost into a difference of convex functions and
//! minimising it over a load interval with the convex–concave procedure.
//!
//! cargo run --example dc_decomposition

use travel_signal::dc::{ccp_interval, dc_decompose, passes_grid_convexity};
use travel_signal::model::baseline_costs;
use travel_signal::social_cost;

fn main() -> travel_signal::Result<()> {
    let costs = baseline_costs();
    let dc = dc_decompose(&costs, 2)?;
    for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!(
            "p1 = {p:4.2}  g = {:8.4}  h = {:8.4}  g - h = {:.6}  C = {:.6}",
            dc.eval_g(&[p]),
            dc.eval_h(&[p]),
            dc.eval(&[p]),
            social_cost(&costs, &[p, 1.0 - p])?
        );
    }
    let convex = dc.g.iter().chain(&dc.h).all(|c| passes_grid_convexity(&c.poly, 0.0, 1.0, 1001, 1e-12));
    println!("components convex on a 1001-point grid: {convex}");

    let (g, h) = dc.univariate().expect("two routes");
    let res = ccp_interval(&g, &h, 0.0, 1.0, 0.9, 1e-10, 1e-8, 200);
    println!("CCP from 0.9: p1 = {:.6}, C = {:.6}, {} iterations", res.x, res.value, res.iterations);
    Ok(())
}
