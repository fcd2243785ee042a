//! Order, rank and abscissa audit of every shipped method.

use mrrk::tableaux::audit_catalogue;

fn main() {
    for r in audit_catalogue() {
        println!(
            "{:<16} stated {:?} verified {:?} rank {} |c - Ae| {:.1e}",
            r.name, r.stated_orders, r.verified_orders, r.rank, r.abscissa_residual
        );
        for f in &r.failures {
            println!("    {f}");
        }
    }
}
