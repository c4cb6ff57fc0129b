//! Condition tables for the recommended parameters at the tabled design
//! points.

use gbshrink::conditions::{a_upp, c_low, condition_table, default_config, CovParams, EstimatorLabel};
use gbshrink::model::ModelDims;

fn main() -> gbshrink::Result<()> {
    for (p, n, m) in [(10, 25, 5), (10, 25, 20), (4, 10, 6)] {
        let dims = ModelDims::from_pnm(p, n, m)?;
        println!("== {dims}: c_low = {:.7}, a_upp = {:.7}", c_low(dims), a_upp(dims));
        for label in EstimatorLabel::ALL {
            let cfg = match default_config(dims, label) {
                Ok(c) => c,
                Err(e) => {
                    println!("{label}: {e}");
                    continue;
                }
            };
            let hyper = match cfg.cov {
                CovParams::Hyper(h) => Some(h),
                _ => None,
            };
            let cov = match cfg.cov {
                CovParams::G(g) => Some(g),
                _ => None,
            };
            let rows = condition_table(dims, cfg.mean_g().filter(|_| hyper.is_none()), cov, hyper.as_ref());
            for row in rows {
                println!("{label:>3} {:<16} {}", row.name, row.verdict);
                if let Some(note) = row.note {
                    println!("      {note}");
                }
            }
        }
    }
    Ok(())
}
