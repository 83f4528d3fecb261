//! Deterministic structured-text exports.
//!
//! Every table is rendered from canonically ordered data with exact `p/q`
//! rationals, so identical configurations produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use num_traits::Zero;

use crate::assembly::Construction;
use crate::free::FreeReport;
use crate::net::NetEquivalence;
use crate::verify::{CheckResult, Report};
use crate::{fmt_q, Error, Q};

pub fn blocks_table(cons: &Construction) -> Result<String, Error> {
    let dim = cons.sys.chain().full_size();
    let mut out = String::from("# block stage position coordinates...\n");
    for n in 1..=cons.params.n_cap {
        for (pos, p) in cons.blocks.m(n)?.points.iter().enumerate() {
            writeln!(out, "M {n} {} {}", pos + 1, p.dense_row(dim)).unwrap();
        }
        if cons.blocks.has_shell(n) {
            for (pos, p) in cons.blocks.c(n)?.points.iter().enumerate() {
                writeln!(out, "C {n} {} {}", pos + 1, p.dense_row(dim)).unwrap();
            }
            for (pos, p) in cons.blocks.d(n)?.points.iter().enumerate() {
                writeln!(out, "D {n} {} {}", pos + 1, p.dense_row(dim)).unwrap();
            }
        }
    }
    Ok(out)
}

pub fn order_table(cons: &Construction) -> String {
    let dim = cons.sys.chain().full_size();
    let mut out = String::from("# index segment coordinates...\n");
    for (pos, p) in cons.order.points.iter().enumerate() {
        writeln!(
            out,
            "{} {} {}",
            pos + 1,
            cons.order.segments[pos].label(),
            p.dense_row(dim)
        )
        .unwrap();
    }
    out
}

pub fn e_table(cons: &Construction, n: usize) -> Option<String> {
    let en = cons.e.get(&n)?;
    let mut out = String::from("# i j k\n");
    for (pos, (j, k0)) in en.pairs.iter().enumerate() {
        writeln!(out, "{} {} {}", pos + 1, j, k0 + 1).unwrap();
    }
    Some(out)
}

pub fn g_table(cons: &Construction, n: usize) -> Option<String> {
    let gn = cons.g.get(&n)?;
    let dim = cons.sys.chain().size(n).ok()?;
    let mut out = String::from("# i shell coordinates...\n");
    for (pos, (shell, z)) in gn.entries.iter().enumerate() {
        writeln!(out, "{} {} {}", pos + 1, shell, z.dense_row(dim)).unwrap();
    }
    Some(out)
}

pub fn net_certificate(cons: &Construction, net: &NetEquivalence) -> String {
    let dim = cons.sys.chain().full_size();
    let mut out = String::new();
    writeln!(out, "a {}", fmt_q(&net.decomposition.a)).unwrap();
    writeln!(out, "clusters {}", net.decomposition.reps.len()).unwrap();
    writeln!(out, "grid-points {}", net.grid.len()).unwrap();
    writeln!(out, "max-displacement {}", fmt_q(&net.max_displacement)).unwrap();
    writeln!(out, "lip-mu {}", fmt_q(&net.lip_mu.constant)).unwrap();
    writeln!(out, "lip-mu-inverse {}", fmt_q(&net.lip_mu_inv.constant)).unwrap();
    writeln!(out, "distortion {}", fmt_q(&net.distortion)).unwrap();
    out.push_str("# representative rows: cluster size coordinates...\n");
    for (k, rep) in net.decomposition.reps.iter().enumerate() {
        writeln!(
            out,
            "rep {} {} {}",
            k + 1,
            net.decomposition.clusters[k].len(),
            rep.dense_row(dim)
        )
        .unwrap();
    }
    out.push_str("# net rows: index coordinates...\n");
    for (pos, p) in net.mu.iter().enumerate() {
        writeln!(out, "net {} {}", pos + 1, p.dense_row(dim)).unwrap();
    }
    out
}

pub fn free_table(report: &FreeReport) -> String {
    let mut out = String::from("# molecule index norm_m norm_pm ratio residual\n");
    for row in &report.rows {
        let ratio = if row.norm_m.is_zero() {
            "-".to_string()
        } else {
            fmt_q(&(&row.norm_pm / &row.norm_m))
        };
        writeln!(
            out,
            "{} {} {} {} {} {}",
            row.molecule + 1,
            row.index,
            fmt_q(&row.norm_m),
            fmt_q(&row.norm_pm),
            ratio,
            fmt_q(&row.residual)
        )
        .unwrap();
    }
    out
}

pub fn summary(report: &Report) -> String {
    let mut out = String::new();
    for c in &report.checks {
        out.push_str(&summary_line(c));
        out.push('\n');
    }
    let verdict = if report.all_pass() { "PASS" } else { "FAIL" };
    writeln!(out, "{verdict} overall: {} checks", report.checks.len()).unwrap();
    out
}

pub fn summary_line(c: &CheckResult) -> String {
    let status = if c.pass { "PASS" } else { "FAIL" };
    let witness = if c.witness.is_empty() { "-".to_string() } else { c.witness.clone() };
    format!(
        "{status} {} | {} | observed: {} | witness: {}",
        c.id, c.claim, c.observed, witness
    )
}

/// Renders an exact rational, or `-` for a missing value.
pub fn fmt_opt_q(q: Option<&Q>) -> String {
    q.map(fmt_q).unwrap_or_else(|| "-".to_string())
}

/// Writes all artifacts of a run into `dir`, creating it if needed.
/// Returns the file names written, in order.
pub fn write_all(
    dir: &Path,
    cons: &Construction,
    report: &Report,
) -> Result<Vec<String>, Error> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, content: String| -> Result<(), Error> {
        std::fs::write(dir.join(name), content)?;
        written.push(name.to_string());
        Ok(())
    };
    put("summary.txt", summary(report))?;
    put("blocks.txt", blocks_table(cons)?)?;
    put("order.txt", order_table(cons))?;
    for n in cons.e.keys() {
        if let Some(table) = e_table(cons, *n) {
            put(&format!("e_{n}.txt"), table)?;
        }
    }
    for n in cons.g.keys() {
        if let Some(table) = g_table(cons, *n) {
            put(&format!("g_{n}.txt"), table)?;
        }
    }
    if let Some(net) = &report.net {
        put("net.txt", net_certificate(cons, net))?;
    }
    if let Some(free) = &report.free {
        put("free.txt", free_table(free))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::tests::p0_construction;

    #[test]
    fn tables_have_one_row_per_item() {
        let cons = p0_construction();
        let blocks = blocks_table(&cons).unwrap();
        // 5 + 81 M rows, 4 C rows, 9 D rows, plus the header
        assert_eq!(blocks.lines().count(), 1 + 5 + 81 + 4 + 9);
        let order = order_table(&cons);
        assert_eq!(order.lines().count(), 1 + 81);
        assert!(order.lines().nth(1).unwrap().starts_with("1 M1 0 0 0"));
        let e2 = e_table(&cons, 2).unwrap();
        assert_eq!(e2.lines().count(), 1 + 72);
        let g1 = g_table(&cons, 1).unwrap();
        assert_eq!(g1.lines().count(), 1 + 4);
        assert!(e_table(&cons, 3).is_none());
    }
}
