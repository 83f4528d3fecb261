//! Exhaustive verification suites for every claimed identity and bound.
//!
//! Each check reports the claim, the worst observed value, a deterministic
//! witness, and pass/fail; everything is compared with exact rationals and
//! zero tolerance. Pair loops run inside the caller's thread pool with
//! order-independent reductions.

use num_traits::{One, Signed, Zero};
use rand_core::{RngCore, SeedableRng};

use crate::assembly::{Construction, SegmentRef};
use crate::fine::{big_m, psi_closed_form};
use crate::free::{
    basis_check, free_norm, sample_molecules, FiniteMetric, FreeReport, Molecule, SamplePlan,
};
use crate::lipschitz::table_lipschitz;
use crate::net::{extract_net, perturb, NetEquivalence};
use crate::oracle;
use crate::{fmt_q, q_int, Error, QVec, Q, Z};

/// One verified claim.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: &'static str,
    pub claim: String,
    pub observed: String,
    pub witness: String,
    pub pass: bool,
}

impl CheckResult {
    fn new(id: &'static str, claim: impl Into<String>, observed: impl Into<String>, witness: impl Into<String>, pass: bool) -> Self {
        CheckResult { id, claim: claim.into(), observed: observed.into(), witness: witness.into(), pass }
    }

    fn bound(id: &'static str, claim: impl Into<String>, bound: &Q, observed: &Q, witness: impl Into<String>) -> Self {
        CheckResult::new(id, claim, fmt_q(observed), witness, observed <= bound)
    }
}

/// Suite names in pipeline order.
pub const SUITES: &[&str] = &["system", "blocks", "coarse", "fine", "global", "net", "free"];

/// Knobs of one verification run.
#[derive(Debug, Clone)]
pub struct VerifyParams {
    pub a: Q,
    pub grid_step: Q,
    pub seed: u64,
    pub molecule_samples: usize,
    pub pair_samples: usize,
    pub prefix_indices: usize,
    pub molecule_support: usize,
    /// Cap on sample vectors per stage for the compatibility sweep.
    pub compat_cap: usize,
    /// Cap on the ambient grid sample.
    pub max_block: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteSelection(Vec<String>);

impl SuiteSelection {
    pub fn parse(names: &[String]) -> Result<Self, Error> {
        for n in names {
            if n != "all" && !SUITES.contains(&n.as_str()) {
                return Err(Error::Config(format!(
                    "unknown suite `{n}` (known: all, {})",
                    SUITES.join(", ")
                )));
            }
        }
        Ok(SuiteSelection(names.to_vec()))
    }

    pub fn all() -> Self {
        SuiteSelection(vec!["all".into()])
    }

    pub fn none() -> Self {
        SuiteSelection(Vec::new())
    }

    pub fn wants(&self, suite: &str) -> bool {
        self.0.iter().any(|n| n == "all" || n == suite)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Outcome of a verification run.
pub struct Report {
    pub checks: Vec<CheckResult>,
    pub net: Option<NetEquivalence>,
    pub free: Option<FreeReport>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

pub fn run(cons: &Construction, params: &VerifyParams, selection: &SuiteSelection) -> Result<Report, Error> {
    let mut checks = Vec::new();
    let mut net = None;
    let mut free = None;
    if selection.wants("system") {
        suite_system(cons, params, &mut checks)?;
    }
    if selection.wants("blocks") {
        suite_blocks(cons, &mut checks)?;
    }
    if selection.wants("coarse") {
        suite_coarse(cons, &mut checks)?;
    }
    if selection.wants("fine") {
        suite_fine(cons, &mut checks)?;
    }
    if selection.wants("global") {
        suite_global(cons, &mut checks)?;
    }
    if selection.wants("net") {
        net = Some(suite_net(cons, params, &mut checks)?);
    }
    if selection.wants("free") {
        free = Some(suite_free(cons, params, &mut checks)?);
    }
    Ok(Report { checks, net, free })
}

fn lambda_q(cons: &Construction) -> Q {
    q_int(cons.sys.lambda_bar() as i64)
}

// ---------------------------------------------------------------- system --

fn compat_samples(cons: &Construction, n: usize, cap: usize) -> Result<Vec<QVec>, Error> {
    use num_traits::ToPrimitive;
    let dim = cons.sys.chain().size(n)?;
    let radius = cons.sys.s(n).to_i64().unwrap_or(i64::MAX);
    Ok(oracle::enumerate_ball_capped(dim, radius, cap))
}

fn suite_system(cons: &Construction, params: &VerifyParams, checks: &mut Vec<CheckResult>) -> Result<(), Error> {
    let sys = &cons.sys;
    let n_max = sys.n_max();

    let mut mismatches = 0usize;
    let mut witness = String::new();
    let mut count = 0usize;
    for n in 1..=n_max {
        let samples = compat_samples(cons, n, params.compat_cap)?;
        for m in (n + 1)..=n_max {
            for v in &samples {
                let lhs = sys.extend(n, v)?;
                let rhs = sys.extend(m, &sys.restrict(&lhs, m)?)?;
                count += 1;
                if lhs != rhs && mismatches == 0 {
                    witness = format!("n={n} m={m} v={v}");
                }
                mismatches += usize::from(lhs != rhs);
            }
        }
    }
    checks.push(CheckResult::new(
        "compatibility",
        "i_n = i_m . r_m . i_n on every sample vector",
        format!("{count} compositions, {mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    let mut mismatches = 0usize;
    let mut witness = String::new();
    let mut count = 0usize;
    for n in 1..=n_max {
        for v in compat_samples(cons, n, params.compat_cap)? {
            let back = sys.restrict(&sys.extend(n, &v)?, n)?;
            count += 1;
            if back != v && mismatches == 0 {
                witness = format!("n={n} v={v}");
            }
            mismatches += usize::from(back != v);
        }
    }
    checks.push(CheckResult::new(
        "extension-property",
        "restrict(extend(n, v), n) = v on every sample vector",
        format!("{count} round trips, {mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    let lam = sys.lambda_of();
    checks.push(CheckResult::bound(
        "lambda-bound",
        format!("max_n ||i_n|| <= lambda_bar = {}", sys.lambda_bar()),
        &lambda_q(cons),
        &lam,
        "",
    ));
    Ok(())
}

// ---------------------------------------------------------------- blocks --

fn suite_blocks(cons: &Construction, checks: &mut Vec<CheckResult>) -> Result<(), Error> {
    use num_traits::ToPrimitive;
    let sys = &cons.sys;
    let blocks = &cons.blocks;
    let n_cap = cons.params.n_cap;

    let mut ok = true;
    let mut observed = Vec::new();
    let mut witness = String::new();
    for n in 1..=n_cap {
        let m_n = blocks.m(n)?;
        let dim = sys.chain().size(n)?;
        let radius = sys.s(n).to_i64().expect("capped radius fits");
        let mut expected = oracle::enumerate_ball(dim, radius);
        expected.sort();
        let keys: Vec<QVec> = m_n.restriction_keys().cloned().collect();
        let same = keys == expected;
        if !same && witness.is_empty() {
            witness = format!("M_{n}");
        }
        ok &= same;
        observed.push(format!("#M_{n}={}", m_n.len()));
        if blocks.has_shell(n) {
            let d_n = blocks.d(n)?;
            let radius = sys.s(n + 1).to_i64().expect("capped radius fits");
            let mut expected = oracle::enumerate_ball(dim, radius);
            expected.sort();
            let keys: Vec<QVec> = d_n.restriction_keys().cloned().collect();
            let same = keys == expected;
            if !same && witness.is_empty() {
                witness = format!("D_{n}");
            }
            ok &= same;
            observed.push(format!("#C_{n}={}", blocks.c(n)?.len()));
            observed.push(format!("#D_{n}={}", d_n.len()));
        }
    }
    checks.push(CheckResult::new(
        "block-identification",
        "restrictions of M_n and D_n are exactly the predicted integer balls (independent enumeration)",
        observed.join(" "),
        witness,
        ok,
    ));

    let points = &cons.order.points;
    let mut min_sep: Option<Q> = None;
    let mut witness = String::new();
    let mut integral = true;
    for (i, p) in points.iter().enumerate() {
        integral &= p.is_integral();
        for j in (i + 1)..points.len() {
            let d = cons.dist.get(i, j);
            if min_sep.as_ref().map_or(true, |m| d < m) {
                min_sep = Some(d.clone());
                witness = format!("points {i} and {j}");
            }
        }
    }
    let min_sep = min_sep.unwrap_or_else(Q::one);
    checks.push(CheckResult::new(
        "one-separation",
        "realized points are integral and pairwise at least 1 apart",
        format!("min distance {}", fmt_q(&min_sep)),
        witness,
        integral && min_sep >= Q::one(),
    ));

    let bound = lambda_q(cons) + Q::one();
    let mut worst = Q::zero();
    let mut witness = String::new();
    for n in 1..=n_cap {
        for x in &blocks.m(n)?.points {
            let d = sys.extend(n, &sys.restrict(x, n)?)?.dist(x);
            if d > worst {
                worst = d;
                witness = format!("stage {n}, x={x}");
            }
        }
    }
    checks.push(CheckResult::bound(
        "lemma-dense",
        format!("||i_n(r_n(x)) - x|| <= lambda_bar + 1 = {}", fmt_q(&bound)),
        &bound,
        &worst,
        witness,
    ));

    let mut ok = true;
    let mut witness = String::new();
    let mut shells = 0usize;
    for n in 1..=n_cap {
        if !blocks.has_shell(n) {
            continue;
        }
        shells += 1;
        for c in &blocks.c(n)?.points {
            let in_m_n = blocks.m(n)?.inverse_restriction(&sys.restrict(c, n)?).ok() == Some(c);
            // membership in M_{n+1} by the identification: the point must be
            // the quantized extension of its own stage-(n+1) restriction
            let w = sys.restrict(c, n + 1)?;
            let member = w.sup_norm() <= sys.s_q(n + 1)
                && sys.extend(n + 1, &w)?.quantize() == *c;
            if (in_m_n || !member) && witness.is_empty() {
                witness = format!("stage {n}, c={c}");
            }
            ok &= !in_m_n && member;
        }
    }
    checks.push(CheckResult::new(
        "lemma-contcb",
        "C_n is disjoint from M_n and contained in M_{n+1}",
        format!("{shells} shells checked"),
        witness,
        ok,
    ));
    Ok(())
}

// ---------------------------------------------------------------- coarse --

fn restricted_points(cons: &Construction, n: usize, prefix: usize) -> Result<Vec<QVec>, Error> {
    cons.order.points[..prefix]
        .iter()
        .map(|p| cons.sys.restrict(p, n))
        .collect()
}

/// Largest `dist(x, y) / dist(r x, r y)` over a prefix, i.e. the constant of
/// the inverse identification.
fn inverse_lipschitz(cons: &Construction, n: usize, prefix: usize) -> Result<(Q, String), Error> {
    let restricted = restricted_points(cons, n, prefix)?;
    let mut worst = Q::zero();
    let mut witness = String::new();
    for i in 0..prefix {
        for j in (i + 1)..prefix {
            let dd = restricted[i].dist(&restricted[j]);
            if dd.is_zero() {
                return Err(Error::Internal(format!(
                    "restriction to stage {n} identifies prefix points {i} and {j}"
                )));
            }
            let ratio = cons.dist.get(i, j) / dd;
            if ratio > worst {
                worst = ratio;
                witness = format!("points {i} and {j}");
            }
        }
    }
    Ok((worst, witness))
}

fn suite_coarse(cons: &Construction, checks: &mut Vec<CheckResult>) -> Result<(), Error> {
    let n_cap = cons.params.n_cap;
    let lam = lambda_q(cons);

    let bound = q_int(3) * &lam + q_int(2);
    let mut worst = Q::zero();
    let mut witness = String::new();
    for n in 1..=n_cap {
        let (w, wit) = inverse_lipschitz(cons, n, cons.order.m_end[n - 1])?;
        if w > worst {
            worst = w;
            witness = format!("stage {n}: {wit}");
        }
    }
    checks.push(CheckResult::bound(
        "inverse-lip-m",
        format!("inverse of the M_n identification is {}-Lipschitz", fmt_q(&bound)),
        &bound,
        &worst,
        witness,
    ));

    let bound = &lam * &lam + q_int(2) * &lam + q_int(2);
    let mut worst = Q::zero();
    let mut witness = String::new();
    for n in 1..=n_cap {
        if let Some(Some(end)) = cons.order.d_end.get(n - 1) {
            let (w, wit) = inverse_lipschitz(cons, n, *end)?;
            if w > worst {
                worst = w;
                witness = format!("stage {n}: {wit}");
            }
        }
    }
    checks.push(CheckResult::bound(
        "inverse-lip-d",
        format!("inverse of the D_n identification is {}-Lipschitz", fmt_q(&bound)),
        &bound,
        &worst,
        witness,
    ));

    let bound = q_int(3) * &lam + q_int(2);
    let mut worst = Q::zero();
    let mut witness = String::new();
    for (idx, table) in cons.tables.phi_n.iter().enumerate() {
        let rep = table_lipschitz(table, &cons.dist);
        if rep.constant > worst {
            worst = rep.constant;
            witness = format!("stage {}: pair {:?}", idx + 1, rep.witness);
        }
    }
    checks.push(CheckResult::bound(
        "phi-lipschitz",
        format!("coarse retractions are {}-Lipschitz", fmt_q(&bound)),
        &bound,
        &worst,
        witness,
    ));

    let len = cons.order.len();
    let mut mismatches = 0usize;
    let mut witness = String::new();
    for n in 1..=n_cap {
        for m in 1..=n_cap {
            let lo = n.min(m) - 1;
            for x in 0..len {
                let lhs = cons.tables.phi_n[n - 1][cons.tables.phi_n[m - 1][x] as usize];
                let rhs = cons.tables.phi_n[lo][x];
                if lhs != rhs && mismatches == 0 {
                    witness = format!("n={n} m={m} x={x}");
                }
                mismatches += usize::from(lhs != rhs);
            }
        }
    }
    checks.push(CheckResult::new(
        "phi-commutation",
        "phi_n . phi_m = phi_min on every realized point",
        format!("{mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    let mut mismatches = 0usize;
    let mut witness = String::new();
    let mut count = 0usize;
    for (&n, tn) in &cons.tables.psi_n {
        for (&m, tm) in &cons.tables.psi_n {
            let lo = n.min(m);
            let t_lo = &cons.tables.psi_n[&lo];
            for x in 0..cons.order.m_end[lo - 1] {
                let lhs = tn[tm[x] as usize];
                let rhs = t_lo[x];
                count += 1;
                if lhs != rhs && mismatches == 0 {
                    witness = format!("n={n} m={m} x={x}");
                }
                mismatches += usize::from(lhs != rhs);
            }
        }
    }
    checks.push(CheckResult::new(
        "psi-commutation",
        "Psi_n . Psi_m = Psi_min on the overlapping domains",
        format!("{count} evaluations, {mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    let mut mismatches = 0usize;
    let mut witness = String::new();
    for n in 2..=n_cap {
        let psi = &cons.tables.psi_n[&n];
        for x in 0..len {
            let lhs = cons.tables.phi_n[n - 2][x];
            let rhs = cons.tables.phi_n[n - 2][psi[cons.tables.phi_n[n - 1][x] as usize] as usize];
            if lhs != rhs && mismatches == 0 {
                witness = format!("n={n} x={x}");
            }
            mismatches += usize::from(lhs != rhs);
        }
    }
    checks.push(CheckResult::new(
        "factorization",
        "phi_{n-1} = phi_{n-1} . Psi_n . phi_n on every realized point",
        format!("{mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));
    Ok(())
}

// ------------------------------------------------------------------ fine --

fn suite_fine(cons: &Construction, checks: &mut Vec<CheckResult>) -> Result<(), Error> {
    let lam = lambda_q(cons);

    // shell orders: complete, duplicate-free, norm-monotone
    let mut ok = true;
    let mut witness = String::new();
    for (&n, shell) in &cons.shells {
        let dim = shell.delta.end - shell.delta.start;
        let mut per_shell = std::collections::BTreeMap::new();
        for &m in &shell.norms {
            *per_shell.entry(m).or_insert(0u64) += 1;
        }
        for (&m, &got) in &per_shell {
            if Z::from(got) != oracle::shell_count(dim, m) {
                ok = false;
                if witness.is_empty() {
                    witness = format!("stage {n} shell {m}");
                }
            }
        }
        ok &= shell.norms.windows(2).all(|w| w[0] <= w[1]);
        ok &= shell.points[0] == QVec::zero();
        let mut dedup = shell.points.clone();
        dedup.sort();
        dedup.dedup();
        ok &= dedup.len() == shell.points.len();
    }
    checks.push(CheckResult::new(
        "shell-order",
        "shell enumerations are complete, duplicate-free and norm-monotone",
        format!("{} stages", cons.shells.len()),
        witness,
        ok,
    ));

    // collapse levels: ||y_j1|| - 1 <= m(j2, j1) <= ||y_j1||
    let mut ok = true;
    let mut witness = String::new();
    let mut pairs = 0usize;
    for (&n, shell) in &cons.shells {
        for j2 in 1..shell.len() {
            // walk the chain downward once, reading off every prefix level
            let mut v = shell.points[j2].clone();
            for j in (1..=j2).rev() {
                v = shell.local_t(j, &v);
                let j1 = j - 1;
                if j1 >= 1 {
                    let m = crate::q_to_u64(&v.sup_norm()).unwrap();
                    let m_direct = shell.m_value(j1, j2)?;
                    let norm = shell.norms[j1];
                    pairs += 1;
                    if m != m_direct || m + 1 < norm || m > norm {
                        ok = false;
                        if witness.is_empty() {
                            witness = format!("stage {n}, pair ({j1}, {j2})");
                        }
                    }
                }
            }
        }
    }
    checks.push(CheckResult::new(
        "lemma-bound",
        "collapse level m(j2, j1) sits in [||y_j1|| - 1, ||y_j1||]",
        format!("{pairs} pairs"),
        witness,
        ok,
    ));

    // local chains absorb earlier locals
    let mut ok = true;
    let mut witness = String::new();
    for (&n, shell) in &cons.shells {
        let two_s_n: u64 = 2 * crate::q_to_u64(&cons.sys.s_q(n)).unwrap_or(u64::MAX / 2);
        let limit = shell
            .norms
            .iter()
            .position(|&m| m > two_s_n)
            .unwrap_or(shell.len());
        for j2 in 1..limit {
            for j1 in j2..limit {
                for x in 0..=j2 {
                    let inner = shell.local_t(j2, &shell.points[x]);
                    let lhs = shell.local_t(j1, &inner);
                    if lhs != inner {
                        ok = false;
                        if witness.is_empty() {
                            witness = format!("stage {n}, (j1, j2, x) = ({j1}, {j2}, {x})");
                        }
                    }
                }
            }
        }
    }
    checks.push(CheckResult::new(
        "local-commutation-t",
        "T_j1 . T_j2 = T_j2 on the j2-prefix for j1 >= j2",
        "exhaustive over enumerated shells",
        witness,
        ok,
    ));

    let mut ok = true;
    let mut witness = String::new();
    for (&n, en) in &cons.e {
        let locals = &cons.tables.psi_local[&n];
        let d_len = cons.order.d_end[n - 2].ok_or_else(|| {
            Error::Internal(format!("stage {n} has E data but no realized D prefix"))
        })?;
        for i2 in 1..=en.len() {
            for i1 in i2..=en.len() {
                for x in 0..(d_len + i2) {
                    let inner = locals[i2 - 1][x];
                    let lhs = locals[i1 - 1][inner as usize];
                    if lhs != inner {
                        ok = false;
                        if witness.is_empty() {
                            witness = format!("stage {n}, (i1, i2, x) = ({i1}, {i2}, {x})");
                        }
                    }
                }
            }
        }
    }
    checks.push(CheckResult::new(
        "local-commutation-psi",
        "psi_{n,i1} . psi_{n,i2} = psi_{n,i2} on its domain for i1 >= i2",
        "exhaustive",
        witness,
        ok,
    ));

    // E(n) bijections and the origin column
    let mut ok = true;
    let mut witness = String::new();
    for (&n, en) in &cons.e {
        let d_len = cons.order.d_end[n - 2].unwrap();
        let m_len = cons.order.m_end[n - 1];
        ok &= en.len() == m_len - d_len;
        let mut targets: Vec<usize> = en
            .x_points
            .iter()
            .map(|x| cons.order.index_of(x))
            .collect::<Result<_, _>>()?;
        targets.sort_unstable();
        targets.dedup();
        ok &= targets.len() == en.len() && targets.iter().all(|&t| t >= d_len && t < m_len);
        let k0 = en.k_zero(&cons.sys, &cons.blocks)?;
        ok &= k0 == (0..en.k_count).collect::<Vec<_>>();
        // lexicographic pair order
        ok &= en.pairs.windows(2).all(|w| w[0] < w[1]);
        if !ok && witness.is_empty() {
            witness = format!("stage {n}");
        }
    }
    checks.push(CheckResult::new(
        "deforder-bijection",
        "E(n) lists M_n \\ D_{n-1} bijectively, lexicographically, with K(0, n) full",
        format!("{} stages", cons.e.len()),
        witness,
        ok,
    ));

    // anchor: the full run equals the coarse intermediate retraction
    let mut mismatches = 0usize;
    let mut witness = String::new();
    for (&n, runs) in &cons.tables.psi_int {
        let psi = &cons.tables.psi_n[&n];
        for (x, (&a, &b)) in runs[0].iter().zip(psi.iter()).enumerate() {
            if a != b && mismatches == 0 {
                witness = format!("stage {n}, x={x}");
            }
            mismatches += usize::from(a != b);
        }
    }
    checks.push(CheckResult::new(
        "psi-anchor",
        "Psi_{n,0} = Psi_n",
        format!("{mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    // closed form for the intermediate runs
    let mut mismatches = 0usize;
    let mut witness = String::new();
    let mut pairs = 0usize;
    for (&n, en) in &cons.e {
        let shell = &cons.shells[&n];
        let runs = &cons.tables.psi_int[&n];
        for i1 in 1..en.len() {
            for i2 in (i1 + 1)..=en.len() {
                let x = cons.order.index_of(&en.x_points[i2 - 1])?;
                let got = runs[i1][x] as usize;
                let want = cons
                    .order
                    .index_of(&psi_closed_form(&cons.sys, &cons.blocks, shell, en, i1, i2)?)?;
                pairs += 1;
                if got != want && mismatches == 0 {
                    witness = format!("stage {n}, (i1, i2) = ({i1}, {i2})");
                }
                mismatches += usize::from(got != want);
            }
        }
    }
    checks.push(CheckResult::new(
        "lemmamain-closed-form",
        "Psi_{n,i1}(x_{i2}) equals the case-split truncation closed form",
        format!("{pairs} pairs, {mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    // sandwich for the case-split level
    let mut ok = true;
    let mut witness = String::new();
    for (&n, en) in &cons.e {
        let shell = &cons.shells[&n];
        for i1 in 1..en.len() {
            for i2 in (i1 + 1)..=en.len() {
                let m = big_m(en, shell, i1, i2)?;
                let norm = shell.norms[en.pairs[i1 - 1].0];
                if m + 2 < norm || m > norm {
                    ok = false;
                    if witness.is_empty() {
                        witness = format!("stage {n}, (i1, i2) = ({i1}, {i2})");
                    }
                }
            }
        }
    }
    checks.push(CheckResult::new(
        "remlip-sandwich",
        "M(i1, i2) sits in [||y_j1|| - 2, ||y_j1||]",
        "exhaustive",
        witness,
        ok,
    ));

    // intermediate run commutation and Lipschitz bounds
    let mut mismatches = 0usize;
    let mut witness = String::new();
    for (&n, runs) in &cons.tables.psi_int {
        let m_len = cons.order.m_end[n - 1];
        for l1 in 0..runs.len() {
            for l2 in 0..runs.len() {
                let lo = l1.min(l2);
                for x in 0..m_len {
                    let lhs = runs[l1][runs[l2][x] as usize];
                    let rhs = runs[lo][x];
                    if lhs != rhs && mismatches == 0 {
                        witness = format!("stage {n}, (l1, l2, x) = ({l1}, {l2}, {x})");
                    }
                    mismatches += usize::from(lhs != rhs);
                }
            }
        }
    }
    checks.push(CheckResult::new(
        "psi-int-commutation",
        "Psi_{n,l1} . Psi_{n,l2} = Psi_{n,min}",
        format!("{mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    let bound = (q_int(3) * &lam + q_int(2))
        * (q_int(3) * &lam * &lam + q_int(6) * &lam + q_int(11));
    let mut worst = Q::zero();
    let mut witness = String::new();
    for (&n, runs) in &cons.tables.psi_int {
        for (l, run) in runs.iter().enumerate() {
            let rep = table_lipschitz(run, &cons.dist);
            if rep.constant > worst {
                worst = rep.constant;
                witness = format!("stage {n}, l={l}, pair {:?}", rep.witness);
            }
        }
    }
    checks.push(CheckResult::bound(
        "psi-int-lipschitz",
        format!("intermediate runs are {}-Lipschitz", fmt_q(&bound)),
        &bound,
        &worst,
        witness,
    ));

    // G(n) order and the shell chain
    let mut ok = true;
    let mut witness = String::new();
    for (&n, gn) in &cons.g {
        ok &= gn.entries.windows(2).all(|w| w[0].0 <= w[1].0);
        let mut targets: Vec<usize> = gn
            .c_points
            .iter()
            .map(|c| cons.order.index_of(c))
            .collect::<Result<_, _>>()?;
        targets.sort_unstable();
        targets.dedup();
        ok &= targets.len() == cons.blocks.c(n)?.len();
        if !ok && witness.is_empty() {
            witness = format!("stage {n}");
        }
    }
    checks.push(CheckResult::new(
        "g-order",
        "G(n) lists C_n bijectively with nondecreasing shell norms",
        format!("{} stages", cons.g.len()),
        witness,
        ok,
    ));

    let mut mismatches = 0usize;
    let mut witness = String::new();
    for (&n, runs) in &cons.tables.phi_int {
        let d_len = cons.order.d_end[n - 1].unwrap();
        let phi = &cons.tables.phi_n[n - 1];
        for x in 0..d_len {
            if runs[0][x] != phi[x] && mismatches == 0 {
                witness = format!("stage {n}, x={x}");
            }
            mismatches += usize::from(runs[0][x] != phi[x]);
        }
    }
    checks.push(CheckResult::new(
        "phi-anchor",
        "phi_{n,0} = phi_n restricted to D_n",
        format!("{mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    // the self-referential truncation identity of the shell runs
    let mut mismatches = 0usize;
    let mut witness = String::new();
    for (&n, runs) in &cons.tables.phi_int {
        let d_n = cons.blocks.d(n)?;
        let d_len = cons.order.d_end[n - 1].unwrap();
        for (l, run) in runs.iter().enumerate() {
            for x in 0..d_len {
                let image = run[x] as usize;
                let radius = cons.sys.restrict(&cons.order.points[image], n)?.sup_norm();
                let cand = d_n.inverse_restriction(
                    &cons.sys.restrict(&cons.order.points[x], n)?.truncate(&radius)?,
                )?;
                let want = cons.order.index_of(cand)?;
                if want != image && mismatches == 0 {
                    witness = format!("stage {n}, (l, x) = ({l}, {x})");
                }
                mismatches += usize::from(want != image);
            }
        }
    }
    checks.push(CheckResult::new(
        "defstep4-closed-form",
        "phi_{n,l}(x) = invert(clamp(r_n(x), ||r_n(phi_{n,l}(x))||))",
        format!("{mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    let mut mismatches = 0usize;
    let mut witness = String::new();
    for (&n, runs) in &cons.tables.phi_int {
        let d_len = cons.order.d_end[n - 1].unwrap();
        for l1 in 0..runs.len() {
            for l2 in 0..runs.len() {
                let lo = l1.min(l2);
                for x in 0..d_len {
                    let lhs = runs[l1][runs[l2][x] as usize];
                    let rhs = runs[lo][x];
                    if lhs != rhs && mismatches == 0 {
                        witness = format!("stage {n}, (l1, l2, x) = ({l1}, {l2}, {x})");
                    }
                    mismatches += usize::from(lhs != rhs);
                }
            }
        }
    }
    checks.push(CheckResult::new(
        "phi-int-commutation",
        "phi_{n,l1} . phi_{n,l2} = phi_{n,min}",
        format!("{mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    let bound = q_int(2) * &lam * &lam + q_int(4) * &lam + q_int(4);
    let mut worst = Q::zero();
    let mut witness = String::new();
    for (&n, runs) in &cons.tables.phi_int {
        for run in runs {
            let rep = table_lipschitz(run, &cons.dist);
            if rep.constant > worst {
                worst = rep.constant;
                witness = format!("stage {n}, pair {:?}", rep.witness);
            }
        }
    }
    checks.push(CheckResult::bound(
        "phi-int-lipschitz",
        format!("shell runs are {}-Lipschitz", fmt_q(&bound)),
        &bound,
        &worst,
        witness,
    ));

    // sandwich of the shell-run radii
    let mut ok = true;
    let mut witness = String::new();
    for (&n, runs) in &cons.tables.phi_int {
        let gn = &cons.g[&n];
        let d_len = cons.order.d_end[n - 1].unwrap();
        for i in 1..=gn.len() {
            let z_norm = q_int(gn.entries[i - 1].0 as i64);
            for x in 0..d_len {
                let image = runs[i][x] as usize;
                let r_image = cons.sys.restrict(&cons.order.points[image], n)?.sup_norm();
                let r_x = cons.sys.restrict(&cons.order.points[x], n)?.sup_norm();
                let lower = r_x.min(&z_norm - Q::one());
                if r_image > z_norm || r_image < lower {
                    ok = false;
                    if witness.is_empty() {
                        witness = format!("stage {n}, (i, x) = ({i}, {x})");
                    }
                }
            }
        }
    }
    checks.push(CheckResult::new(
        "step2-sandwich",
        "||z_i|| >= ||r_n(phi_{n,i}(x))|| >= min(||r_n(x)||, ||z_i|| - 1)",
        "exhaustive",
        witness,
        ok,
    ));
    Ok(())
}

// ---------------------------------------------------------------- global --

fn suite_global(cons: &Construction, checks: &mut Vec<CheckResult>) -> Result<(), Error> {
    let len = cons.order.len();

    let mut ok = cons.order.points[0] == QVec::zero();
    let mut witness = if ok { String::new() } else { "position 1".to_string() };
    for (pos, seg) in cons.order.segments.iter().enumerate() {
        let expected = match *seg {
            SegmentRef::First { .. } => pos < cons.order.m_end[0],
            SegmentRef::Shell { n, .. } => {
                let d = cons.order.d_end[n - 1].unwrap_or(0);
                pos >= cons.order.m_end[n - 1] && pos < d
            }
            SegmentRef::Fresh { n, .. } => {
                let d = cons.order.d_end[n - 2].unwrap_or(0);
                pos >= d && pos < cons.order.m_end[n - 1]
            }
        };
        if !expected {
            ok = false;
            if witness.is_empty() {
                witness = format!("position {}", pos + 1);
            }
        }
    }
    checks.push(CheckResult::new(
        "order-segments",
        "index segments follow #M_n / #D_n boundaries with the origin first",
        format!("{len} points"),
        witness,
        ok,
    ));

    let mut mismatches = 0usize;
    let mut witness = String::new();
    for (i_pos, table) in cons.tables.varphi.iter().enumerate() {
        for (x, &v) in table.iter().enumerate() {
            let bad = if x <= i_pos { v as usize != x } else { v as usize > i_pos };
            if bad && mismatches == 0 {
                witness = format!("i={}, x={x}", i_pos + 1);
            }
            mismatches += usize::from(bad);
        }
    }
    checks.push(CheckResult::new(
        "global-retraction",
        "each global map fixes its prefix and lands inside it",
        format!("{mismatches} violations"),
        witness,
        mismatches == 0,
    ));

    let mut mismatches = 0usize;
    let mut witness = String::new();
    for i1 in 0..len {
        for i2 in i1..len {
            let lo = &cons.tables.varphi[i1];
            let hi = &cons.tables.varphi[i2];
            for x in 0..len {
                let a = lo[hi[x] as usize];
                let b = hi[lo[x] as usize];
                let c = lo[x];
                if (a != c || b != c) && mismatches == 0 {
                    witness = format!("(i1, i2, x) = ({}, {}, {x})", i1 + 1, i2 + 1);
                }
                mismatches += usize::from(a != c) + usize::from(b != c);
            }
        }
    }
    checks.push(CheckResult::new(
        "global-commutation",
        "varphi_{i1} . varphi_{i2} = varphi_min for every index pair",
        format!("{mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    let bound = Q::from_integer(cons.k_global());
    let mut worst = Q::zero();
    let mut witness = String::new();
    for (i, table) in cons.tables.varphi.iter().enumerate() {
        let rep = table_lipschitz(table, &cons.dist);
        if rep.constant > worst {
            worst = rep.constant;
            witness = format!("i={}, pair {:?}", i + 1, rep.witness);
        }
    }
    checks.push(CheckResult::bound(
        "global-lipschitz",
        format!("global retractions are K-Lipschitz, K = {}", fmt_q(&bound)),
        &bound,
        &worst,
        witness,
    ));

    let mut worst = Q::zero();
    let mut witness = String::new();
    for (x, p) in cons.order.points.iter().enumerate() {
        let d = cons.rho(p)?.dist(p);
        if d > worst {
            worst = d;
            witness = format!("x={x}");
        }
    }
    checks.push(CheckResult::bound(
        "rho-displacement",
        "||m - rho(m)|| <= 1",
        &Q::one(),
        &worst,
        witness,
    ));
    Ok(())
}

// ------------------------------------------------------------------- net --

/// Deterministic grid sample of the realized ball of radius `s_{n_cap}`.
fn ambient_grid(cons: &Construction, step: &Q, cap: u64) -> Result<Vec<QVec>, Error> {
    use num_traits::ToPrimitive;
    let radius = cons.sys.s_q(cons.params.n_cap);
    let reach = (&radius / step).floor().to_integer().to_i64().unwrap_or(0).max(0);
    let dim = cons.sys.chain().full_size();
    let per_axis = 2 * reach as u64 + 1;
    let predicted = num_traits::pow(Z::from(per_axis), dim as usize);
    if predicted > Z::from(cap) {
        return Err(Error::CapExceeded {
            what: "ambient grid sample".into(),
            predicted: predicted.to_string(),
            cap,
        });
    }
    let mut out = Vec::new();
    let mut digits = vec![-reach; dim as usize];
    loop {
        out.push(QVec::from_pairs(
            digits
                .iter()
                .enumerate()
                .map(|(i, &k)| (i as u32, Q::from_integer(Z::from(k)) * step)),
        ));
        let mut pos = dim as usize;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if digits[pos] < reach {
                digits[pos] += 1;
                for d in digits.iter_mut().skip(pos + 1) {
                    *d = -reach;
                }
                break;
            }
        }
    }
}

fn min_dist_to(points: &[QVec], x: &QVec) -> Q {
    points
        .iter()
        .map(|p| p.dist(x))
        .min()
        .expect("nonempty point set")
}

fn suite_net(cons: &Construction, params: &VerifyParams, checks: &mut Vec<CheckResult>) -> Result<NetEquivalence, Error> {
    let lam = lambda_q(cons);
    let a = params.a.clone();
    let decomposition = extract_net(cons, &a)?;

    let mut ok = decomposition.cluster_of.iter().all(|&k| k != usize::MAX);
    let mut witness = String::new();
    for (k, members) in decomposition.clusters.iter().enumerate() {
        for &j in members {
            if decomposition.reps[k].dist(&decomposition.rho_set[j]) > a {
                ok = false;
                if witness.is_empty() {
                    witness = format!("cluster {k}, member {j}");
                }
            }
        }
    }
    for k1 in 0..decomposition.reps.len() {
        for k2 in (k1 + 1)..decomposition.reps.len() {
            if decomposition.reps[k1].dist(&decomposition.reps[k2]) <= a {
                ok = false;
                if witness.is_empty() {
                    witness = format!("representatives {k1} and {k2}");
                }
            }
        }
    }
    checks.push(CheckResult::new(
        "cluster-cover",
        "greedy clusters cover the projection set within a, representatives are > a apart",
        format!("{} clusters", decomposition.reps.len()),
        witness,
        ok,
    ));

    let net = perturb(cons, decomposition)?;

    let mut ok = true;
    let mut witness = String::new();
    for p in &net.grid {
        ok &= p.sup_norm() <= crate::q_ratio(3, 4);
    }
    for i in 0..net.grid.len() {
        for j in (i + 1)..net.grid.len() {
            if net.grid[i].dist(&net.grid[j]) < crate::q_ratio(1, 2) {
                ok = false;
                if witness.is_empty() {
                    witness = format!("grid points {i} and {j}");
                }
            }
        }
    }
    checks.push(CheckResult::new(
        "grid-family",
        "separated family: norms <= 3/4, pairwise >= 1/2",
        format!("{} grid points", net.grid.len()),
        witness,
        ok,
    ));

    let separation = &a / q_int(4);
    let mut min_sep: Option<Q> = None;
    let mut witness = String::new();
    for i in 0..net.mu.len() {
        for j in (i + 1)..net.mu.len() {
            let d = net.n_dist.get(i, j);
            if min_sep.as_ref().map_or(true, |m| d < m) {
                min_sep = Some(d.clone());
                witness = format!("net points {i} and {j}");
            }
        }
    }
    let min_sep = min_sep.unwrap_or(separation.clone());
    checks.push(CheckResult::new(
        "net-separation",
        format!("net is (a/4)-separated, a/4 = {}", fmt_q(&separation)),
        format!("min distance {}", fmt_q(&min_sep)),
        witness,
        min_sep >= separation,
    ));

    let grid = ambient_grid(cons, &params.grid_step, params.max_block)?;

    let density_m = q_int(2) * &lam + q_int(2);
    let mut worst = Q::zero();
    let mut witness = String::new();
    for (gi, x) in grid.iter().enumerate() {
        let d = min_dist_to(&cons.order.points, x);
        if d > worst {
            worst = d;
            witness = format!("grid point {gi}");
        }
    }
    checks.push(CheckResult::bound(
        "density-m",
        format!("realized points are {}-dense in the sampled ball", fmt_q(&density_m)),
        &density_m,
        &worst,
        witness,
    ));

    let b = &a + q_int(2) * &lam + q_int(3);
    let density_n = &b + crate::q_ratio(3, 8) * &a;
    let mut worst = Q::zero();
    let mut witness = String::new();
    for (gi, x) in grid.iter().enumerate() {
        let d = min_dist_to(&net.mu, x);
        if d > worst {
            worst = d;
            witness = format!("grid point {gi}");
        }
    }
    checks.push(CheckResult::bound(
        "net-density",
        format!("net is {}-dense in the sampled ball", fmt_q(&density_n)),
        &density_n,
        &worst,
        witness,
    ));

    let displacement = &a + Q::one() + crate::q_ratio(3, 8) * &a;
    checks.push(CheckResult::bound(
        "mu-displacement",
        format!("||mu(m) - m|| <= a + 1 + 3a/8 = {}", fmt_q(&displacement)),
        &displacement,
        &net.max_displacement,
        "",
    ));

    let finite = net.lip_mu.constant.is_positive() && net.lip_mu_inv.constant.is_positive();
    checks.push(CheckResult::new(
        "mu-distortion",
        "bijection onto the net is bi-Lipschitz with finite distortion",
        format!(
            "lip = {}, lip_inv = {}, distortion = {}",
            fmt_q(&net.lip_mu.constant),
            fmt_q(&net.lip_mu_inv.constant),
            fmt_q(&net.distortion)
        ),
        "",
        finite,
    ));

    // conjugation by the bijection: same index tables over the net labels
    let len = cons.order.len();
    let mut mismatches = 0usize;
    let mut witness = String::new();
    for i1 in 0..len {
        for i2 in i1..len {
            let lo = &cons.tables.varphi[i1];
            let hi = &cons.tables.varphi[i2];
            for x in 0..len {
                if lo[hi[x] as usize] != lo[x] && mismatches == 0 {
                    witness = format!("(i1, i2, x) = ({}, {}, {x})", i1 + 1, i2 + 1);
                }
                mismatches += usize::from(lo[hi[x] as usize] != lo[x]);
            }
        }
    }
    checks.push(CheckResult::new(
        "transfer-commutation",
        "transferred retractions commute exactly (conjugation by the bijection)",
        format!("{mismatches} mismatches"),
        witness,
        mismatches == 0,
    ));

    let bound = &net.distortion * Q::from_integer(cons.k_global());
    let mut worst = Q::zero();
    let mut witness = String::new();
    for (i, table) in cons.tables.varphi.iter().enumerate() {
        let rep = table_lipschitz(table, &net.n_dist);
        if rep.constant > worst {
            worst = rep.constant;
            witness = format!("i={}, pair {:?}", i + 1, rep.witness);
        }
    }
    checks.push(CheckResult::bound(
        "transfer-lipschitz",
        format!("transferred retractions are D*K-Lipschitz, D*K = {}", fmt_q(&bound)),
        &bound,
        &worst,
        witness,
    ));

    Ok(net)
}

// ------------------------------------------------------------------ free --

fn spread_indices(len: usize, want: usize) -> Vec<usize> {
    let want = want.clamp(1, len);
    let mut out: Vec<usize> = (1..=want)
        .map(|t| ((2 * t * len + want) / (2 * want)).clamp(1, len))
        .collect();
    out.insert(0, 1);
    out.push(len);
    out.sort_unstable();
    out.dedup();
    out
}

fn suite_free(cons: &Construction, params: &VerifyParams, checks: &mut Vec<CheckResult>) -> Result<FreeReport, Error> {
    let metric = FiniteMetric::new(&cons.order.points, 0)?;
    checks.push(CheckResult::new(
        "metric-axioms",
        "realized space satisfies the metric axioms exactly",
        format!("{} points", metric.len()),
        "",
        true,
    ));

    // elementary molecules against distances, via both exact routes
    let len = metric.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed);
    let mut ok = true;
    let mut witness = String::new();
    let mut checked = 0usize;
    while checked < params.pair_samples {
        let x = (rng.next_u64() % len as u64) as usize;
        let y = (rng.next_u64() % len as u64) as usize;
        if x == y {
            continue;
        }
        checked += 1;
        if x != metric.base {
            let nx = free_norm(&metric, &Molecule::delta(metric.base, x))?.value;
            if nx != *metric.dist.get(x, metric.base) {
                ok = false;
                if witness.is_empty() {
                    witness = format!("x={x}");
                }
            }
        }
        let diff = Molecule::delta(metric.base, x).sub(&Molecule::delta(metric.base, y));
        let nd = free_norm(&metric, &diff)?.value;
        if nd != *metric.dist.get(x, y) {
            ok = false;
            if witness.is_empty() {
                witness = format!("pair ({x}, {y})");
            }
        }
    }
    checks.push(CheckResult::new(
        "free-elementary",
        "point-mass norms equal distances exactly",
        format!("{checked} sampled pairs"),
        witness,
        ok,
    ));

    let plan = SamplePlan {
        deltas: params.molecule_samples / 3,
        pairs: params.molecule_samples / 3,
        randoms: params.molecule_samples - 2 * (params.molecule_samples / 3),
        max_support: params.molecule_support,
        seed: params.seed,
    };
    let molecules = sample_molecules(&metric, &plan);

    // norm axioms on the samples
    let mut ok = true;
    let mut witness = String::new();
    for (mi, m) in molecules.iter().enumerate().take(12) {
        let norm = free_norm(&metric, m)?.value;
        let q = crate::q_ratio(-7, 3);
        let scaled = free_norm(&metric, &m.scale(&q))?.value;
        if scaled != norm.clone() * q.abs() {
            ok = false;
            if witness.is_empty() {
                witness = format!("homogeneity at molecule {mi}");
            }
        }
        if let Some(w) = molecules.get(mi + 1) {
            let lhs = free_norm(&metric, &m.add(w))?.value;
            let rhs = norm + free_norm(&metric, w)?.value;
            if lhs > rhs {
                ok = false;
                if witness.is_empty() {
                    witness = format!("triangle at molecules {mi}, {}", mi + 1);
                }
            }
        }
    }
    checks.push(CheckResult::new(
        "free-norm-axioms",
        "homogeneity and triangle inequality hold exactly on samples",
        "12 sampled molecules",
        witness,
        ok,
    ));

    let indices = spread_indices(cons.order.len(), params.prefix_indices);
    let report = basis_check(&metric, &cons.tables.varphi, &molecules, &indices)?;

    checks.push(CheckResult::new(
        "free-duality",
        "transport optimum equals the dual optimum on every solve",
        format!("{} certified solves", report.solves),
        "",
        true,
    ));

    let k = Q::from_integer(cons.k_global());
    let mut ok = true;
    let mut worst = Q::zero();
    let mut witness = String::new();
    for row in &report.rows {
        let bound = &k * &row.norm_m;
        if row.norm_pm > bound {
            ok = false;
            if witness.is_empty() {
                witness = format!("molecule {}, index {}", row.molecule, row.index);
            }
        }
        if !row.norm_m.is_zero() {
            let ratio = &row.norm_pm / &row.norm_m;
            if ratio > worst {
                worst = ratio;
            }
        }
    }
    checks.push(CheckResult::new(
        "free-projection-bound",
        format!("||P_i m|| <= K ||m||, K = {}", fmt_q(&k)),
        format!(
            "max ratio {} over {} molecules x {} indices",
            fmt_q(&worst),
            molecules.len(),
            indices.len()
        ),
        witness,
        ok,
    ));

    checks.push(CheckResult::new(
        "free-commutation",
        "P_{i1} P_{i2} = P_min on sample molecules",
        format!("{} pairs", report.commutation_pairs),
        "",
        true,
    ));

    checks.push(CheckResult::new(
        "free-residual",
        "residual at the top index is exactly zero",
        fmt_q(&report.top_residual),
        "",
        report.top_residual.is_zero(),
    ));

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_are_unique() {
        let mut names = SUITES.to_vec();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), SUITES.len());
        assert!(SuiteSelection::parse(&["all".into()]).is_ok());
        assert!(SuiteSelection::parse(&["bogus".into()]).is_err());
        assert!(SuiteSelection::none().is_empty());
    }

    #[test]
    fn spread_indices_cover_the_ends() {
        let idx = spread_indices(81, 10);
        assert_eq!(*idx.first().unwrap(), 1);
        assert_eq!(*idx.last().unwrap(), 81);
        assert!(idx.len() >= 10);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }
}
