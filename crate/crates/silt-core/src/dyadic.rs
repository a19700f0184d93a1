//! Dyadic strand decomposition of a walk and its exact structural checks.
//!
//! A trajectory of `2^N` steps is split recursively at midpoints. Splitting a
//! strand `S_0..S_{2m}` at `S_m` produces two re-rooted children
//!
//! ```text
//! child1[k] = S_m - S_{m-k}      (first half, reversed)
//! child2[k] = S_m - S_{m+k}      (second half)         k = 0..=m
//! ```
//!
//! both started at the origin, with the midpoint `S_m` recorded as the
//! anchor. Three facts about one split are exact for every path and are
//! verified here in integer arithmetic:
//!
//! * midpoint identity: `l_parent(x) = l_child1(a - x) + l_child2(a - x)
//!   - [x == a]` where `a` is the anchor;
//! * level-set inclusion: `|D_parent(z)| <= |D_child1((1-d)z)| +
//!   |D_child2((1-d)z)| + |C(dz)|` where `C(t)` is the set of sites whose
//!   local time exceeds `t` in both children;
//! * mass bound: `sum_{x: l_child1(x) > dz} l_child2(x) >= dz * |C(dz)|`.
//!
//! Iterating the split down to one-step strands also dominates the truncated
//! pair count of the walk by the cross terms of the tree (`legall_decomposition`).

use crate::field::{check_jensen, LocalTimeField};
use crate::walk::{Site, Trajectory};
use crate::{Result, SiltError};

/// A re-rooted sub-walk of the decomposition tree.
#[derive(Clone, Debug)]
pub struct Strand {
    level: u32,
    /// 1-based position within its level; children of strand `i` are
    /// `(2i - 1, 2i)` one level down.
    index: u64,
    traj: Trajectory,
    /// Midpoint of the split that produced this strand, in the parent frame.
    /// For a root strand this is the walk's starting site.
    anchor: Site,
}

impl Strand {
    /// Wrap a full trajectory as the root of a decomposition.
    pub fn root(traj: Trajectory) -> Strand {
        let anchor = *traj.start();
        Strand { level: 0, index: 1, traj, anchor }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn anchor(&self) -> &Site {
        &self.anchor
    }

    pub fn local_times(&self) -> LocalTimeField {
        LocalTimeField::from_trajectory(&self.traj)
    }
}

/// Split a strand of `2m` steps at its midpoint into the two re-rooted
/// children described in the module docs.
pub fn split(parent: &Strand) -> Result<(Strand, Strand)> {
    let steps = parent.traj.steps();
    if steps == 0 || steps % 2 != 0 {
        return Err(SiltError::OddStrand(steps));
    }
    let m = steps / 2;
    let sites = parent.traj.sites();
    let anchor = sites[m];
    let dim = parent.traj.dim();
    let mut c1 = Vec::with_capacity(m + 1);
    let mut c2 = Vec::with_capacity(m + 1);
    for k in 0..=m {
        c1.push(sites[m - k].reflect_through(&anchor));
        c2.push(sites[m + k].reflect_through(&anchor));
    }
    let child1 = Strand {
        level: parent.level + 1,
        index: 2 * parent.index - 1,
        traj: Trajectory::from_sites_trusted(dim, c1),
        anchor,
    };
    let child2 = Strand {
        level: parent.level + 1,
        index: 2 * parent.index,
        traj: Trajectory::from_sites_trusted(dim, c2),
        anchor,
    };
    Ok((child1, child2))
}

/// Full decomposition of a `2^N`-step walk: level `l` holds `2^l` strands of
/// `2^(N-l)` steps each, down to the one-step strands at level `N`.
#[derive(Clone, Debug)]
pub struct StrandTree {
    depth: u32,
    levels: Vec<Vec<Strand>>,
}

impl StrandTree {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn levels(&self) -> &[Vec<Strand>] {
        &self.levels
    }

    pub fn level(&self, l: u32) -> &[Strand] {
        &self.levels[l as usize]
    }

    pub fn root(&self) -> &Strand {
        &self.levels[0][0]
    }
}

/// Build the full strand tree of a trajectory of `2^N` steps, `N >= 0`.
pub fn build_tree(traj: Trajectory) -> Result<StrandTree> {
    let n = traj.steps();
    if n == 0 || !n.is_power_of_two() {
        return Err(SiltError::NotDyadic(n));
    }
    let depth = n.trailing_zeros();
    let mut levels = Vec::with_capacity(depth as usize + 1);
    levels.push(vec![Strand::root(traj)]);
    for l in 0..depth {
        let prev = &levels[l as usize];
        let mut next = Vec::with_capacity(prev.len() * 2);
        for parent in prev {
            let (a, b) = split(parent)?;
            next.push(a);
            next.push(b);
        }
        levels.push(next);
    }
    Ok(StrandTree { depth, levels })
}

/// Largest absolute deviation from the midpoint identity over the parent's
/// support. Zero for every valid split; any positive value is a bug.
pub fn verify_midpoint_identity(parent: &Strand, child1: &Strand, child2: &Strand) -> u64 {
    let pf = parent.local_times();
    let f1 = child1.local_times();
    let f2 = child2.local_times();
    midpoint_residual(&pf, &f1, &f2, child1.anchor())
}

fn midpoint_residual(
    parent: &LocalTimeField,
    f1: &LocalTimeField,
    f2: &LocalTimeField,
    anchor: &Site,
) -> u64 {
    let mut worst = 0u64;
    for (x, lp) in parent.iter() {
        let y = x.reflect_through(anchor);
        let ind = (x == anchor) as i64;
        let r = lp as i64 - f1.visits(&y) as i64 - f2.visits(&y) as i64 + ind;
        worst = worst.max(r.unsigned_abs());
    }
    worst
}

/// Outcome of the level-set inclusion and mass checks at one level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InclusionCheck {
    pub level: u32,
    pub nodes: u64,
    /// Nodes where `|D_parent(z)|` exceeded the three-set bound.
    pub card_violations: u64,
    /// Nodes where the mass bound `l_even(D_odd(dz)) >= dz * |C(dz)|` failed.
    pub mass_violations: u64,
}

fn validate_combo(z: f64, delta: f64) -> Result<()> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(SiltError::InvalidParameter(format!("level threshold z must be > 0, got {z}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SiltError::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Check the inclusion and mass bounds for every parent at level `l`
/// (`l < depth - 1`, so both children are strands of at least two steps).
pub fn verify_level_inclusion(tree: &StrandTree, l: u32, z: f64, delta: f64) -> Result<InclusionCheck> {
    validate_combo(z, delta)?;
    if l + 1 >= tree.depth {
        return Err(SiltError::InvalidParameter(format!(
            "inclusion checks need level < depth - 1, got level {l} of depth {}",
            tree.depth
        )));
    }
    let mut check = InclusionCheck { level: l, nodes: 0, card_violations: 0, mass_violations: 0 };
    for (i, parent) in tree.level(l).iter().enumerate() {
        let c1 = &tree.level(l + 1)[2 * i];
        let c2 = &tree.level(l + 1)[2 * i + 1];
        let pf = parent.local_times();
        let f1 = c1.local_times();
        let f2 = c2.local_times();
        let (card_ok, mass_ok) = node_inclusion_ok(&pf, &f1, &f2, z, delta);
        check.nodes += 1;
        check.card_violations += !card_ok as u64;
        check.mass_violations += !mass_ok as u64;
    }
    Ok(check)
}

fn node_inclusion_ok(
    parent: &LocalTimeField,
    f1: &LocalTimeField,
    f2: &LocalTimeField,
    z: f64,
    delta: f64,
) -> (bool, bool) {
    let keep = (1.0 - delta) * z;
    let low = delta * z;
    let dp = parent.level_count(z);
    let d1 = f1.level_count(keep);
    let d2 = f2.level_count(keep);
    let mut c = 0u64;
    let mut mass = 0u64;
    for (y, a) in f1.iter() {
        if a as f64 > low {
            let b = f2.visits(y);
            mass += b as u64;
            if b as f64 > low {
                c += 1;
            }
        }
    }
    let card_ok = dp <= d1 + d2 + c;
    let mass_ok = mass as f64 >= low * c as f64;
    (card_ok, mass_ok)
}

/// Truncated pair counts of the walk against the cross terms of its tree.
#[derive(Clone, Debug)]
pub struct DecompReport {
    pub threshold: u32,
    /// Pairs `k < k'` with `S_k = S_k' = x`, over sites with `l_n(x) <= threshold`.
    pub z0: u64,
    /// `j[l - 1][k - 1]` is the cross term of sibling pair `k` at level `l`,
    /// `sum_x [l_odd(x) <= threshold] * l_odd(x) * l_even(x)`.
    pub j: Vec<Vec<u64>>,
    pub j_total: u64,
    /// `z0 <= j_total`; exact for every trajectory and threshold.
    pub z0_dominated: bool,
    /// `sum_{x: l(x) <= threshold} l(x)^2 <= (n + 1) + 2 * z0`; exact.
    pub band_second_moment_ok: bool,
}

/// Compute the truncated pair count of the root and the cross terms of every
/// sibling pair, and evaluate the two exact domination checks.
pub fn legall_decomposition(tree: &StrandTree, threshold: u32) -> DecompReport {
    let root_field = tree.root().local_times();
    let mut j = Vec::with_capacity(tree.depth as usize);
    let mut j_total = 0u64;
    for l in 1..=tree.depth {
        let strands = tree.level(l);
        let mut row = Vec::with_capacity(strands.len() / 2);
        for pair in strands.chunks_exact(2) {
            let f1 = pair[0].local_times();
            let f2 = pair[1].local_times();
            let v = cross_term(&f1, &f2, threshold);
            j_total += v;
            row.push(v);
        }
        j.push(row);
    }
    finish_report(&root_field, threshold, j, j_total)
}

fn cross_term(f1: &LocalTimeField, f2: &LocalTimeField, threshold: u32) -> u64 {
    let mut v = 0u64;
    for (y, a) in f1.iter() {
        if a <= threshold {
            v += a as u64 * f2.visits(y) as u64;
        }
    }
    v
}

fn finish_report(
    root_field: &LocalTimeField,
    threshold: u32,
    j: Vec<Vec<u64>>,
    j_total: u64,
) -> DecompReport {
    let mut z0 = 0u64;
    let mut band_sq = 0u64;
    for (_, l) in root_field.iter() {
        if l <= threshold {
            let l = l as u64;
            z0 += l * (l - 1) / 2;
            band_sq += l * l;
        }
    }
    let mass = root_field.horizon() as u64 + 1;
    DecompReport {
        threshold,
        z0,
        j,
        j_total,
        z0_dominated: z0 <= j_total,
        band_second_moment_ok: band_sq <= mass + 2 * z0,
    }
}

/// Aggregate of one (z, delta) combination over all checked levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComboTotals {
    pub z: f64,
    pub delta: f64,
    pub nodes: u64,
    pub card_violations: u64,
    pub mass_violations: u64,
}

/// Everything the exact-identity suite needs from one trajectory, computed in
/// a single pass over the tree (each strand's field is built once).
#[derive(Clone, Debug)]
pub struct TreeAudit {
    pub depth: u32,
    /// Max midpoint-identity residual over all internal nodes; zero iff exact.
    pub max_residual: u64,
    pub combos: Vec<ComboTotals>,
    pub reports: Vec<DecompReport>,
    pub jensen_ok: bool,
}

/// Run the full exact-check battery on one trajectory: midpoint identity at
/// every internal node, inclusion and mass bounds for every `(z, delta)` at
/// every level `l < N - 1`, pair-count domination for every threshold, and
/// the Cauchy-Schwarz bound on the root.
pub fn audit_tree(traj: Trajectory, combos: &[(f64, f64)], thresholds: &[u32]) -> Result<TreeAudit> {
    for &(z, delta) in combos {
        validate_combo(z, delta)?;
    }
    let tree = build_tree(traj)?;
    let depth = tree.depth;
    let fields: Vec<Vec<LocalTimeField>> = tree
        .levels
        .iter()
        .map(|lvl| lvl.iter().map(Strand::local_times).collect())
        .collect();

    let mut max_residual = 0u64;
    let mut totals: Vec<ComboTotals> = combos
        .iter()
        .map(|&(z, delta)| ComboTotals { z, delta, nodes: 0, card_violations: 0, mass_violations: 0 })
        .collect();
    let mut j_by_thr: Vec<(u64, Vec<Vec<u64>>)> =
        thresholds.iter().map(|_| (0u64, Vec::new())).collect();

    for l in 0..depth {
        for t in j_by_thr.iter_mut() {
            t.1.push(Vec::new());
        }
        for (i, pf) in fields[l as usize].iter().enumerate() {
            let f1 = &fields[l as usize + 1][2 * i];
            let f2 = &fields[l as usize + 1][2 * i + 1];
            let anchor = tree.level(l + 1)[2 * i].anchor();
            max_residual = max_residual.max(midpoint_residual(pf, f1, f2, anchor));
            if l + 1 < depth {
                for (combo, t) in combos.iter().zip(totals.iter_mut()) {
                    let (card_ok, mass_ok) = node_inclusion_ok(pf, f1, f2, combo.0, combo.1);
                    t.nodes += 1;
                    t.card_violations += !card_ok as u64;
                    t.mass_violations += !mass_ok as u64;
                }
            }
            for (thr, acc) in thresholds.iter().zip(j_by_thr.iter_mut()) {
                let v = cross_term(f1, f2, *thr);
                acc.0 += v;
                acc.1.last_mut().expect("row pushed above").push(v);
            }
        }
    }

    let root_field = &fields[0][0];
    let reports = thresholds
        .iter()
        .zip(j_by_thr)
        .map(|(&thr, (j_total, j))| finish_report(root_field, thr, j, j_total))
        .collect();

    Ok(TreeAudit {
        depth,
        max_residual,
        combos: totals,
        reports,
        jensen_ok: check_jensen(&root_field.summary()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::walk::simulate_walk;

    fn strand_coords(s: &Strand) -> Vec<i64> {
        s.trajectory().sites().iter().map(|x| x.coord(0)).collect()
    }

    /// Splitting 0,1,2,3,4: backward child walks 0,1,2; forward child walks
    /// 0,-1,-2; the anchor is the midpoint site 2.
    #[test]
    fn split_hand_example_monotone_path() {
        let root = Strand::root(Trajectory::from_coords_1d(&[0, 1, 2, 3, 4]).unwrap());
        let (c1, c2) = split(&root).unwrap();
        assert_eq!(strand_coords(&c1), vec![0, 1, 2]);
        assert_eq!(strand_coords(&c2), vec![0, -1, -2]);
        assert_eq!(c1.anchor().coord(0), 2);
        assert_eq!((c1.index(), c2.index()), (1, 2));
    }

    #[test]
    fn split_hand_example_zigzag_path() {
        let root = Strand::root(Trajectory::from_coords_1d(&[0, 1, 0, 1, 0]).unwrap());
        let (c1, c2) = split(&root).unwrap();
        assert_eq!(strand_coords(&c1), vec![0, -1, 0]);
        assert_eq!(strand_coords(&c2), vec![0, -1, 0]);
        assert_eq!(c1.anchor().coord(0), 0);
    }

    #[test]
    fn split_rejects_odd_strands() {
        let root = Strand::root(Trajectory::from_coords_1d(&[0, 1, 2]).unwrap());
        let (c1, _) = split(&root).unwrap();
        assert!(matches!(split(&c1), Err(SiltError::OddStrand(1))));
    }

    #[test]
    fn tree_shape_minimal_and_generic() {
        let t = build_tree(Trajectory::from_coords_1d(&[0, 1, 0]).unwrap()).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.level(0).len(), 1);
        assert_eq!(t.level(1).len(), 2);
        assert_eq!(strand_coords(&t.level(1)[0]), vec![0, -1]);
        assert_eq!(strand_coords(&t.level(1)[1]), vec![0, -1]);

        let walk = simulate_walk(3, 1 << 6, RngStream::new(2, 0)).unwrap();
        let t = build_tree(walk).unwrap();
        assert_eq!(t.depth(), 6);
        for l in 0..=6u32 {
            assert_eq!(t.level(l).len(), 1 << l);
            for s in t.level(l) {
                assert_eq!(s.trajectory().steps(), 1 << (6 - l));
                assert_eq!(s.trajectory().start().coords(), [0, 0, 0]);
            }
        }
    }

    #[test]
    fn tree_rejects_non_dyadic_lengths() {
        for n in [0usize, 3, 5, 6, 7, 12] {
            let w = simulate_walk(1, n, RngStream::new(4, n as u64)).unwrap();
            assert!(matches!(build_tree(w), Err(SiltError::NotDyadic(_))), "n={n}");
        }
    }

    #[test]
    fn midpoint_identity_zigzag_hand_check() {
        let root = Strand::root(Trajectory::from_coords_1d(&[0, 1, 0, 1, 0]).unwrap());
        let (c1, c2) = split(&root).unwrap();
        // l(0) = 3 = 2 + 2 - 1 at the anchor; l(1) = 2 = 1 + 1 off it.
        assert_eq!(verify_midpoint_identity(&root, &c1, &c2), 0);
    }

    #[test]
    fn midpoint_identity_detects_mismatched_children() {
        let root = Strand::root(Trajectory::from_coords_1d(&[0, 1, 0, 1, 0]).unwrap());
        let (c1, _) = split(&root).unwrap();
        let bogus = Strand::root(Trajectory::from_coords_1d(&[0, 1, 2]).unwrap());
        assert!(verify_midpoint_identity(&root, &c1, &bogus) > 0);
    }

    #[test]
    fn midpoint_identity_holds_on_random_trees() {
        for (d, seed) in [(1usize, 10u64), (2, 11), (3, 12), (5, 13)] {
            let w = simulate_walk(d, 1 << 7, RngStream::new(seed, 0)).unwrap();
            let tree = build_tree(w).unwrap();
            for l in 0..tree.depth() {
                for (i, parent) in tree.level(l).iter().enumerate() {
                    let c1 = &tree.level(l + 1)[2 * i];
                    let c2 = &tree.level(l + 1)[2 * i + 1];
                    assert_eq!(verify_midpoint_identity(parent, c1, c2), 0, "d={d} l={l} i={i}");
                }
            }
        }
    }

    #[test]
    fn inclusion_checks_hold_on_random_trees() {
        let combos = [(2.0, 0.1), (2.0, 0.5), (4.0, 0.25), (8.0, 0.5)];
        for seed in 0..8u64 {
            let w = simulate_walk(2, 1 << 8, RngStream::new(100 + seed, 0)).unwrap();
            let tree = build_tree(w).unwrap();
            for l in 0..tree.depth() - 1 {
                for &(z, delta) in &combos {
                    let c = verify_level_inclusion(&tree, l, z, delta).unwrap();
                    assert_eq!(c.card_violations, 0, "seed={seed} l={l} z={z} delta={delta}");
                    assert_eq!(c.mass_violations, 0, "seed={seed} l={l} z={z} delta={delta}");
                }
            }
        }
    }

    #[test]
    fn inclusion_rejects_bad_parameters() {
        let w = simulate_walk(1, 16, RngStream::new(1, 0)).unwrap();
        let tree = build_tree(w).unwrap();
        assert!(verify_level_inclusion(&tree, 0, 0.0, 0.5).is_err());
        assert!(verify_level_inclusion(&tree, 0, 2.0, 0.0).is_err());
        assert!(verify_level_inclusion(&tree, 0, 2.0, 1.0).is_err());
        assert!(verify_level_inclusion(&tree, 3, 2.0, 0.5).is_err(), "level too deep");
    }

    /// Hand-computed pair counts for 0,1,0,1,0 with a generous threshold:
    /// z0 = C(3,2) + C(2,2) = 4, the level-1 cross term is 5 and the two
    /// level-2 cross terms are 2 each.
    #[test]
    fn legall_hand_example() {
        let tree = build_tree(Trajectory::from_coords_1d(&[0, 1, 0, 1, 0]).unwrap()).unwrap();
        let rep = legall_decomposition(&tree, 10);
        assert_eq!(rep.z0, 4);
        assert_eq!(rep.j, vec![vec![5], vec![2, 2]]);
        assert_eq!(rep.j_total, 9);
        assert!(rep.z0_dominated);
        assert!(rep.band_second_moment_ok);
    }

    #[test]
    fn legall_threshold_restricts_pairs() {
        let tree = build_tree(Trajectory::from_coords_1d(&[0, 1, 0, 1, 0]).unwrap()).unwrap();
        // threshold 2 excludes the origin (3 visits): only the pair at site 1 stays
        let rep = legall_decomposition(&tree, 2);
        assert_eq!(rep.z0, 1);
        assert!(rep.z0_dominated);
        let rep0 = legall_decomposition(&tree, 0);
        assert_eq!(rep0.z0, 0);
        assert!(rep0.z0_dominated);
    }

    #[test]
    fn legall_domination_on_random_trees() {
        for seed in 0..6u64 {
            for d in [1usize, 3] {
                let w = simulate_walk(d, 1 << 8, RngStream::new(300 + seed, 0)).unwrap();
                let tree = build_tree(w).unwrap();
                for thr in [2u32, 8, 64, u32::MAX] {
                    let rep = legall_decomposition(&tree, thr);
                    assert!(rep.z0_dominated, "d={d} seed={seed} thr={thr}");
                    assert!(rep.band_second_moment_ok, "d={d} seed={seed} thr={thr}");
                }
            }
        }
    }

    #[test]
    fn audit_matches_itemized_checks() {
        let w = simulate_walk(3, 1 << 7, RngStream::new(77, 0)).unwrap();
        let audit = audit_tree(w.clone(), &[(2.0, 0.5), (4.0, 0.1)], &[2, 8]).unwrap();
        assert_eq!(audit.depth, 7);
        assert_eq!(audit.max_residual, 0);
        assert!(audit.jensen_ok);
        for t in &audit.combos {
            assert_eq!(t.card_violations, 0);
            assert_eq!(t.mass_violations, 0);
            // 2^l nodes at each checked level l = 0..depth-2
            assert_eq!(t.nodes, (1 << (audit.depth - 1)) - 1);
        }
        let tree = build_tree(w).unwrap();
        for (rep, thr) in audit.reports.iter().zip([2u32, 8]) {
            let direct = legall_decomposition(&tree, thr);
            assert_eq!(rep.z0, direct.z0);
            assert_eq!(rep.j, direct.j);
            assert_eq!(rep.j_total, direct.j_total);
        }
    }
}
