//! Quadrant-partitioned "Tetris" rearrangement planning.
//!
//! A plan is a sequence of parallel AOD steps of two kinds: horizontal
//! sorting within one picked-up row, and a vertical shift of a picked-up
//! row into a target row (every picked atom moves within its own column by
//! the same displacement). Targets are filled row by row: a donor row is
//! sorted so a batch of its atoms aligns with the missing target columns,
//! then the batch is shifted into place.

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Occupancy};
use crate::rng::SeededRng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

/// Default target block edge per quadrant (38×38 ≈ the 1,445-site block).
pub const TARGET_EDGE: usize = 38;

/// One quadrant (or, for tests, an arbitrary rectangular region) with local
/// coordinates increasing away from the target corner.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Quadrant {
    /// (site index, local row, local col) for every member site.
    pub members: Vec<(usize, usize, usize)>,
    /// Site indices of the target block.
    pub targets: Vec<usize>,
    /// Overlap margin with neighboring quadrants, µm.
    pub overlap_um: f64,
}

/// Split the array into four quadrants by coordinate sign, each inflated by
/// `overlap_um`, with a `TARGET_EDGE`² target block in the corner nearest
/// the array center.
pub fn partition_quadrants(geometry: &ArrayGeometry, overlap_um: f64) -> Result<[Quadrant; 4]> {
    if overlap_um < 0.0 {
        return Err(Error::domain("overlap must be nonnegative"));
    }
    let signs = [(1.0f64, 1.0f64), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)];
    let mut out = Vec::with_capacity(4);
    for (sx, sy) in signs {
        let mut members = Vec::new();
        let mut targets = Vec::new();
        for (i, s) in geometry.sites().iter().enumerate() {
            if sx * s.x > -overlap_um && sy * s.y > -overlap_um {
                // local indices count outward from the array center; sites
                // borrowed from a neighbor via the overlap margin sit at
                // negative raw indices and are shifted into the grid
                let raw_c = if sx > 0.0 { s.col } else { -1 - s.col };
                let raw_r = if sy > 0.0 { s.row } else { -1 - s.row };
                let pad = (overlap_um / geometry.spacing).ceil() as i32;
                let (lr, lc) = (raw_r + pad, raw_c + pad);
                debug_assert!(lr >= 0 && lc >= 0);
                members.push((i, lr as usize, lc as usize));
                if raw_r >= 0
                    && raw_c >= 0
                    && (raw_r as usize) < TARGET_EDGE
                    && (raw_c as usize) < TARGET_EDGE
                {
                    targets.push(i);
                }
            }
        }
        out.push(Quadrant { members, targets, overlap_um });
    }
    Ok(out.try_into().unwrap())
}

impl Quadrant {
    /// A quadrant spanning an entire rectangular geometry with a
    /// `block_rows`×`block_cols` target block in the low corner
    /// (small-instance testing helper).
    pub fn from_rect_block(
        geometry: &ArrayGeometry,
        block_rows: usize,
        block_cols: usize,
    ) -> Result<Self> {
        let min_row = geometry
            .sites()
            .iter()
            .map(|s| s.row)
            .min()
            .ok_or_else(|| Error::domain("empty geometry"))?;
        let min_col = geometry.sites().iter().map(|s| s.col).min().unwrap();
        let mut members = Vec::new();
        let mut targets = Vec::new();
        for (i, s) in geometry.sites().iter().enumerate() {
            let lr = (s.row - min_row) as usize;
            let lc = (s.col - min_col) as usize;
            members.push((i, lr, lc));
            if lr < block_rows && lc < block_cols {
                targets.push(i);
            }
        }
        Ok(Quadrant { members, targets, overlap_um: 0.0 })
    }

    pub fn from_rect(geometry: &ArrayGeometry, target_edge: usize) -> Result<Self> {
        Self::from_rect_block(geometry, target_edge, target_edge)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum StepKind {
    /// Horizontal rearrangement within one picked-up local row.
    RowSort { row: usize },
    /// Vertical shift of a picked-up row: every atom moves within its own
    /// column from `src_row` to `dst_row`.
    ColumnCompress { src_row: usize, dst_row: usize },
}

/// One parallel AOD step.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MoveStep {
    pub kind: StepKind,
    /// (source site index, destination site index); sources are distinct,
    /// destinations are distinct, and trajectories do not cross.
    pub moves: Vec<(usize, usize)>,
    /// Longest single-trajectory distance in the step, µm.
    pub longest_um: f64,
    pub duration_us: f64,
}

/// Per-step durations for planning (decoupled from the transport simulator).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct StepTiming {
    pub move_us: f64,
    pub pickup_dropoff_us: f64,
    pub split_merge_us: f64,
}

impl Default for StepTiming {
    fn default() -> Self {
        StepTiming { move_us: 600.0, pickup_dropoff_us: 200.0, split_merge_us: 200.0 }
    }
}

impl StepTiming {
    pub fn step_duration_us(&self) -> f64 {
        self.move_us + self.pickup_dropoff_us + self.split_merge_us
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RearrangementPlan {
    pub steps: Vec<MoveStep>,
    /// Targets left unfilled for lack of atoms.
    pub deficit: usize,
    pub n_targets: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanStats {
    pub n_steps: usize,
    pub mean_parallel_atoms: f64,
    pub mean_longest_um: f64,
    pub total_duration_ms: f64,
    /// Histogram of per-step longest distances (bin width = one lattice
    /// spacing), as (µm, count).
    pub longest_hist: Vec<(f64, usize)>,
}

impl RearrangementPlan {
    pub fn stats(&self, spacing_um: f64) -> PlanStats {
        let n = self.steps.len();
        let mean_parallel =
            self.steps.iter().map(|s| s.moves.len() as f64).sum::<f64>() / n.max(1) as f64;
        let mean_longest = self.steps.iter().map(|s| s.longest_um).sum::<f64>() / n.max(1) as f64;
        let mut hist: HashMap<i64, usize> = HashMap::new();
        for s in &self.steps {
            *hist.entry((s.longest_um / spacing_um).round() as i64).or_default() += 1;
        }
        let mut longest_hist: Vec<(f64, usize)> =
            hist.into_iter().map(|(k, v)| (k as f64 * spacing_um, v)).collect();
        longest_hist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        PlanStats {
            n_steps: n,
            mean_parallel_atoms: mean_parallel,
            mean_longest_um: mean_longest,
            total_duration_ms: self.steps.iter().map(|s| s.duration_us).sum::<f64>() * 1e-3,
            longest_hist,
        }
    }

    /// Line-oriented text form:
    /// `R <row> <duration_us> src>dst …` / `C <src_row> <dst_row> <duration_us> src>dst …`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            match s.kind {
                StepKind::RowSort { row } => out.push_str(&format!("R {row} {}", s.duration_us)),
                StepKind::ColumnCompress { src_row, dst_row } => {
                    out.push_str(&format!("C {src_row} {dst_row} {}", s.duration_us))
                }
            }
            for &(a, b) in &s.moves {
                out.push_str(&format!(" {a}>{b}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parse the text form; `longest_um` is recomputed from the geometry.
    pub fn from_text(text: &str, geometry: &ArrayGeometry, n_targets: usize) -> Result<Self> {
        let mut steps = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let bad = || Error::domain(format!("bad plan line {}", ln + 1));
            let kind = match it.next().ok_or_else(bad)? {
                "R" => {
                    let row = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                    StepKind::RowSort { row }
                }
                "C" => {
                    let src_row = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                    let dst_row = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                    StepKind::ColumnCompress { src_row, dst_row }
                }
                _ => return Err(bad()),
            };
            let duration_us: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let mut moves = Vec::new();
            let mut longest = 0.0f64;
            for tok in it {
                let (a, b) = tok.split_once('>').ok_or_else(bad)?;
                let (a, b): (usize, usize) =
                    (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                if a >= geometry.n_sites() || b >= geometry.n_sites() {
                    return Err(bad());
                }
                let (sa, sb) = (geometry.sites()[a], geometry.sites()[b]);
                longest = longest.max((sa.x - sb.x).hypot(sa.y - sb.y));
                moves.push((a, b));
            }
            steps.push(MoveStep { kind, moves, longest_um: longest, duration_us });
        }
        Ok(RearrangementPlan { steps, deficit: 0, n_targets })
    }
}

/// Pick `|atoms|` destination columns out of `dests` (both sorted,
/// |atoms| ≤ |dests|) minimizing the order-preserving total travel.
fn choose_dest_subset(atoms: &[usize], dests: &[usize]) -> Vec<usize> {
    let (k, n) = (atoms.len(), dests.len());
    debug_assert!(k <= n);
    let inf = f64::INFINITY;
    let mut dp = vec![vec![inf; n + 1]; k + 1];
    let mut took = vec![vec![false; n + 1]; k + 1];
    for j in 0..=n {
        dp[0][j] = 0.0;
    }
    for i in 1..=k {
        for j in i..=n {
            let skip = if j > i { dp[i][j - 1] } else { inf };
            let matched = dp[i - 1][j - 1] + (atoms[i - 1] as f64 - dests[j - 1] as f64).abs();
            if matched <= skip {
                dp[i][j] = matched;
                took[i][j] = true;
            } else {
                dp[i][j] = skip;
            }
        }
    }
    let mut chosen = Vec::with_capacity(k);
    let (mut i, mut j) = (k, n);
    while i > 0 {
        if took[i][j] {
            chosen.push(dests[j - 1]);
            i -= 1;
        }
        j -= 1;
    }
    chosen.reverse();
    chosen
}

/// Mark which of `atoms` serve the `dests` (both sorted, |dests| ≤ |atoms|)
/// in the minimum-travel order-preserving matching.
fn serving_flags(atoms: &[usize], dests: &[usize]) -> Vec<bool> {
    let (k, m) = (atoms.len(), dests.len());
    debug_assert!(m <= k);
    let inf = f64::INFINITY;
    let mut dp = vec![vec![inf; m + 1]; k + 1];
    let mut took = vec![vec![false; m + 1]; k + 1];
    for row in dp.iter_mut() {
        row[0] = 0.0;
    }
    for i in 1..=k {
        for j in 1..=m.min(i) {
            let skip = dp[i - 1][j];
            let matched = dp[i - 1][j - 1] + (atoms[i - 1] as f64 - dests[j - 1] as f64).abs();
            if matched <= skip {
                dp[i][j] = matched;
                took[i][j] = true;
            } else {
                dp[i][j] = skip;
            }
        }
    }
    let mut flags = vec![false; k];
    let (mut i, mut j) = (k, m);
    while j > 0 {
        if took[i][j] {
            flags[i - 1] = true;
            j -= 1;
        }
        i -= 1;
    }
    flags
}

struct QuadGrid {
    by_rc: HashMap<(usize, usize), usize>,
    row_cols: HashMap<usize, Vec<usize>>,
    tcells: HashSet<(usize, usize)>,
    target_rows: Vec<usize>,
    target_cols_by_row: HashMap<usize, Vec<usize>>,
}

impl QuadGrid {
    fn new(quadrant: &Quadrant) -> Self {
        let by_rc: HashMap<(usize, usize), usize> =
            quadrant.members.iter().map(|&(i, r, c)| ((r, c), i)).collect();
        let idx_rc: HashMap<usize, (usize, usize)> =
            quadrant.members.iter().map(|&(i, r, c)| (i, (r, c))).collect();
        let mut row_cols: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(_, r, c) in &quadrant.members {
            row_cols.entry(r).or_default().push(c);
        }
        for cols in row_cols.values_mut() {
            cols.sort_unstable();
        }
        let tcells: HashSet<(usize, usize)> = quadrant.targets.iter().map(|t| idx_rc[t]).collect();
        let mut target_cols_by_row: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(r, c) in &tcells {
            target_cols_by_row.entry(r).or_default().push(c);
        }
        for cols in target_cols_by_row.values_mut() {
            cols.sort_unstable();
        }
        let mut target_rows: Vec<usize> = target_cols_by_row.keys().copied().collect();
        target_rows.sort_unstable();
        QuadGrid { by_rc, row_cols, tcells, target_rows, target_cols_by_row }
    }
}

/// Build a rearrangement plan: target rows are filled outermost first. Each
/// row's own atoms are first compacted onto its target columns with one
/// horizontal sort, then the remaining gaps are imported from other rows:
/// the donor row is sorted so a batch of its atoms aligns with the missing
/// columns and the batch is shifted in vertically. Atoms of not-yet-filled
/// rows are all movable; once a row is filled its target cells are final.
pub fn tetris_plan(
    occupancy: &Occupancy,
    geometry: &ArrayGeometry,
    quadrant: &Quadrant,
    timing: &StepTiming,
) -> Result<RearrangementPlan> {
    if occupancy.filled.len() != geometry.n_sites() {
        return Err(Error::domain("occupancy does not match geometry"));
    }
    let grid = QuadGrid::new(quadrant);
    let dur = timing.step_duration_us();
    let dist = |a: usize, b: usize| {
        let (sa, sb) = (geometry.sites()[a], geometry.sites()[b]);
        (sa.x - sb.x).hypot(sa.y - sb.y)
    };
    let mut occ: HashMap<(usize, usize), bool> = quadrant
        .members
        .iter()
        .map(|&(i, r, c)| ((r, c), occupancy.filled[i]))
        .collect();
    let mut steps: Vec<MoveStep> = Vec::new();

    let mut rows_sorted: Vec<usize> = grid.row_cols.keys().copied().collect();
    rows_sorted.sort_unstable();
    let mut done: HashSet<usize> = HashSet::new();

    // re-zip row r so its occupied columns become exactly `final_cols`
    // (both sorted, same length); pairing in order keeps moves non-crossing.
    // The whole row is picked up — a tone sweeping past a parked atom would
    // cross it — so atoms that keep their column still appear as moves.
    let emit_sort = |occ: &mut HashMap<(usize, usize), bool>,
                         steps: &mut Vec<MoveStep>,
                         r: usize,
                         atoms: &[usize],
                         final_cols: &[usize]| {
        debug_assert_eq!(final_cols.len(), atoms.len());
        debug_assert!(final_cols.windows(2).all(|w| w[0] < w[1]), "duplicate column");
        let mut moves = Vec::new();
        let mut longest = 0.0f64;
        let mut any_moved = false;
        for (&a, &f) in atoms.iter().zip(final_cols) {
            let (ia, ib) = (grid.by_rc[&(r, a)], grid.by_rc[&(r, f)]);
            longest = longest.max(dist(ia, ib));
            moves.push((ia, ib));
            any_moved |= a != f;
        }
        for &a in atoms {
            occ.insert((r, a), false);
        }
        for &f in final_cols {
            occ.insert((r, f), true);
        }
        if any_moved {
            steps.push(MoveStep {
                kind: StepKind::RowSort { row: r },
                moves,
                longest_um: longest,
                duration_us: dur,
            });
        }
    };

    for &t in grid.target_rows.iter().rev() {
        let tcols = &grid.target_cols_by_row[&t];
        // compact the row's own atoms onto its target columns
        let atoms: Vec<usize> =
            grid.row_cols[&t].iter().copied().filter(|&c| occ[&(t, c)]).collect();
        let tset: HashSet<usize> = tcols.iter().copied().collect();
        let final_cols: Vec<usize> = if atoms.iter().all(|c| tset.contains(c)) {
            atoms.clone() // nothing to bring in
        } else if atoms.len() <= tcols.len() {
            // compact onto one end of the target block so the gaps form a
            // contiguous run; alternating the end per row balances which
            // donor rows can reach the gaps
            if t % 2 == 0 {
                tcols[tcols.len() - atoms.len()..].to_vec()
            } else {
                tcols[..atoms.len()].to_vec()
            }
        } else {
            // more atoms than target cells: servers cover every target cell,
            // the rest settle on nearby non-target columns
            let flags = serving_flags(&atoms, tcols);
            let rest: Vec<usize> =
                atoms.iter().zip(&flags).filter(|&(_, &f)| !f).map(|(&c, _)| c).collect();
            let open: Vec<usize> = grid.row_cols[&t]
                .iter()
                .copied()
                .filter(|c| !grid.tcells.contains(&(t, *c)))
                .collect();
            let mut v = tcols.clone();
            v.extend(choose_dest_subset(&rest, &open));
            v.sort_unstable();
            v
        };
        emit_sort(&mut occ, &mut steps, t, &atoms, &final_cols);

        // import the remaining gaps from rows that are not yet filled
        loop {
            let missing: Vec<usize> =
                tcols.iter().copied().filter(|&c| !occ[&(t, c)]).collect();
            if missing.is_empty() {
                break;
            }
            let reachable = |r: usize| -> Vec<usize> {
                missing.iter().copied().filter(|&c| grid.by_rc.contains_key(&(r, c))).collect()
            };
            let row_atoms = |occ: &HashMap<(usize, usize), bool>, r: usize| -> Vec<usize> {
                grid.row_cols[&r].iter().copied().filter(|&c| occ[&(r, c)]).collect()
            };
            // donor delivering the biggest batch; ties go to the farthest
            // row, so outlying supply is consumed first and rows near the
            // frontier stay intact for their own turn
            let src = rows_sorted
                .iter()
                .copied()
                .filter(|&r| r != t && !done.contains(&r))
                .filter(|&r| !row_atoms(&occ, r).is_empty() && !reachable(r).is_empty())
                .min_by_key(|&r| {
                    let load = row_atoms(&occ, r).len().min(reachable(r).len());
                    // a donor whose atoms already cover every missing column
                    // it can reach shifts straight down without a sort
                    let aligned = missing
                        .iter()
                        .filter(|&&c| *occ.get(&(r, c)).unwrap_or(&false))
                        .count();
                    let sort_free = aligned >= reachable(r).len();
                    let d = (r as i64 - t as i64).abs();
                    // weights favor donors that are far away (long, rare
                    // shifts beat short, frequent ones), pre-aligned (their
                    // sort shrinks or disappears), and well stocked (one
                    // pickup serves the whole gap run)
                    let score = d + 20 * aligned as i64 + 2 * row_atoms(&occ, r).len() as i64;
                    (
                        std::cmp::Reverse(load),
                        std::cmp::Reverse(sort_free),
                        std::cmp::Reverse(score),
                        r,
                    )
                });
            let Some(s) = src else {
                // rescue: atoms may be stranded in rows too short to reach the
                // missing columns; shift them (columns preserved) into the
                // nearest row that can, then retry
                let mut best: Option<(i64, usize, usize, Vec<usize>)> = None;
                for &r in &rows_sorted {
                    if r == t || done.contains(&r) || row_atoms(&occ, r).is_empty() {
                        continue;
                    }
                    for &d in &rows_sorted {
                        if d == r || d == t || done.contains(&d) || reachable(d).is_empty() {
                            continue;
                        }
                        let cols: Vec<usize> = row_atoms(&occ, r)
                            .into_iter()
                            .filter(|&c| grid.by_rc.contains_key(&(d, c)) && !occ[&(d, c)])
                            .collect();
                        if cols.is_empty() {
                            continue;
                        }
                        let cost = (r as i64 - d as i64).abs();
                        if best.as_ref().map_or(true, |b| cost < b.0) {
                            best = Some((cost, r, d, cols));
                        }
                    }
                }
                let Some((_, r, d, cols)) = best else { break };
                let mut moves = Vec::new();
                let mut longest = 0.0f64;
                for &c in &cols {
                    let (ia, ib) = (grid.by_rc[&(r, c)], grid.by_rc[&(d, c)]);
                    longest = longest.max(dist(ia, ib));
                    moves.push((ia, ib));
                    occ.insert((r, c), false);
                    occ.insert((d, c), true);
                }
                steps.push(MoveStep {
                    kind: StepKind::ColumnCompress { src_row: r, dst_row: d },
                    moves,
                    longest_um: longest,
                    duration_us: dur,
                });
                continue;
            };
            let avail = row_atoms(&occ, s);
            let open = reachable(s);
            let chosen: Vec<usize> = if avail.len() >= open.len() {
                open
            } else {
                choose_dest_subset(&avail, &open)
            };
            // sort the donor row: the batch lines up over the missing
            // columns, the leftovers settle on the closest free columns
            let flags = serving_flags(&avail, &chosen);
            let rest: Vec<usize> =
                avail.iter().zip(&flags).filter(|&(_, &f)| !f).map(|(&c, _)| c).collect();
            let chosen_set: HashSet<usize> = chosen.iter().copied().collect();
            let open_cols: Vec<usize> = grid.row_cols[&s]
                .iter()
                .copied()
                .filter(|c| !chosen_set.contains(c))
                .collect();
            let mut final_cols = chosen.clone();
            final_cols.extend(choose_dest_subset(&rest, &open_cols));
            final_cols.sort_unstable();
            emit_sort(&mut occ, &mut steps, s, &avail, &final_cols);
            // vertical shift of the batch into the target row
            let mut shift_moves = Vec::new();
            let mut shift_longest = 0.0f64;
            for &c in &chosen {
                let (ia, ib) = (grid.by_rc[&(s, c)], grid.by_rc[&(t, c)]);
                shift_longest = shift_longest.max(dist(ia, ib));
                shift_moves.push((ia, ib));
                occ.insert((s, c), false);
                occ.insert((t, c), true);
            }
            steps.push(MoveStep {
                kind: StepKind::ColumnCompress { src_row: s, dst_row: t },
                moves: shift_moves,
                longest_um: shift_longest,
                duration_us: dur,
            });
        }
        done.insert(t);
    }

    let deficit = grid.tcells.iter().filter(|rc| !occ[*rc]).count();
    Ok(RearrangementPlan { steps, deficit, n_targets: quadrant.targets.len() })
}

/// Replay a plan with simultaneous-step semantics, checking soundness:
/// sources occupied and distinct, destinations distinct and free after all
/// sources lift off.
pub fn replay(plan: &RearrangementPlan, occupancy: &Occupancy) -> Result<Occupancy> {
    let mut occ = occupancy.clone();
    for (si, step) in plan.steps.iter().enumerate() {
        let mut seen_src = HashSet::new();
        let mut seen_dst = HashSet::new();
        for &(a, b) in &step.moves {
            if !occ.filled[a] {
                return Err(Error::domain(format!("step {si}: source {a} empty")));
            }
            if !seen_src.insert(a) || !seen_dst.insert(b) {
                return Err(Error::domain(format!("step {si}: duplicated endpoint")));
            }
        }
        for &(a, _) in &step.moves {
            occ.filled[a] = false;
        }
        for &(_, b) in &step.moves {
            if occ.filled[b] {
                return Err(Error::domain(format!("step {si}: destination {b} occupied")));
            }
            occ.filled[b] = true;
        }
    }
    Ok(occ)
}

/// Loss model for execution simulation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LossModel {
    /// Vacuum lifetime, minutes (`f64::INFINITY` disables).
    pub vacuum_tau_min: f64,
    /// Survival of one pick-up or drop-off.
    pub transfer_survival: f64,
    /// Survival of the move itself.
    pub move_survival: f64,
}

impl LossModel {
    pub fn lossless() -> Self {
        LossModel { vacuum_tau_min: f64::INFINITY, transfer_survival: 1.0, move_survival: 1.0 }
    }
}

/// Probability that none of `n_atoms` is lost to vacuum within `t_s`
/// seconds: exp(−n·t/τ).
pub fn vacuum_no_loss_prob(n_atoms: usize, t_s: f64, tau_min: f64) -> f64 {
    (-(n_atoms as f64) * t_s / (tau_min * 60.0)).exp()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    /// Filled-target counts per trial.
    pub filled: Vec<usize>,
    pub defect_free_prob: f64,
    pub mean_filled: f64,
}

/// Monte Carlo execution of a plan under the loss model.
pub fn simulate_execution(
    plan: &RearrangementPlan,
    occupancy: &Occupancy,
    targets: &[usize],
    loss: &LossModel,
    n_trials: usize,
    rng: &mut SeededRng,
) -> Result<ExecutionOutcome> {
    if n_trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    if !(0.0..=1.0).contains(&loss.transfer_survival)
        || !(0.0..=1.0).contains(&loss.move_survival)
        || loss.vacuum_tau_min <= 0.0
    {
        return Err(Error::domain("invalid loss model"));
    }
    let p_move = loss.transfer_survival * loss.transfer_survival * loss.move_survival;
    let mut filled = Vec::with_capacity(n_trials);
    let mut perfect = 0usize;
    for _ in 0..n_trials {
        let mut occ = occupancy.filled.clone();
        for step in &plan.steps {
            if loss.vacuum_tau_min.is_finite() {
                let p_keep = (-step.duration_us * 1e-6 / (loss.vacuum_tau_min * 60.0)).exp();
                for v in occ.iter_mut() {
                    if *v && rng.gen::<f64>() >= p_keep {
                        *v = false;
                    }
                }
            }
            // all sources lift off before anything lands
            let picked: Vec<bool> = step.moves.iter().map(|&(a, _)| occ[a]).collect();
            for &(a, _) in &step.moves {
                occ[a] = false;
            }
            for (&(_, b), &p) in step.moves.iter().zip(&picked) {
                if p && rng.gen::<f64>() < p_move {
                    occ[b] = true;
                }
            }
        }
        let n = targets.iter().filter(|&&t| occ[t]).count();
        if n == targets.len() {
            perfect += 1;
        }
        filled.push(n);
    }
    let mean = filled.iter().sum::<usize>() as f64 / n_trials as f64;
    Ok(ExecutionOutcome {
        filled,
        defect_free_prob: perfect as f64 / n_trials as f64,
        mean_filled: mean,
    })
}

/// Exhaustive BFS oracle over the same step families the planner uses
/// (within-row rearrangement, common-displacement row-to-row shift):
/// minimal number of steps to cover the target cells. Grids at most 36
/// cells.
pub fn small_instance_oracle(
    rows: usize,
    cols: usize,
    occupied: &[(usize, usize)],
    target: &[(usize, usize)],
) -> Result<usize> {
    if rows * cols > 36 {
        return Err(Error::TooLarge(format!("{rows}x{cols} exceeds the 36-cell oracle limit")));
    }
    let bit = |r: usize, c: usize| 1u64 << (r * cols + c);
    let mut start = 0u64;
    for &(r, c) in occupied {
        start |= bit(r, c);
    }
    let mut goal = 0u64;
    for &(r, c) in target {
        goal |= bit(r, c);
    }
    if (start.count_ones()) < goal.count_ones() {
        return Err(Error::Unreachable("fewer atoms than targets".into()));
    }
    let done = |s: u64| s & goal == goal;
    if done(start) {
        return Ok(0);
    }
    let row_mask = |s: u64, r: usize| -> u32 {
        (0..cols).filter(|&c| s & bit(r, c) != 0).fold(0u32, |m, c| m | (1 << c))
    };
    // all placements of k atoms into `width` columns
    let placements = |width: usize, k: usize| -> Vec<u32> {
        (0u32..(1 << width)).filter(|m| m.count_ones() as usize == k).collect()
    };
    let apply_row = |s: u64, r: usize, old: u32, new: u32| -> u64 {
        let mut ns = s;
        for c in 0..cols {
            if old & (1 << c) != 0 {
                ns &= !bit(r, c);
            }
        }
        for c in 0..cols {
            if new & (1 << c) != 0 {
                ns |= bit(r, c);
            }
        }
        ns
    };
    let mut frontier = vec![start];
    let mut visited: HashSet<u64> = HashSet::from([start]);
    for depth in 1..=8usize {
        let mut next = Vec::new();
        for &s in &frontier {
            // within-row rearrangements
            for r in 0..rows {
                let line = row_mask(s, r);
                let k = line.count_ones() as usize;
                if k == 0 {
                    continue;
                }
                for repl in placements(cols, k) {
                    if repl == line {
                        continue;
                    }
                    let ns = apply_row(s, r, line, repl);
                    if done(ns) {
                        return Ok(depth);
                    }
                    if visited.insert(ns) {
                        next.push(ns);
                    }
                }
            }
            // row-to-row shifts of any picked subset, columns preserved
            for sr in 0..rows {
                let line = row_mask(s, sr);
                if line == 0 {
                    continue;
                }
                for tr in 0..rows {
                    if tr == sr {
                        continue;
                    }
                    let dest_occ = row_mask(s, tr);
                    // iterate nonempty subsets of the picked row
                    let mut sub = line;
                    while sub != 0 {
                        if sub & dest_occ == 0 {
                            let mut ns = s;
                            for c in 0..cols {
                                if sub & (1 << c) != 0 {
                                    ns &= !bit(sr, c);
                                    ns |= bit(tr, c);
                                }
                            }
                            if done(ns) {
                                return Ok(depth);
                            }
                            if visited.insert(ns) {
                                next.push(ns);
                            }
                        }
                        sub = (sub - 1) & line;
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Err(Error::Unreachable("no solution within 8 steps".into()))
}
