//! Data-redistribution planning between an old and a new process group.
//!
//! Two predefined layouts are supported: a 1D uniform (default) chunking
//! and a 1D block-cyclic distribution. Group pairs are restricted to
//! multiples/divisors of each other. Plans are complete transfer lists,
//! including same-rank transfers: after a resize every process is freshly
//! spawned, so even data that stays on a surviving node is nominally
//! handed over. The cost model prices those same-rank transfers at zero.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RedistError {
    #[error("global index {index} is out of range for a layout of {total} elements")]
    OutOfBounds { index: u64, total: u64 },
    #[error("{old} -> {new} processes: groups must be integer multiples or divisors")]
    IncompatibleGroups { old: u32, new: u32 },
    #[error("{0}")]
    IndivisibleData(String),
    #[error("global array has {got} elements but the plan covers {expected}")]
    ShapeError { expected: u64, got: u64 },
    #[error("bandwidth must be > 0")]
    NonPositiveBandwidth,
}

/// A 1D data decomposition over a process group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Uniform contiguous chunks; `total_elements` must divide evenly.
    Default1D { total_elements: u64, procs: u32 },
    /// Blocks dealt round-robin to ranks.
    BlockCyclic {
        num_blocks: u64,
        block_size: u64,
        procs: u32,
    },
}

impl Layout {
    pub fn default_1d(total_elements: u64, procs: u32) -> Result<Self, RedistError> {
        if procs == 0 {
            return Err(RedistError::IndivisibleData(
                "a layout needs at least one process".into(),
            ));
        }
        if total_elements % u64::from(procs) != 0 {
            return Err(RedistError::IndivisibleData(format!(
                "{total_elements} elements cannot be split uniformly over {procs} processes"
            )));
        }
        Ok(Layout::Default1D {
            total_elements,
            procs,
        })
    }

    pub fn block_cyclic(num_blocks: u64, block_size: u64, procs: u32) -> Result<Self, RedistError> {
        if procs == 0 {
            return Err(RedistError::IndivisibleData(
                "a layout needs at least one process".into(),
            ));
        }
        if block_size < 1 {
            return Err(RedistError::IndivisibleData("block size must be >= 1".into()));
        }
        if num_blocks < u64::from(procs) {
            return Err(RedistError::IndivisibleData(format!(
                "{num_blocks} blocks cannot cover {procs} processes"
            )));
        }
        Ok(Layout::BlockCyclic {
            num_blocks,
            block_size,
            procs,
        })
    }

    pub fn total_elements(&self) -> u64 {
        match *self {
            Layout::Default1D { total_elements, .. } => total_elements,
            Layout::BlockCyclic {
                num_blocks,
                block_size,
                ..
            } => num_blocks * block_size,
        }
    }

    pub fn procs(&self) -> u32 {
        match *self {
            Layout::Default1D { procs, .. } | Layout::BlockCyclic { procs, .. } => procs,
        }
    }
}

/// Brute-force ownership oracle: which rank owns a global element index.
pub fn owner_of(layout: &Layout, global_index: u64) -> Result<u32, RedistError> {
    let total = layout.total_elements();
    if global_index >= total {
        return Err(RedistError::OutOfBounds {
            index: global_index,
            total,
        });
    }
    Ok(match *layout {
        Layout::Default1D {
            total_elements,
            procs,
        } => {
            let chunk = total_elements / u64::from(procs);
            (global_index / chunk) as u32
        }
        Layout::BlockCyclic {
            block_size, procs, ..
        } => ((global_index / block_size) % u64::from(procs)) as u32,
    })
}

/// One contiguous global element range moving from a source rank in the
/// old group to a destination rank in the new group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transfer {
    pub src_rank: u32,
    pub dst_rank: u32,
    pub global_start: u64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanDirection {
    Expand,
    Shrink,
    None,
}

/// The complete transfer set of one resize.
#[derive(Debug, Clone, PartialEq)]
pub struct RedistributionPlan {
    pub direction: PlanDirection,
    pub old_procs: u32,
    pub new_procs: u32,
    pub transfers: Vec<Transfer>,
}

impl RedistributionPlan {
    pub fn total_elements(&self) -> u64 {
        self.transfers.iter().map(|t| t.count).sum()
    }

    /// Line-oriented text form, one `src dst start count` line per transfer.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.transfers {
            writeln!(out, "{} {} {} {}", t.src_rank, t.dst_rank, t.global_start, t.count).unwrap();
        }
        out
    }
}

fn group_factor(old_procs: u32, new_procs: u32) -> Result<(PlanDirection, u32), RedistError> {
    if old_procs == 0 || new_procs == 0 {
        return Err(RedistError::IncompatibleGroups {
            old: old_procs,
            new: new_procs,
        });
    }
    if new_procs == old_procs {
        Ok((PlanDirection::None, 1))
    } else if new_procs % old_procs == 0 {
        Ok((PlanDirection::Expand, new_procs / old_procs))
    } else if old_procs % new_procs == 0 {
        Ok((PlanDirection::Shrink, old_procs / new_procs))
    } else {
        Err(RedistError::IncompatibleGroups {
            old: old_procs,
            new: new_procs,
        })
    }
}

/// Plans a uniform 1D redistribution.
///
/// Expanding by `factor`, parent `r` sends its i-th sub-chunk to child
/// `r * factor + i`. Shrinking, child `c` gathers from parents
/// `c * factor + i` in ascending parent order, which concatenates the
/// parents' chunks back into one contiguous range. Equal group sizes give
/// a pure one-to-one migration plan.
pub fn plan_default(
    total_elements: u64,
    old_procs: u32,
    new_procs: u32,
) -> Result<RedistributionPlan, RedistError> {
    let (direction, factor) = group_factor(old_procs, new_procs)?;
    let larger = u64::from(old_procs.max(new_procs));
    if total_elements % larger != 0 {
        return Err(RedistError::IndivisibleData(format!(
            "{total_elements} elements cannot be split uniformly over {larger} processes"
        )));
    }
    let mut transfers = Vec::new();
    if total_elements == 0 {
        return Ok(RedistributionPlan {
            direction,
            old_procs,
            new_procs,
            transfers,
        });
    }
    let factor = u64::from(factor);
    match direction {
        PlanDirection::Expand => {
            let new_chunk = total_elements / u64::from(new_procs);
            for parent in 0..u64::from(old_procs) {
                let parent_start = parent * factor * new_chunk;
                for i in 0..factor {
                    transfers.push(Transfer {
                        src_rank: parent as u32,
                        dst_rank: (parent * factor + i) as u32,
                        global_start: parent_start + i * new_chunk,
                        count: new_chunk,
                    });
                }
            }
        }
        PlanDirection::Shrink => {
            let old_chunk = total_elements / u64::from(old_procs);
            for child in 0..u64::from(new_procs) {
                for i in 0..factor {
                    let parent = child * factor + i;
                    transfers.push(Transfer {
                        src_rank: parent as u32,
                        dst_rank: child as u32,
                        global_start: parent * old_chunk,
                        count: old_chunk,
                    });
                }
            }
        }
        PlanDirection::None => {
            let chunk = total_elements / u64::from(old_procs);
            for rank in 0..u64::from(old_procs) {
                transfers.push(Transfer {
                    src_rank: rank as u32,
                    dst_rank: rank as u32,
                    global_start: rank * chunk,
                    count: chunk,
                });
            }
        }
    }
    Ok(RedistributionPlan {
        direction,
        old_procs,
        new_procs,
        transfers,
    })
}

/// Plans a block-cyclic redistribution as an owner-map diff: every block
/// moves from its round-robin owner in the old group to its owner in the
/// new group. Adjacent blocks with the same (src, dst) pair coalesce into
/// a single transfer.
pub fn plan_blockcyclic(
    num_blocks: u64,
    block_size: u64,
    old_procs: u32,
    new_procs: u32,
) -> Result<RedistributionPlan, RedistError> {
    let (direction, _) = group_factor(old_procs, new_procs)?;
    let larger = old_procs.max(new_procs);
    if block_size < 1 {
        return Err(RedistError::IndivisibleData("block size must be >= 1".into()));
    }
    if num_blocks < u64::from(larger) {
        return Err(RedistError::IndivisibleData(format!(
            "{num_blocks} blocks cannot cover {larger} processes"
        )));
    }
    let mut transfers: Vec<Transfer> = Vec::new();
    for block in 0..num_blocks {
        let src = (block % u64::from(old_procs)) as u32;
        let dst = (block % u64::from(new_procs)) as u32;
        let start = block * block_size;
        match transfers.last_mut() {
            Some(last)
                if last.src_rank == src
                    && last.dst_rank == dst
                    && last.global_start + last.count == start =>
            {
                last.count += block_size;
            }
            _ => transfers.push(Transfer {
                src_rank: src,
                dst_rank: dst,
                global_start: start,
                count: block_size,
            }),
        }
    }
    Ok(RedistributionPlan {
        direction,
        old_procs,
        new_procs,
        transfers,
    })
}

/// Executes a plan on a global array, returning each new rank's local
/// array in destination-layout order. This is the verification stand-in
/// for the point-to-point sends of a real resize.
pub fn apply_plan<T: Clone>(
    global: &[T],
    plan: &RedistributionPlan,
) -> Result<Vec<Vec<T>>, RedistError> {
    let expected = plan.total_elements();
    if global.len() as u64 != expected {
        return Err(RedistError::ShapeError {
            expected,
            got: global.len() as u64,
        });
    }
    let mut per_rank: Vec<Vec<&Transfer>> = vec![Vec::new(); plan.new_procs as usize];
    for t in &plan.transfers {
        per_rank[t.dst_rank as usize].push(t);
    }
    let mut locals = Vec::with_capacity(plan.new_procs as usize);
    for mut transfers in per_rank {
        transfers.sort_by_key(|t| t.global_start);
        let mut local = Vec::new();
        for t in transfers {
            let start = t.global_start as usize;
            local.extend_from_slice(&global[start..start + t.count as usize]);
        }
        locals.push(local);
    }
    Ok(locals)
}

/// Prices a plan: per-transfer latency plus transferred bytes over
/// bandwidth. Same-rank transfers are free; at simulation granularity a
/// surviving node's memory is local.
pub fn transfer_cost(
    plan: &RedistributionPlan,
    bytes_per_element: u64,
    bandwidth_bytes_per_s: f64,
    latency_s_per_transfer: f64,
) -> Result<f64, RedistError> {
    if !(bandwidth_bytes_per_s > 0.0) {
        return Err(RedistError::NonPositiveBandwidth);
    }
    let mut moved_bytes = 0u64;
    let mut moved_transfers = 0u64;
    for t in &plan.transfers {
        if t.src_rank != t.dst_rank {
            moved_bytes += t.count * bytes_per_element;
            moved_transfers += 1;
        }
    }
    Ok(latency_s_per_transfer * moved_transfers as f64 + moved_bytes as f64 / bandwidth_bytes_per_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn owner_default_1d() {
        let l = Layout::default_1d(100, 5).unwrap();
        assert_eq!(owner_of(&l, 0).unwrap(), 0);
        assert_eq!(owner_of(&l, 99).unwrap(), 4);
        assert!(matches!(
            owner_of(&l, 100),
            Err(RedistError::OutOfBounds { index: 100, total: 100 })
        ));
    }

    #[test]
    fn owner_block_cyclic() {
        let l = Layout::block_cyclic(8, 2, 4).unwrap();
        // index 5 sits in block 2, which round-robins to rank 2
        assert_eq!(owner_of(&l, 5).unwrap(), 2);
    }

    #[test]
    fn expand_five_to_ten() {
        let plan = plan_default(10, 5, 10).unwrap();
        assert_eq!(plan.direction, PlanDirection::Expand);
        assert_eq!(plan.transfers[0], Transfer { src_rank: 0, dst_rank: 0, global_start: 0, count: 1 });
        assert_eq!(plan.transfers[1], Transfer { src_rank: 0, dst_rank: 1, global_start: 1, count: 1 });
        for parent in 0..5u64 {
            for i in 0..2u64 {
                let t = plan.transfers[(parent * 2 + i) as usize];
                assert_eq!(u64::from(t.src_rank), parent);
                assert_eq!(u64::from(t.dst_rank), parent * 2 + i);
                assert_eq!(t.global_start, parent * 2 + i);
            }
        }
    }

    #[test]
    fn migration_is_one_to_one() {
        let plan = plan_default(8, 4, 4).unwrap();
        assert_eq!(plan.direction, PlanDirection::None);
        assert_eq!(plan.transfers.len(), 4);
        for (r, t) in plan.transfers.iter().enumerate() {
            assert_eq!(t.src_rank, r as u32);
            assert_eq!(t.dst_rank, r as u32);
            assert_eq!(t.global_start, 2 * r as u64);
            assert_eq!(t.count, 2);
        }
    }

    #[test]
    fn shrink_concatenates_parents_in_order() {
        let plan = plan_default(8, 4, 2).unwrap();
        assert_eq!(plan.direction, PlanDirection::Shrink);
        let expect = [
            Transfer { src_rank: 0, dst_rank: 0, global_start: 0, count: 2 },
            Transfer { src_rank: 1, dst_rank: 0, global_start: 2, count: 2 },
            Transfer { src_rank: 2, dst_rank: 1, global_start: 4, count: 2 },
            Transfer { src_rank: 3, dst_rank: 1, global_start: 6, count: 2 },
        ];
        assert_eq!(plan.transfers, expect);
    }

    #[test]
    fn incompatible_groups_are_rejected() {
        assert!(matches!(
            plan_default(12, 4, 6),
            Err(RedistError::IncompatibleGroups { old: 4, new: 6 })
        ));
        assert!(matches!(
            plan_default(10, 4, 8),
            Err(RedistError::IndivisibleData(_))
        ));
    }

    #[test]
    fn blockcyclic_expand_follows_round_robin() {
        let plan = plan_blockcyclic(8, 2, 2, 4).unwrap();
        for (b, t) in plan.transfers.iter().enumerate() {
            let b = b as u64;
            assert_eq!(u64::from(t.src_rank), b % 2);
            assert_eq!(u64::from(t.dst_rank), b % 4);
            assert_eq!(t.global_start, 2 * b);
            assert_eq!(t.count, 2);
        }
        // block 2 specifically: old rank 0 -> new rank 2, elements [4, 6)
        assert_eq!(plan.transfers[2], Transfer { src_rank: 0, dst_rank: 2, global_start: 4, count: 2 });
    }

    #[test]
    fn blockcyclic_same_groups_is_identity_map() {
        let plan = plan_blockcyclic(4, 1, 2, 2).unwrap();
        assert_eq!(plan.direction, PlanDirection::None);
        assert_eq!(plan.transfers.len(), 4);
        for t in &plan.transfers {
            assert_eq!(t.src_rank, t.dst_rank);
        }
    }

    #[test]
    fn blockcyclic_three_to_six() {
        let plan = plan_blockcyclic(6, 2, 3, 6).unwrap();
        for (b, t) in plan.transfers.iter().enumerate() {
            let b = b as u64;
            assert_eq!(u64::from(t.src_rank), b % 3);
            assert_eq!(u64::from(t.dst_rank), b % 6);
        }
    }

    #[test]
    fn blockcyclic_coalesces_adjacent_blocks() {
        // single process on both sides: all blocks share (0, 0) and merge
        let plan = plan_blockcyclic(8, 2, 1, 1).unwrap();
        assert_eq!(plan.transfers.len(), 1);
        assert_eq!(plan.transfers[0].count, 16);
    }

    #[test]
    fn apply_identity_migration() {
        let data: Vec<u32> = (0..8).collect();
        let plan = plan_default(8, 4, 4).unwrap();
        let locals = apply_plan(&data, &plan).unwrap();
        assert_eq!(locals, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]);
    }

    #[test]
    fn apply_expand_places_each_element() {
        let data: Vec<u32> = (0..10).collect();
        let plan = plan_default(10, 5, 10).unwrap();
        let locals = apply_plan(&data, &plan).unwrap();
        for (rank, local) in locals.iter().enumerate() {
            assert_eq!(local, &vec![rank as u32]);
        }
    }

    #[test]
    fn apply_round_trip_restores_decomposition() {
        let data: Vec<u32> = (0..24).collect();
        let expand = plan_default(24, 4, 8).unwrap();
        let shrink = plan_default(24, 8, 4).unwrap();
        let expanded = apply_plan(&data, &expand).unwrap();
        let regathered: Vec<u32> = expanded.into_iter().flatten().collect();
        assert_eq!(regathered, data);
        let back = apply_plan(&regathered, &shrink).unwrap();
        let original = apply_plan(&data, &plan_default(24, 4, 4).unwrap()).unwrap();
        assert_eq!(back, original);
    }

    #[test]
    fn apply_rejects_shape_mismatch() {
        let plan = plan_default(8, 2, 4).unwrap();
        assert!(matches!(
            apply_plan(&[0u8; 7], &plan),
            Err(RedistError::ShapeError { expected: 8, got: 7 })
        ));
    }

    #[test]
    fn transfer_cost_examples() {
        let empty = RedistributionPlan {
            direction: PlanDirection::None,
            old_procs: 1,
            new_procs: 1,
            transfers: vec![],
        };
        assert_eq!(transfer_cost(&empty, 8, 1e9, 0.1).unwrap(), 0.0);

        let one = RedistributionPlan {
            direction: PlanDirection::Expand,
            old_procs: 1,
            new_procs: 2,
            transfers: vec![Transfer { src_rank: 0, dst_rank: 1, global_start: 0, count: 1_000_000_000 }],
        };
        let cost = transfer_cost(&one, 1, 12.5e9, 0.0).unwrap();
        assert!((cost - 0.08).abs() < 1e-12);

        let migration = plan_default(8, 4, 4).unwrap();
        assert_eq!(transfer_cost(&migration, 8, 12.5e9, 0.5).unwrap(), 0.0);

        assert!(matches!(
            transfer_cost(&empty, 1, 0.0, 0.0),
            Err(RedistError::NonPositiveBandwidth)
        ));
    }

    #[test]
    fn plan_text_form_is_line_oriented() {
        let plan = plan_default(4, 2, 4).unwrap();
        assert_eq!(plan.to_text(), "0 0 0 1\n0 1 1 1\n1 2 2 1\n1 3 3 1\n");
    }
}
