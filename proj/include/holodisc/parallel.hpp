#pragma once

namespace holodisc {

/// Number of worker threads used by data-parallel loops. Reads
/// HOLODISC_THREADS once; `force_sequential` pins it to 1.
///
/// Parallel loops in this library only split work across independent
/// output nodes; every per-node reduction runs in a fixed order, so results
/// are bit-identical for any thread count.
int thread_count();
void force_sequential(bool on);

}  // namespace holodisc
