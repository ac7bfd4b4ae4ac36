#pragma once

#include "mculcb/integrand.hpp"
#include "mculcb/partition.hpp"
#include "mculcb/rng.hpp"

namespace mculcb {

/// Which explored child BSS-A descends into.
enum class BssaDirection {
  larger_ratio,   // child with the larger r/T (under-sampled w.r.t. its share)
  smaller_ratio,  // literal argmin of r/T
};

/// Position of the next BSS sample in `node`. Descends on the tree's counts:
/// fewer-sampled child first, a fair coin on ties, and a uniform draw in
/// the first region whose children are both empty (or at the count floor).
/// Consumes one rng draw per coin flip and one for the position.
double bss_position(const NodeId& node, const PartitionTree& tree, Rng& rng);

/// One BSS sample in `node`: position, integrand value, and logging.
Sample bss_draw(const NodeId& node, PartitionTree& tree, const NoisyIntegrand& f, Rng& rng);

/// Node at which BSS-A hands over to BSS. While both children of the
/// current node are materialised (explored), move to the child chosen by
/// its r/T ratio; ties go to the lower index. Throws InvariantError if an
/// explored child has no r value or no sample.
NodeId bss_a_target(const NodeId& node, const PartitionTree& tree,
                    BssaDirection direction = BssaDirection::larger_ratio);

/// One BSS-A sample in `node`.
Sample bss_a_draw(const NodeId& node, PartitionTree& tree, const NoisyIntegrand& f, Rng& rng,
                  BssaDirection direction = BssaDirection::larger_ratio);

}  // namespace mculcb
