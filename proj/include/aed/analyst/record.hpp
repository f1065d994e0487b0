#pragma once

#include <memory>
#include <vector>

#include "aed/numerics/linalg.hpp"

namespace aed {

/// Fixed-layout encoding of one experiment. `flat` is the whole record for
/// pooled encoders and the target context c^target for relational ones;
/// `pairs` holds one row per consecutive fixation pair (c_t, c_{t+1}).
struct EncodedRecord {
  Vector flat;
  Matrix pairs;
};

using RecordPtr = std::shared_ptr<const EncodedRecord>;

/// What the analyst sees: the experiments run so far. Records are shared
/// between the observations of one episode, so copies are cheap and a batch
/// can encode each distinct record once.
struct AnalystObservation {
  std::vector<RecordPtr> records;
};

struct RecordLayout {
  std::size_t flat_dim = 0;
  std::size_t pair_dim = 0;  // 0 for pooled layouts
};

}  // namespace aed
