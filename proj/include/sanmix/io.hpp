// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sanmix/cavi.hpp"
#include "sanmix/data.hpp"
#include "sanmix/gibbs.hpp"

namespace sanmix {

/// CSV ingestion: header row, first column the group key, remaining columns
/// numeric.  Groups are ordered by first appearance and the dimension is
/// inferred.  Parse failures carry the 1-based row and column location.
GroupedDataset load_grouped_csv(const std::string& path);
void save_grouped_csv(const GroupedDataset& data, const std::string& path);

void save_truth_json(const GroundTruth& truth, const std::string& path);
GroundTruth load_truth_json(const std::string& path);

struct ColumnBounds {
  double lo;
  double hi;
};

/// Min-max scaling to (0,1) followed by the standard normal quantile, per
/// column.  Bounds default to the observed min/max widened by 1e-6; scaled
/// values are clamped into [1e-6, 1 - 1e-6].
GroupedDataset probit_preprocess(
    const GroupedDataset& data,
    const std::optional<std::vector<ColumnBounds>>& bounds = std::nullopt);

/// Keep groups whose size lies in [min_size, max_size].
GroupedDataset filter_groups(const GroupedDataset& data, long min_size,
                             long max_size);

/// Versioned JSON round trip for a fitted variational state.
nlohmann::json state_to_json(const VariationalState& state,
                             const SanConfig& config,
                             const std::vector<std::string>& group_keys);
struct LoadedState {
  VariationalState state;
  SanConfig config;
  std::vector<std::string> group_keys;
};
LoadedState state_from_json(const nlohmann::json& doc);
void save_state(const VariationalState& state, const SanConfig& config,
                const std::vector<std::string>& group_keys,
                const std::string& path);
LoadedState load_state(const std::string& path);

/// Columnar binary chain file (little-endian doubles, one column per tracked
/// scalar) plus a JSON metadata sidecar; written as <prefix>.bin and
/// <prefix>.meta.json.
void save_chain(const ChainStore& chain, bool fisan,
                const std::vector<std::string>& group_keys,
                const std::string& prefix);
struct LoadedChain {
  ChainStore chain;
  bool fisan = false;
  std::vector<std::string> group_keys;
};
LoadedChain load_chain(const std::string& prefix);

/// Entry point behind the command-line binary; exposed so tests can drive the
/// full surface in-process.  Returns the process exit code (0 success, 1
/// runtime failure, 2 usage error).
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace sanmix
