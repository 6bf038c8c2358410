#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedprint/mlp.hpp"

namespace fedprint {

// A client's weights after its local round.
struct ClientUpdate {
  int org_id = 0;
  ModelWeights weights;
  std::int64_t sample_count = 1;
};

enum class AggregatorKind { FedAvg, CoordMedian, Krum, Zeno };

std::string_view to_string(AggregatorKind kind);
std::optional<AggregatorKind> parse_aggregator(std::string_view text);

struct AggregatorSpec {
  AggregatorKind kind = AggregatorKind::FedAvg;
  int krum_f = 1;
  double zeno_rho = 5e-4;
  int zeno_b = 1;
  // Step size the client updates were produced with. Zeno scores the update
  // u_i = w_i - w_prev directly, so this is recorded for reports only.
  double zeno_gamma = 0.001;

  void validate() const;
};

struct AggregationResult {
  ModelWeights weights;
  // Org ids whose weights entered the result (Krum: the selected org; Zeno:
  // the survivors; FedAvg/median: all).
  std::vector<int> selected_orgs;
  // Per-org score, when the rule computes one (Krum, Zeno).
  std::vector<std::pair<int, double>> scores;
};

// All rules process updates in ascending org_id order, so the output does not
// depend on the order of `updates`. Ties are resolved towards the lowest org_id.
AggregationResult fed_avg(std::span<const ClientUpdate> updates);
AggregationResult coord_median(std::span<const ClientUpdate> updates);
AggregationResult krum(std::span<const ClientUpdate> updates, int f);
AggregationResult zeno(std::span<const ClientUpdate> updates, const ModelWeights& prev_global,
                       const AggregatorSpec& spec, const Dataset& server_validation);

// Dispatches to one rule; holds Zeno's server-side validation shard.
class Aggregator {
 public:
  explicit Aggregator(AggregatorSpec spec, Dataset server_validation = {});

  AggregationResult aggregate(std::span<const ClientUpdate> updates,
                              const ModelWeights& prev_global) const;

  const AggregatorSpec& spec() const { return spec_; }

 private:
  AggregatorSpec spec_;
  Dataset server_validation_;
};

}  // namespace fedprint
