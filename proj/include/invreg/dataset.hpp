#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace invreg {

using EnvironmentId = std::string;

// Maps CSV columns onto the dataset: one string-valued environment column,
// an optional real-valued outcome column (cells "NA" or "" mark unlabeled
// rows), and the feature columns. An empty feature_columns list means
// "every remaining column".
struct ColumnSchema {
  std::string env_column;
  std::optional<std::string> outcome_column;
  std::vector<std::string> feature_columns;
};

// The single container for labeled and unlabeled observations: an n x d
// feature matrix, an outcome per row (NaN = missing, the row is unlabeled)
// and an environment per row. The environment registry is ordered by first
// appearance, which fixes environment indices across runs.
//
// Immutable after construction; safe for concurrent reads.
class MultiEnvDataset {
 public:
  MultiEnvDataset(Eigen::MatrixXd features, Eigen::VectorXd outcomes,
                  std::vector<int> env_of_row,
                  std::vector<EnvironmentId> registry);

  // Builds the registry from per-row environment ids, ordered by first
  // appearance. An empty outcomes vector means no outcome column (all rows
  // unlabeled).
  static MultiEnvDataset from_rows(Eigen::MatrixXd features,
                                   Eigen::VectorXd outcomes,
                                   const std::vector<EnvironmentId>& env_of_row);

  Eigen::Index rows() const { return features_.rows(); }
  Eigen::Index dim() const { return features_.cols(); }
  int env_count() const { return static_cast<int>(registry_.size()); }

  const Eigen::MatrixXd& features() const { return features_; }
  // NaN entries are missing outcomes
  const Eigen::VectorXd& outcomes() const { return outcomes_; }
  bool is_labeled(Eigen::Index row) const;
  int env_index_of_row(Eigen::Index row) const { return env_of_row_[row]; }
  const std::vector<int>& env_of_row() const { return env_of_row_; }

  const std::vector<EnvironmentId>& environments() const { return registry_; }
  const EnvironmentId& environment(int idx) const { return registry_[idx]; }
  int env_index(const EnvironmentId& id) const;  // -1 when unknown

  // row indices per environment, registry order
  const std::vector<std::vector<int>>& rows_by_env() const { return rows_by_env_; }

  // environments owning at least one labeled row, registry order
  std::vector<EnvironmentId> labeled_environments() const;
  Eigen::Index labeled_count() const;

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd outcomes_;
  std::vector<int> env_of_row_;
  std::vector<EnvironmentId> registry_;
  std::vector<std::vector<int>> rows_by_env_;
};

// Read-only index-based selections over a dataset; no feature data is
// copied. The source dataset must outlive its views.
struct LabeledView {
  const MultiEnvDataset* data = nullptr;
  std::vector<int> env_indices;               // envs contributing labels
  std::vector<std::vector<int>> rows_by_env;  // labeled rows, aligned with env_indices
  Eigen::Index row_count() const;
  Eigen::Index dim() const { return data->dim(); }
};

struct UnlabeledView {
  const MultiEnvDataset* data = nullptr;
  std::vector<int> env_indices;               // all envs in scope
  std::vector<std::vector<int>> rows_by_env;  // all rows, aligned with env_indices
  Eigen::Index row_count() const;
  Eigen::Index dim() const { return data->dim(); }
};

MultiEnvDataset load_csv_dataset(const std::string& path,
                                 const ColumnSchema& schema);

void write_csv_dataset(const std::string& path, const MultiEnvDataset& dataset,
                       const ColumnSchema& schema);

// LabeledView over the labeled rows of the chosen environments (all labeled
// environments when labeled_envs is omitted); UnlabeledView over all rows of
// all environments. Passing labeled_envs simulates fewer labeled
// environments by masking labels.
std::pair<LabeledView, UnlabeledView> split_views(
    const MultiEnvDataset& dataset,
    const std::optional<std::vector<EnvironmentId>>& labeled_envs = {});

// Env-restricted views used by the evaluation protocol. env_subset holds
// registry indices; the labeled view keeps only envs with >= 1 labeled row
// when require_labels is set.
LabeledView make_labeled_view(const MultiEnvDataset& dataset,
                              const std::vector<int>& env_subset);
UnlabeledView make_unlabeled_view(const MultiEnvDataset& dataset,
                                  const std::vector<int>& env_subset);

// Returns a new dataset with features mean-centered within each environment
// and labeled outcomes mean-centered within each environment (the mean uses
// labeled rows only; unlabeled outcomes stay missing).
MultiEnvDataset center_per_environment(const MultiEnvDataset& dataset);

}  // namespace invreg
